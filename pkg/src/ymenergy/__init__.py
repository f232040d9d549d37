"""Discrete Yang-Mills action versus path-space energy on closed surfaces.

Submodules:

* :mod:`ymenergy.lie` -- U(1), SU(2), SU(3) matrix kernel
* :mod:`ymenergy.paths` -- path tuples, the endpoint relation and the energy
* :mod:`ymenergy.lattice` -- polar lattice on the 4g-gon, action, holonomy
  projection and the saturating connection
* :mod:`ymenergy.optimize` -- constrained energy minimization and experiments
* :mod:`ymenergy.cli` -- command-line runner
"""

from . import errors, lie, paths, lattice, optimize
from .lie import SU2, SU3, U1, get_group
from .paths import PathTuple, energy, energy_gradient, make_tuple
from .lattice import LatticeConnection, action, build_lattice, project_paths, saturating_connection
from .optimize import OptimizerConfig, certify_critical, minimize_energy

__version__ = "0.1.0"

__all__ = [
    "errors", "lie", "paths", "lattice", "optimize",
    "U1", "SU2", "SU3", "get_group",
    "PathTuple", "make_tuple", "energy", "energy_gradient",
    "LatticeConnection", "build_lattice", "action", "project_paths", "saturating_connection",
    "OptimizerConfig", "minimize_energy", "certify_critical",
]
