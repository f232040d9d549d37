"""JSON and CSV serialization.

Matrices are written row-major as lists of ``[re, im]`` pairs.  Floats go
through ``repr``, so every round trip is exact.

Path tuple::

    {"genus": g, "group": "su2", "N": N, "T": T, "z": matrix,
     "paths": [[matrix, ...N+1 samples], ...2g paths]}

Connection::

    {"lattice": {"g": g, "R": R, "K": K, "T": T, "cell_areas": [R floats]},
     "group": "su2",
     "radial": [[matrix, ...R links centre outwards], ...M rays],
     "angular": [[matrix, ...M links], ...R-1 inner rings, then
                 [matrix, ...2gK stored boundary arcs]]}
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import lie
from .lattice import LatticeConnection, PolarLattice
from .paths import PathTuple, make_tuple

SUMMARY_COLUMNS = (
    "experiment_id", "g", "group", "R", "K", "N", "T", "seed",
    "E", "S", "gap", "geodesic_residual", "relation_residual", "converged",
)
DECOMPOSITION_COLUMNS = ("R", "K", "S_total", "E_val", "gap", "s")
REFINE_COLUMNS = ("level", "R", "K", "N", "S", "E", "gap", "ratio")


def matrix_to_list(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 2:
        return [[float(v.real), float(v.imag)] for v in a.ravel()]
    return [matrix_to_list(x) for x in a]


def list_to_matrix(data, n: int) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-2:] != (n * n, 2):
        raise ValueError(f"expected {n * n} [re, im] pairs per matrix, got shape {arr.shape}")
    z = arr[..., 0] + 1j * arr[..., 1]
    return z.reshape(arr.shape[:-2] + (n, n))


# ---------------------------------------------------------------------------
# path tuples


def tuple_to_dict(t: PathTuple) -> dict:
    return {
        "genus": t.genus,
        "group": t.group.name,
        "N": t.N,
        "T": t.total_area,
        "z": matrix_to_list(t.z),
        "paths": matrix_to_list(t.paths),
    }


def tuple_from_dict(d: dict) -> PathTuple:
    group = lie.get_group(d["group"])
    paths = list_to_matrix(d["paths"], group.n)
    if paths.shape[:2] != (2 * d["genus"], d["N"] + 1):
        raise ValueError("paths array does not match genus and N")
    return make_tuple(paths, group, list_to_matrix(d["z"], group.n), d["T"])


# ---------------------------------------------------------------------------
# connections


def connection_to_dict(c: LatticeConnection) -> dict:
    L = c.lattice
    return {
        "lattice": {
            "g": L.genus, "R": L.R, "K": L.K, "T": L.total_area,
            "cell_areas": [float(a) for a in L.cell_areas[0]],
        },
        "group": c.group.name,
        "radial": matrix_to_list(c.radial),
        "angular": matrix_to_list(c.inner) + [matrix_to_list(c.boundary.reshape(-1, c.group.n, c.group.n))],
    }


def connection_from_dict(d: dict) -> LatticeConnection:
    group = lie.get_group(d["group"])
    ld = d["lattice"]
    g, R, K = int(ld["g"]), int(ld["R"]), int(ld["K"])
    M = 4 * g * K
    areas = np.asarray(ld["cell_areas"], dtype=float)
    if areas.shape != (R,):
        raise ValueError("cell_areas must list R values")
    lattice = PolarLattice(g, R, K, float(ld["T"]), np.tile(areas, (M, 1)))
    angular = d["angular"]
    if len(angular) != R:
        raise ValueError(f"angular must hold R - 1 inner rings plus the boundary arcs, got {len(angular)}")
    inner = list_to_matrix(angular[:-1], group.n) if R > 1 else group.zeros((0, M))
    inner = inner.reshape((R - 1, M, group.n, group.n))
    boundary = list_to_matrix(angular[-1], group.n).reshape((2 * g, K, group.n, group.n))
    radial = list_to_matrix(d["radial"], group.n)
    return LatticeConnection(lattice, group, radial, inner, boundary)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, allow_nan=True), encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_connection(c: LatticeConnection, path) -> None:
    write_json(connection_to_dict(c), path)


def load_connection(path) -> LatticeConnection:
    return connection_from_dict(read_json(path))


def save_tuple(t: PathTuple, path) -> None:
    write_json(tuple_to_dict(t), path)


def load_tuple(path) -> PathTuple:
    return tuple_from_dict(read_json(path))


# ---------------------------------------------------------------------------
# reports


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(rows, columns, dest) -> None:
    """Header plus one line per row; missing values are written empty.

    ``dest`` is a path or an open text stream.
    """
    if hasattr(dest, "write"):
        _write_rows(csv.writer(dest, lineterminator="\n"), rows, columns)
        return
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        _write_rows(csv.writer(fh), rows, columns)


def _write_rows(w, rows, columns):
    w.writerow(columns)
    for row in rows:
        w.writerow(["" if row.get(col) is None else _cell(row[col]) for col in columns])


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def jsonable(obj):
    """Recursively turn numpy scalars/arrays and NaN into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj
