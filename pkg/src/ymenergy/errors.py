"""Exception types shared across the package."""


class NumericalError(ArithmeticError):
    """A numerical stage could not produce a trustworthy value."""


class CutLocus(NumericalError):
    """A group logarithm was requested at (or too near) the cut locus.

    Refine the grid or shrink the step so that consecutive group elements
    stay close together.
    """


class LargePlaquette(CutLocus):
    """Some plaquette holonomy sits at or near the cut locus."""


class TooFarFromGroup(ValueError):
    """Input matrix is too far from the group to be reconditioned."""


class RelationViolated(ValueError):
    """Endpoint values of a path tuple fail the defining relation."""


class BadDimensions(ValueError):
    """Lattice or tuple dimensions are out of range or inconsistent."""


class MaxItersExceeded(RuntimeError):
    """An iterative solver ran out of iterations.

    ``best`` holds the best iterate found, when one exists.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(ValueError):
    """Experiment configuration is invalid; ``field`` names the culprit."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
