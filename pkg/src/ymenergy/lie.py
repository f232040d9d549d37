"""Matrix kernel for the structure groups U(1), SU(2), SU(3).

Group elements and Lie algebra elements are plain complex numpy arrays of
shape ``(..., n, n)``; every function broadcasts over the leading axes.  The
group is carried by a :class:`Group` descriptor rather than by the arrays.

Conventions used throughout the package:

* inner product on the algebra: ``<X, Y> = -Re tr(XY)``
* adjoint action: ``adjoint(g, X) = g^-1 X g``
* inverses of group elements are conjugate transposes (exact in floating point)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CutLocus, TooFarFromGroup

# distance from the cut locus below which log refuses to answer
CUT_GUARD = 1e-6


@dataclass(frozen=True)
class Group:
    name: str
    n: int
    # orthonormal basis of the Lie algebra under <X, Y> = -Re tr(XY)
    basis: np.ndarray = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def is_abelian(self) -> bool:
        return self.n == 1

    def identity(self, shape=()) -> np.ndarray:
        out = np.zeros(tuple(shape) + (self.n, self.n), dtype=complex)
        idx = np.arange(self.n)
        out[..., idx, idx] = 1.0
        return out

    def zeros(self, shape=()) -> np.ndarray:
        return np.zeros(tuple(shape) + (self.n, self.n), dtype=complex)

    def to_coords(self, X: np.ndarray) -> np.ndarray:
        """Real coordinates of algebra elements in the orthonormal basis."""
        return -np.einsum("...ij,bji->...b", X, self.basis).real

    def from_coords(self, coords: np.ndarray) -> np.ndarray:
        return np.einsum("...b,bij->...ij", np.asarray(coords, dtype=float), self.basis)


def _gell_mann() -> np.ndarray:
    lam = np.zeros((8, 3, 3), dtype=complex)
    lam[0][0, 1] = lam[0][1, 0] = 1
    lam[1][0, 1], lam[1][1, 0] = -1j, 1j
    lam[2][0, 0], lam[2][1, 1] = 1, -1
    lam[3][0, 2] = lam[3][2, 0] = 1
    lam[4][0, 2], lam[4][2, 0] = -1j, 1j
    lam[5][1, 2] = lam[5][2, 1] = 1
    lam[6][1, 2], lam[6][2, 1] = -1j, 1j
    lam[7] = np.diag([1, 1, -2]) / np.sqrt(3)
    return lam


_PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)

U1 = Group("u1", 1, np.array([[[1j]]]))
SU2 = Group("su2", 2, 1j * _PAULI / np.sqrt(2))
SU3 = Group("su3", 3, 1j * _gell_mann() / np.sqrt(2))

GROUPS = {g.name: g for g in (U1, SU2, SU3)}


def get_group(name) -> Group:
    if isinstance(name, Group):
        return name
    try:
        return GROUPS[str(name).lower()]
    except KeyError:
        raise ValueError(f"unsupported group {name!r}; expected one of {sorted(GROUPS)}") from None


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


inv = dagger


def inner(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Ad-invariant inner product ``-Re tr(XY)``."""
    return -np.einsum("...ij,...ji->...", X, Y).real


def norm(X: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(inner(X, X), 0.0))


def adjoint(g: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``g^-1 X g``."""
    return dagger(g) @ X @ g


def exp(X: np.ndarray) -> np.ndarray:
    """Exponential of anti-Hermitian matrices."""
    X = np.asarray(X, dtype=complex)
    n = X.shape[-1]
    if n == 1:
        return np.exp(X)
    if n == 2:
        # X = i a.sigma (+ i b I); X0^2 = -|a|^2 I for the traceless part
        tr = 0.5 * (X[..., 0, 0] + X[..., 1, 1])
        X0 = X.copy()
        X0[..., 0, 0] -= tr
        X0[..., 1, 1] -= tr
        theta = np.sqrt(np.maximum(0.5 * inner(X0, X0), 0.0))
        c = np.cos(theta)[..., None, None]
        s = np.sinc(theta / np.pi)[..., None, None]
        out = s * X0
        out[..., 0, 0] += c[..., 0, 0]
        out[..., 1, 1] += c[..., 0, 0]
        return out * np.exp(tr)[..., None, None]
    # Hermitian eigenproblem for -iX
    w, V = np.linalg.eigh(-1j * X)
    return (V * np.exp(1j * w)[..., None, :]) @ dagger(V)


def log(g: np.ndarray, group: Group) -> np.ndarray:
    """Principal logarithm; raises :class:`CutLocus` near the cut locus."""
    g = np.asarray(g, dtype=complex)
    if group.n == 1:
        if np.any(np.abs(g + 1.0) < CUT_GUARD):
            raise CutLocus("U(1) logarithm requested at -1")
        return 1j * np.angle(g)
    if group.n == 2:
        a0 = 0.5 * (g[..., 0, 0] + g[..., 1, 1]).real
        if np.any(2.0 * a0 <= -2.0 + CUT_GUARD):
            raise CutLocus("SU(2) logarithm requested near -I (tr g <= -2 + 1e-6)")
        Y = 0.5 * (g - dagger(g))
        trY = 0.5 * (Y[..., 0, 0] + Y[..., 1, 1])
        Y[..., 0, 0] -= trY
        Y[..., 1, 1] -= trY
        s = np.sqrt(np.maximum(0.5 * inner(Y, Y), 0.0))
        theta = np.arctan2(s, a0)
        safe = np.where(s > 1e-300, s, 1.0)
        factor = np.where(s > 1e-300, theta / safe, 1.0)
        return factor[..., None, None] * Y
    return _log_schur(g, group)


def _log_schur(g: np.ndarray, group: Group) -> np.ndarray:
    flat = g.reshape((-1, group.n, group.n))
    out = np.empty_like(flat)
    for idx, mat in enumerate(flat):
        T, Z = scipy.linalg.schur(mat, output="complex")
        phases = np.angle(np.diag(T))
        if np.any(np.pi - np.abs(phases) < CUT_GUARD):
            raise CutLocus("logarithm requested with an eigenvalue near -1")
        if group.name != "u1" and abs(phases.sum()) > 1e-9:
            raise CutLocus("principal logarithm leaves the special unitary algebra")
        out[idx] = (Z * (1j * phases)[None, :]) @ dagger(Z)
    return out.reshape(g.shape)


def random_algebra(rng: np.random.Generator, group: Group, scale: float, shape=()) -> np.ndarray:
    """Random algebra elements with norm uniform in ``[0, scale]``."""
    shape = tuple(shape)
    coords = rng.standard_normal(shape + (group.dim,))
    lengths = np.linalg.norm(coords, axis=-1, keepdims=True)
    lengths = np.where(lengths > 0, lengths, 1.0)
    radius = scale * rng.uniform(size=shape + (1,))
    return group.from_coords(coords / lengths * radius)


def random_group(seed, scale: float, group=SU2, shape=()) -> np.ndarray:
    """Deterministic random group element(s): ``exp`` of a random algebra element."""
    if scale < 0:
        raise ValueError("scale must be non-negative")
    group = get_group(group)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return exp(random_algebra(rng, group, scale, shape))


def unitarity_defect(g: np.ndarray) -> np.ndarray:
    n = g.shape[-1]
    return np.linalg.norm(dagger(g) @ g - np.eye(n), axis=(-2, -1))


def recondition(g: np.ndarray, group: Group) -> np.ndarray:
    """Project onto the group: nearest unitary, then fix the determinant."""
    g = np.asarray(g, dtype=complex)
    if np.any(unitarity_defect(g) > 1e-6):
        raise TooFarFromGroup("input is farther than 1e-6 from the unitary group")
    if group.n == 1:
        return g / np.abs(g)
    W, _, Vh = np.linalg.svd(g)
    u = W @ Vh
    det = np.linalg.det(u)
    root = np.exp(-1j * np.angle(det) / group.n)
    return u * root[..., None, None]


def is_central(z: np.ndarray, group: Group, tol: float = 1e-12) -> bool:
    """Commutes with every algebra basis element (hence with the group)."""
    comm = z[None] @ group.basis - group.basis @ z[None]
    return bool(np.max(np.abs(comm)) <= tol)


def check_group(g: np.ndarray, group: Group, tol: float = 1e-12) -> bool:
    g = np.asarray(g)
    if np.any(unitarity_defect(g) > tol):
        return False
    if group.n > 1 and np.any(np.abs(np.linalg.det(g) - 1.0) > tol):
        return False
    return True


def check_algebra(X: np.ndarray, group: Group, tol: float = 1e-12) -> bool:
    X = np.asarray(X)
    if np.any(np.linalg.norm(X + dagger(X), axis=(-2, -1)) > tol):
        return False
    if group.n > 1 and np.any(np.abs(np.trace(X, axis1=-2, axis2=-1)) > tol):
        return False
    return True
