"""Discrete path tuples in G with the endpoint relation, and their energy.

A path is sampled at ``t_k = k/N``, ``k = 0..N``; a tuple holds the ``2g``
paths ``(alpha_1, beta_1, ..., alpha_g, beta_g)`` stacked into one array of
shape ``(2g, N+1, n, n)``.

The discrete energy is

    E = (c / 2T) * sum_i sum_k N * ||log(gamma_i(t_k)^-1 gamma_i(t_{k+1}))||^2

with ``T`` the total area and ``c`` the area normalization.  The default
``c = 4g`` gives every path the parameter length ``T / 4g``, the area of the
polar wedge over one boundary edge; with it the lattice action of the
saturating connection equals ``E`` exactly (see :mod:`ymenergy.lattice`).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import lie
from .errors import BadDimensions, RelationViolated
from .lie import Group, dagger


def default_normalization(genus: int) -> float:
    return 4.0 * genus


@dataclass(frozen=True, eq=False)
class PathTuple:
    paths: np.ndarray
    group: Group
    z: np.ndarray
    total_area: float = 1.0

    def __post_init__(self):
        paths = np.asarray(self.paths, dtype=complex)
        n = self.group.n
        if paths.ndim != 4 or paths.shape[-2:] != (n, n):
            raise BadDimensions(f"paths must have shape (2g, N+1, {n}, {n}), got {paths.shape}")
        if paths.shape[0] < 2 or paths.shape[0] % 2:
            raise BadDimensions("need an even number (2g >= 2) of paths")
        if paths.shape[1] < 2:
            raise BadDimensions("each path needs N >= 1 (at least two samples)")
        if not self.total_area > 0:
            raise BadDimensions("total area must be positive")
        z = np.asarray(self.z, dtype=complex).reshape(n, n)
        if not lie.is_central(z, self.group):
            raise RelationViolated("z is not central")
        object.__setattr__(self, "paths", paths)
        object.__setattr__(self, "z", z)

    @property
    def genus(self) -> int:
        return self.paths.shape[0] // 2

    @property
    def N(self) -> int:
        return self.paths.shape[1] - 1

    def with_paths(self, paths) -> "PathTuple":
        return replace(self, paths=paths)

    def with_area(self, total_area) -> "PathTuple":
        return replace(self, total_area=total_area)


def make_tuple(paths, group, z=None, total_area=1.0) -> PathTuple:
    group = lie.get_group(group)
    if z is None:
        z = group.identity()
    return PathTuple(np.asarray(paths, dtype=complex), group, z, float(total_area))


# endpoint factors of the relation, in order, per handle i:
#   alpha_i(0) beta_i(1)^-1 alpha_i(1)^-1 beta_i(0)
# entries: (path offset within the handle, sample: 0 or -1, inverted)
_RELATION_PATTERN = ((0, 0, False), (1, -1, True), (0, -1, True), (1, 0, False))


def _relation_factors(t: PathTuple):
    """Yield ``(path index, sample index, inverted, factor)`` in product order."""
    for i in range(t.genus):
        for off, k, inverted in _RELATION_PATTERN:
            p = 2 * i + off
            kk = 0 if k == 0 else t.N
            val = t.paths[p, kk]
            yield p, kk, inverted, (dagger(val) if inverted else val)


def relation_product(t: PathTuple) -> np.ndarray:
    out = t.group.identity()
    for *_, factor in _relation_factors(t):
        out = out @ factor
    return out


def relation_residual(t: PathTuple) -> float:
    """Frobenius distance of the relation product from ``z``."""
    return float(np.linalg.norm(relation_product(t) - t.z))


def check_relation(t: PathTuple, tol: float = 1e-8) -> None:
    res = relation_residual(t)
    if res > tol:
        raise RelationViolated(f"relation product differs from z by {res:.3e} > {tol:.1e}")


def step_logs(samples: np.ndarray, group: Group) -> np.ndarray:
    """``log(gamma(t_k)^-1 gamma(t_{k+1}))`` along the last sample axis."""
    return lie.log(dagger(samples[..., :-1, :, :]) @ samples[..., 1:, :, :], group)


def log_derivative(p: np.ndarray, group: Group) -> np.ndarray:
    """Discrete ``gamma^-1 d gamma / dt`` of one path: ``N * log(step)``."""
    p = np.asarray(p, dtype=complex)
    N = p.shape[-3] - 1
    return N * step_logs(p, group)


def energy(t: PathTuple, c: float | None = None) -> float:
    if c is None:
        c = default_normalization(t.genus)
    L = step_logs(t.paths, t.group)
    total = lie.inner(L, L).sum()
    return float(c * t.N * total / (2.0 * t.total_area))


def geodesic_residual(t: PathTuple) -> float:
    """``max_{i,k} ||X_{k+1} - X_k|| * N`` for the log derivative ``X``."""
    if t.N < 2:
        return 0.0
    X = t.N * step_logs(t.paths, t.group)
    return float(np.max(lie.norm(np.diff(X, axis=1))) * t.N)


def energy_gradient(t: PathTuple, c: float | None = None) -> np.ndarray:
    """Riesz representative of dE for right perturbations ``gamma exp(eps V)``.

    Uses d/de 1/2||log(h exp(eV))||^2 = <log h, V>, exact off the cut locus.
    """
    if c is None:
        c = default_normalization(t.genus)
    L = step_logs(t.paths, t.group)
    G = np.zeros_like(t.paths)
    G[:, 1:] += L
    G[:, :-1] -= L
    return (c * t.N / t.total_area) * G


def retract(t: PathTuple, v: np.ndarray, step: float) -> PathTuple:
    if np.shape(v) != t.paths.shape:
        raise BadDimensions("variation field shape does not match the tuple")
    if step == 0:
        return t.with_paths(t.paths.copy())
    return t.with_paths(t.paths @ lie.exp(step * np.asarray(v)))


def adjoint_act(g: np.ndarray, t: PathTuple) -> PathTuple:
    """``gamma_i(t) -> g^-1 gamma_i(t) g`` on every sample."""
    return t.with_paths(dagger(g) @ t.paths @ g)


def one_parameter_tuple(g0s, Xs, N: int, z=None, total_area=1.0, group=None, tol=1e-8) -> PathTuple:
    """Paths ``g0_i exp(t X_i)``; raises :class:`RelationViolated` if the ends disagree."""
    g0s = np.asarray(g0s, dtype=complex)
    Xs = np.asarray(Xs, dtype=complex)
    if group is None:
        group = {1: lie.U1, 2: lie.SU2, 3: lie.SU3}[g0s.shape[-1]]
    group = lie.get_group(group)
    if N < 1:
        raise BadDimensions("N must be >= 1")
    tk = np.arange(N + 1) / N
    paths = g0s[:, None] @ lie.exp(tk[None, :, None, None] * Xs[:, None])
    t = make_tuple(paths, group, z, total_area)
    check_relation(t, tol)
    return t


def random_variation(rng: np.random.Generator, t: PathTuple, scale: float = 1.0) -> np.ndarray:
    coords = rng.standard_normal(t.paths.shape[:2] + (t.group.dim,)) * scale
    return t.group.from_coords(coords)


# ---------------------------------------------------------------------------
# smooth continuum tuples (test data and refinement studies)


@dataclass(frozen=True, eq=False)
class SmoothTuple:
    """Continuum tuple ``gamma_i(t) = A_i exp(t L_i) exp(sin(pi t)^2 W_i)``.

    ``A_i = gamma_i(0)`` and ``L_i = log(gamma_i(0)^-1 gamma_i(1))``; the bump
    vanishes at both ends with zero slope, so the ends are exactly the
    prescribed endpoint values.
    """

    starts: np.ndarray
    L: np.ndarray
    W: np.ndarray
    group: Group
    total_area: float = 1.0

    @property
    def genus(self) -> int:
        return self.starts.shape[0] // 2

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        phi = np.sin(np.pi * t) ** 2
        a = lie.exp(t[None, :, None, None] * self.L[:, None])
        b = lie.exp(phi[None, :, None, None] * self.W[:, None])
        return self.starts[:, None] @ a @ b

    def sample(self, N: int) -> PathTuple:
        tk = np.arange(N + 1) / N
        return make_tuple(self.evaluate(tk), self.group, None, self.total_area)

    def velocity(self, t: np.ndarray) -> np.ndarray:
        """Closed-form ``gamma^-1 d gamma / dt`` at parameters ``t``."""
        t = np.asarray(t, dtype=float)
        phi = np.sin(np.pi * t) ** 2
        dphi = np.pi * np.sin(2 * np.pi * t)
        b = lie.exp(phi[None, :, None, None] * self.W[:, None])
        return dagger(b) @ self.L[:, None] @ b + dphi[None, :, None, None] * self.W[:, None]

    def continuum_energy(self, c: float | None = None, nodes: int = 200) -> float:
        if c is None:
            c = default_normalization(self.genus)
        x, w = np.polynomial.legendre.leggauss(nodes)
        t = 0.5 * (x + 1.0)
        V = self.velocity(t)
        integrand = lie.inner(V, V).sum(axis=0)
        return float(c * 0.5 * np.dot(w, integrand) / (2.0 * self.total_area))


def random_smooth_tuple(seed, group=lie.SU2, genus: int = 1, total_area: float = 1.0,
                        scale: float = 0.3, bump: float = 0.3) -> SmoothTuple:
    """Random smooth tuple on the trivial bundle (relation product = I).

    All endpoint values but ``beta_g(0)`` are random; ``beta_g(0)`` is solved
    from the relation.
    """
    group = lie.get_group(group)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ends = lie.random_group(rng, scale, group, shape=(2 * genus, 2))
    # relation: prod_i alpha_i(0) beta_i(1)^-1 alpha_i(1)^-1 beta_i(0) = I
    prefix = group.identity()
    for i in range(genus):
        a, b = ends[2 * i], ends[2 * i + 1]
        prefix = prefix @ a[0] @ dagger(b[1]) @ dagger(a[1])
        if i < genus - 1:
            prefix = prefix @ b[0]
    ends[2 * genus - 1, 0] = dagger(prefix)
    L = lie.log(dagger(ends[:, 0]) @ ends[:, 1], group)
    W = lie.random_algebra(rng, group, bump, shape=(2 * genus,))
    return SmoothTuple(ends[:, 0].copy(), L, W, group, float(total_area))


def smooth_winding_tuple(n: int, genus: int = 1, total_area: float = 1.0, bump: float = 0.3) -> SmoothTuple:
    """U(1) continuum tuple: ``alpha_1`` winds ``n`` times with non-uniform speed.

    The other paths are constant at 1; ``bump = 0`` gives the constant-speed
    winding path.
    """
    L = np.zeros((2 * genus, 1, 1), dtype=complex)
    W = np.zeros_like(L)
    L[0] = 2j * np.pi * n
    W[0] = 1j * bump
    return SmoothTuple(np.ones_like(L), L, W, lie.U1, float(total_area))


def constant_smooth_tuple(group=lie.SU2, genus: int = 1, total_area: float = 1.0) -> SmoothTuple:
    group = lie.get_group(group)
    return SmoothTuple(group.identity((2 * genus,)), group.zeros((2 * genus,)),
                       group.zeros((2 * genus,)), group, float(total_area))


def random_tuple(seed, N: int, group=lie.SU2, genus: int = 1, total_area: float = 1.0,
                 scale: float = 0.3, bump: float = 0.3) -> PathTuple:
    return random_smooth_tuple(seed, group, genus, total_area, scale, bump).sample(N)


def winding_tuple(n: int, N: int, genus: int = 1, total_area: float = 1.0,
                  noise: float = 0.0, seed=None) -> PathTuple:
    """U(1) tuple with ``alpha_1(t) = exp(2 pi i n t)`` and all other paths constant.

    ``noise`` perturbs interior samples only, so the relation stays exact.
    """
    tk = np.arange(N + 1) / N
    paths = np.ones((2 * genus, N + 1, 1, 1), dtype=complex)
    paths[0, :, 0, 0] = np.exp(2j * np.pi * n * tk)
    if noise:
        rng = np.random.default_rng(seed)
        kick = lie.random_algebra(rng, lie.U1, noise, shape=(2 * genus, N - 1))
        paths[:, 1:-1] = paths[:, 1:-1] @ lie.exp(kick)
    return make_tuple(paths, lie.U1, None, total_area)
