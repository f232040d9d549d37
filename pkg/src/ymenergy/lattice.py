"""Polar lattice gauge fields on the identified 4g-gon.

Layout
------
The fundamental domain is cut by ``M = 4gK`` rays from the centre (the base
point) into wedges, and by ``R`` rings into cells.  Boundary edges are
numbered counterclockwise ``e = 0..4g-1`` with labels
``a_1 b_1 a_1^-1 b_1^-1 ...``; ray ``j = eK + k`` ends at position ``k`` of
edge ``e`` (``k = 0`` is the corner at which edge ``e`` starts).  Edge
``4i + s + 2`` is edge ``4i + s`` glued with reversed orientation, so
position ``k`` on it is the point at position ``K - k`` of its partner.  All
``4g`` corners are one surface vertex.

Link storage (links are oriented ``x -> y`` and act as ``u(x)^-1 U u(y)``
under gauge transformations):

* ``radial[j, r]``: ray ``j`` from ring ``r`` to ring ``r + 1`` (ring 0 is
  the centre, ring ``R`` the boundary);
* ``inner[r - 1, j]``: ring ``r`` (``1 <= r < R``) from ray ``j`` to ``j + 1``;
* ``boundary[p, k]``: boundary arc of the a-type edge of path ``p`` (edge
  ``4(p//2) + p%2``) from position ``k`` to ``k + 1``.  The glued arc on the
  partner edge is never stored; it is the inverse of this link.

Cell ``(j, r)`` is bounded by rays ``j, j+1`` and rings ``r, r+1``; its
holonomy is taken counterclockwise from the inner corner on ray ``j``.  The
``r = 0`` cells are the three-link wedges at the centre.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import lie, paths
from .errors import BadDimensions, CutLocus, LargePlaquette
from .lie import Group, dagger


@dataclass(frozen=True, eq=False)
class PolarLattice:
    genus: int
    R: int
    K: int
    total_area: float
    cell_areas: np.ndarray  # (M, R)

    @property
    def M(self) -> int:
        return 4 * self.genus * self.K

    @property
    def wedge_area(self) -> float:
        return self.total_area / self.M

    @property
    def n_boundary_vertices(self) -> int:
        return 1 + 2 * self.genus * (self.K - 1)

    # -- boundary combinatorics ------------------------------------------

    def edge_of_path(self, p: int) -> tuple[int, int]:
        """(a-type edge, glued partner edge) carrying path ``p``."""
        e = 4 * (p // 2) + p % 2
        return e, e + 2

    def boundary_vertex(self, j: int) -> int:
        """Surface vertex (class index) at the outer end of ray ``j``."""
        e, k = divmod(j, self.K)
        if k == 0:
            return 0
        s = e % 4
        if s < 2:
            p = 2 * (e // 4) + s
            pos = k
        else:
            p = 2 * (e // 4) + s - 2
            pos = self.K - k
        return 1 + p * (self.K - 1) + (pos - 1)

    def paired_arc(self, w: int) -> int:
        """Ring-R arc glued to arc ``w`` (an involution without fixed points)."""
        e, k = divmod(w, self.K)
        partner = e + 2 if e % 4 < 2 else e - 2
        return partner * self.K + (self.K - 1 - k)

    @cached_property
    def ray_vertex(self) -> np.ndarray:
        return np.array([self.boundary_vertex(j) for j in range(self.M)])

    @cached_property
    def a_arcs(self) -> np.ndarray:
        """Ring index of stored arc ``(p, k)``; shape ``(2g, K)``."""
        out = np.empty((2 * self.genus, self.K), dtype=int)
        for p in range(2 * self.genus):
            e, _ = self.edge_of_path(p)
            out[p] = e * self.K + np.arange(self.K)
        return out

    @cached_property
    def b_arcs(self) -> np.ndarray:
        """Ring index of the arc glued to stored arc ``(p, k)``."""
        return np.vectorize(self.paired_arc)(self.a_arcs)

    @cached_property
    def out_rays(self) -> np.ndarray:
        """Ray to sample ``k`` of path ``p``; shape ``(2g, K+1)``."""
        out = np.empty((2 * self.genus, self.K + 1), dtype=int)
        for p in range(2 * self.genus):
            e, _ = self.edge_of_path(p)
            out[p] = e * self.K + np.arange(self.K + 1)
        return out

    @cached_property
    def return_rays(self) -> np.ndarray:
        """Ray to the glued copy of sample ``k`` of path ``p``."""
        out = np.empty((2 * self.genus, self.K + 1), dtype=int)
        for p in range(2 * self.genus):
            _, e = self.edge_of_path(p)
            out[p] = (e * self.K + self.K - np.arange(self.K + 1)) % self.M
        return out

    @cached_property
    def radial_fractions(self) -> np.ndarray:
        """Fraction of each wedge's area inside ring ``r``; shape ``(M, R+1)``."""
        cum = np.cumsum(self.cell_areas, axis=1)
        out = np.zeros((self.M, self.R + 1))
        out[:, 1:] = cum / cum[:, -1:]
        out[:, -1] = 1.0
        return out


def build_lattice(g: int, R: int, K: int, T: float = 1.0, metric_profile=None) -> PolarLattice:
    """Polar lattice with ``4gK`` rays and ``R`` rings on a surface of area ``T``.

    ``metric_profile`` sets the relative radial weights of the cells of a
    wedge: ``None`` (uniform), a sequence of ``R`` positive numbers, or a
    callable of the ring midpoint ``(r + 1/2)/R``.  Every wedge keeps area
    ``T/M``.
    """
    if int(g) != g or g < 1:
        raise BadDimensions(f"genus must be an integer >= 1, got {g}")
    if int(R) != R or R < 2:
        raise BadDimensions(f"R must be an integer >= 2, got {R}")
    if int(K) != K or K < 1:
        raise BadDimensions(f"K must be an integer >= 1, got {K}")
    if not (np.isfinite(T) and T > 0):
        raise BadDimensions(f"T must be positive, got {T}")
    g, R, K = int(g), int(R), int(K)
    M = 4 * g * K
    if metric_profile is None:
        weights = np.ones(R)
    elif callable(metric_profile):
        weights = np.array([metric_profile((r + 0.5) / R) for r in range(R)], dtype=float)
    else:
        weights = np.asarray(metric_profile, dtype=float)
    if weights.shape != (R,) or np.any(~np.isfinite(weights)) or np.any(weights <= 0):
        raise BadDimensions("metric profile must give R positive weights")
    areas = np.tile(weights / weights.sum() * (T / M), (M, 1))
    return PolarLattice(g, R, K, float(T), areas)


@dataclass(frozen=True, eq=False)
class LatticeConnection:
    lattice: PolarLattice
    group: Group
    radial: np.ndarray    # (M, R, n, n)
    inner: np.ndarray     # (R-1, M, n, n)
    boundary: np.ndarray  # (2g, K, n, n)

    def __post_init__(self):
        L, n = self.lattice, self.group.n
        shapes = {
            "radial": (L.M, L.R, n, n),
            "inner": (L.R - 1, L.M, n, n),
            "boundary": (2 * L.genus, L.K, n, n),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != shape:
                raise BadDimensions(f"{name} links must have shape {shape}, got {arr.shape}")
            object.__setattr__(self, name, arr)

    def ring(self, level: int) -> np.ndarray:
        """Counterclockwise angular links on ring ``level`` (1..R); shape ``(M, n, n)``."""
        L = self.lattice
        if 1 <= level < L.R:
            return self.inner[level - 1]
        if level != L.R:
            raise BadDimensions(f"ring level must be in 1..{L.R}")
        out = np.empty((L.M, self.group.n, self.group.n), dtype=complex)
        out[L.a_arcs] = self.boundary
        out[L.b_arcs] = dagger(self.boundary)
        return out

    def rings(self) -> np.ndarray:
        """All angular links, shape ``(R, M, n, n)``; index ``r`` is ring ``r + 1``."""
        return np.concatenate([self.inner, self.ring(self.lattice.R)[None]], axis=0)

    def replace(self, **kw) -> "LatticeConnection":
        return replace(self, **kw)


def identity_connection(lattice: PolarLattice, group) -> LatticeConnection:
    group = lie.get_group(group)
    L = lattice
    return LatticeConnection(
        L, group,
        group.identity((L.M, L.R)),
        group.identity((L.R - 1, L.M)),
        group.identity((2 * L.genus, L.K)),
    )


def random_connection(seed, lattice: PolarLattice, group=lie.SU2, scale: float = 0.1) -> LatticeConnection:
    """Every link ``exp`` of a random algebra element of norm at most ``scale``."""
    group = lie.get_group(group)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    L = lattice
    return LatticeConnection(
        L, group,
        lie.random_group(rng, scale, group, (L.M, L.R)),
        lie.random_group(rng, scale, group, (L.R - 1, L.M)),
        lie.random_group(rng, scale, group, (2 * L.genus, L.K)),
    )


# ---------------------------------------------------------------------------
# holonomy and action


def _plaquettes(c: LatticeConnection, rings: np.ndarray | None = None) -> np.ndarray:
    """All cell holonomies, shape ``(M, R, n, n)``."""
    if rings is None:
        rings = c.rings()
    A = np.swapaxes(rings, 0, 1)            # (M, R): A[:, r] is ring r+1
    U = c.radial
    Un = np.roll(U, -1, axis=0)             # ray j+1
    P = U @ A @ dagger(Un)
    P[:, 1:] = P[:, 1:] @ dagger(A[:, :-1])
    return P


def plaquette_holonomy(c: LatticeConnection, cell) -> np.ndarray:
    j, r = cell
    L = c.lattice
    if not (0 <= j < L.M and 0 <= r < L.R):
        raise BadDimensions(f"cell {cell} outside the lattice")
    jn = (j + 1) % L.M
    out = c.radial[j, r] @ c.ring(r + 1)[j] @ dagger(c.radial[jn, r])
    if r > 0:
        out = out @ dagger(c.ring(r)[j])
    return out


def plaquette_logs(c: LatticeConnection) -> np.ndarray:
    try:
        return lie.log(_plaquettes(c), c.group)
    except CutLocus as exc:
        raise LargePlaquette(f"plaquette holonomy too large for this grid ({exc})") from None


def curvature(c: LatticeConnection) -> np.ndarray:
    """Curvature density ``log(plaquette) / area`` per cell, shape ``(M, R, n, n)``."""
    return plaquette_logs(c) / c.lattice.cell_areas[..., None, None]


def action(c: LatticeConnection) -> float:
    """``sum_cells <F, F> area = sum_cells ||log P||^2 / area``."""
    X = plaquette_logs(c)
    return float(np.sum(lie.inner(X, X) / c.lattice.cell_areas))


def action_ring_gradient(c: LatticeConnection) -> tuple[float, np.ndarray]:
    """Action and its gradient for right perturbations of every ring link.

    Returns ``(S, G)`` with ``G`` of shape ``(R, M, n, n)`` indexed like
    :meth:`LatticeConnection.rings`.
    """
    rings = c.rings()
    A = np.swapaxes(rings, 0, 1)
    Un = np.roll(c.radial, -1, axis=0)
    P = _plaquettes(c, rings)
    try:
        X = lie.log(P, c.group)
    except CutLocus as exc:
        raise LargePlaquette(str(exc)) from None
    area = c.lattice.cell_areas[..., None, None]
    S = float(np.sum(lie.inner(X, X) / c.lattice.cell_areas))
    # P = U A_out S_out with S_out = Un^+ (A_in^+ for r > 0)
    suffix = dagger(Un)
    suffix[:, 1:] = suffix[:, 1:] @ dagger(A[:, :-1])
    G = np.zeros_like(A)
    G += 2.0 * suffix @ X @ dagger(suffix) / area
    G[:, :-1] -= 2.0 * dagger(A[:, :-1]) @ X[:, 1:] @ A[:, :-1] / area[:, 1:]
    return S, np.swapaxes(G, 0, 1)


def fold_ring_gradient(c: LatticeConnection, G: np.ndarray) -> "FiberPerturbation":
    """Pull a ring-link gradient back to the stored (fiber) link variables."""
    L = c.lattice
    GR = G[-1]
    b = c.boundary
    boundary = GR[L.a_arcs] - dagger(b) @ GR[L.b_arcs] @ b
    return FiberPerturbation(G[:-1].copy(), boundary)


# ---------------------------------------------------------------------------
# gauge transformations


@dataclass(frozen=True, eq=False)
class GaugeTransform:
    center: np.ndarray    # (n, n)
    interior: np.ndarray  # (R-1, M, n, n) for rings 1..R-1
    boundary: np.ndarray  # (n_boundary_vertices, n, n); index 0 is the corner

    def ring_values(self, lattice: PolarLattice, r: int) -> np.ndarray:
        if r == 0:
            return np.broadcast_to(self.center, (lattice.M,) + self.center.shape)
        if r < lattice.R:
            return self.interior[r - 1]
        return self.boundary[lattice.ray_vertex]


def random_gauge(seed, lattice: PolarLattice, group=lie.SU2, scale: float = 1.0,
                 fix_center: bool = True) -> GaugeTransform:
    group = lie.get_group(group)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    L = lattice
    center = group.identity() if fix_center else lie.random_group(rng, scale, group)
    return GaugeTransform(
        center,
        lie.random_group(rng, scale, group, (L.R - 1, L.M)),
        lie.random_group(rng, scale, group, (L.n_boundary_vertices,)),
    )


def gauge_transform(c: LatticeConnection, u: GaugeTransform) -> LatticeConnection:
    L = c.lattice
    V = [u.ring_values(L, r) for r in range(L.R + 1)]
    radial = np.stack([dagger(V[r]) @ c.radial[:, r] @ V[r + 1] for r in range(L.R)], axis=1)
    inner = np.stack(
        [dagger(V[r]) @ c.inner[r - 1] @ np.roll(V[r], -1, axis=0) for r in range(1, L.R)], axis=0
    )
    VR = V[L.R]
    start = VR[L.a_arcs]
    end = np.roll(VR, -1, axis=0)[L.a_arcs]
    boundary = dagger(start) @ c.boundary @ end
    return c.replace(radial=radial, inner=inner, boundary=boundary)


# ---------------------------------------------------------------------------
# holonomy projection and the saturating section


def ray_holonomies(c: LatticeConnection) -> np.ndarray:
    """Ordered product of the radial links of each ray, centre outwards."""
    H = c.radial[:, 0]
    for r in range(1, c.lattice.R):
        H = H @ c.radial[:, r]
    return H


def project_paths(c: LatticeConnection) -> paths.PathTuple:
    """The holonomy projection: radial loops through glued boundary points.

    Sample ``k`` of path ``p`` is the holonomy out along the ray to position
    ``k`` of the a-type edge and back along the ray from the glued point.
    Only radial links enter.
    """
    L = c.lattice
    H = ray_holonomies(c)
    samples = H[L.out_rays] @ dagger(H[L.return_rays])
    return paths.PathTuple(samples, c.group, c.group.identity(), L.total_area)


def _corner_frames(t: paths.PathTuple) -> np.ndarray:
    """Last-link values ``u_e`` at the ``4g`` corner rays.

    Solves ``alpha_i(0) = u_{4i} u_{4i+3}^-1``, ``beta_i(1) = u_{4i+2} u_{4i+3}^-1``,
    ``alpha_i(1) = u_{4i+1} u_{4i+2}^-1``, ``beta_i(0) = u_{4i+1} u_{4i+4}^-1``
    starting from ``u_0 = I``; the relation closes the chain.
    """
    g = t.genus
    u = t.group.identity((4 * g + 1,))
    for i in range(g):
        a, b = t.paths[2 * i], t.paths[2 * i + 1]
        u[4 * i + 3] = dagger(a[0]) @ u[4 * i]
        u[4 * i + 2] = b[-1] @ u[4 * i + 3]
        u[4 * i + 1] = a[-1] @ u[4 * i + 2]
        u[4 * i + 4] = dagger(b[0]) @ u[4 * i + 1]
    return u[:-1]


def saturating_connection(t: paths.PathTuple, lattice: PolarLattice) -> LatticeConnection:
    """The section over path tuples: the minimum of the action on the fibre of ``t``.

    Built in radial gauge.  For step ``k`` of path ``p`` with
    ``L = log(gamma_k^-1 gamma_{k+1})`` the two wedges meeting the glued arcs
    carry boundary generators ``-gamma_k L gamma_k^-1 / 2`` (a-type side) and
    ``-L / 2`` (glued side), spread over the rings in proportion to cell area
    so that every cell of a wedge has the same holonomy.  The path data live
    in the outermost radial links, which keeps the projection exact.
    """
    L = lattice
    if t.N != L.K or t.genus != L.genus:
        raise BadDimensions(
            f"tuple (g={t.genus}, N={t.N}) does not fit lattice (g={L.genus}, K={L.K})"
        )
    if not np.isclose(t.total_area, L.total_area, rtol=1e-12, atol=0.0):
        raise BadDimensions("tuple and lattice total areas differ")
    if np.max(np.abs(t.z - t.group.identity())) > 1e-12:
        raise ValueError("the lattice realizes the trivial bundle only (z = I)")
    group = t.group
    K = L.K
    gam = t.paths
    steps = paths.step_logs(gam, group)                 # (2g, K)

    last = group.identity((L.M,))
    last[L.return_rays[:, 1:K]] = dagger(gam[:, 1:K])
    last[np.arange(4 * L.genus) * K] = _corner_frames(t)

    B = group.zeros((L.M,))
    B[L.a_arcs] = -0.5 * gam[:, :-1] @ steps @ dagger(gam[:, :-1])
    B[L.b_arcs] = -0.5 * steps

    frac = L.radial_fractions                            # (M, R+1)
    inner = lie.exp(frac[:, 1:L.R, None, None] * B[:, None])   # (M, R-1)
    inner = np.swapaxes(inner, 0, 1)

    start = last[L.out_rays[:, :-1]]
    end = last[L.out_rays[:, 1:]]
    boundary = dagger(start) @ lie.exp(B[L.a_arcs]) @ end

    radial = group.identity((L.M, L.R))
    radial[:, -1] = last
    return LatticeConnection(L, group, radial, inner, boundary)


# ---------------------------------------------------------------------------
# the fibre


@dataclass(frozen=True, eq=False)
class FiberPerturbation:
    """Algebra-valued increments on angular links only (radial part is zero)."""

    inner: np.ndarray     # (R-1, M, n, n)
    boundary: np.ndarray  # (2g, K, n, n)

    def __add__(self, other):
        return FiberPerturbation(self.inner + other.inner, self.boundary + other.boundary)

    def __mul__(self, s):
        return FiberPerturbation(s * self.inner, s * self.boundary)

    __rmul__ = __mul__

    def dot(self, other) -> float:
        return float(lie.inner(self.inner, other.inner).sum() + lie.inner(self.boundary, other.boundary).sum())

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))


def random_fiber(seed, lattice: PolarLattice, group=lie.SU2, scale: float = 0.1) -> FiberPerturbation:
    group = lie.get_group(group)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    L = lattice
    return FiberPerturbation(
        lie.random_algebra(rng, group, scale, (L.R - 1, L.M)),
        lie.random_algebra(rng, group, scale, (2 * L.genus, L.K)),
    )


def apply_fiber(c: LatticeConnection, tau: FiberPerturbation, s: float) -> LatticeConnection:
    """Angular links ``V -> V exp(s tau)``; radial links are shared, not copied."""
    if s == 0:
        return c.replace(inner=c.inner.copy(), boundary=c.boundary.copy())
    return c.replace(
        inner=c.inner @ lie.exp(s * tau.inner),
        boundary=c.boundary @ lie.exp(s * tau.boundary),
    )


def decomposition_report(t: paths.PathTuple, tau: FiberPerturbation, s: float,
                         lattice: PolarLattice) -> tuple[float, float, float]:
    """``(S(A~ + s tau), E(t), difference)``; the difference is the fibre term."""
    sat = saturating_connection(t, lattice)
    S = action(apply_fiber(sat, tau, s))
    E = paths.energy(t)
    return S, E, S - E


def innermost_curvatures(c: LatticeConnection) -> np.ndarray:
    """Curvature of the ``M`` wedges touching the centre.

    Their holonomies start and end at the centre, so they are already
    expressed in the base-point frame.
    """
    return curvature(c)[:, 0]


def ray_curvature_spread(c: LatticeConnection) -> float:
    """Max over wedges of the spread of the curvature along the wedge."""
    F = curvature(c)
    return float(np.max(lie.norm(F - F[:, :1])))
