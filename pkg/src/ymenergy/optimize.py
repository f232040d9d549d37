"""Constrained energy minimization and the criticality experiments.

The relation ``prod alpha_i(0) beta_i(1)^-1 alpha_i(1)^-1 beta_i(0) = z`` is
handled by an augmented Lagrangian written in the group,

    Phi = E + (mu/2) ||log(P z^-1 exp(nu))||^2 ,

where ``P`` is the relation product and ``nu = lambda/mu`` the scaled
multiplier.  The inner loop is gradient descent with an Armijo backtracking
search; the gradient is preconditioned with the path Laplacian (the exact
Hessian of the abelian energy), i.e. it is the gradient in a discrete H^1
metric.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache

import numpy as np

from . import lie, paths
from . import lattice as lat
from .errors import CutLocus, MaxItersExceeded, RelationViolated
from .lie import dagger
from .paths import PathTuple

logger = logging.getLogger(__name__)

ARMIJO = 1e-4
MAX_HALVINGS = 30
# relative change of the objective treated as rounding noise
ROUNDOFF = 64 * np.finfo(float).eps


@dataclass
class OptimizerConfig:
    max_iters: int = 5000
    step_init: float = 1.0
    relation_tol: float = 1e-8
    grad_tol: float = 1e-6
    penalty_growth: float = 10.0
    seed: int = 0
    # initial penalty in units of the energy stiffness c N / T
    penalty_init: float = 1.0
    max_outer: int = 40

    def __post_init__(self):
        for name in ("relation_tol", "grad_tol", "step_init", "penalty_init"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.penalty_growth > 1:
            raise ValueError("penalty_growth must exceed 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class CriticalReport:
    tuple: PathTuple
    energy: float
    geodesic_residual: float
    relation_residual: float
    stationarity_residual: float
    iterations: int
    converged: bool
    outer_iterations: int = 0
    # augmented objective after each accepted step, one list per outer iteration
    objective_history: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        out = asdict(self)
        out.pop("tuple")
        out.pop("objective_history")
        return out


# ---------------------------------------------------------------------------
# constraint geometry


def _relation_suffixes(t: PathTuple):
    """``(path, sample, inverted, suffix)`` per relation factor.

    ``suffix`` is the product of the factors after it, so a right
    perturbation ``F -> F exp(eW)`` moves ``P`` to ``P exp(e S^-1 W S)``.
    """
    factors = list(paths._relation_factors(t))
    out = []
    suffix = t.group.identity()
    for p, k, inverted, F in reversed(factors):
        out.append((p, k, inverted, suffix))
        suffix = F @ suffix
    return out[::-1]


def relation_pullback(t: PathTuple, Y: np.ndarray, suffixes=None) -> np.ndarray:
    """Riesz representative of ``V -> <Y, dP P^-1 (right-trivialized)>``.

    ``Y`` may carry a leading batch axis; the result then has the same
    leading axis in front of the tuple shape.
    """
    Y = np.asarray(Y)
    batch = Y.shape[:-2]
    out = np.zeros(batch + t.paths.shape, dtype=complex)
    if suffixes is None:
        suffixes = _relation_suffixes(t)
    for p, k, inverted, S in suffixes:
        G = S @ Y @ dagger(S)
        if inverted:
            gam = t.paths[p, k]
            G = -dagger(gam) @ G @ gam
        out[..., p, k, :, :] += G
    return out


def _variation_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return lie.inner(a, b).sum(axis=(-1, -2))


def projected_gradient(t: PathTuple, G: np.ndarray | None = None, c=None) -> np.ndarray:
    """Energy gradient projected onto the tangent space of the relation."""
    if G is None:
        G = paths.energy_gradient(t, c)
    J = relation_pullback(t, t.group.basis)          # (dim, 2g, N+1, n, n)
    gram = _variation_dot(J[:, None], J[None, :])
    rhs = _variation_dot(J, G[None])
    coef = np.linalg.solve(gram, rhs)
    return G - np.tensordot(coef, J, axes=(0, 0))


def _norm(v: np.ndarray) -> float:
    return float(np.sqrt(max(lie.inner(v, v).sum(), 0.0)))


# ---------------------------------------------------------------------------
# the augmented objective


class _Augmented:
    def __init__(self, z, group, c):
        self.z = z
        self.group = group
        self.c = c
        self.mu = 0.0
        self.nu = group.zeros()

    def shifted(self, t: PathTuple) -> np.ndarray:
        return paths.relation_product(t) @ dagger(self.z) @ lie.exp(self.nu)

    def value(self, t: PathTuple) -> float:
        E = paths.energy(t, self.c)
        q = lie.log(self.shifted(t), self.group)
        return E + 0.5 * self.mu * float(lie.inner(q, q))

    def gradient(self, t: PathTuple) -> np.ndarray:
        G = paths.energy_gradient(t, self.c)
        q = lie.log(self.shifted(t), self.group)
        en = lie.exp(self.nu)
        Y = self.mu * en @ q @ dagger(en)
        return G + relation_pullback(t, Y)


def _laplacian_inverse(N: int, stiffness: float) -> np.ndarray:
    """Inverse of ``stiffness * (path Laplacian + I / 10N^2)``."""
    lap = np.zeros((N + 1, N + 1))
    i = np.arange(N)
    lap[i, i] += 1
    lap[i + 1, i + 1] += 1
    lap[i, i + 1] -= 1
    lap[i + 1, i] -= 1
    lap += np.eye(N + 1) * 0.1 / N**2
    return np.linalg.inv(stiffness * lap)


def _precondition(t: PathTuple, G: np.ndarray, Ainv: np.ndarray, mu: float) -> np.ndarray:
    """Apply ``(A + mu J^T J)^-1`` by Woodbury; ``A`` acts along each path.

    For U(1) this is the exact Hessian of the penalized energy.
    """
    group = t.group
    g = group.to_coords(G)                                        # (2g, N+1, d)
    J = group.to_coords(relation_pullback(t, group.basis))        # (d, 2g, N+1, d)
    AiG = np.einsum("kl,pld->pkd", Ainv, g)
    AiJ = np.einsum("kl,apld->apkd", Ainv, J)
    M = np.eye(group.dim) / mu + np.einsum("apkd,bpkd->ab", J, AiJ)
    coef = np.linalg.solve(M, np.einsum("apkd,pkd->a", J, AiG))
    return group.from_coords(AiG - np.einsum("a,apkd->pkd", coef, AiJ))


def minimize_energy(t0: PathTuple, cfg: OptimizerConfig | None = None, c=None) -> CriticalReport:
    """Minimize the energy on the relation variety through ``t0``."""
    cfg = cfg or OptimizerConfig()
    if paths.relation_residual(t0) > 1e-4:
        raise RelationViolated("starting tuple violates the relation by more than 1e-4")
    if c is None:
        c = paths.default_normalization(t0.genus)
    group = t0.group
    stiffness = c * t0.N / t0.total_area
    aug = _Augmented(t0.z, group, c)
    aug.mu = cfg.penalty_init * stiffness

    Ainv = _laplacian_inverse(t0.N, stiffness)
    # interior gradient is stiffness * (X_k - X_{k+1}) / N, so this also
    # bounds the geodesic residual by grad_tol
    inner_tol = 0.1 * cfg.grad_tol * min(1.0, stiffness / t0.N**2)
    t = t0
    history = []
    iters = 0
    converged = False
    prev_res = math.inf
    for outer in range(cfg.max_outer):
        phi = aug.value(t)
        segment = [phi]
        history.append(segment)
        while iters < cfg.max_iters:
            G = aug.gradient(t)
            gnorm = _norm(G)
            if gnorm <= inner_tol:
                break
            D = _precondition(t, G, Ainv, aug.mu)
            slope = float(lie.inner(G, D).sum())
            if slope <= 0:
                break
            step = cfg.step_init
            accepted = False
            for _ in range(MAX_HALVINGS):
                try:
                    trial = paths.retract(t, D, -step)
                    phi_trial = aug.value(trial)
                except CutLocus:
                    step *= 0.5
                    continue
                if phi_trial <= phi - ARMIJO * step * slope:
                    accepted = True
                    break
                # decrease below the resolution of phi: judge by the gradient
                if (abs(phi_trial - phi) <= ROUNDOFF * abs(phi)
                        and _norm(aug.gradient(trial)) < gnorm):
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            t, phi = trial, phi_trial
            segment.append(phi)
            iters += 1

        res = paths.relation_residual(t)
        pg = _norm(projected_gradient(t, c=c))
        geo = paths.geodesic_residual(t)
        logger.debug("outer %d: mu=%.3g relation=%.3e projected grad=%.3e geodesic=%.3e",
                     outer, aug.mu, res, pg, geo)
        if res <= cfg.relation_tol and pg <= cfg.grad_tol and geo <= cfg.grad_tol:
            converged = True
            break
        if iters >= cfg.max_iters:
            break
        lam = aug.mu * lie.log(aug.shifted(t), group)
        if res > 0.25 * prev_res:
            aug.mu *= cfg.penalty_growth
        aug.nu = lam / aug.mu
        prev_res = res

    if not converged:
        logger.warning("minimize_energy stopped after %d iterations without converging", iters)
    return CriticalReport(
        tuple=t,
        energy=paths.energy(t, c),
        geodesic_residual=paths.geodesic_residual(t),
        relation_residual=paths.relation_residual(t),
        stationarity_residual=_norm(projected_gradient(t, c=c)),
        iterations=iters,
        converged=converged,
        outer_iterations=outer + 1,
        objective_history=history,
    )


def certify_critical(t: PathTuple, tol: float, c=None) -> tuple[bool, dict]:
    """Discrete geodesic condition plus constrained stationarity."""
    res = paths.relation_residual(t)
    if res > 1e-6:
        raise RelationViolated(f"relation residual {res:.3e} exceeds 1e-6")
    geo = paths.geodesic_residual(t)
    pg = _norm(projected_gradient(t, c=c))
    ok = geo <= tol and pg <= tol
    return ok, {"geodesic_residual": geo, "stationarity_residual": pg, "relation_residual": res}


# ---------------------------------------------------------------------------
# fibre minimization


def _fiber_preconditioner(lattice: lat.PolarLattice) -> np.ndarray:
    """Inverse Hessian of the abelian action along one glued pair of wedges.

    Chain variables: inner links of the a-side wedge (rings 1..R-1), the
    shared boundary link, then the glued wedge's inner links outside-in with
    flipped sign.
    """
    R = lattice.R
    a = lattice.cell_areas[0]
    w = np.concatenate([2.0 / a, (2.0 / a)[::-1]])     # 2R cell stiffnesses
    n = 2 * R - 1
    H = np.zeros((n, n))
    for cell in range(2 * R):
        # cell couples chain variables cell-1 and cell (ends are fixed radial data)
        lo, hi = cell - 1, cell
        for x in (lo, hi):
            if 0 <= x < n:
                H[x, x] += w[cell]
        if 0 <= lo and hi < n:
            H[lo, hi] -= w[cell]
            H[hi, lo] -= w[cell]
    return np.linalg.inv(H)


def _apply_fiber_preconditioner(lattice, Hinv, g: lat.FiberPerturbation) -> lat.FiberPerturbation:
    R = lattice.R
    ia, ib = lattice.a_arcs, lattice.b_arcs
    chain = np.concatenate(
        [
            np.moveaxis(g.inner[:, ia], 0, 2),          # (2g, K, R-1, n, n)
            g.boundary[:, :, None],
            -np.moveaxis(g.inner[::-1][:, ib], 0, 2),
        ],
        axis=2,
    )
    out = np.einsum("xy,pkyab->pkxab", Hinv, chain)
    inner = np.empty_like(g.inner)
    inner[:, ia] = np.moveaxis(out[:, :, : R - 1], 2, 0)
    inner[:, ib] = -np.moveaxis(out[:, :, R:], 2, 0)[::-1]
    return lat.FiberPerturbation(inner, out[:, :, R - 1].copy())


def fiber_gradient(c: lat.LatticeConnection) -> tuple[float, lat.FiberPerturbation]:
    S, G = lat.action_ring_gradient(c)
    return S, lat.fold_ring_gradient(c, G)


def min_over_fiber(c: lat.LatticeConnection, cfg: OptimizerConfig | None = None) -> lat.LatticeConnection:
    """Minimize the action over angular links with the radial links frozen."""
    cfg = cfg or OptimizerConfig()
    Hinv = _fiber_preconditioner(c.lattice)
    S, G = fiber_gradient(c)
    for _ in range(cfg.max_iters):
        if G.norm() <= cfg.grad_tol:
            return c
        D = _apply_fiber_preconditioner(c.lattice, Hinv, G)
        slope = G.dot(D)
        if slope <= 0:
            D, slope = G, G.dot(G)
        step = cfg.step_init
        for _ in range(MAX_HALVINGS):
            trial = lat.apply_fiber(c, D, -step)
            try:
                S_trial, G_trial = fiber_gradient(trial)
            except CutLocus:
                step *= 0.5
                continue
            if S_trial <= S - ARMIJO * step * slope:
                break
            step *= 0.5
        else:
            # stalled at rounding level
            return c
        c, S, G = trial, S_trial, G_trial
    raise MaxItersExceeded(f"fibre minimization did not reach |grad| <= {cfg.grad_tol}", best=c)


# ---------------------------------------------------------------------------
# inequality checks


@lru_cache(maxsize=64)
def calibrate_eps_disc(group_name: str, genus: int, R: int, K: int, T: float,
                       samples: int = 20, seed: int = 0) -> float:
    """95th percentile of ``|S(A~) - E|`` over random smooth tuples at this resolution."""
    group = lie.get_group(group_name)
    L = lat.build_lattice(genus, R, K, T)
    gaps = []
    for s in np.random.SeedSequence(seed).spawn(samples):
        t = paths.random_tuple(np.random.default_rng(s), K, group, genus, T)
        gaps.append(abs(lat.action(lat.saturating_connection(t, L)) - paths.energy(t)))
    return float(np.percentile(gaps, 95))


def verify_inequality(c: lat.LatticeConnection, eps_disc: float | None = None) -> dict:
    L = c.lattice
    if eps_disc is None:
        eps_disc = calibrate_eps_disc(c.group.name, L.genus, L.R, L.K, L.total_area)
    S = lat.action(c)
    E = paths.energy(lat.project_paths(c))
    gap = S - E
    return {
        "S": S,
        "E": E,
        "gap": gap,
        "R": L.R,
        "K": L.K,
        "eps_disc": eps_disc,
        "violation": bool(gap < -eps_disc),
    }


# ---------------------------------------------------------------------------
# experiments


def sector_minimum(n: int, genus: int, T: float, c=None) -> float:
    """Least U(1) energy with total lifted winding ``2 pi n``: all ``2g`` paths share it."""
    if c is None:
        c = paths.default_normalization(genus)
    return c * (math.pi * n) ** 2 / (genus * T)


def winding_seed_energy(n: int, T: float, c: float) -> float:
    """Energy of ``alpha_1 = exp(2 pi i n t)`` with every other path constant."""
    return 0.5 * (2 * math.pi * n) ** 2 * c / T


def abelian_spectrum(genus: int, n_max: int, T: float, N: int = 32,
                     cfg: OptimizerConfig | None = None, seed: int = 0, noise: float = 0.05) -> list[dict]:
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    cfg = cfg or OptimizerConfig(grad_tol=1e-8, relation_tol=1e-10)
    c = paths.default_normalization(genus)
    out = []
    for n in range(n_max + 1):
        t0 = paths.winding_tuple(n, N, genus, T, noise=noise, seed=seed + n)
        rep = minimize_energy(t0, cfg)
        out.append({
            "n": n,
            "E_n": rep.energy,
            "sector_minimum": sector_minimum(n, genus, T, c),
            "seed_energy": winding_seed_energy(n, T, c),
            "geodesic_residual": rep.geodesic_residual,
            "relation_residual": rep.relation_residual,
            "converged": rep.converged,
        })
    return out


def smoothness_probe(t: PathTuple, lattice: lat.PolarLattice) -> float:
    """Max pairwise distance between the curvatures of the wedges at the centre."""
    F = lat.innermost_curvatures(lat.saturating_connection(t, lattice))
    x = t.group.to_coords(F)
    diff = x[:, None, :] - x[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())
