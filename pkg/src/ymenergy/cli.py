"""Command-line experiment runner.

Every command reads an :class:`ExperimentConfig` assembled from defaults, an
optional JSON/YAML config file and command-line flags (in increasing order of
precedence), runs, and writes a JSON or CSV report.

Exit codes: 0 success, 1 configuration or numerical error, 2 a lattice
connection whose action falls below the energy of its path tuple.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, lie, paths
from . import lattice as lat
from . import optimize as opt
from .errors import ConfigError, MaxItersExceeded, NumericalError

logger = logging.getLogger("ymenergy")

COMMANDS = ("verify", "saturate", "minimize", "spectrum", "refine", "decompose")
FORMATS = ("json", "csv")
SOURCES = ("random", "winding", "constant")
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
TOLERANCE_KEYS = ("relation_tol", "grad_tol", "eps_disc", "max_iters")


@dataclass
class ExperimentConfig:
    command: str = "verify"
    genus: int = 1
    group: str = "su2"
    R: int = 16
    K: int = 16
    N: int | None = None        # defaults to K
    T: float = 1.0
    trials: int = 10
    seed: int = 0
    n_max: int = 3
    levels: int = 4
    scale: float = 0.1
    source: str = "random"      # refine: random | winding | constant
    s_values: list = field(default_factory=lambda: [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0])
    tolerances: dict = field(default_factory=dict)
    output_path: str | None = None
    format: str = "json"
    workers: int | None = None  # defaults to the available parallelism

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        data = dict(data)
        if "out" in data:
            data["output_path"] = data.pop("out")
        if "n-max" in data:
            data["n_max"] = data.pop("n-max")
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration field")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @property
    def samples(self) -> int:
        return self.K if self.N is None else self.N

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}")
        if self.format not in FORMATS:
            raise ConfigError("format", "must be json or csv")
        try:
            lie.get_group(self.group)
        except ValueError:
            raise ConfigError("group", "must be one of u1, su2, su3") from None
        self.group = str(self.group).lower()
        _integer(self, "genus", 1)
        _integer(self, "R", 2)
        _integer(self, "K", 1)
        if self.N is not None:
            _integer(self, "N", 1)
        _integer(self, "trials", 1)
        _integer(self, "seed", 0)
        _integer(self, "n_max", 0)
        _integer(self, "levels", 1)
        if self.workers is not None:
            _integer(self, "workers", 1)
        _positive(self, "T")
        _positive(self, "scale")
        if not isinstance(self.s_values, (list, tuple)) or not self.s_values:
            raise ConfigError("s_values", "must be a non-empty list of numbers")
        try:
            self.s_values = [float(s) for s in self.s_values]
        except (TypeError, ValueError):
            raise ConfigError("s_values", "must be a non-empty list of numbers") from None
        if not isinstance(self.tolerances, dict):
            raise ConfigError("tolerances", "must be a mapping")
        for key, val in self.tolerances.items():
            if key not in TOLERANCE_KEYS:
                raise ConfigError(f"tolerances.{key}", "unknown tolerance")
            if not isinstance(val, (int, float)) or isinstance(val, bool) or not val > 0:
                raise ConfigError(f"tolerances.{key}", "must be a positive number")
        if self.command in ("saturate", "decompose") and self.N is not None and self.N != self.K:
            raise ConfigError("N", "the saturating connection needs N = K")
        if self.source not in SOURCES:
            raise ConfigError("source", f"must be one of {', '.join(SOURCES)}")
        if self.source == "winding" and self.group != "u1":
            raise ConfigError("group", "the winding source is a U(1) tuple")
        if self.command == "spectrum" and self.group != "u1":
            raise ConfigError("group", "spectrum runs in the U(1) sector only")

    def optimizer_config(self) -> opt.OptimizerConfig:
        kw = {k: self.tolerances[k] for k in ("relation_tol", "grad_tol", "max_iters") if k in self.tolerances}
        if "max_iters" in kw:
            kw["max_iters"] = int(kw["max_iters"])
        return opt.OptimizerConfig(seed=self.seed, **kw)


def _integer(cfg, name, lo):
    v = getattr(cfg, name)
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        else:
            raise ConfigError(name, f"must be an integer >= {lo}")
    if v < lo:
        raise ConfigError(name, f"must be an integer >= {lo}, got {v}")
    setattr(cfg, name, int(v))


def _positive(cfg, name):
    v = getattr(cfg, name)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        raise ConfigError(name, "must be a positive number")
    setattr(cfg, name, float(v))


# ---------------------------------------------------------------------------
# parallel trials


def _seeds(seed: int, count: int):
    return np.random.SeedSequence(seed).spawn(count)


def _pool_map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _verify_trial(job):
    i, cfg, ss, eps = job
    L = lat.build_lattice(cfg.genus, cfg.R, cfg.K, cfg.T)
    c = lat.random_connection(np.random.default_rng(ss), L, cfg.group, cfg.scale)
    rep = opt.verify_inequality(c, eps)
    t = lat.project_paths(c)
    return {
        "experiment_id": f"verify-{i}", "g": cfg.genus, "group": cfg.group,
        "R": cfg.R, "K": cfg.K, "N": cfg.K, "T": cfg.T, "seed": cfg.seed,
        "E": rep["E"], "S": rep["S"], "gap": rep["gap"],
        "geodesic_residual": paths.geodesic_residual(t),
        "relation_residual": paths.relation_residual(t),
        "converged": None, "violation": rep["violation"],
    }


def _minimize_trial(job):
    i, cfg, ss = job
    group = lie.get_group(cfg.group)
    t0 = paths.random_tuple(np.random.default_rng(ss), cfg.samples, group, cfg.genus, cfg.T)
    try:
        rep = opt.minimize_energy(t0, cfg.optimizer_config())
    except MaxItersExceeded as exc:  # pragma: no cover - minimize_energy reports instead
        rep = exc.best
    row = {
        "experiment_id": f"minimize-{i}", "g": cfg.genus, "group": cfg.group,
        "R": cfg.R, "K": cfg.samples, "N": cfg.samples, "T": cfg.T, "seed": cfg.seed,
        "E": rep.energy, "S": None, "gap": None,
        "geodesic_residual": rep.geodesic_residual,
        "relation_residual": rep.relation_residual,
        "converged": rep.converged,
    }
    if np.max(np.abs(rep.tuple.z - group.identity())) == 0:
        try:
            L = lat.build_lattice(cfg.genus, cfg.R, cfg.samples, cfg.T)
            S = lat.action(lat.saturating_connection(rep.tuple, L))
            row["S"], row["gap"] = S, S - rep.energy
        except NumericalError:
            pass
    return row, rep


# ---------------------------------------------------------------------------
# commands


def _workers(cfg):
    return cfg.workers if cfg.workers is not None else (os.cpu_count() or 1)


def cmd_verify(cfg):
    eps = cfg.tolerances.get("eps_disc")
    if eps is None:
        eps = opt.calibrate_eps_disc(cfg.group, cfg.genus, cfg.R, cfg.K, cfg.T)
    jobs = [(i, cfg, ss, eps) for i, ss in enumerate(_seeds(cfg.seed, cfg.trials))]
    rows = _pool_map(_verify_trial, jobs, _workers(cfg))
    violations = sum(r["violation"] for r in rows)
    summary = {"command": "verify", "eps_disc": eps, "trials": len(rows),
               "violations": violations, "min_gap": min(r["gap"] for r in rows)}
    logger.info("verify: %d trials, %d violations, eps_disc=%.3e", len(rows), violations, eps)
    return rows, summary, (2 if violations else 0)


def cmd_saturate(cfg):
    group = lie.get_group(cfg.group)
    t = paths.random_tuple(cfg.seed, cfg.K, group, cfg.genus, cfg.T)
    L = lat.build_lattice(cfg.genus, cfg.R, cfg.K, cfg.T)
    A = lat.saturating_connection(t, L)
    S, E = lat.action(A), paths.energy(t)
    row = {
        "experiment_id": "saturate-0", "g": cfg.genus, "group": cfg.group,
        "R": cfg.R, "K": cfg.K, "N": cfg.K, "T": cfg.T, "seed": cfg.seed,
        "E": E, "S": S, "gap": S - E,
        "geodesic_residual": paths.geodesic_residual(t),
        "relation_residual": paths.relation_residual(lat.project_paths(A)),
        "converged": None,
    }
    summary = {"command": "saturate", "ray_curvature_spread": lat.ray_curvature_spread(A),
               "connection": io.connection_to_dict(A), **row}
    return [row], summary, 0


def cmd_minimize(cfg):
    jobs = [(i, cfg, ss) for i, ss in enumerate(_seeds(cfg.seed, cfg.trials))]
    out = _pool_map(_minimize_trial, jobs, _workers(cfg))
    rows = [r for r, _ in out]
    reports = [{**rep.summary(), "tuple": io.tuple_to_dict(rep.tuple)} for _, rep in out]
    summary = {"command": "minimize", "reports": reports,
               "converged": sum(bool(r["converged"]) for r in rows)}
    return rows, summary, 0


def cmd_spectrum(cfg):
    oc = cfg.optimizer_config()
    if "grad_tol" not in cfg.tolerances:
        oc.grad_tol = 1e-8
    if "relation_tol" not in cfg.tolerances:
        oc.relation_tol = 1e-10
    entries = opt.abelian_spectrum(cfg.genus, cfg.n_max, cfg.T, N=cfg.N or 32, cfg=oc, seed=cfg.seed)
    E1 = entries[1]["E_n"] if len(entries) > 1 else math.nan
    for e in entries:
        e["ratio"] = e["E_n"] / E1 if E1 else math.nan
    return entries, {"command": "spectrum", "genus": cfg.genus, "T": cfg.T, "entries": entries}, 0


def refine_table(t_source: paths.SmoothTuple, genus: int, base: int, levels: int) -> list[dict]:
    """Saturation gap against the continuum energy as ``R = K = N`` doubles."""
    E = t_source.continuum_energy()
    rows = []
    prev = None
    for level in range(levels):
        n = base * 2**level
        row = {"level": level, "R": n, "K": n, "N": n, "S": None, "E": E, "gap": None, "ratio": None}
        try:
            L = lat.build_lattice(genus, n, n, t_source.total_area)
            row["S"] = lat.action(lat.saturating_connection(t_source.sample(n), L))
        except NumericalError as exc:
            logger.warning("refine level %d skipped: %s", level, exc)
            row["skipped"] = True
            rows.append(row)
            prev = None
            continue
        row["gap"] = abs(row["S"] - E)
        if prev:
            row["ratio"] = prev / row["gap"] if row["gap"] > 0 else math.inf
        prev = row["gap"]
        rows.append(row)
    return rows


def observed_order(rows) -> float:
    r = [row["ratio"] for row in rows if row.get("ratio") not in (None, 0)]
    return math.log2(r[-1]) if r and math.isfinite(r[-1]) else math.nan


def cmd_refine(cfg):
    if cfg.source == "winding":
        src = paths.smooth_winding_tuple(max(cfg.n_max, 1), cfg.genus, cfg.T)
    elif cfg.source == "constant":
        src = paths.constant_smooth_tuple(cfg.group, cfg.genus, cfg.T)
    else:
        src = paths.random_smooth_tuple(cfg.seed, cfg.group, cfg.genus, cfg.T)
    rows = refine_table(src, cfg.genus, cfg.K, cfg.levels)
    order = observed_order(rows)
    print(f"observed order: {order:.3f}", file=sys.stderr)
    return rows, {"command": "refine", "observed_order": order, "levels": rows}, 0


def cmd_decompose(cfg):
    group = lie.get_group(cfg.group)
    t = paths.random_tuple(cfg.seed, cfg.K, group, cfg.genus, cfg.T)
    L = lat.build_lattice(cfg.genus, cfg.R, cfg.K, cfg.T)
    tau = lat.random_fiber(cfg.seed + 1, L, group, cfg.scale)
    rows = []
    for s in cfg.s_values:
        S, E, gap = lat.decomposition_report(t, tau, s, L)
        rows.append({"R": cfg.R, "K": cfg.K, "S_total": S, "E_val": E, "gap": gap, "s": s})
    s = np.array(cfg.s_values)
    gaps = np.array([r["gap"] for r in rows])
    coef = np.polyfit(s, gaps, 2) if len(s) >= 3 else [math.nan] * 3
    resid = float(np.max(np.abs(np.polyval(coef, s) - gaps))) if len(s) >= 3 else math.nan
    summary = {"command": "decompose", "rows": rows,
               "quadratic_fit": {"a2": coef[0], "a1": coef[1], "a0": coef[2], "max_residual": resid}}
    return rows, summary, 0


RUNNERS = {
    "verify": cmd_verify, "saturate": cmd_saturate, "minimize": cmd_minimize,
    "spectrum": cmd_spectrum, "refine": cmd_refine, "decompose": cmd_decompose,
}
CSV_COLUMNS = {
    "verify": io.SUMMARY_COLUMNS + ("violation",),
    "saturate": io.SUMMARY_COLUMNS,
    "minimize": io.SUMMARY_COLUMNS,
    "spectrum": ("n", "E_n", "ratio", "sector_minimum", "seed_energy",
                 "geodesic_residual", "relation_residual", "converged"),
    "refine": io.REFINE_COLUMNS,
    "decompose": io.DECOMPOSITION_COLUMNS,
}


def run(cfg: ExperimentConfig) -> int:
    """Run one experiment and write its report; returns the exit code."""
    cfg.validate()
    try:
        rows, summary, code = RUNNERS[cfg.command](cfg)
    except NumericalError as exc:
        print(f"error: numerical failure in {cfg.command} ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1
    if cfg.format == "csv":
        io.write_csv(rows, CSV_COLUMNS[cfg.command], cfg.output_path or sys.stdout)
    else:
        doc = io.jsonable({"config": dataclasses.asdict(cfg), "rows": rows, "summary": summary})
        if cfg.output_path:
            io.write_json(doc, cfg.output_path)
        else:
            sys.stdout.write(json.dumps(doc, indent=1) + "\n")
    return code


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ymenergy", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="JSON or YAML config file")
    p.add_argument("--genus", type=int)
    p.add_argument("--group", choices=sorted(lie.GROUPS))
    p.add_argument("--R", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--T", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--scale", type=float)
    p.add_argument("--source", choices=SOURCES)
    p.add_argument("--out", dest="output_path", metavar="PATH")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--workers", type=int)
    return p


def load_config_file(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith((".yaml", ".yml")):
        import yaml
        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return data


def config_from_args(argv=None) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    data = {}
    if args.config:
        try:
            data = load_config_file(args.config)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc.strerror}") from None
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("config", f"cannot parse {args.config}: {exc}") from None
    flags = {k: v for k, v in vars(args).items() if k != "config" and v is not None}
    file_command = data.get("command")
    if file_command is not None and file_command != args.command:
        logger.info("command %r from the config file overridden by %r", file_command, args.command)
    data.update(flags)
    return ExperimentConfig.from_mapping(data)


def configure_logging() -> None:
    level = os.environ.get("YM_LOG", "warn").lower()
    if level not in LOG_LEVELS:
        raise ConfigError("YM_LOG", f"must be one of {', '.join(LOG_LEVELS)}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    try:
        configure_logging()
        cfg = config_from_args(argv)
        return run(cfg)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 1
    except TypeError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
