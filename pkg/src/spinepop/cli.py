"""Command-line driver.

Subcommands read a YAML experiment file and write CSV files into ``--out``.
Exit codes: 0 when every check passes, 1 on a statistical failure, 2 on a
configuration error.
"""
from __future__ import annotations

import argparse
import functools
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import eigen, models, stats
from .core import (
    ConstantOne,
    InverseSize,
    ModelError,
    ModelSpec,
    TabulatedPsi,
    model_from_config,
)
from .simulate import SimConfig, Status, run_replicas, simulate_original

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
MIN_COMPARE_REPLICAS = 100


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    return cfg


def _merge_flags(cfg: dict, args) -> dict:
    run = dict(cfg.get("run") or {})
    for flag, key in (("seed", "seed"), ("replicas", "replicas"), ("horizon", "t"), ("max_events", "max_events")):
        value = getattr(args, flag, None)
        if value is not None:
            run[key] = value
    if "seed" not in run or run["seed"] is None:
        raise ConfigError("a seed is required (run.seed or --seed)")
    try:
        run["seed"] = int(run["seed"])
    except (TypeError, ValueError):
        raise ConfigError("seed must be an integer") from None
    if not 0 <= run["seed"] < 2**64:
        raise ConfigError("seed must fit in 64 unsigned bits")
    run.setdefault("max_events", 10**6)
    cfg = dict(cfg)
    cfg["run"] = run
    return cfg


def _positive_int(run, key):
    value = run.get(key)
    if value is None:
        raise ConfigError(f"run.{key} is required")
    value = int(value)
    if value < 1:
        raise ConfigError(f"run.{key} must be positive")
    return value


def _horizon(run):
    t = run.get("t")
    if t is None or float(t) <= 0:
        raise ConfigError("run.t (or --horizon) must be positive")
    return float(t)


def build_model(cfg: dict) -> ModelSpec:
    if "model" not in cfg:
        raise ConfigError("missing model section")
    try:
        return model_from_config(cfg["model"])
    except ModelError as exc:
        raise ConfigError(str(exc)) from None


def build_psi(cfg: dict, model: ModelSpec):
    section = cfg.get("psi") or {"name": "inverse-size"}
    name = section.get("name")
    if name == "inverse-size":
        return InverseSize()
    if name == "constant-one":
        return ConstantOne()
    if name == "eigen-h":
        try:
            return eigen.EigenPsi(eigen.solve_model(model))
        except (eigen.NotIrreducible, eigen.CapacityOverflow, ValueError) as exc:
            raise ConfigError(f"eigen-h unavailable: {exc}") from None
    if name == "custom-tabulated":
        table = {}
        for row in section.get("table", []):
            table[(int(row["type"]), tuple(int(a) for a in row["composition"]))] = float(row["value"])
        try:
            return TabulatedPsi(table)
        except ModelError as exc:
            raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown psi {name!r}; choose inverse-size, constant-one, eigen-h or custom-tabulated")


def _out_dir(cfg, args) -> Path:
    out = args.out or (cfg.get("output") or {}).get("dir") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# subcommands


def _simulate_row(i, model, t, seed, max_events, trees):
    out = simulate_original(model, SimConfig(t, max_events, trees, seed, i))
    return out.status.value, out.time, out.n_events, out.final, (out.tree.to_records() if trees else None)


def cmd_simulate(cfg: dict, args) -> int:
    model = build_model(cfg)
    run = cfg["run"]
    n = _positive_int(run, "replicas")
    t = _horizon(run)
    trees = bool((cfg.get("output") or {}).get("trees", False))
    out = _out_dir(cfg, args)
    fn = functools.partial(_simulate_row, model=model, t=t, seed=run["seed"], max_events=int(run["max_events"]), trees=trees)
    rows = run_replicas(fn, n, args.threads)
    header = "replica,status,time,events," + ",".join(f"z_{name}" for name in model.types)
    lines = [header]
    for i, (status, time, events, final, _) in enumerate(rows):
        lines.append(f"{i},{status},{float(time)!r},{events}," + ",".join(map(str, final)))
    _write(out / "simulate.csv", "\n".join(lines) + "\n")
    if trees:
        tree_dir = out / "trees"
        tree_dir.mkdir(exist_ok=True)
        for i, row in enumerate(rows):
            _write(tree_dir / f"replica_{i}.txt", row[4])
    return EXIT_OK


_FUNCTIONALS = {
    "lineage-branch-count": stats.LineageBranchCount,
    "population-size": stats.PopulationSize,
}


def _functional(spec):
    if isinstance(spec, str):
        if spec not in _FUNCTIONALS:
            raise ConfigError(f"unknown functional {spec!r}")
        return _FUNCTIONALS[spec]()
    if isinstance(spec, dict) and "occupation" in spec:
        return stats.LineageOccupation(tuple(int(a) for a in spec["occupation"]))
    if isinstance(spec, dict) and "terminal-type" in spec:
        return stats.TerminalTypeIndicator(int(spec["terminal-type"]))
    raise ConfigError(f"cannot parse functional {spec!r}")


def cmd_compare(cfg: dict, args) -> int:
    model = build_model(cfg)
    psi = build_psi(cfg, model)
    run = cfg["run"]
    n = _positive_int(run, "replicas")
    if n < MIN_COMPARE_REPLICAS:
        raise ConfigError(f"compare needs at least {MIN_COMPARE_REPLICAS} replicas per side, got {n}")
    t = _horizon(run)
    section = cfg.get("compare") or {}
    fs = [_functional(f) for f in section.get("functionals", ["lineage-branch-count", "population-size"])]
    factor = float(section.get("spine_rate_factor", 1.0))
    seed = run["seed"]
    max_events = int(run["max_events"])
    lhs = stats.estimate_lhs(model, fs, t=t, n=n, seed=seed, max_events=max_events, workers=args.threads)
    rhs = stats.estimate_rhs(model, psi, fs, t=t, n=n, seed=seed + 1, max_events=max_events,
                             workers=args.threads, spine_rate_factor=factor)
    name = (cfg.get("model") or {}).get("name", "model")
    rows = [("theorem", name, psi.name, f.name, stats.compare(a, b)) for f, a, b in zip(fs, lhs, rhs)]
    if section.get("many_to_one", True) and factor == 1.0:
        G = stats.discounted_path(model, psi)
        a, b = stats.many_to_one_check(model, psi, G, t, n, seed + 2, max_events, args.threads)
        rows.append(("many-to-one", name, psi.name, G.name, stats.compare(a, b)))
    out = _out_dir(cfg, args)
    _write(out / "compare.csv", stats.report_csv(rows))
    return EXIT_OK if all(r[-1].passed for r in rows) else EXIT_FAIL


def cmd_eigen(cfg: dict, args) -> int:
    model = build_model(cfg)
    limit = int((cfg.get("eigen") or {}).get("state_limit", eigen.DEFAULT_STATE_LIMIT))
    tol = float((cfg.get("eigen") or {}).get("tol", 1e-12))
    try:
        trip = eigen.solve_model(model, tol=tol, limit=limit)
    except eigen.NotIrreducible as exc:
        raise ConfigError(f"not irreducible: {exc}") from None
    except eigen.CapacityOverflow as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = _out_dir(cfg, args)
    _write(out / "triplet.csv", trip.to_csv())
    _write(out / "eigenvalue.csv", f"lambda,residual_h,residual_gamma,iterations\n{float(trip.lam)!r},{float(trip.residuals[0])!r},{float(trip.residuals[1])!r},{trip.iterations}\n")
    return EXIT_OK if max(trip.residuals) <= 1e-8 else EXIT_FAIL


def _fraction_law(section):
    section = section or {"law": "point", "value": 0.5}
    law = section.get("law", "point")
    if law == "point":
        return models.PointMass(float(section.get("value", 0.5)))
    if law == "uniform":
        return models.UniformFraction()
    if law == "beta":
        return models.BetaSymmetric(float(section["alpha"]))
    raise ConfigError(f"unknown fraction law {law!r}")


def _grid(section, key):
    values = section.get(key)
    if values is None:
        raise ConfigError(f"phase.{key} is required")
    values = [float(v) for v in (values if isinstance(values, list) else [values])]
    if not values:
        raise ConfigError(f"phase.{key} is empty")
    return values


def cmd_phase(cfg: dict, args) -> int:
    section = cfg.get("phase") or {}
    bs, cs, rs = _grid(section, "b"), _grid(section, "c"), _grid(section, "r")
    law = _fraction_law(section.get("fraction"))
    run = cfg["run"]
    T = float(run.get("t") or section.get("T", 200.0))
    paths = int(section.get("paths", 64))
    rows = []
    ok = True
    for b in bs:
        for c in cs:
            gf = models.GrowthFragmentation(b, c, law)
            thr = models.gf_threshold(b, c, law)
            for r in rs:
                try:
                    res = models.classify_phase(gf, r, T, paths, run["seed"], max_events=int(run["max_events"]))
                    cls, slope = res.phase.value, res.slope
                    ok &= (res.phase is models.Phase.GROWING) == (r > thr)
                except models.Inconclusive:
                    cls, slope = "Inconclusive", math.nan
                rows.append((b, c, r, thr, slope, cls))
    _write(_out_dir(cfg, args) / "phase.csv", models.phase_sweep_csv(rows))
    return EXIT_OK if ok else EXIT_FAIL


def _large_n_model(cfg) -> models.LargeNModel:
    spec = build_model(cfg)
    section = cfg.get("odelimit") or {}
    v = section.get("v")
    if v is None:
        raise ConfigError("odelimit.v (initial density) is required")
    v = tuple(float(a) for a in (v if isinstance(v, list) else [v]))
    if len(v) != spec.n_types:
        raise ConfigError("odelimit.v must have one entry per type")
    return models.LargeNModel(spec.types, spec.kernel.channels, v)


def _odelimit_replica(i, model, N, T, traj, seed, max_events):
    out = simulate_original(model.scaled(N), SimConfig(T, max_events, False, seed, i, record_path=True))
    if out.status is Status.CENSORED:
        return math.nan
    return models.scaled_path_error(out.path, N, traj, T)


def cmd_odelimit(cfg: dict, args) -> int:
    model = _large_n_model(cfg)
    section = cfg.get("odelimit") or {}
    Ns = [int(a) for a in section.get("N", [])]
    if not Ns:
        raise ConfigError("odelimit.N must list at least one population scale")
    run = cfg["run"]
    T = _horizon(run)
    dt = float(section.get("dt", 1e-2))
    n = _positive_int(run, "replicas")
    lines = ["N,median_sup_error,replicas,halving_drift,flag"]
    status = EXIT_OK
    try:
        traj = models.ode_solve(model, model.v, T, dt)
    except models.PositivityLoss as exc:
        for N in Ns:
            lines.append(f"{N},nan,0,nan,positivity-loss at t={exc.time!r}")
        _write(_out_dir(cfg, args) / "odelimit.csv", "\n".join(lines) + "\n")
        return EXIT_FAIL
    for N in Ns:
        fn = functools.partial(_odelimit_replica, model=model, N=N, T=T, traj=traj, seed=run["seed"],
                               max_events=int(run["max_events"]))
        errs = np.array(run_replicas(fn, n, args.threads))
        flag = "censored" if np.isnan(errs).any() else ""
        if flag:
            status = EXIT_FAIL
        med = float(np.nanmedian(errs)) if not np.isnan(errs).all() else math.nan
        lines.append(f"{N},{float(med)!r},{n},{float(traj.halving_error)!r},{flag}")
    _write(_out_dir(cfg, args) / "odelimit.csv", "\n".join(lines) + "\n")
    _write(_out_dir(cfg, args) / "trajectory.csv", models.trajectory_csv(traj))
    return status


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "eigen": cmd_eigen,
    "phase": cmd_phase,
    "odelimit": cmd_odelimit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinepop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment file")
        p.add_argument("--seed", type=int, help="64-bit seed (overrides run.seed)")
        p.add_argument("--replicas", type=int, help="number of replicas (overrides run.replicas)")
        p.add_argument("--horizon", type=float, help="time horizon (overrides run.t)")
        p.add_argument("--max-events", type=int, dest="max_events", help="event budget per replica")
        p.add_argument("--threads", type=int, default=None, help="worker processes (default: available CPUs)")
        p.add_argument("--out", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is None:
        args.threads = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
    try:
        cfg = _merge_flags(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"spinepop {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
