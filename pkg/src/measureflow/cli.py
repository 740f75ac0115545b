"""Command-line entry point.

Subcommands: simulate | distance | convergence | validate.  Configs and
reports are JSON, bulk trajectories are CSV.  Outputs are written
atomically (temp file + rename) and are byte-identical across reruns and
thread counts once timestamps are disabled.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import logging
import os
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import analysis
from .errors import ConfigError, MassMismatch, MeasureflowError, SupportOverflow
from .fiber import fiber_w, fiber_wg
from .fields import Ball, PiecewiseLinear, PvfSpec, SourceSpec
from .flat import generalized_wasserstein
from .lattice import LatticeGrid, ax_discretize, predicted_reach, run_semigroup
from .measures import DiscreteMeasure, LiftedMeasure
from .problems import ProblemSpec, builtin_problem
from .wasserstein import wasserstein1

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_OVERFLOW = 3
EXIT_IO = 4

log = logging.getLogger("measureflow")


def _setup_logging():
    level = os.environ.get("MEASUREFLOW_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _write_atomic(path: str | Path, data: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data)
    os.replace(tmp, path)


def _json_dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _load_json(path: str | Path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from None


def _load_measure(path: str | Path) -> DiscreteMeasure:
    path = Path(path)
    try:
        if path.suffix.lower() == ".csv":
            text = path.read_text()
            first = next((ln for ln in text.splitlines() if ln.strip()), None)
            if first is None:
                raise ConfigError(f"{path}: empty CSV measure")
            return DiscreteMeasure.from_csv(text, dim=len(first.split(",")) - 1)
        return DiscreteMeasure.from_dict(_load_json(path))
    except (KeyError, TypeError, IndexError, ValueError) as err:
        raise ConfigError(f"{path}: bad measure schema ({err})") from None


def _load_lifted(path: str | Path) -> LiftedMeasure:
    data = _load_json(path)
    try:
        return LiftedMeasure.from_dict(data)
    except (KeyError, TypeError, IndexError, ValueError) as err:
        raise ConfigError(f"{path}: bad lifted-measure schema ({err})") from None


# -- config parsing -------------------------------------------------------------


def _build_velocity(spec: dict):
    kind = spec.get("type")
    if kind == "constant":
        value = tuple(float(c) for c in spec["value"])
        return (lambda x: value), max(abs(c) for c in value)
    if kind == "identity":
        return (lambda x: x), None
    if kind == "scale":
        factor = float(spec["factor"])
        return (lambda x: factor * np.asarray(x)), None
    raise ConfigError(f"unknown velocity type {kind!r}")


def _build_pvf(spec: dict | None, constants: dict) -> PvfSpec | None:
    if spec is None:
        return None
    kind = spec.get("kind")
    if kind == "deterministic":
        velocity, bound = _build_velocity(spec.get("velocity", {}))
        c = float(spec.get("C", constants.get("C", 1.0)))
        if c <= 0:
            raise ConfigError("growth constant C must be positive")
        declared_bound = spec.get("velocity_bound", bound)
        return PvfSpec.deterministic(
            velocity, c, None if declared_bound is None else float(declared_bound)
        )
    if kind == "diffusion1d":
        table = spec.get("phi")
        if not table:
            raise ConfigError("diffusion1d needs a phi breakpoint table")
        q = int(spec.get("q", spec.get("quadrature_points", 8)))
        try:
            phi = PiecewiseLinear.from_table(table)
        except ValueError as err:
            raise ConfigError(f"bad phi table: {err}") from None
        c = spec.get("C", constants.get("C"))
        return PvfSpec.diffusion1d(phi, q, None if c is None else float(c))
    raise ConfigError(f"unknown pvf kind {kind!r}")


def _build_source(
    spec: dict | None, constants: dict, config_dir: Path
) -> SourceSpec | None:
    if spec is None:
        return None
    kind = spec.get("kind")
    if kind == "constant":
        measure = spec.get("measure")
        if isinstance(measure, str):
            sigma = _load_measure(config_dir / measure)
        elif isinstance(measure, dict):
            sigma = DiscreteMeasure.from_dict(measure)
        else:
            raise ConfigError("constant source needs a measure (inline or path)")
        radius = spec.get("R")
        return SourceSpec.constant(sigma, None if radius is None else float(radius))
    if kind == "proportional":
        rate = float(spec.get("rate", 0.0))
        radius = float(spec.get("R", 1.0))
        carrier = spec.get("carrier")
        ball = None
        if carrier is not None:
            ball = Ball(
                center=tuple(float(c) for c in carrier["center"]),
                radius=float(carrier["radius"]),
            )
        try:
            return SourceSpec.proportional(rate, radius, ball)
        except ValueError as err:
            raise ConfigError(str(err)) from None
    raise ConfigError(f"unknown source kind {kind!r}")


def _build_problem(config: dict, config_dir: Path) -> ProblemSpec:
    name = config.get("problem", "custom")
    constants = config.get("constants", {})
    if name in ("translate", "diffusion1d", "source-only", "source_only"):
        problem = builtin_problem(name)
    else:
        problem = ProblemSpec(
            name=str(name), initial=DiscreteMeasure.dirac([0.0]), pvf=None, src=None
        )
        if "pvf" not in config and "source" not in config:
            raise ConfigError(
                "custom problems need at least one of 'pvf' or 'source'"
            )

    if "initial_measure" in config:
        spec = config["initial_measure"]
        mu0 = (
            _load_measure(config_dir / spec)
            if isinstance(spec, str)
            else DiscreteMeasure.from_dict(spec)
        )
        problem = problem.with_initial(mu0)
    if "pvf" in config:
        from dataclasses import replace

        problem = replace(
            problem, pvf=_build_pvf(config["pvf"], constants), reference=None
        )
    if "source" in config:
        from dataclasses import replace

        src = _build_source(config["source"], constants, config_dir)
        if src is not None and "L" in constants:
            src = replace(src, lipschitz_constant=float(constants["L"]))
        problem = replace(problem, src=src, reference=None)
    return problem


def _positive_int(value, name: str) -> int:
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer") from None
    if n < 1:
        raise ConfigError(f"{name} must be >= 1, got {n}")
    return n


def _load_config(args) -> tuple[dict, Path]:
    if args.preset and args.config:
        raise ConfigError("give either --config or --preset, not both")
    if args.preset:
        return {"problem": args.preset}, Path.cwd()
    if not args.config:
        raise ConfigError("missing --config (or --preset)")
    path = Path(args.config)
    config = _load_json(path)
    if not isinstance(config, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return config, path.parent


# -- subcommands -------------------------------------------------------------------


def cmd_simulate(args) -> int:
    config, config_dir = _load_config(args)
    problem = _build_problem(config, config_dir)
    n = _positive_int(config.get("N", args.N), "N")
    t_final = float(config.get("T", args.T))
    if t_final <= 0:
        raise ConfigError(f"T must be positive, got {t_final}")
    grid = LatticeGrid(
        N=n, dim=problem.initial.dim,
        adaptive_extent=bool(config.get("adaptive_extent", False)),
    )
    start = time.perf_counter()
    traj = run_semigroup(grid, problem.initial, problem.pvf, problem.src, t_final)
    elapsed = time.perf_counter() - start

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["t", "atom_index", *[f"x{d+1}" for d in range(grid.dim)], "weight"])
    for t, state in zip(traj.times, traj.states):
        for index, (pos, w) in enumerate(state.atoms):
            writer.writerow([repr(t), index, *[repr(c) for c in pos], repr(w)])
    out = Path(args.out)
    _write_atomic(out, buffer.getvalue())

    summary = {
        "problem": problem.name,
        "N": n,
        "T": t_final,
        "n_steps": len(traj.states) - 1,
        "times": list(traj.times),
        "masses": list(traj.masses),
        "support_radii": list(traj.support_radii),
        "atom_counts": [len(s) for s in traj.states],
        "final_mass": traj.masses[-1],
    }
    if not args.no_timestamp:
        summary["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        summary["wall_time_s"] = elapsed
    summary_path = args.summary or str(out) + ".summary.json"
    _write_atomic(summary_path, _json_dumps(summary))
    log.info("simulate: %d steps, %d atoms at T", summary["n_steps"], len(traj.final_state))
    return EXIT_OK


def cmd_distance(args) -> int:
    metric = args.metric
    if metric in ("w1", "gw"):
        m1 = _load_measure(args.file_a)
        m2 = _load_measure(args.file_b)
    else:
        v1 = _load_lifted(args.file_a)
        v2 = _load_lifted(args.file_b)
    if metric == "w1":
        distance, plan = wasserstein1(m1, m2)
        payload = {"metric": "w1", "distance": distance, "plan": plan.to_jsonable()}
    elif metric == "gw":
        sol = generalized_wasserstein(m1, m2)
        payload = {
            "metric": "gw",
            "distance": sol.distance,
            "removed1": sol.kept1.removed_mass,
            "removed2": sol.kept2.removed_mass,
            "transport_cost": sol.plan.cost,
            "plan": sol.plan.to_jsonable(),
        }
    elif metric == "fiber-w":
        payload = {"metric": "fiber-w", "distance": fiber_w(v1, v2)}
    elif metric == "fiber-wg":
        payload = {"metric": "fiber-wg", "distance": fiber_wg(v1, v2)}
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown metric {metric!r}")
    text = _json_dumps(payload)
    if args.out:
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_convergence(args) -> int:
    config, config_dir = _load_config(args)
    problem = _build_problem(config, config_dir)
    levels = config.get("N_list", args.levels)
    if levels is None:
        raise ConfigError("missing N_list (config) or --levels")
    if isinstance(levels, str):
        levels = [part for part in levels.split(",") if part]
    levels = [_positive_int(n, "level") for n in levels]
    if len(set(levels)) < 3:
        raise ConfigError("convergence needs at least 3 distinct levels")
    t_final = float(config.get("T", args.T))
    metric = config.get("metric", args.metric)
    if metric not in ("w1", "gw"):
        raise ConfigError(f"convergence metric must be w1 or gw, got {metric!r}")
    report = analysis.convergence_study(
        problem,
        levels,
        t_final,
        metric=metric,
        threads=args.threads,
        adaptive_extent=bool(config.get("adaptive_extent", False)),
    )
    payload = report.to_dict()
    payload["T"] = t_final
    if not args.no_timestamp:
        payload["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    _write_atomic(args.out, _json_dumps(payload))
    if args.csv:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["level", "distance", "fitted_rate"])
        for level, dist, rate in report.csv_rows():
            writer.writerow([level, repr(dist), repr(rate)])
        _write_atomic(args.csv, buffer.getvalue())
    return EXIT_OK


def _validate_checks(problem: ProblemSpec, n: int, t_final: float, seed: int,
                     adaptive: bool) -> list[dict]:
    checks: list[dict] = []
    grid = LatticeGrid(N=n, dim=problem.initial.dim, adaptive_extent=adaptive)
    traj = run_semigroup(grid, problem.initial, problem.pvf, problem.src, t_final)

    # mass bookkeeping: defects vanish without a source and equal
    # dt * |A^x(s[mu_k])| with one
    defects = traj.mass_defects()
    if problem.src is None:
        mass_ok = all(d == 0 for d in defects)
        detail = {"max_abs_defect": float(max((abs(d) for d in defects), default=0))}
    else:
        mass_ok = True
        worst = 0.0
        for k, defect in enumerate(defects):
            sigma = ax_discretize(grid, problem.src.evaluate(traj.states[k]))
            expected = Fraction(1, grid.N) * sum(
                (Fraction(w) for _, w in sigma.atoms), Fraction(0)
            )
            gap = abs(defect - expected)
            worst = max(worst, float(gap))
            mass_ok = mass_ok and gap == 0
        detail = {"max_abs_defect_gap": worst}
    checks.append({"name": "mass_bookkeeping", "passed": bool(mass_ok), "details": detail})

    aligned = all(grid.is_aligned(state) for state in traj.states)
    checks.append({"name": "grid_alignment", "passed": bool(aligned), "details": {}})

    reach = predicted_reach(problem.initial, problem.pvf, problem.src, t_final)
    radius_ok = max(traj.support_radii) <= reach + 1e-9
    checks.append(
        {
            "name": "support_envelope",
            "passed": bool(radius_ok),
            "details": {"max_radius": max(traj.support_radii), "envelope": reach},
        }
    )

    # weak-form residual with a plateau test function covering the run
    f = analysis.TestFunction.plateau(reach + 0.5, reach + 1.5, grid.dim)
    sigma_mass = problem.src.evaluate(problem.initial).mass() if problem.src else 0.0
    residual = analysis.weak_residual(traj, f, t=0.0)
    budget = 1e-9 if problem.src is None else 10.0 * grid.dt * (1.0 + sigma_mass)
    checks.append(
        {
            "name": "weak_residual_mass_balance",
            "passed": bool(residual <= budget),
            "details": {"residual": residual, "budget": budget},
        }
    )

    # determinism: an identical rerun reproduces the states bit for bit
    rerun = run_semigroup(grid, problem.initial, problem.pvf, problem.src, t_final)
    same = all(a.atoms == b.atoms for a, b in zip(traj.states, rerun.states))
    checks.append({"name": "determinism", "passed": bool(same), "details": {}})

    # Lipschitz dependence on data: perturbed pairs stay within the fitted
    # exponential envelope
    rng = random.Random(seed)
    shift = 0.25 + 0.5 * rng.random()
    mu0 = problem.initial
    nu0 = mu0.pushforward(lambda x: x + shift)
    t_probe = [k / n for k in range(1, len(traj.states), max(1, (len(traj.states) - 1) // 4))]
    probe = analysis.semigroup_probe(problem, [(mu0, nu0)], t_probe, N=n,
                                     adaptive_extent=True)
    flags = [row.flagged for row in probe.rows]
    checks.append(
        {
            "name": "semigroup_lipschitz_probe",
            "passed": bool(not any(flags)),
            "details": {"fitted_c": probe.fitted_c, "rows": len(flags)},
        }
    )
    return checks


def cmd_validate(args) -> int:
    config, config_dir = _load_config(args)
    problem = _build_problem(config, config_dir)
    n = _positive_int(config.get("N", args.N), "N")
    t_final = float(config.get("T", args.T))
    if t_final <= 0:
        raise ConfigError(f"T must be positive, got {t_final}")
    seed = int(config.get("seed", 0))
    checks = _validate_checks(
        problem, n, t_final, seed, bool(config.get("adaptive_extent", False))
    )
    passed = all(c["passed"] for c in checks)
    payload = {
        "problem": problem.name,
        "N": n,
        "T": t_final,
        "seed": seed,
        "checks": checks,
        "passed": passed,
    }
    if not args.no_timestamp:
        payload["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    text = _json_dumps(payload)
    if args.out:
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


# -- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="measureflow",
        description="Lattice scheme and exact transport metrics for atomic measure dynamics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="run configuration JSON")
        p.add_argument("--preset", help="built-in problem: translate | diffusion1d | source-only")
        p.add_argument("--threads", type=int, default=1, help="parallelism degree")
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit timestamps for byte-reproducible outputs")

    p_sim = sub.add_parser("simulate", help="run the lattice scheme, write trajectory CSV")
    add_common(p_sim)
    p_sim.add_argument("--out", required=True, help="trajectory CSV path")
    p_sim.add_argument("--summary", help="summary JSON path (default: OUT.summary.json)")
    p_sim.add_argument("--N", type=int, default=8)
    p_sim.add_argument("--T", type=float, default=1.0)
    p_sim.set_defaults(func=cmd_simulate)

    p_dist = sub.add_parser("distance", help="distance between two measure files")
    p_dist.add_argument("file_a")
    p_dist.add_argument("file_b")
    p_dist.add_argument("--metric", choices=["w1", "gw", "fiber-w", "fiber-wg"],
                        default="w1")
    p_dist.add_argument("--out", help="write JSON here instead of stdout")
    p_dist.set_defaults(func=cmd_distance)

    p_conv = sub.add_parser("convergence", help="multi-level convergence study")
    add_common(p_conv)
    p_conv.add_argument("--out", required=True, help="report JSON path")
    p_conv.add_argument("--csv", help="plot-ready CSV path")
    p_conv.add_argument("--levels", help="comma-separated N list (fallback for N_list)")
    p_conv.add_argument("--T", type=float, default=1.0)
    p_conv.add_argument("--metric", choices=["w1", "gw"], default="gw")
    p_conv.set_defaults(func=cmd_convergence)

    p_val = sub.add_parser("validate", help="run the verification battery")
    add_common(p_val)
    p_val.add_argument("--out", help="report JSON path (default: stdout)")
    p_val.add_argument("--N", type=int, default=8)
    p_val.add_argument("--T", type=float, default=1.0)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MassMismatch) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SupportOverflow as err:
        where = "" if err.step_index is None else f" (step {err.step_index})"
        print(f"error: SupportOverflow{where}: {err}", file=sys.stderr)
        return EXIT_OVERFLOW
    except OSError as err:
        print(f"error: I/O failure: {err}", file=sys.stderr)
        return EXIT_IO
    except MeasureflowError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
