"""Command-line pipeline: build / place / validate / converge / propagate.

Exit codes: 0 success, 2 input or parse error, 3 validation tolerance
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, parse_config
from .flowfield import save_scalar_field
from .markov import build_markov, propagate
from .pipeline import (
    expected_coverage_for_counts,
    load_matrices,
    release_field,
    run_build,
    run_place,
    run_validate,
    scenario_set,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_TOLERANCE = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--dt", type=float, help="Markov step in seconds")
    parser.add_argument("--steps", type=int, help="horizon steps m")
    parser.add_argument("--eps-acc", type=float, dest="eps_acc", help="sensor threshold")
    parser.add_argument(
        "--raw-threshold",
        action="store_true",
        default=None,
        help="compare tracking entries to eps_acc directly instead of eps_acc*(m+1)",
    )
    parser.add_argument(
        "--removal",
        choices=("covered", "literal"),
        help="rows struck after placing a sensor: all covered rows, or only its own",
    )
    parser.add_argument("--sensors", type=int, help="number of sensors to place")
    parser.add_argument(
        "--min-coverage", type=float, dest="min_coverage", help="stop at this coverage"
    )
    parser.add_argument("--workers", type=int, help="scenario-level worker threads")
    parser.add_argument("--out", help="output directory")


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config)
    for key in ("dt", "steps", "eps_acc", "removal", "sensors", "min_coverage", "workers", "out"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "raw_threshold", None):
        cfg.raw_threshold = True
    return cfg


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pfsensor",
        description="Transfer-operator sensor placement under flow uncertainty",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", help="build one Markov matrix per flow scenario")
    _add_common(p_build)

    p_place = sub.add_parser("place", help="place sensors from built matrices")
    _add_common(p_place)
    p_place.add_argument(
        "--manifest", help="manifest from a previous build (default: <out>/manifest.json)"
    )

    p_val = sub.add_parser("validate", help="compare operator transport against the PDE solver")
    _add_common(p_val)
    p_val.add_argument("--tolerance", type=float, help="L2 error tolerance")

    p_conv = sub.add_parser("converge", help="expected-coverage convergence in sample count")
    _add_common(p_conv)
    p_conv.add_argument(
        "--samples",
        type=int,
        nargs="+",
        required=True,
        help="sample counts, e.g. --samples 2 3 5 7 9 (largest is the reference)",
    )

    p_prop = sub.add_parser("propagate", help="single-scenario transport demo")
    _add_common(p_prop)
    p_prop.add_argument("--scenario", type=int, default=0, help="scenario index")
    return parser


def cmd_build(args) -> int:
    cfg = _load_config(args)
    manifest = run_build(cfg, cfg.out)
    print(f"wrote {manifest}")
    return EXIT_OK


def cmd_place(args) -> int:
    cfg = _load_config(args)
    manifest = Path(args.manifest) if args.manifest else Path(cfg.out) / "manifest.json"
    if not manifest.exists():
        raise ConfigError(f"manifest {manifest} not found; run build first")
    grid, dt, entries, matrices = load_matrices(manifest)
    cfg.dt = dt  # the loaded matrices carry their own step; echo that one
    plan, doc = run_place(
        cfg,
        grid,
        matrices,
        weights=[e["theta"] for e in entries],
        xis=[e["xi"] for e in entries],
        out_dir=cfg.out,
    )
    for rank, sensor in enumerate(doc["sensors"], start=1):
        print(
            f"sensor {rank}: state {sensor['state']} "
            f"marginal coverage {sensor['expected_marginal']:.6f}"
        )
    print(f"expected coverage: {plan.cumulative_expected_coverage:.6f}")
    if plan.occupied_space_coverage is not None:
        print(f"occupied-space coverage: {plan.occupied_space_coverage:.6f}")
    if plan.truncated:
        print("warning: placement stopped early; remaining coverage is zero")
    print(f"wrote {Path(cfg.out) / 'plan.json'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    if args.tolerance is not None:
        cfg.validate_tol = args.tolerance
    results = run_validate(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "validation.json").write_text(json.dumps(results, indent=2) + "\n")
    worst = 0.0
    for row in results:
        status = "ok" if row["ok"] else "FAIL"
        print(f"scenario {row['id']} (xi={row['xi']}): L2 error {row['l2_error']:.3e} {status}")
        worst = max(worst, row["l2_error"])
    if any(not row["ok"] for row in results):
        print(f"validation failed: worst L2 error {worst:.3e} > {cfg.validate_tol}")
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = _load_config(args)
    rows = expected_coverage_for_counts(cfg, list(args.samples))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "convergence.json").write_text(json.dumps(rows, indent=2) + "\n")
    print(f"{'samples':>8}  {'error vs reference':>20}")
    for row in rows:
        err = "-" if row["reference"] else f"{row['error']:.4f}"
        print(f"{row['samples']:>8}  {err:>20}")
    return EXIT_OK


def cmd_propagate(args) -> int:
    cfg = _load_config(args)
    if cfg.dt is None or cfg.steps is None:
        raise ConfigError("propagate needs dt and steps")
    grid, scenarios = scenario_set(cfg)
    if not 0 <= args.scenario < len(scenarios):
        raise ConfigError(
            f"scenario index {args.scenario} outside [0, {len(scenarios)})"
        )
    scenario = scenarios[args.scenario]
    operator = build_markov(scenario, cfg.dt, cfg.boundaries())
    phi = propagate(release_field(cfg, grid), operator, None, cfg.steps)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"concentration-{args.scenario:03d}.txt"
    save_scalar_field(target, grid, phi.values)
    print(f"total mass after {cfg.steps} steps: {phi.total_mass()!r}")
    print(f"wrote {target}")
    return EXIT_OK


_COMMANDS = {
    "build": cmd_build,
    "place": cmd_place,
    "validate": cmd_validate,
    "converge": cmd_converge,
    "propagate": cmd_propagate,
}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        # covers config/parse errors, format errors and stability violations;
        # StabilityError's message carries the admissible dt
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
