"""End-to-end orchestration: scenario generation, operator construction,
tracking/threshold/constraint/scaling stages, placement, and report files.

Scenario-level work (operator assembly, tracking pipelines, coverage
vectors) is independent per scenario and optionally runs on a thread pool;
all cross-scenario reductions happen in fixed scenario order so results do
not depend on completion order or worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .flowfield import (
    FlowScenario,
    load_field,
    save_field,
    save_scalar_field,
    synth_recirculating,
)
from .grid import StructuredGrid, box_mask
from .markov import (
    BoundarySpec,
    ConcentrationField,
    MarkovMatrix,
    build_markov,
    load_markov,
    save_markov,
)
from .placement import (
    SensorPlan,
    coverage_vector,
    expected_coverage,
    occupied_fraction,
    place_sensors,
)
from .tracking import (
    ConstraintSet,
    SensorSpec,
    apply_constraints,
    threshold,
    tracking_matrix,
    volumetric_scale,
)
from .uncertainty import Gaussian, cdf_points_for, fit_kde, quadrature_rule

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "pfsensor-manifest v1"


def _map_scenarios(fn, items, workers: int):
    """Order-preserving map, threaded when workers > 1."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def make_distribution(cfg: RunConfig):
    kind = cfg.distribution[0]
    if kind == "gaussian":
        return Gaussian(mu=cfg.distribution[1], sigma=cfg.distribution[2])
    path = Path(cfg.distribution[1])
    if not path.is_absolute():
        path = cfg.config_dir / path
    try:
        data = [float(line) for line in path.read_text().split()]
    except OSError as exc:
        raise ConfigError(f"cannot read KDE data {path}: {exc}") from None
    except ValueError:
        raise ConfigError(f"KDE data {path} contains non-numeric entries") from None
    return fit_kde(data)


def scenario_set(cfg: RunConfig) -> tuple[StructuredGrid, list[FlowScenario]]:
    """Materialize the flow ensemble from the config: either synthesize the
    parametrized family at the quadrature samples or load field files."""
    cfg.validate()
    if cfg.family:
        grid = cfg.grid()
        rule = quadrature_rule(make_distribution(cfg), cfg.cdf_points)
        return grid, [
            FlowScenario(
                field=synth_recirculating(grid, float(xi)),
                diffusivity=cfg.diffusivity,
                sample_value=float(xi),
                weight=float(theta),
            )
            for xi, theta in zip(rule.samples, rule.weights)
        ]
    scenarios = []
    grid = None
    for entry in cfg.fields:
        path = Path(entry.path)
        if not path.is_absolute():
            path = cfg.config_dir / path
        field = load_field(path)
        if grid is None:
            grid = field.grid
        elif field.grid != grid:
            raise ConfigError(f"field {path} uses a different grid")
        scenarios.append(
            FlowScenario(
                field=field,
                diffusivity=cfg.diffusivity,
                sample_value=entry.xi,
                weight=entry.theta,
            )
        )
    if cfg.dims is not None and grid.dims != cfg.dims:
        raise ConfigError(
            f"configured dims {cfg.dims} do not match field dims {grid.dims}"
        )
    return grid, scenarios


def build_matrices(
    scenarios: list[FlowScenario],
    dt: float,
    boundaries: BoundarySpec,
    workers: int = 1,
) -> list[MarkovMatrix]:
    return _map_scenarios(
        lambda sc: build_markov(sc, dt, boundaries), scenarios, workers
    )


def scaled_tracking(
    operator: MarkovMatrix,
    grid: StructuredGrid,
    steps: int,
    spec: SensorSpec,
    constraints: ConstraintSet,
    raw_threshold: bool = False,
):
    """One scenario's tracking -> threshold -> constraints -> scaling chain."""
    q = tracking_matrix(operator, steps)
    binary = threshold(q, spec, raw=raw_threshold)
    constrained = apply_constraints(binary, constraints)
    return volumetric_scale(constrained, grid)


def run_build(cfg: RunConfig, out_dir) -> Path:
    """Write per-scenario operator files plus a manifest; returns its path."""
    if cfg.dt is None:
        raise ConfigError("dt not configured")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid, scenarios = scenario_set(cfg)
    matrices = build_matrices(scenarios, cfg.dt, cfg.boundaries(), cfg.workers)
    entries = []
    for idx, (scenario, operator) in enumerate(zip(scenarios, matrices)):
        matrix_name = f"markov-{idx:03d}.txt"
        field_name = f"field-{idx:03d}.txt"
        save_markov(out / matrix_name, operator)
        save_field(out / field_name, scenario.field)
        entries.append(
            {
                "id": idx,
                "xi": scenario.sample_value,
                "theta": scenario.weight,
                "matrix": matrix_name,
                "field": field_name,
            }
        )
    manifest = {
        "format": MANIFEST_FORMAT,
        "grid": {
            "dims": list(grid.dims),
            "spacing": list(grid.spacing),
            "origin": list(grid.origin),
        },
        "dt": cfg.dt,
        "diffusivity": cfg.diffusivity,
        "outlets": sorted(cfg.outlets),
        "scenarios": entries,
    }
    manifest_path = out / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def load_manifest(path) -> tuple[StructuredGrid, float, list[dict]]:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {path} is not valid JSON: {exc}") from None
    if data.get("format") != MANIFEST_FORMAT:
        raise ConfigError(f"manifest {path} has unknown format {data.get('format')!r}")
    gspec = data["grid"]
    grid = StructuredGrid(
        tuple(gspec["dims"]), tuple(gspec["spacing"]), tuple(gspec["origin"])
    )
    return grid, float(data["dt"]), data["scenarios"]


def load_matrices(manifest_path) -> tuple[StructuredGrid, float, list[dict], list[MarkovMatrix]]:
    manifest_path = Path(manifest_path)
    grid, dt, entries = load_manifest(manifest_path)
    matrices = []
    for entry in entries:
        matrices.append(load_markov(manifest_path.parent / entry["matrix"]))
    return grid, dt, entries, matrices


def run_place(
    cfg: RunConfig,
    grid: StructuredGrid,
    matrices: list[MarkovMatrix],
    weights: list[float],
    xis: list[float],
    out_dir,
) -> tuple[SensorPlan, dict]:
    """Tracking through placement on prebuilt operators; writes the JSON plan
    and the expected / per-sensor coverage map fields."""
    if cfg.steps is None:
        raise ConfigError("steps not configured")
    if cfg.sensors is None and cfg.min_coverage is None:
        raise ConfigError("set a sensor count or a min_coverage target")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = SensorSpec(cfg.eps_acc)
    constraints = cfg.constraints(grid)
    has_exit = matrices[0].n_states == grid.n_states + 1
    if len(constraints.forbidden_locations) >= grid.n_states and not has_exit:
        raise ConfigError("forbidden-location mask excludes every candidate column")
    scaled = _map_scenarios(
        lambda op: scaled_tracking(
            op, grid, cfg.steps, spec, constraints, cfg.raw_threshold
        ),
        matrices,
        cfg.workers,
    )
    vectors = [coverage_vector(m) for m in scaled]
    expected_map = expected_coverage(vectors, weights)

    occupied = cfg.occupied_mask(grid)
    plan = place_sensors(
        scaled,
        weights,
        k=cfg.sensors,
        min_coverage=cfg.min_coverage,
        removal=cfg.removal,
        occupied_volume_fraction=occupied_fraction(occupied) if occupied else None,
    )
    plan.settings.update(
        {
            "steps": cfg.steps,
            "dt": cfg.dt,
            "eps_acc": cfg.eps_acc,
            "threshold_mode": "raw" if cfg.raw_threshold else "scaled",
            "scenario_xis": [float(x) for x in xis],
            "forbidden_states": sorted(constraints.forbidden_locations.member_states),
            "sensing_ignore_states": sorted(constraints.sensing_ignore.member_states),
        }
    )

    plan_doc = plan_document(plan, grid)
    (out / "plan.json").write_text(json.dumps(plan_doc, indent=2) + "\n")
    n = grid.n_states
    save_scalar_field(out / "coverage-expected.txt", grid, expected_map[:n])
    for rank, sensor in enumerate(plan.sensors, start=1):
        save_scalar_field(
            out / f"coverage-sensor-{rank:02d}.txt", grid, sensor.coverage_map[:n]
        )
    return plan, plan_doc


def plan_document(plan: SensorPlan, grid: StructuredGrid) -> dict:
    sensors = []
    for sensor in plan.sensors:
        if sensor.state < grid.n_states:
            ijk = list(grid.ijk_of(sensor.state))
            position = list(grid.cell_center(sensor.state))
        else:
            ijk = None  # absorbing exit state has no cell
            position = None
        sensors.append(
            {
                "state": sensor.state,
                "ijk": ijk,
                "position": position,
                "expected_marginal": sensor.expected_marginal,
                "per_scenario_marginal": [float(v) for v in sensor.per_scenario_marginal],
            }
        )
    return {
        "sensors": sensors,
        "cumulative_expected_coverage": plan.cumulative_expected_coverage,
        "occupied_space_coverage": plan.occupied_space_coverage,
        "truncated": plan.truncated,
        "settings": plan.settings,
    }


def release_field(cfg: RunConfig, grid: StructuredGrid) -> ConcentrationField:
    """Initial contaminant distribution: unit density inside the configured
    release box, or a unit point release at the domain-center cell."""
    values = np.zeros(grid.n_states)
    if cfg.release_box is not None:
        mask = box_mask(grid, *cfg.release_box)
        if not len(mask):
            raise ConfigError("release_box contains no cell centers")
        values[mask.indices()] = 1.0
    else:
        nx, ny, nz = grid.dims
        values[grid.state_index((nx // 2, ny // 2, nz // 2))] = 1.0
    return ConcentrationField(grid, values)


def run_validate(cfg: RunConfig) -> list[dict]:
    """Operator-vs-PDE transport comparison per scenario.

    The reference marches five substeps per operator step so the measured
    gap reflects the operator's own time-stepping error, not the reference's.
    """
    from .pde import compare_transport

    if cfg.dt is None or cfg.steps is None:
        raise ConfigError("validate needs dt and steps")
    if cfg.steps < 1:
        raise ConfigError("validate needs steps >= 1")
    grid, scenarios = scenario_set(cfg)
    phi0 = release_field(cfg, grid)
    results = []
    for idx, scenario in enumerate(scenarios):
        err = compare_transport(
            scenario, phi0, cfg.steps, cfg.dt, fixed_step=cfg.dt / 5.0
        )
        results.append(
            {
                "id": idx,
                "xi": scenario.sample_value,
                "l2_error": err,
                "tolerance": cfg.validate_tol,
                "ok": bool(err <= cfg.validate_tol),
            }
        )
    return results


def expected_coverage_for_counts(cfg: RunConfig, counts: list[int]) -> list[dict]:
    """Expected pre-placement coverage per sample count, with the relative
    norm error of each level against the largest count as reference."""
    if len(counts) < 2:
        raise ConfigError("convergence study needs at least 2 sample counts")
    if sorted(set(counts)) != sorted(counts):
        raise ConfigError("sample counts must be distinct")
    if cfg.dt is None or cfg.steps is None:
        raise ConfigError("convergence study needs dt and steps")
    if not cfg.family:
        raise ConfigError("convergence study needs a synthetic family config")
    ordered = sorted(counts)
    spec = SensorSpec(cfg.eps_acc)
    maps = {}
    for m in ordered:
        sub = _with_cdf_points(cfg, cdf_points_for(m))
        grid, scenarios = scenario_set(sub)
        matrices = build_matrices(scenarios, cfg.dt, cfg.boundaries(), cfg.workers)
        constraints = cfg.constraints(grid)
        scaled = _map_scenarios(
            lambda op: scaled_tracking(
                op, grid, cfg.steps, spec, constraints, cfg.raw_threshold
            ),
            matrices,
            cfg.workers,
        )
        vectors = [coverage_vector(s) for s in scaled]
        maps[m] = expected_coverage(vectors, [sc.weight for sc in scenarios])
    reference = maps[ordered[-1]]
    ref_norm = float(np.linalg.norm(reference))
    rows = []
    for m in ordered:
        if m == ordered[-1]:
            rows.append({"samples": m, "error": None, "reference": True})
            continue
        err = float(np.linalg.norm(maps[m] - reference))
        rows.append(
            {
                "samples": m,
                "error": err / ref_norm if ref_norm > 0.0 else err,
                "reference": False,
            }
        )
    return rows


def _with_cdf_points(cfg: RunConfig, points) -> RunConfig:
    import copy

    sub = copy.copy(cfg)
    sub.cdf_points = tuple(float(p) for p in points)
    return sub
