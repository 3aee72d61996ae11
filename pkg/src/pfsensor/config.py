"""Run configuration: a flat key = value text file plus CLI overrides.

Lines are `key = value`; `#` starts a comment line and blank lines are
skipped. Box-valued keys (forbidden_box, occupied_box) may repeat. Every
value a command needs can also be given or overridden on the command line.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .grid import StructuredGrid, ZoneMask, box_mask, empty_mask
from .markov import BoundarySpec
from .tracking import ConstraintSet

Box = tuple[tuple[float, float, float], tuple[float, float, float]]


class ConfigError(ValueError):
    """Raised for unparseable or mutually inconsistent configuration."""


@dataclass
class FieldEntry:
    """One externally supplied flow field with its sample value and weight."""

    path: str
    xi: float
    theta: float


@dataclass
class RunConfig:
    dims: tuple[int, int, int] | None = None
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    diffusivity: float = 0.0
    dt: float | None = None
    steps: int | None = None

    family: str | None = None
    distribution: tuple | None = None  # ("gaussian", mu, sigma) | ("kde", path)
    cdf_points: tuple[float, ...] | None = None
    fields: list[FieldEntry] = dc_field(default_factory=list)

    eps_acc: float = 0.0
    raw_threshold: bool = False
    removal: str = "covered"
    sensors: int | None = None
    min_coverage: float | None = None
    forbidden_boxes: list[Box] = dc_field(default_factory=list)
    occupied_boxes: list[Box] = dc_field(default_factory=list)
    outlets: frozenset[str] = frozenset()
    release_box: Box | None = None
    validate_tol: float = 1e-2
    workers: int = 1
    out: str = "out"
    config_dir: Path = Path(".")

    def grid(self) -> StructuredGrid:
        if self.dims is None:
            raise ConfigError("grid dims not configured")
        return StructuredGrid(self.dims, self.spacing, self.origin)

    def boundaries(self) -> BoundarySpec:
        return BoundarySpec(outlet_sides=self.outlets)

    def constraints(self, grid: StructuredGrid) -> ConstraintSet:
        forbidden = empty_mask(grid)
        for lo, hi in self.forbidden_boxes:
            forbidden = forbidden.union(box_mask(grid, lo, hi))
        if self.occupied_boxes:
            occupied = empty_mask(grid)
            for lo, hi in self.occupied_boxes:
                occupied = occupied.union(box_mask(grid, lo, hi))
            sensing_ignore = occupied.complement()
        else:
            sensing_ignore = empty_mask(grid)
        return ConstraintSet(forbidden_locations=forbidden, sensing_ignore=sensing_ignore)

    def occupied_mask(self, grid: StructuredGrid) -> ZoneMask | None:
        if not self.occupied_boxes:
            return None
        occupied = empty_mask(grid)
        for lo, hi in self.occupied_boxes:
            occupied = occupied.union(box_mask(grid, lo, hi))
        return occupied

    def validate(self) -> None:
        if self.fields and self.family:
            raise ConfigError("give either explicit field entries or a synthetic family")
        if not self.fields and not self.family:
            raise ConfigError("no scenario source: set 'family' or 'field' entries")
        if self.family is not None and self.family != "vortex":
            raise ConfigError(f"unknown synthetic family {self.family!r}")
        if self.family:
            if self.distribution is None or self.cdf_points is None:
                raise ConfigError("synthetic family needs 'distribution' and 'cdf_points'")
        if self.cdf_points is not None and self.distribution is None:
            raise ConfigError("cdf_points given without a distribution")
        if self.fields:
            total = sum(entry.theta for entry in self.fields)
            if abs(total - 1.0) > 1e-9:
                raise ConfigError(f"field weights sum to {total}, expected 1 within 1e-9")
        if self.dt is not None and self.dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.steps is not None and self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if not 0.0 <= self.eps_acc <= 1.0:
            raise ConfigError(f"eps_acc must lie in [0, 1], got {self.eps_acc}")
        if self.removal not in ("covered", "literal"):
            raise ConfigError(f"removal must be 'covered' or 'literal', got {self.removal!r}")
        if self.sensors is not None and self.sensors < 1:
            raise ConfigError(f"sensors must be >= 1, got {self.sensors}")
        if self.min_coverage is not None and not 0.0 < self.min_coverage <= 1.0:
            raise ConfigError(f"min_coverage must lie in (0, 1], got {self.min_coverage}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


def _floats(key: str, raw: str, count: int | None = None) -> tuple[float, ...]:
    parts = raw.split()
    if count is not None and len(parts) != count:
        raise ConfigError(f"{key}: expected {count} numbers, got {raw!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{key}: unparseable number in {raw!r}") from None


def _ints(key: str, raw: str, count: int) -> tuple[int, ...]:
    parts = raw.split()
    if len(parts) != count:
        raise ConfigError(f"{key}: expected {count} integers, got {raw!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{key}: unparseable integer in {raw!r}") from None


def _bool(key: str, raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _box(key: str, raw: str) -> Box:
    vals = _floats(key, raw, 6)
    return (vals[0], vals[1], vals[2]), (vals[3], vals[4], vals[5])


def _distribution(raw: str) -> tuple:
    parts = raw.split()
    if not parts:
        raise ConfigError("distribution: empty specification")
    kind = parts[0].lower()
    if kind == "gaussian":
        if len(parts) != 3:
            raise ConfigError(f"distribution: expected 'gaussian mu sigma', got {raw!r}")
        return ("gaussian", float(parts[1]), float(parts[2]))
    if kind == "kde":
        if len(parts) != 2:
            raise ConfigError(f"distribution: expected 'kde <datafile>', got {raw!r}")
        return ("kde", parts[1])
    raise ConfigError(f"distribution: unknown kind {kind!r}")


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = RunConfig(config_dir=path.parent)
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip().lower()
        raw = raw.strip()
        try:
            _apply(cfg, key, raw)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return cfg


def _apply(cfg: RunConfig, key: str, raw: str) -> None:
    if key == "dims":
        cfg.dims = _ints(key, raw, 3)
    elif key == "spacing":
        cfg.spacing = _floats(key, raw, 3)
    elif key == "origin":
        cfg.origin = _floats(key, raw, 3)
    elif key == "diffusivity":
        (cfg.diffusivity,) = _floats(key, raw, 1)
    elif key == "dt":
        (cfg.dt,) = _floats(key, raw, 1)
    elif key == "steps":
        (cfg.steps,) = _ints(key, raw, 1)
    elif key == "family":
        cfg.family = raw
    elif key == "distribution":
        cfg.distribution = _distribution(raw)
    elif key == "cdf_points":
        cfg.cdf_points = _floats(key, raw)
    elif key == "field":
        parts = raw.rsplit(maxsplit=2)
        if len(parts) != 3:
            raise ConfigError(f"field: expected 'path xi theta', got {raw!r}")
        try:
            cfg.fields.append(FieldEntry(parts[0], float(parts[1]), float(parts[2])))
        except ValueError:
            raise ConfigError(f"field: unparseable numbers in {raw!r}") from None
    elif key == "eps_acc":
        (cfg.eps_acc,) = _floats(key, raw, 1)
    elif key == "raw_threshold":
        cfg.raw_threshold = _bool(key, raw)
    elif key == "removal":
        cfg.removal = raw
    elif key == "sensors":
        (cfg.sensors,) = _ints(key, raw, 1)
    elif key == "min_coverage":
        (cfg.min_coverage,) = _floats(key, raw, 1)
    elif key == "forbidden_box":
        cfg.forbidden_boxes.append(_box(key, raw))
    elif key == "occupied_box":
        cfg.occupied_boxes.append(_box(key, raw))
    elif key == "outlets":
        cfg.outlets = frozenset(raw.split())
    elif key == "release_box":
        cfg.release_box = _box(key, raw)
    elif key == "validate_tol":
        (cfg.validate_tol,) = _floats(key, raw, 1)
    elif key == "workers":
        (cfg.workers,) = _ints(key, raw, 1)
    elif key == "out":
        cfg.out = raw
    else:
        raise ConfigError(f"unknown key {key!r}")
