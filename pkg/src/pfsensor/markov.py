"""Discrete transfer operator: flux-built Markov matrices and propagation.

The operator is assembled cell by cell from donor-cell (upwind) advective
fluxes and central diffusive fluxes, so every off-diagonal entry is a
non-negative transfer probability and every row sums to one. Domain
boundaries are closed by default; sides marked as outlets route their
advective outflow into one extra absorbing exit state appended after the
grid states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .flowfield import FlowScenario
from .grid import StructuredGrid

MARKOV_MAGIC = "# pfsensor-markov v1"

ROW_SUM_TOL = 1e-12

_SIDES = ("x-", "x+", "y-", "y+", "z-", "z+")


class StabilityError(ValueError):
    """Markov step too large for the flux rates; carries the largest stable step."""

    def __init__(self, dt: float, admissible_dt: float):
        super().__init__(
            f"dt = {dt} violates the stability bound; "
            f"largest admissible dt = {admissible_dt}"
        )
        self.admissible_dt = float(admissible_dt)


class MatrixFormatError(ValueError):
    """Raised when a matrix file cannot be parsed or fails row-sum validation."""


@dataclass(frozen=True)
class BoundarySpec:
    """Which domain sides behave as absorbing outlets; all others are closed."""

    outlet_sides: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        bad = self.outlet_sides - set(_SIDES)
        if bad:
            raise ValueError(f"unknown boundary sides {sorted(bad)}; valid: {_SIDES}")

    @property
    def has_exit(self) -> bool:
        return bool(self.outlet_sides)


CLOSED = BoundarySpec()


@dataclass(frozen=True, eq=False)
class MarkovMatrix:
    """Row-stochastic transition matrix over grid states for one step dt."""

    matrix: sparse.csr_array
    dt: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "dt", float(self.dt))
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        n, m = self.matrix.shape
        if n != m:
            raise ValueError(f"matrix must be square, got shape {self.matrix.shape}")

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def validate(self, tol: float = ROW_SUM_TOL) -> None:
        data = self.matrix.data
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValueError("matrix entries outside [0, 1]")
        drift = np.abs(self.row_sums() - 1.0)
        if drift.size and drift.max() > tol:
            raise ValueError(f"row sums deviate from 1 by up to {drift.max():.3e}")


@dataclass(frozen=True, eq=False)
class ConcentrationField:
    """Per-state contaminant density (dimensionless mass fraction)."""

    grid: StructuredGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        n = self.grid.n_states
        if self.values.shape != (n,):
            raise ValueError(f"values have shape {self.values.shape}, expected ({n},)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("concentration contains non-finite values")
        if np.any(self.values < 0.0):
            raise ValueError("concentration must be non-negative")

    def total_mass(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True, eq=False)
class SourceTerm:
    """Per-state release added each Markov step (mass per step)."""

    grid: StructuredGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        n = self.grid.n_states
        if self.values.shape != (n,):
            raise ValueError(f"values have shape {self.values.shape}, expected ({n},)")
        if np.any(self.values < 0.0) or not np.all(np.isfinite(self.values)):
            raise ValueError("source values must be finite and non-negative")


def _outflow_rates(
    scenario: FlowScenario, boundaries: BoundarySpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Off-diagonal volumetric transfer rates (volume/second).

    Returns COO triplets (rows, cols, rates) and the matrix size, which is
    N + 1 when any side is an outlet (the extra absorbing exit state).
    Advective rates use the upwind side of the two-point face mean; diffusive
    rates are D * A_face / center distance.
    """
    grid = scenario.field.grid
    nx, ny, nz = grid.dims
    dx, dy, dz = grid.spacing
    diff = scenario.diffusivity
    n = grid.n_states

    state = np.arange(n).reshape(nz, ny, nx)  # [l, j, i], x fastest
    comps = {
        "x": scenario.field.u.reshape(nz, ny, nx),
        "y": scenario.field.v.reshape(nz, ny, nx),
        "z": scenario.field.w.reshape(nz, ny, nx),
    }
    face_area = {"x": dy * dz, "y": dx * dz, "z": dx * dy}
    center_dist = {"x": dx, "y": dy, "z": dz}
    axis_of = {"x": 2, "y": 1, "z": 0}

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    rates: list[np.ndarray] = []

    for name in ("x", "y", "z"):
        ax = axis_of[name]
        if state.shape[ax] < 2:
            continue
        comp = comps[name]
        lo_slice = [slice(None)] * 3
        hi_slice = [slice(None)] * 3
        lo_slice[ax] = slice(0, -1)
        hi_slice[ax] = slice(1, None)
        k_lo = state[tuple(lo_slice)].ravel()
        k_hi = state[tuple(hi_slice)].ravel()
        u_face = 0.5 * (comp[tuple(lo_slice)].ravel() + comp[tuple(hi_slice)].ravel())
        area = face_area[name]
        g = diff * area / center_dist[name]
        rows.append(k_lo)
        cols.append(k_hi)
        rates.append(np.maximum(u_face, 0.0) * area + g)
        rows.append(k_hi)
        cols.append(k_lo)
        rates.append(np.maximum(-u_face, 0.0) * area + g)

    size = n
    if boundaries.has_exit:
        size = n + 1
        exit_state = n
        for side in sorted(boundaries.outlet_sides):
            name, sign = side[0], side[1]
            ax = axis_of[name]
            sl = [slice(None)] * 3
            sl[ax] = -1 if sign == "+" else 0
            k_bnd = state[tuple(sl)].ravel()
            u_bnd = comps[name][tuple(sl)].ravel()
            outward = u_bnd if sign == "+" else -u_bnd
            rate = np.maximum(outward, 0.0) * face_area[name]
            rows.append(k_bnd)
            cols.append(np.full(k_bnd.shape, exit_state))
            rates.append(rate)

    if rows:
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(rates), size
    empty = np.empty(0, dtype=np.int64)
    return empty, empty, np.empty(0), size


def admissible_dt(scenario: FlowScenario, boundaries: BoundarySpec = CLOSED) -> float:
    """Largest Markov step for which every diagonal entry stays non-negative:
    min_i V_i / (sum of outgoing volumetric rates of cell i).

    Returns inf when nothing moves (zero velocity and zero diffusivity).
    """
    grid = scenario.field.grid
    rows, _, rates, size = _outflow_rates(scenario, boundaries)
    total = np.zeros(size)
    np.add.at(total, rows, rates)
    total = total[: grid.n_states]  # exit state has no outflow
    peak = total.max() if total.size else 0.0
    if peak <= 0.0:
        return float("inf")
    return float(grid.cell_volume / peak)


def build_markov(
    scenario: FlowScenario, dt: float, boundaries: BoundarySpec = CLOSED
) -> MarkovMatrix:
    """Assemble the one-step transition matrix for a flow scenario.

    Raises StabilityError (carrying the admissible step) when dt makes any
    diagonal entry negative. Rows whose off-diagonal sum exceeds 1 by at most
    1e-12, a rounding artifact at marginal stability, are rescaled so a
    rebuild at the reported admissible dt always succeeds.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid = scenario.field.grid
    rows, cols, rates, size = _outflow_rates(scenario, boundaries)
    vol = grid.cell_volume

    probs = rates * (dt / vol)
    off = sparse.coo_array((probs, (rows, cols)), shape=(size, size)).tocsr()
    off.sum_duplicates()
    row_sum = np.asarray(off.sum(axis=1)).ravel()
    if boundaries.has_exit:
        row_sum[-1] = 0.0  # absorbing exit row only holds its diagonal

    overshoot = row_sum.max() - 1.0 if row_sum.size else -1.0
    if overshoot > ROW_SUM_TOL:
        interior = row_sum[: grid.n_states]
        raise StabilityError(dt, dt / interior.max())
    if overshoot > 0.0:
        hot = np.flatnonzero(row_sum > 1.0)
        scale = np.ones(size)
        scale[hot] = 1.0 / row_sum[hot]
        off = sparse.csr_array(sparse.diags_array(scale) @ off)
        row_sum[hot] = 1.0

    diag = 1.0 - row_sum
    if boundaries.has_exit:
        diag[-1] = 1.0
    matrix = sparse.csr_array(off + sparse.diags_array(diag))
    return MarkovMatrix(matrix=matrix, dt=dt)


def propagate(
    phi: ConcentrationField,
    operator: MarkovMatrix,
    source: SourceTerm | None = None,
    steps: int = 1,
) -> ConcentrationField:
    """Apply phi <- phi P + source for the given number of steps.

    With an exit-state operator (n_states = N + 1) the concentration vector
    is padded with a zero exit entry and the returned field keeps only the
    grid states; mass absorbed at the outlet simply leaves the domain.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    n_grid = phi.grid.n_states
    n_op = operator.n_states
    if n_op not in (n_grid, n_grid + 1):
        raise ValueError(
            f"operator size {n_op} does not match grid with {n_grid} states"
        )
    if source is not None and source.grid.n_states != n_grid:
        raise ValueError("source grid does not match concentration grid")

    vec = phi.values.astype(float, copy=True)
    src = source.values if source is not None else None
    if n_op == n_grid + 1:
        vec = np.append(vec, 0.0)
        if src is not None:
            src = np.append(src, 0.0)
    mat = operator.matrix
    for _ in range(steps):
        vec = vec @ mat
        if src is not None:
            vec = vec + src
    return ConcentrationField(phi.grid, vec[:n_grid].copy())


def expected_operator(weighted: list[tuple[MarkovMatrix, float]]) -> MarkovMatrix:
    """Probability-weighted sum of per-scenario operators; the convex
    combination of row-stochastic matrices is again row-stochastic."""
    if not weighted:
        raise ValueError("need at least one (matrix, weight) pair")
    first, _ = weighted[0]
    total_weight = 0.0
    for mat, theta in weighted:
        if mat.n_states != first.n_states:
            raise ValueError("matrices differ in size")
        if mat.dt != first.dt:
            raise ValueError("matrices differ in dt")
        if theta < 0.0:
            raise ValueError(f"weights must be non-negative, got {theta}")
        total_weight += theta
    if abs(total_weight - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {total_weight}, expected 1 within 1e-9")
    acc = sum(theta * mat.matrix for mat, theta in weighted)
    return MarkovMatrix(matrix=sparse.csr_array(acc), dt=first.dt)


def save_markov(path, operator: MarkovMatrix) -> None:
    mat = operator.matrix.tocoo()
    lines = [MARKOV_MAGIC, f"{operator.n_states} {mat.nnz} {operator.dt!r}"]
    order = np.lexsort((mat.coords[1], mat.coords[0]))
    for r, c, val in zip(mat.coords[0][order], mat.coords[1][order], mat.data[order]):
        lines.append(f"{r} {c} {float(val)!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_markov(path) -> MarkovMatrix:
    """Read a matrix file and validate row-stochasticity."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != MARKOV_MAGIC:
        raise MatrixFormatError(f"{path}:1: missing magic line {MARKOV_MAGIC!r}")
    if len(lines) < 2:
        raise MatrixFormatError(f"{path}:2: truncated header")
    parts = lines[1].split()
    if len(parts) != 3:
        raise MatrixFormatError(f"{path}:2: expected 'n_states nnz dt', got {lines[1]!r}")
    try:
        n_states, nnz = int(parts[0]), int(parts[1])
        dt = float(parts[2])
    except ValueError:
        raise MatrixFormatError(f"{path}:2: unparseable header {lines[1]!r}") from None
    records = [ln for ln in lines[2:] if ln.strip()]
    if len(records) != nnz:
        raise MatrixFormatError(
            f"{path}:{len(lines)}: expected {nnz} entries, found {len(records)}"
        )
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    for idx, line in enumerate(records):
        tok = line.split()
        if len(tok) != 3:
            raise MatrixFormatError(f"{path}:{3 + idx}: expected 'row col value', got {line!r}")
        try:
            rows[idx], cols[idx], vals[idx] = int(tok[0]), int(tok[1]), float(tok[2])
        except ValueError:
            raise MatrixFormatError(f"{path}:{3 + idx}: unparseable entry {line!r}") from None
    if nnz and (rows.min() < 0 or rows.max() >= n_states or cols.min() < 0 or cols.max() >= n_states):
        raise MatrixFormatError(f"{path}: entry index outside [0, {n_states})")
    matrix = sparse.coo_array((vals, (rows, cols)), shape=(n_states, n_states)).tocsr()
    op = MarkovMatrix(matrix=matrix, dt=dt)
    try:
        op.validate()
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: {exc}") from None
    return op
