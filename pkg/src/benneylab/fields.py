"""Periodic coefficient fields on the unit circle.

A FieldState holds the coefficient columns U(q_j) at the cell centers
q_j = (j + 1/2)/N of a periodic grid, at one instant.  This module
samples the built-in initial-data families, provides the fourth-order
periodic derivative used by all diagnostics, classifies cells into
hyperbolic / elliptic / degenerate components, extracts the critical
values where they exist, and serializes snapshots to CSV.

Initial-data descriptions are one-line strings:

    constant: u1=-0.5 u2=0 u3=0
    traveling: amplitude=0.1 offset=-0.3 const=0
    perturbed: amplitude=0.1 offset=-0.3 const=0 delta=0.05
    elliptic-bump: amplitude=0.2 offset=0 const=0
    custom-table: path=initial.csv

The traveling family u1 = offset - amplitude*cos(2 pi q), u2 = 0,
u3 = u1^2 + const is an exact stationary solution; "perturbed" adds
u2 = delta*sin(2 pi q); "elliptic-bump" is the same square structure
with a sign-changing u1, stationary but crossing the elliptic region.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import BadSpecError
from .polycore import (
    DEFAULT_TOL,
    REGIME_BY_CODE,
    Regime,
    RegimeTolerance,
    classify_batch,
    critical_values_batch,
    eigen_data,
    hyperbolic_roots_batch,
)


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on [0, 1) with at least 8 cells."""

    n_cells: int

    def __post_init__(self):
        if self.n_cells < 8:
            raise ValueError("grid needs at least 8 cells")

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    def cell_centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.h


@dataclass(frozen=True)
class FieldState:
    """Immutable snapshot of the coefficient field at time t."""

    grid: TorusGrid
    t: float
    U: np.ndarray  # (n_cells, n)

    def __post_init__(self):
        U = np.array(self.U, dtype=float)
        if U.ndim != 2 or U.shape[0] != self.grid.n_cells:
            raise ValueError("field shape does not match grid")
        if not np.all(np.isfinite(U)):
            raise ValueError("field values must be finite")
        U.flags.writeable = False
        object.__setattr__(self, "U", U)

    @property
    def n(self) -> int:
        return self.U.shape[1]


@dataclass(frozen=True)
class RegimeMap:
    """Per-cell regime codes plus the circular component decomposition.

    components are (start, length, Regime) with start the first cell
    index of a maximal circular run; degenerate_pairs maps degenerate
    cell indices to the colliding speed pair ((1,2), (2,3) or "all").
    """

    codes: np.ndarray
    components: list
    degenerate_pairs: dict = field(default_factory=dict)

    def adjacency(self) -> list:
        regs = [c[2] for c in self.components]
        k = len(regs)
        if k <= 1:
            return []
        return [(regs[i], regs[(i + 1) % k]) for i in range(k)]


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------


def _family_constant(q, u1=-0.5, u2=0.0, u3=0.0):
    N = len(q)
    return np.column_stack([np.full(N, u1), np.full(N, u2), np.full(N, u3)])


def _family_traveling(q, amplitude=0.1, offset=-0.3, const=0.0):
    u1 = offset - amplitude * np.cos(2.0 * np.pi * q)
    return np.column_stack([u1, np.zeros_like(q), u1**2 + const])


def _family_perturbed(q, amplitude=0.1, offset=-0.3, const=0.0, delta=0.05):
    U = _family_traveling(q, amplitude, offset, const)
    U[:, 1] = delta * np.sin(2.0 * np.pi * q)
    return U


def _family_elliptic_bump(q, amplitude=0.2, offset=0.0, const=0.0):
    u1 = offset + amplitude * np.cos(2.0 * np.pi * q)
    return np.column_stack([u1, np.zeros_like(q), u1**2 + const])


def _family_custom_table(q, path=None):
    if path is None:
        raise BadSpecError("custom-table needs path=<csv with q,u1,u2,u3>")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1)
    except OSError as exc:
        raise BadSpecError(f"cannot read table {path!r}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] < 4:
        raise BadSpecError("table must have columns q,u1,u2,u3")
    qt = data[:, 0]
    order = np.argsort(qt)
    qt = qt[order]
    cols = []
    for c in range(1, 4):
        vals = data[order, c]
        # periodic linear interpolation onto the cell centers
        qs = np.concatenate([qt, [qt[0] + 1.0]])
        vs = np.concatenate([vals, [vals[0]]])
        cols.append(np.interp(q, qs, vs, period=1.0))
    return np.column_stack(cols)


FAMILIES = {
    "constant": _family_constant,
    "traveling": _family_traveling,
    "perturbed": _family_perturbed,
    "elliptic-bump": _family_elliptic_bump,
    "custom-table": _family_custom_table,
}


@dataclass(frozen=True)
class InitialData:
    """Parsed initial-data description (family name plus parameters)."""

    family: str
    params: dict

    def evaluate(self, q: np.ndarray) -> np.ndarray:
        return FAMILIES[self.family](q, **self.params)


def parse_initial_spec(text: str) -> InitialData:
    """Parse a one-line description like 'traveling: amplitude=0.1 offset=-0.3'."""
    if ":" in text:
        family, _, rest = text.partition(":")
    else:
        family, rest = text, ""
    family = family.strip().lower()
    if family not in FAMILIES:
        raise BadSpecError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    params = {}
    for token in rest.split():
        if "=" not in token:
            raise BadSpecError(f"malformed parameter {token!r} (expected key=value)")
        key, _, value = token.partition("=")
        if family == "custom-table" and key == "path":
            params[key] = value
        else:
            try:
                params[key] = float(value)
            except ValueError as exc:
                raise BadSpecError(f"non-numeric value in {token!r}") from exc
    try:
        probe_q = np.array([0.0, 0.5])
        FAMILIES[family](probe_q, **params)
    except TypeError as exc:
        raise BadSpecError(f"bad parameters for family {family!r}: {exc}") from exc
    return InitialData(family=family, params=params)


def sample_field(spec, grid: TorusGrid) -> FieldState:
    """Evaluate an initial-data description at the cell centers (t = 0)."""
    if isinstance(spec, str):
        spec = parse_initial_spec(spec)
    U = spec.evaluate(grid.cell_centers())
    return FieldState(grid=grid, t=0.0, U=U)


# ---------------------------------------------------------------------------
# derivatives and per-cell structure
# ---------------------------------------------------------------------------


def d_dq_array(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order periodic central difference along axis 0."""
    return (
        -np.roll(f, -2, axis=0)
        + 8.0 * np.roll(f, -1, axis=0)
        - 8.0 * np.roll(f, 1, axis=0)
        + np.roll(f, 2, axis=0)
    ) / (12.0 * h)


def d_dq(state: FieldState, component: int) -> np.ndarray:
    """Spatial derivative of one coefficient component."""
    return d_dq_array(state.U[:, component], state.grid.h)


def regime_map(state: FieldState, tol: RegimeTolerance = DEFAULT_TOL) -> RegimeMap:
    """Classify every cell and decompose the circle into regime components."""
    codes = classify_batch(state.U, tol)
    components = _circular_components(codes)
    pairs = {}
    for j in np.nonzero((codes == 2) | (codes == 3))[0]:
        if codes[j] == 3:
            pairs[int(j)] = "all"
            continue
        lam = np.sort(np.asarray(eigen_data(state.U[j], tol).lambdas))
        gaps = np.abs(np.diff(lam.real)) + np.abs(np.diff(lam.imag))
        pairs[int(j)] = (1, 2) if gaps[0] <= gaps[1] else (2, 3)
    return RegimeMap(codes=codes, components=components, degenerate_pairs=pairs)


def _circular_components(codes: np.ndarray) -> list:
    N = len(codes)
    if np.all(codes == codes[0]):
        return [(0, N, REGIME_BY_CODE[int(codes[0])])]
    # rotate so a boundary sits at index 0, then split into runs
    starts = np.nonzero(codes != np.roll(codes, 1))[0]
    first = int(starts[0])
    rotated = np.roll(codes, -first)
    comps = []
    run_start = 0
    for j in range(1, N + 1):
        if j == N or rotated[j] != rotated[run_start]:
            comps.append(
                (
                    (run_start + first) % N,
                    j - run_start,
                    REGIME_BY_CODE[int(rotated[run_start])],
                )
            )
            run_start = j
    return comps


def riemann_fields(state: FieldState, tol: RegimeTolerance = DEFAULT_TOL):
    """Critical values r per cell where strictly hyperbolic, NaN elsewhere.

    Returns (r, mask) with r of shape (n_cells, 3) and mask True on
    hyperbolic cells.
    """
    codes = classify_batch(state.U, tol)
    mask = codes == 0
    r = np.full((state.grid.n_cells, 3), np.nan)
    if mask.any():
        lam = hyperbolic_roots_batch(state.U[mask, 0], state.U[mask, 1])
        r[mask] = critical_values_batch(state.U[mask], lam)
    return r, mask


# ---------------------------------------------------------------------------
# CSV serialization: columns t,q,u1,u2,u3,regime,r1,r2,r3
# ---------------------------------------------------------------------------

SNAPSHOT_HEADER = ["t", "q", "u1", "u2", "u3", "regime", "r1", "r2", "r3"]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_snapshot_rows(fh, states, tol: RegimeTolerance) -> None:
    writer = csv.writer(fh)
    writer.writerow(SNAPSHOT_HEADER)
    for state in states:
        q = state.grid.cell_centers()
        codes = classify_batch(state.U, tol)
        r, mask = riemann_fields(state, tol)
        for j in range(state.grid.n_cells):
            row = [_fmt(state.t), _fmt(q[j])]
            row += [_fmt(v) for v in state.U[j]]
            row.append(REGIME_BY_CODE[int(codes[j])].value)
            if mask[j]:
                row += [_fmt(v) for v in r[j]]
            else:
                row += ["", "", ""]
            writer.writerow(row)


def write_snapshots_csv(states, path, tol: RegimeTolerance = DEFAULT_TOL) -> None:
    """Write one or more snapshots; r columns are blank outside the
    hyperbolic region."""
    with open(path, "w", newline="") as fh:
        _write_snapshot_rows(fh, states, tol)


def read_snapshots_csv(path) -> list[FieldState]:
    """Rebuild the snapshot list from the CSV format above."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:6] != SNAPSHOT_HEADER[:6]:
            raise BadSpecError(f"unexpected snapshot header {header!r}")
        rows = [row for row in reader if row]
    if not rows:
        return []
    by_t: dict[float, list] = {}
    order: list[float] = []
    for row in rows:
        t = float(row[0])
        if t not in by_t:
            by_t[t] = []
            order.append(t)
        by_t[t].append((float(row[1]), [float(row[2]), float(row[3]), float(row[4])]))
    states = []
    for t in order:
        cells = by_t[t]
        grid = TorusGrid(len(cells))
        U = np.array([u for _, u in sorted(cells, key=lambda item: item[0])])
        states.append(FieldState(grid=grid, t=t, U=U))
    return states


def snapshots_csv_text(states, tol: RegimeTolerance = DEFAULT_TOL) -> str:
    """The CSV serialization as a string (used by tests and small reports)."""
    buf = io.StringIO(newline="")
    _write_snapshot_rows(buf, states, tol)
    return buf.getvalue()
