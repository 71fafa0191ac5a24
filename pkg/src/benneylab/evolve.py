"""Time integration of the quasi-linear system on the periodic grid.

Two first-order schemes integrate U_t + A(U) U_q = 0 directly in
quasi-linear form (the system has no distinguished conservation form):

  central  -- local Lax-Friedrichs-type update
              U_j <- (U_{j-1}+U_{j+1})/2 - (dt/2h) A(U_j)(U_{j+1}-U_{j-1});
              runs in every regime.  In elliptic cells the initial-value
              problem is ill-posed; the stencil viscosity merely damps the
              exponential growth at desk scales, and any trajectory whose
              data enters the elliptic region carries ill_posed_region=True.
  riemann  -- upwind transport of each critical value r_i at its own
              speed, followed by a per-cell Newton inversion back to U;
              requires strict hyperbolicity everywhere and stops with
              RegimeChangeError when a cell leaves it.

Runs stop early when the largest invariant gradient (coefficient gradient
outside the hyperbolic region) exceeds the blow-up threshold; smooth
solutions past gradient blow-up are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import RegimeChangeError
from .fields import FieldState, d_dq_array, riemann_fields
from .polycore import (
    DEFAULT_TOL,
    RegimeTolerance,
    classify_batch,
    critical_values_batch,
    hyperbolic_roots_batch,
    maclane_inverse_batch,
    spectral_radius_batch,
)

GAP_MIN_SCHEME = 1e-6


class StopReason(Enum):
    REACHED_T_END = "reached_t_end"
    BLOWUP_DETECTED = "blowup_detected"
    REGIME_CHANGE_BLOCKED = "regime_change_blocked"


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters for the time integrator."""

    scheme: str = "central"  # "central" | "riemann"
    cfl: float = 0.5
    t_end: float = 1.0
    blowup_threshold: float = 1e3
    snapshot_every: int = 50
    rk2: bool = False  # Heun time stepping for the upwind scheme
    tol: RegimeTolerance = DEFAULT_TOL

    def __post_init__(self):
        if self.scheme not in ("central", "riemann"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError("cfl must lie in (0, 1]")
        if not self.t_end > 0.0:
            raise ValueError("t_end must be positive")
        if not self.blowup_threshold > 0.0:
            raise ValueError("blowup_threshold must be positive")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")


@dataclass
class Trajectory:
    """Result of a run: snapshots plus the stop bookkeeping.

    ill_posed_region flags that some cell was elliptic at some recorded
    time (the evolution there is not a well-posed initial-value problem).
    """

    snapshots: list[FieldState]
    stopped_reason: StopReason = StopReason.REACHED_T_END
    blowup_time_observed: float | None = None
    max_gradient_history: list[tuple[float, float]] = field(default_factory=list)
    ill_posed_region: bool = False

    def summary(self) -> dict:
        return {
            "stopped_reason": self.stopped_reason.value,
            "t_final": self.snapshots[-1].t if self.snapshots else None,
            "blowup_time_observed": self.blowup_time_observed,
            "ill_posed_region": self.ill_posed_region,
            "n_snapshots": len(self.snapshots),
            "max_gradient_history": [[t, g] for t, g in self.max_gradient_history],
        }


def cfl_dt(state: FieldState, cfl: float) -> float:
    """Stable step cfl * h / max_j rho(A(U_j)), clamped to h when the waves
    are slower than the grid (documented clamp for degenerate speeds)."""
    rho = float(np.max(spectral_radius_batch(state.U)))
    h = state.grid.h
    if rho <= 1e-14:
        return h
    return min(cfl * h / rho, h)


def _a_mul(U: np.ndarray, v: np.ndarray) -> np.ndarray:
    """A(U_j) v_j per cell for n=3: rows [0,1,0], [-2u1,0,1], [-u2,0,0]."""
    out = np.empty_like(v)
    out[:, 0] = v[:, 1]
    out[:, 1] = -2.0 * U[:, 0] * v[:, 0] + v[:, 2]
    out[:, 2] = -U[:, 1] * v[:, 0]
    return out


def step_central(state: FieldState, dt: float) -> FieldState:
    """One local Lax-Friedrichs-type step; exact on cell-wise constant data."""
    U = state.U
    up = np.roll(U, -1, axis=0)
    um = np.roll(U, 1, axis=0)
    new = 0.5 * (up + um) - (dt / (2.0 * state.grid.h)) * _a_mul(U, up - um)
    return FieldState(grid=state.grid, t=state.t + dt, U=new)


def _min_root_gap(lam: np.ndarray) -> float:
    return float(np.min(np.diff(lam, axis=1)))


def _upwind_rhs(r: np.ndarray, lam: np.ndarray, h: float) -> np.ndarray:
    """-lambda_i d_q r_i with first-order upwinding per family."""
    out = np.empty_like(r)
    for i in range(r.shape[1]):
        li = lam[:, i]
        back = (r[:, i] - np.roll(r[:, i], 1)) / h
        fwd = (np.roll(r[:, i], -1) - r[:, i]) / h
        out[:, i] = -np.where(li > 0.0, li * back, li * fwd)
    return out


def step_riemann(
    state: FieldState, dt: float, tol: RegimeTolerance = DEFAULT_TOL, rk2: bool = False
) -> FieldState:
    """One upwind step on the critical values, inverted back per cell.

    Every cell must be strictly hyperbolic with root gap above the scheme
    guard; raises RegimeChangeError when the update or its inversion
    leaves the hyperbolic region.
    """
    codes = classify_batch(state.U, tol)
    if (codes != 0).any():
        raise RegimeChangeError(f"{int((codes != 0).sum())} cells are not hyperbolic")
    U = state.U
    h = state.grid.h
    lam = hyperbolic_roots_batch(U[:, 0], U[:, 1])
    if _min_root_gap(lam) <= GAP_MIN_SCHEME:
        raise RegimeChangeError("root gap under scheme guard; treat as boundary")
    r = critical_values_batch(U, lam)

    def invert(r_new, guess):
        u_new, ok = maclane_inverse_batch(r_new, guess, tol_newton=1e-12, tol=tol)
        if not ok.all():
            raise RegimeChangeError(
                f"{int((~ok).sum())} cells left the hyperbolic region during inversion"
            )
        return u_new

    r1 = r + dt * _upwind_rhs(r, lam, h)
    if rk2:
        u_stage = invert(r1, U)
        lam1 = hyperbolic_roots_batch(u_stage[:, 0], u_stage[:, 1])
        if _min_root_gap(lam1) <= GAP_MIN_SCHEME:
            raise RegimeChangeError("root gap under scheme guard at Heun stage")
        r1 = r + 0.5 * dt * (_upwind_rhs(r, lam, h) + _upwind_rhs(r1, lam1, h))
    u_new = invert(r1, U)
    return FieldState(grid=state.grid, t=state.t + dt, U=u_new)


def max_gradient(state: FieldState, tol: RegimeTolerance = DEFAULT_TOL) -> float:
    """Largest |d_q r_i| over hyperbolic cells, |d_q u_i| over the rest.

    The invariant gradients are only evaluated where the whole derivative
    stencil is hyperbolic; elsewhere the coefficient gradients stand in.
    """
    h = state.grid.h
    codes = classify_batch(state.U, tol)
    hyp = codes == 0
    if hyp.all():
        r, _ = riemann_fields(state, tol)
        return float(np.max(np.abs(d_dq_array(r, h))))
    grad = 0.0
    stencil_ok = hyp.copy()
    for shift in (-2, -1, 1, 2):
        stencil_ok &= np.roll(hyp, shift)
    if stencil_ok.any():
        r, _ = riemann_fields(state, tol)
        dr = d_dq_array(np.where(hyp[:, None], r, 0.0), h)
        grad = float(np.max(np.abs(dr[stencil_ok])))
    du = d_dq_array(state.U, h)
    grad = max(grad, float(np.max(np.abs(du[~stencil_ok]))))
    return grad


def run(state0: FieldState, config: SolverConfig) -> Trajectory:
    """Advance to t_end, stopping early on gradient blow-up or regime exit."""
    tol = config.tol
    state = state0
    traj = Trajectory(snapshots=[state0])
    g0 = max_gradient(state0, tol)
    traj.max_gradient_history.append((0.0, g0))
    traj.ill_posed_region = bool((classify_batch(state0.U, tol) == 1).any())
    steps = 0
    while state.t < config.t_end - 1e-14:
        dt = min(cfl_dt(state, config.cfl), config.t_end - state.t)
        try:
            if config.scheme == "riemann":
                state = step_riemann(state, dt, tol, config.rk2)
            else:
                state = step_central(state, dt)
        except RegimeChangeError:
            traj.stopped_reason = StopReason.REGIME_CHANGE_BLOCKED
            break
        except ValueError:
            # the central scheme went non-finite (ill-posed elliptic growth
            # past overflow): unbounded values mean unbounded gradients
            traj.stopped_reason = StopReason.BLOWUP_DETECTED
            traj.blowup_time_observed = state.t
            break
        steps += 1
        if (classify_batch(state.U, tol) == 1).any():
            traj.ill_posed_region = True
        g = max_gradient(state, tol)
        traj.max_gradient_history.append((state.t, g))
        if g > config.blowup_threshold:
            traj.stopped_reason = StopReason.BLOWUP_DETECTED
            traj.blowup_time_observed = state.t
            traj.snapshots.append(state)
            return traj
        if steps % config.snapshot_every == 0:
            traj.snapshots.append(state)
    if traj.snapshots[-1] is not state:
        traj.snapshots.append(state)
    return traj
