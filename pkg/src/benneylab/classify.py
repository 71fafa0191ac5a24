"""Structure certification of computed trajectories.

A smooth periodic solution must be a traveling profile that is constant
in time with u2 identically zero and u3 - u1^2 constant, equivalently
F = (p^2/2 + u1(q))^2 + const.  This module measures how far a computed
trajectory is from that structure (time residual, u2 residual, square
residual), decides a verdict, and checks the strip geometry: regime
components frozen in time and degenerate cells maximally degenerate.

Classification is pure post-processing over snapshots; blow-up or drift
simply yields the NonClassical verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .evolve import StopReason, Trajectory
from .fields import FieldState, RegimeMap, d_dq_array, regime_map
from .polycore import DEFAULT_TOL, RegimeTolerance


class Verdict(Enum):
    TRAVELING_WAVE = "traveling_wave"
    CONSTANT = "constant"
    NON_CLASSICAL = "non_classical"


@dataclass(frozen=True)
class ClassificationReport:
    """Residuals certifying (or refuting) the traveling-wave structure.

    dt_residual: max |du_i/dt| estimated by snapshot differencing.
    u2_residual: max |u2| over cells and snapshots.
    square_residual: max |u3 - u1^2 - c*| with c* the per-snapshot mean.
    mu_estimate: least-squares wave speed from u2 = -2 mu u1 - mu^3,
        reported only when the time residual suggests a moving profile.
    """

    dt_residual: float
    u2_residual: float
    square_residual: float
    verdict: Verdict
    tolerance: float
    strip_summary: dict = field(default_factory=dict)
    mu_estimate: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "residuals": {
                "dt": self.dt_residual,
                "u2": self.u2_residual,
                "square": self.square_residual,
            },
            "tolerance": self.tolerance,
            "mu_estimate": self.mu_estimate,
            "strip_summary": self.strip_summary,
        }


def f_square_check(state: FieldState) -> float:
    """Pointwise obstruction to F = (p^2/2 + u1)^2 + const.

    Zero exactly when u2 vanishes and u3 - u1^2 is a single constant
    (absorbed by the per-snapshot mean c*).
    """
    u2_res = float(np.max(np.abs(state.U[:, 1])))
    gap = state.U[:, 2] - state.U[:, 0] ** 2
    c_star = float(np.mean(gap))
    return max(u2_res, float(np.max(np.abs(gap - c_star))))


def _estimate_mu(states: list[FieldState]) -> float:
    """Wave speed minimizing sum (u2 + 2 mu u1 + mu^3)^2 over all cells."""
    u1 = np.concatenate([s.U[:, 0] for s in states])
    u2 = np.concatenate([s.U[:, 1] for s in states])

    def badness(mu):
        return float(np.sum((u2 + 2.0 * mu * u1 + mu**3) ** 2))

    grid = np.linspace(-2.0, 2.0, 2001)
    vals = np.array([badness(m) for m in grid])
    k = int(np.argmin(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    for _ in range(60):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if badness(m1) < badness(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def classify_trajectory(
    traj: Trajectory, tol: float, regime_tol: RegimeTolerance = DEFAULT_TOL
) -> ClassificationReport:
    """Residuals and verdict for a computed trajectory.

    Requires at least two snapshots.  A trajectory that blew up or left
    the hyperbolic region is NonClassical regardless of residuals.
    """
    states = traj.snapshots
    if len(states) < 2:
        raise ValueError("need at least two snapshots to classify")

    dt_res = 0.0
    for a, b in zip(states, states[1:]):
        dt_res = max(dt_res, float(np.max(np.abs(b.U - a.U))) / (b.t - a.t))
    u2_res = max(float(np.max(np.abs(s.U[:, 1]))) for s in states)
    sq_res = 0.0
    for s in states:
        gap = s.U[:, 2] - s.U[:, 0] ** 2
        sq_res = max(sq_res, float(np.max(np.abs(gap - np.mean(gap)))))

    spatial_var = max(
        float(np.max(np.ptp(s.U, axis=0))) for s in states
    )

    clean = traj.stopped_reason is StopReason.REACHED_T_END
    residuals_ok = dt_res < tol and u2_res < tol and sq_res < tol
    if clean and residuals_ok and spatial_var < tol:
        verdict = Verdict.CONSTANT
    elif clean and residuals_ok:
        verdict = Verdict.TRAVELING_WAVE
    else:
        verdict = Verdict.NON_CLASSICAL

    mu = None
    if dt_res >= tol and u2_res >= tol:
        mu = float(_estimate_mu(states))

    ok, strip_report = strip_check(traj, regime_tol=regime_tol)
    strip_report["pass"] = ok
    return ClassificationReport(
        dt_residual=dt_res,
        u2_residual=u2_res,
        square_residual=sq_res,
        verdict=verdict,
        tolerance=float(tol),
        strip_summary=strip_report,
        mu_estimate=mu,
    )


def _component_signature(rm: RegimeMap):
    return [(int(start), int(length), reg.value) for start, length, reg in rm.components]


def strip_check(
    traj: Trajectory,
    cell_tolerance: int = 1,
    eps_boundary: float | None = None,
    regime_tol: RegimeTolerance = DEFAULT_TOL,
):
    """Check that regime components form strips frozen in time.

    Passes iff every snapshot shows the same circular regime sequence with
    component boundaries within cell_tolerance cells of the first
    snapshot's, and every degenerate or boundary cell is maximally
    degenerate within eps_boundary (default: 2 h max|d_q u| -- the one-cell
    resolution bound on |u1|, |u2| at a crossing).

    Returns (passed, report_dict).
    """
    states = traj.snapshots
    maps = [regime_map(s, regime_tol) for s in states]
    base = maps[0]
    base_sig = _component_signature(base)
    base_regs = [sig[2] for sig in base_sig]

    report = {
        "n_snapshots": len(states),
        "components_t0": base_sig,
        "max_boundary_shift_cells": 0,
        "stable": True,
        "max_degenerate_violation": 0.0,
        "omega0_equals_omega00": True,
    }

    N = states[0].grid.n_cells
    for rm in maps[1:]:
        sig = _component_signature(rm)
        if [s[2] for s in sig] != base_regs or len(sig) != len(base_sig):
            report["stable"] = False
            continue
        for (s0, _l0, _r0), (s1, _l1, _r1) in zip(base_sig, sig):
            shift = min((s0 - s1) % N, (s1 - s0) % N)
            report["max_boundary_shift_cells"] = max(
                report["max_boundary_shift_cells"], int(shift)
            )

    for state, rm in zip(states, maps):
        h = state.grid.h
        if eps_boundary is None:
            du = d_dq_array(state.U[:, :2], h)
            eps = 2.0 * h * float(np.max(np.abs(du)))
        else:
            eps = eps_boundary
        boundary_cells = set(np.nonzero(rm.codes != np.roll(rm.codes, 1))[0].tolist())
        boundary_cells |= set(
            (int(j) - 1) % N for j in np.nonzero(rm.codes != np.roll(rm.codes, 1))[0]
        )
        boundary_cells |= set(np.nonzero((rm.codes == 2) | (rm.codes == 3))[0].tolist())
        for j in sorted(boundary_cells):
            violation = max(abs(float(state.U[j, 0])), abs(float(state.U[j, 1])))
            if violation > eps:
                report["omega0_equals_omega00"] = False
                report["max_degenerate_violation"] = max(
                    report["max_degenerate_violation"], violation
                )

    passed = (
        report["stable"]
        and report["max_boundary_shift_cells"] <= cell_tolerance
        and report["omega0_equals_omega00"]
    )
    return passed, report
