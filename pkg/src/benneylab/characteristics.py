"""Characteristic tracing and slope transport along wave families.

A characteristic of family i is an integral curve of dq/dt = lambda_i(q,t).
Along it the scaled invariant slope z_i = |F''(lambda_i)|^(1/2) (r_i)_q
obeys the Riccati transport dz/dt = -K_i z^2 with
K_i = |F''(lambda_i)|^(-1/2) (lambda_i)_{r_i}, whose closed-form solution

    z(t) = z0 / (1 + z0 * int_{t0}^{t} K ds)

blows up exactly when the denominator reaches zero.  This module traces
curves through interpolated field data (cubic in q, linear in t between
snapshots), evaluates z and K along them, and turns the denominator
crossing into a quantitative blow-up-time prediction.

Predictions from a single snapshot freeze the coefficients (the curve and
K are read from the initial field); supplying a Trajectory re-evaluates
both along the evolving solution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NoBlowupPredictedError, NotHyperbolicError, OutsideHyperbolicError
from .eigenstructure import blowup_batch
from .evolve import Trajectory
from .fields import FieldState, d_dq_array, riemann_fields
from .polycore import (
    DEFAULT_TOL,
    RegimeTolerance,
    classify_batch,
    critical_values_batch,
    discriminant,
    hyperbolic_roots_batch,
)

DEFAULT_PATH_DT = 2e-3
Z_TOL = 1e-7


@dataclass
class CharPath:
    """A traced characteristic with the transported quantities sampled on it."""

    family: int  # 1-based
    times: np.ndarray
    qs: np.ndarray
    lambdas: np.ndarray
    rs: np.ndarray
    z_values: np.ndarray
    K_values: np.ndarray
    predicted_tstar: float | None = None

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "q", "lambda_i", "r_i", "z_i", "K_i"])
            for row in zip(self.times, self.qs, self.lambdas, self.rs,
                           self.z_values, self.K_values):
                writer.writerow([f"{v:.17g}" for v in row])


def _cubic_weights(w: np.ndarray) -> np.ndarray:
    """Lagrange cubic weights on the four nodes at offsets -1, 0, 1, 2."""
    wm1 = -w * (w - 1.0) * (w - 2.0) / 6.0
    w0 = (w + 1.0) * (w - 1.0) * (w - 2.0) / 2.0
    w1 = -(w + 1.0) * w * (w - 2.0) / 2.0
    w2 = (w + 1.0) * w * (w - 1.0) / 6.0
    return np.stack([wm1, w0, w1, w2], axis=-1)


class FieldSampler:
    """Cubic-in-q (periodic), linear-in-t interpolation of snapshot data.

    Accepts a FieldState (frozen coefficients) or a Trajectory.  Grid
    arrays of the invariant slopes (r_i)_q are precomputed per snapshot so
    z can be sampled along paths.
    """

    def __init__(self, source, tol: RegimeTolerance = DEFAULT_TOL):
        if isinstance(source, Trajectory):
            states = source.snapshots
        elif isinstance(source, FieldState):
            states = [source]
        else:
            states = list(source)
        if not states:
            raise ValueError("no snapshots to interpolate")
        self.tol = tol
        self.states = states
        self.times = np.array([s.t for s in states])
        self.n_cells = states[0].grid.n_cells
        self.h = states[0].grid.h
        self._rq = []
        for s in states:
            r, mask = riemann_fields(s, tol)
            rq = d_dq_array(np.where(mask[:, None], r, 0.0), self.h)
            rq[~mask] = np.nan
            self._rq.append(rq)

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def _interp_q(self, arr: np.ndarray, q: np.ndarray) -> np.ndarray:
        s = np.asarray(q) / self.h - 0.5
        j1 = np.floor(s).astype(int)
        w = s - j1
        idx = (j1[..., None] + np.arange(-1, 3)) % self.n_cells
        weights = _cubic_weights(w)
        if arr.ndim == 1:
            return np.sum(arr[idx] * weights, axis=-1)
        return np.einsum("...kc,...k->...c", arr[idx], weights)

    def _bracket(self, t: float):
        if len(self.times) == 1:
            return 0, 0, 0.0
        k = int(np.searchsorted(self.times, t, side="right") - 1)
        k = min(max(k, 0), len(self.times) - 2)
        w = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return k, k + 1, float(np.clip(w, 0.0, 1.0))

    def u_at(self, q: np.ndarray, t: float) -> np.ndarray:
        k0, k1, w = self._bracket(t)
        a = self._interp_q(self.states[k0].U, np.asarray(q) % 1.0)
        if k1 == k0:
            return a
        b = self._interp_q(self.states[k1].U, np.asarray(q) % 1.0)
        return (1.0 - w) * a + w * b

    def rq_at(self, q: np.ndarray, t: float, family_idx: int) -> np.ndarray:
        k0, k1, w = self._bracket(t)
        a = self._interp_q(self._rq[k0][:, family_idx], np.asarray(q) % 1.0)
        if k1 == k0:
            return a
        b = self._interp_q(self._rq[k1][:, family_idx], np.asarray(q) % 1.0)
        return (1.0 - w) * a + w * b


def _speeds_at(sampler: FieldSampler, q: np.ndarray, t: float, family_idx: int):
    """(lambda, hyperbolic mask) of one family at interpolated points."""
    u = np.atleast_2d(sampler.u_at(q, t))
    ok = discriminant(u[:, 0], u[:, 1]) > sampler.tol.eps_disc
    lam = np.full(len(u), np.nan)
    if ok.any():
        lam[ok] = hyperbolic_roots_batch(u[ok, 0], u[ok, 1])[:, family_idx]
    return lam, ok


def _path_data(sampler: FieldSampler, q: np.ndarray, t: float, family_idx: int):
    """lambda, r, z, K of one family at interpolated points (NaN off-regime)."""
    u = np.atleast_2d(sampler.u_at(q, t))
    ok = discriminant(u[:, 0], u[:, 1]) > sampler.tol.eps_disc
    lam = np.full(len(u), np.nan)
    r = np.full(len(u), np.nan)
    z = np.full(len(u), np.nan)
    K = np.full(len(u), np.nan)
    if ok.any():
        lam_all, fpp, K_all = blowup_batch(u[ok, 0], u[ok, 1])
        lam[ok] = lam_all[:, family_idx]
        r[ok] = critical_values_batch(u[ok], lam_all)[:, family_idx]
        rq = sampler.rq_at(np.asarray(q)[ok], t, family_idx)
        z[ok] = np.sqrt(np.abs(fpp[:, family_idx])) * rq
        K[ok] = K_all[:, family_idx]
    return lam, r, z, K, ok


def _rk4_step(sampler, q, t, dt, family_idx):
    def speed(qq, tt):
        lam, ok = _speeds_at(sampler, qq, tt, family_idx)
        return lam, ok

    k1, ok1 = speed(q, t)
    k2, ok2 = speed(q + 0.5 * dt * k1, t + 0.5 * dt)
    k3, ok3 = speed(q + 0.5 * dt * k2, t + 0.5 * dt)
    k4, ok4 = speed(q + dt * k3, t + dt)
    ok = ok1 & ok2 & ok3 & ok4
    return (q + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)) % 1.0, ok


def trace(
    traj,
    family: int,
    q0: float,
    t0: float = 0.0,
    direction: int = 1,
    t_limit: float = 1.0,
    path_dt: float = DEFAULT_PATH_DT,
    tol: RegimeTolerance = DEFAULT_TOL,
) -> CharPath:
    """Trace one characteristic of the given family (1-based) from (q0, t0).

    Integrates dq/dt = lambda_family with RK4 through the interpolated
    field, recording lambda, r, z and K at each sample.  Stops at t_limit,
    at the trajectory's time range, or when the point leaves the strictly
    hyperbolic region.  direction=-1 traces backward in time.
    """
    sampler = traj if isinstance(traj, FieldSampler) else FieldSampler(traj, tol)
    fam = family - 1
    if not 0 <= fam < 3:
        raise ValueError("family must be 1, 2 or 3")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    q = np.array([q0 % 1.0])
    t = float(t0)
    lam, r, z, K, ok = _path_data(sampler, q, t, fam)
    if not ok[0]:
        raise OutsideHyperbolicError(f"seed (q0={q0}, t0={t0}) is not strictly hyperbolic")
    if len(sampler.times) > 1 and not (sampler.t_min <= t0 <= sampler.t_max):
        raise ValueError("t0 outside the trajectory time range")

    times, qs, lams, rs, zs, Ks = [t], [q[0]], [lam[0]], [r[0]], [z[0]], [K[0]]
    dt = direction * abs(path_dt)
    # t_limit is the target time when it lies ahead in the trace direction,
    # otherwise a duration measured from t0
    if (t_limit - t0) * direction > 0:
        horizon = t_limit
    else:
        horizon = t0 + direction * abs(t_limit)
    if len(sampler.times) > 1:
        horizon = (
            min(horizon, sampler.t_max) if direction > 0 else max(horizon, sampler.t_min)
        )
    while (direction > 0 and t + dt <= horizon + 1e-12) or (
        direction < 0 and t + dt >= horizon - 1e-12
    ):
        q_new, ok = _rk4_step(sampler, q, t, dt, fam)
        if not ok[0]:
            break
        t += dt
        q = q_new
        lam, r, z, K, ok = _path_data(sampler, q, t, fam)
        if not ok[0]:
            break
        times.append(t)
        qs.append(q[0])
        lams.append(lam[0])
        rs.append(r[0])
        zs.append(z[0])
        Ks.append(K[0])
    return CharPath(
        family=family,
        times=np.array(times),
        qs=np.array(qs),
        lambdas=np.array(lams),
        rs=np.array(rs),
        z_values=np.array(zs),
        K_values=np.array(Ks),
    )


def z_transport(path_or_times, K_values=None, z0=None, window: float = 0.25):
    """Closed-form slope transport along a path and its blow-up time.

    Accepts a CharPath (z0 taken from its first sample) or explicit
    (times, K_values, z0) arrays.  Returns (z_closed, tstar):
    z(t) = z0 / D(t) with D = 1 + z0 * cumtrapz(K); tstar is the first
    zero of D, linearly interpolated between samples, or linearly
    extrapolated past the path end using the trailing-window average of K
    when that average is stable; None when D never reaches zero.
    """
    if isinstance(path_or_times, CharPath):
        times = path_or_times.times
        K = path_or_times.K_values
        z0 = float(path_or_times.z_values[0])
    else:
        times = np.asarray(path_or_times, dtype=float)
        K = np.asarray(K_values, dtype=float)
        z0 = float(z0)
    if len(times) < 2:
        return np.full(len(times), z0), None
    integral = np.concatenate(
        [[0.0], np.cumsum(0.5 * np.diff(times) * (K[1:] + K[:-1]))]
    )
    D = 1.0 + z0 * integral
    with np.errstate(divide="ignore"):
        z_closed = np.where(D != 0.0, z0 / np.where(D != 0.0, D, 1.0), np.inf)
    if z0 == 0.0:
        return np.zeros_like(D), None

    crossings = np.nonzero((D[:-1] > 0.0) & (D[1:] <= 0.0))[0]
    if len(crossings):
        i = int(crossings[0])
        frac = D[i] / (D[i] - D[i + 1])
        tstar = float(times[i] + frac * (times[i + 1] - times[i]))
        return z_closed, tstar
    # extrapolate with the trailing-window K average, if stable
    span = times[-1] - times[0]
    tail = times >= times[-1] - window * abs(span)
    if tail.sum() >= 2:
        K_tail = K[tail]
        K_avg = float(np.mean(K_tail))
        stable = abs(K_avg) > 0 and float(np.std(K_tail)) <= 0.5 * abs(K_avg)
        if stable and z0 * K_avg < 0.0 and D[-1] > 0.0:
            tstar = float(times[-1] - D[-1] / (z0 * K_avg))
            return z_closed, tstar
    return z_closed, None


def _trace_seeds(sampler, q_seeds, z_seeds, family_idx, t0, t_limit, path_dt):
    """Vectorized forward tracer for many seeds; returns sampled (t, K) arrays.

    Seeds whose curves leave the hyperbolic region keep their last K value
    masked off (integration simply ends for them -- NaN tail).  Integration
    stops at the first denominator crossing among the seeds: later
    crossings and extrapolations can only give larger blow-up times, so
    the minimum is already determined.
    """
    q = np.array(q_seeds, dtype=float)
    z0 = np.array(z_seeds, dtype=float)
    t = float(t0)
    times = [t]
    _, _, _, K, ok0 = _path_data(sampler, q, t, family_idx)
    Ks = [K]
    active = ok0.copy()
    integral = np.zeros_like(q)
    K_prev = K
    dt = abs(path_dt)
    while t + dt <= t_limit + 1e-12:
        q_new, ok = _rk4_step(sampler, q, t, dt, family_idx)
        q = np.where(active & ok, q_new, q)
        t += dt
        _, _, _, K, okd = _path_data(sampler, q, t, family_idx)
        active = active & ok & okd
        Ks.append(np.where(active, K, np.nan))
        times.append(t)
        integral = np.where(active, integral + 0.5 * dt * (K_prev + K), integral)
        K_prev = np.where(active, K, K_prev)
        crossed = active & (1.0 + z0 * integral <= 0.0)
        if crossed.any() or not active.any():
            break
    return np.array(times), np.stack(Ks, axis=0)


def predict_blowup(
    state0: FieldState,
    trajectory: Trajectory | None = None,
    seed_stride: int = 4,
    t_limit: float = 50.0,
    path_dt: float = DEFAULT_PATH_DT,
    z_tol: float = Z_TOL,
    tol: RegimeTolerance = DEFAULT_TOL,
):
    """Minimum blow-up time over characteristics of the extreme families.

    Seeds families 1 and 3 at every seed_stride-th cell of state0.  Only
    the decaying signs escape blow-up (z_1 >= 0 and z_3 <= 0 everywhere);
    if every seed has them, NoBlowupPredictedError is raised.  With only
    state0 given the coefficients are frozen at t0; a supplied Trajectory
    re-evaluates the curves and K along the evolving solution (and
    extrapolates past its end by the trailing K average).

    Returns (tstar_min, family, q0).
    """
    if (classify_batch(state0.U, tol) != 0).any():
        raise NotHyperbolicError("prediction requires every cell strictly hyperbolic")
    source = trajectory if trajectory is not None else state0
    sampler = FieldSampler(source, tol)
    h = state0.grid.h
    r0, _ = riemann_fields(state0, tol)
    rq0 = d_dq_array(r0, h)
    lam0, fpp0, _ = blowup_batch(state0.U[:, 0], state0.U[:, 1])
    z0_all = np.sqrt(np.abs(fpp0)) * rq0

    seeds = np.arange(0, state0.grid.n_cells, seed_stride)
    q_seeds = (seeds + 0.5) * h
    t0 = state0.t
    t_horizon = t0 + t_limit

    best = None
    for family_idx, blowing in ((0, lambda z: z < -z_tol), (2, lambda z: z > z_tol)):
        z0 = z0_all[seeds, family_idx]
        mask = blowing(z0)
        if not mask.any():
            continue
        times, Ks = _trace_seeds(
            sampler, q_seeds[mask], z0[mask], family_idx, t0, t_horizon, path_dt
        )
        for col, (z_start, q_start) in enumerate(zip(z0[mask], q_seeds[mask])):
            K_col = Ks[:, col]
            valid = ~np.isnan(K_col)
            if valid.sum() < 2:
                continue
            _, tstar = z_transport(times[valid], K_col[valid], z_start)
            if tstar is not None and tstar > t0:
                if best is None or tstar < best[0]:
                    best = (float(tstar), family_idx + 1, float(q_start))
    if best is None:
        raise NoBlowupPredictedError(
            "all sampled slopes carry the decaying sign (z1 >= 0, z3 <= 0)"
        )
    return best
