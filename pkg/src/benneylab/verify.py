"""Independent finite-difference oracles for the derivative calculus.

Every identity the analytic layer computes in closed form is re-derived
here by central differences in the critical-value coordinates: perturb
r by +-h along one axis, invert the coordinate map by Newton, re-extract
roots, and difference.  Nothing in this module reuses the closed-form
derivative expressions, so agreement is evidence rather than tautology.

The identity suite samples strictly hyperbolic points in a box, runs all
checks, and aggregates per-identity error reports; it is deterministic
for a fixed seed and serializes to JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NewtonDivergedError, NotAdmissibleError, StepTooLargeError
from .eigenstructure import derivative_table
from .polycore import (
    DEFAULT_TOL,
    RegimeTolerance,
    as_coeff,
    build_poly,
    discriminant,
    eigen_data,
    hyperbolic_roots_batch,
    maclane_forward,
    maclane_inverse,
    matrix_A,
)

_INVERSE_TOL = 1e-14

# Perturbing one critical value by more than this fraction of the smallest
# adjacent r-gap puts the central-difference pair onto the cone boundary.
_MAX_STEP_FRACTION = 0.45

# Accuracy caps used by the suite when shrinking steps near the boundary.
_FIRST_GAP_FRACTION = 0.005
_SECOND_GAP_FRACTION = 0.005


@dataclass(frozen=True)
class OracleReport:
    """Aggregated error of one identity over a sample set."""

    identity: str
    max_rel_err: float
    max_abs_err: float
    worst_sample: list
    n_samples: int
    tolerance: float
    metric: str  # "rel" or "abs"
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "identity": self.identity,
            "max_rel_err": self.max_rel_err,
            "max_abs_err": self.max_abs_err,
            "worst_sample": self.worst_sample,
            "n_samples": self.n_samples,
            "tolerance": self.tolerance,
            "metric": self.metric,
            "pass": self.passed,
        }


def _effective_step(r: np.ndarray, h: float) -> float:
    """Step h scaled by max(1, ||r||_inf); refuses steps that leave the cone."""
    step = h * max(1.0, float(np.max(np.abs(r))))
    gaps = np.abs(np.diff(r))
    if gaps.size and step > _MAX_STEP_FRACTION * float(np.min(gaps)):
        raise StepTooLargeError(
            f"step {step:.3e} exceeds {_MAX_STEP_FRACTION:g} of the smallest "
            f"critical-value gap {float(np.min(gaps)):.3e}"
        )
    return step


def _invert(r: np.ndarray, u_base, tol: RegimeTolerance):
    try:
        return maclane_inverse(r, u_base, tol_newton=_INVERSE_TOL, tol=tol)
    except (NotAdmissibleError, NewtonDivergedError) as exc:
        raise StepTooLargeError(f"perturbed target left the hyperbolic image: {exc}") from exc


class _AxisStates:
    """Inverted states at r +- step e_j for every axis, shared by the oracles."""

    def __init__(self, u, step: float, tol: RegimeTolerance):
        cv = as_coeff(u)
        self.base = cv
        self.tol = tol
        self.r0 = maclane_forward(cv, tol)
        self.step = float(step)
        self.plus = []
        self.minus = []
        for j in range(cv.n):
            e = np.zeros(cv.n)
            e[j] = self.step
            self.plus.append(_invert(self.r0 + e, cv, tol))
            self.minus.append(_invert(self.r0 - e, cv, tol))

    def lambda_derivs(self) -> np.ndarray:
        cols = []
        for j in range(self.base.n):
            lp = np.asarray(eigen_data(self.plus[j], self.tol).lambdas, dtype=float)
            lm = np.asarray(eigen_data(self.minus[j], self.tol).lambdas, dtype=float)
            cols.append((lp - lm) / (2.0 * self.step))
        return np.stack(cols, axis=1)

    def u_derivs(self) -> np.ndarray:
        return np.array(
            [
                (self.plus[j].u[0] - self.minus[j].u[0]) / (2.0 * self.step)
                for j in range(self.base.n)
            ]
        )

    def u_second_derivs(self) -> np.ndarray:
        n = self.base.n
        u_rr = np.empty((n, n))
        for i in range(n):
            u_rr[i, i] = (
                self.plus[i].u[0] - 2.0 * self.base.u[0] + self.minus[i].u[0]
            ) / self.step**2
        for i in range(n):
            for k in range(i + 1, n):
                ei = np.zeros(n)
                ek = np.zeros(n)
                ei[i] = self.step
                ek[k] = self.step
                fpp_ = _invert(self.r0 + ei + ek, self.base, self.tol).u[0]
                fpm = _invert(self.r0 + ei - ek, self.base, self.tol).u[0]
                fmp = _invert(self.r0 - ei + ek, self.base, self.tol).u[0]
                fmm = _invert(self.r0 - ei - ek, self.base, self.tol).u[0]
                u_rr[i, k] = u_rr[k, i] = (fpp_ - fpm - fmp + fmm) / (4.0 * self.step**2)
        return u_rr

    def potential_derivs(self) -> np.ndarray:
        def potentials(state):
            lam = np.asarray(eigen_data(state, self.tol).lambdas, dtype=float)
            return 0.5 * np.log(np.abs(build_poly(state).fpp(lam)))

        cols = [
            (potentials(self.plus[j]) - potentials(self.minus[j])) / (2.0 * self.step)
            for j in range(self.base.n)
        ]
        return np.stack(cols, axis=1)

    def lagrange_derivs(self) -> np.ndarray:
        lam0 = np.asarray(eigen_data(self.base, self.tol).lambdas, dtype=float)
        cols = []
        for j in range(self.base.n):
            fp_vals = build_poly(self.plus[j])(lam0)
            fm_vals = build_poly(self.minus[j])(lam0)
            cols.append((fp_vals - fm_vals) / (2.0 * self.step))
        return np.stack(cols, axis=1)


def fd_lambda_derivs(u, h: float = 1e-5, tol: RegimeTolerance = DEFAULT_TOL) -> np.ndarray:
    """Central-difference matrix d lambda_i / d r_j, second-order in the step.

    The step is h scaled by max(1, ||r||_inf); StepTooLargeError if that
    would push a perturbed target out of the admissible cone.
    """
    states = _AxisStates(u, _effective_step(maclane_forward(u, tol), h), tol)
    return states.lambda_derivs()


def fd_u_derivs(u, h: float = 1e-5, tol: RegimeTolerance = DEFAULT_TOL):
    """Central first differences of u1 w.r.t. r and the full second-difference
    matrix (diagonal by three-point, mixed by four-corner stencils)."""
    states = _AxisStates(u, _effective_step(maclane_forward(u, tol), h), tol)
    return states.u_derivs(), states.u_second_derivs()


def fd_exactness(u, h: float = 1e-5, tol: RegimeTolerance = DEFAULT_TOL) -> np.ndarray:
    """Central differences dG_i/dr_j of the potentials G_i = (1/2)log|F''(lambda_i)|."""
    states = _AxisStates(u, _effective_step(maclane_forward(u, tol), h), tol)
    return states.potential_derivs()


def fd_lagrange(u, h: float = 1e-5, tol: RegimeTolerance = DEFAULT_TOL) -> np.ndarray:
    """Central differences of F evaluated at the frozen base roots w.r.t. r_j.

    Perturbing r_j and refitting the coefficients changes the polynomial
    value at the unperturbed root lambda_i by exactly delta_ij per unit,
    i.e. dF/dr_j is the j-th Lagrange cardinal polynomial.
    """
    states = _AxisStates(u, _effective_step(maclane_forward(u, tol), h), tol)
    return states.lagrange_derivs()


def fd_convergence_ratio(u, h: float = 1e-3, tol: RegimeTolerance = DEFAULT_TOL) -> float:
    """Error ratio err(h)/err(h/2) of the lambda-derivative oracle.

    Second-order central differences give a ratio near 4 while truncation
    dominates roundoff.
    """
    analytic = derivative_table(u, tol).dlam

    def err(step):
        return float(np.max(np.abs(fd_lambda_derivs(u, step, tol) - analytic)))

    return err(h) / err(h / 2.0)


# (identity, metric, tolerance) in report order
IDENTITY_SPECS = [
    ("lambda_r_diagonal", "rel", 1e-5),
    ("lambda_r_offdiagonal", "rel", 1e-5),
    ("u_r_first_derivative", "rel", 1e-5),
    ("gibbons_tsarev", "rel", 1e-4),
    ("exactness_potential", "rel", 1e-5),
    ("lagrange_delta", "abs", 1e-6),
    ("charpoly_vs_fp", "abs", 1e-12),
    ("root_sum_zero", "abs", 1e-12),
    ("u_r_sum_zero", "abs", 1e-10),
    ("dlam_column_sums", "abs", 1e-10),
]


def _rel(a, b):
    """Error of b against reference a, normalized by max(1, |a|) elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(1.0, np.abs(a))


def sample_hyperbolic_box(
    rng: np.random.Generator,
    n_samples: int,
    box: float = 2.0,
    disc_min: float = 0.05,
    disc_max: float = np.inf,
    gap_min: float = 0.0,
) -> np.ndarray:
    """Uniform n=3 samples in [-box, box]^3 filtered by the discriminant window.

    gap_min additionally floors the smallest root gap: a discriminant
    margin alone does not bound the gap when the root spread is large,
    and second differences lose the conditioning they need there.
    """
    out = []
    while len(out) < n_samples:
        u = rng.uniform(-box, box, size=3)
        if disc_min < discriminant(u[0], u[1]) < disc_max:
            if gap_min > 0.0:
                lam = hyperbolic_roots_batch(np.array([u[0]]), np.array([u[1]]))[0]
                if np.min(np.diff(lam)) <= gap_min:
                    continue
            out.append(u)
    return np.array(out)


def _suite_step(r0: np.ndarray, h: float, gap_fraction: float) -> float:
    """Raw step capped at a fraction of the smallest critical-value gap.

    The constant term only translates r, so unlike the public ops the
    suite does not scale its steps by the coordinate norm; stiffness is
    set entirely by the gaps."""
    cap = gap_fraction * float(np.min(np.abs(np.diff(r0))))
    return min(h, cap)


def run_identity_suite(
    n_samples: int,
    seed: int,
    box: float = 2.0,
    disc_min: float = 0.05,
    disc_max: float = np.inf,
    gap_min: float = 0.1,
    h_first: float = 3e-6,
    h_second: float = 1e-5,
    second_gap_fraction: float = _SECOND_GAP_FRACTION,
    tolerances: dict[str, float] | None = None,
    tol: RegimeTolerance = DEFAULT_TOL,
) -> list[OracleReport]:
    """Run every identity check over seeded hyperbolic samples.

    Failures are recorded in the reports, never raised.  Steps shrink
    automatically near the admissibility boundary so the suite can be
    pointed at near-degenerate bands (with looser tolerances).
    """
    rng = np.random.default_rng(seed)
    samples = sample_hyperbolic_box(rng, n_samples, box, disc_min, disc_max, gap_min)

    acc = {name: (0.0, 0.0, None) for name, _, _ in IDENTITY_SPECS}

    def update(name, rel_err, abs_err, sample):
        worst_rel, worst_abs, worst_u = acc[name]
        if rel_err > worst_rel or worst_u is None:
            worst_u = sample
        acc[name] = (max(worst_rel, rel_err), max(worst_abs, abs_err), worst_u)

    offdiag = ~np.eye(3, dtype=bool)
    for u in samples:
        table = derivative_table(u, tol)
        lam, dlam, du = table.lambdas, table.dlam, table.du
        r0 = maclane_forward(u, tol)
        first = _AxisStates(u, _suite_step(r0, h_first, _FIRST_GAP_FRACTION), tol)
        second = _AxisStates(u, _suite_step(r0, h_second, second_gap_fraction), tol)

        fd_dlam = first.lambda_derivs()
        update("lambda_r_diagonal", float(_rel(np.diag(dlam), np.diag(fd_dlam)).max()),
               float(np.max(np.abs(np.diag(dlam) - np.diag(fd_dlam)))), u)
        update("lambda_r_offdiagonal", float(_rel(dlam, fd_dlam)[offdiag].max()),
               float(np.max(np.abs(dlam - fd_dlam)[offdiag])), u)

        u_r_fd = first.u_derivs()
        update("u_r_first_derivative", float(_rel(du, u_r_fd).max()),
               float(np.max(np.abs(du - u_r_fd))), u)

        u_rr_fd = second.u_second_derivs()
        gaps = lam[:, None] - lam[None, :]
        gt = np.zeros((3, 3))
        gt[offdiag] = 2.0 * (du[:, None] * du[None, :])[offdiag] / gaps[offdiag] ** 2
        update("gibbons_tsarev", float(_rel(gt[offdiag], u_rr_fd[offdiag]).max()),
               float(np.max(np.abs(gt - u_rr_fd)[offdiag])), u)

        dg_fd = first.potential_derivs()
        dg = np.zeros((3, 3))
        dg[offdiag] = dlam[offdiag] / gaps[offdiag]
        update("exactness_potential", float(_rel(dg[offdiag], dg_fd[offdiag]).max()),
               float(np.max(np.abs(dg - dg_fd)[offdiag])), u)

        lag_err = np.abs(first.lagrange_derivs() - np.eye(3))
        update("lagrange_delta", float(lag_err.max()), float(lag_err.max()), u)

        cp_err = np.abs(np.poly(matrix_A(u)) - build_poly(u).fp_coeffs)
        update("charpoly_vs_fp", float(cp_err.max()), float(cp_err.max()), u)

        rs_err = abs(float(np.sum(lam)))
        update("root_sum_zero", rs_err, rs_err, u)

        dus_err = abs(float(np.sum(du)))
        update("u_r_sum_zero", dus_err, dus_err, u)

        col_err = float(np.max(np.abs(dlam.sum(axis=0))))
        update("dlam_column_sums", col_err, col_err, u)

    overrides = tolerances or {}
    reports = []
    for name, metric, tol_default in IDENTITY_SPECS:
        tolerance = float(overrides.get(name, tol_default))
        rel_err, abs_err, worst = acc[name]
        value = rel_err if metric == "rel" else abs_err
        reports.append(
            OracleReport(
                identity=name,
                max_rel_err=rel_err,
                max_abs_err=abs_err,
                worst_sample=[float(x) for x in (worst if worst is not None else [])],
                n_samples=int(n_samples),
                tolerance=tolerance,
                metric=metric,
                passed=bool(n_samples == 0 or value < tolerance),
            )
        )
    return reports


def write_report(reports: list[OracleReport], path, extra: dict | None = None) -> None:
    """Serialize suite reports to JSON (stable key order, reproducible bytes)."""
    payload = {"identities": [r.to_json_dict() for r in reports]}
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
