"""Polynomial core for the n-component quasi-linear system.

The state at a point is the coefficient column U = (u1, ..., un) of

    F(p) = p^(n+1)/(n+1) + u1 p^(n-1) + u2 p^(n-2) + ... + un

(the p^n coefficient is identically zero by normalization).  This module
builds F and the system matrix A(U), extracts the wave speeds (roots of
F'), classifies the local regime, and implements the coordinate change
between coefficients and the critical values r_i = F(lambda_i) together
with its Newton inverse.

All functions are pure; batch variants operating on arrays of n=3 states
are provided for grid sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    NewtonDivergedError,
    NotAdmissibleError,
    NotHyperbolicError,
    RootFindingError,
)


class Regime(Enum):
    HYPERBOLIC = "hyperbolic"
    ELLIPTIC = "elliptic"
    DEGENERATE = "degenerate"
    MAX_DEGENERATE = "max_degenerate"


@dataclass(frozen=True)
class RegimeTolerance:
    """Thresholds turning the exact regime sets into floating-point bands.

    eps_disc: half-width of the discriminant band treated as degenerate.
    eps_zero: coefficient threshold below which a degenerate point counts
        as maximally degenerate (all wave speeds zero).
    """

    eps_disc: float = 1e-10
    eps_zero: float = 1e-10

    def __post_init__(self):
        if not (self.eps_disc > 0 and self.eps_zero > 0):
            raise ValueError("tolerances must be strictly positive")


DEFAULT_TOL = RegimeTolerance()

# Minimum pairwise root gap below which derivative formulas are unusable.
GAP_MIN = 1e-6


@dataclass(frozen=True)
class CoeffVector:
    """Coefficient column (u1, ..., un); the leading 1/(n+1) and the zero
    p^n coefficient are fixed by convention and not stored."""

    u: np.ndarray

    def __post_init__(self):
        u = np.atleast_1d(np.array(self.u, dtype=float))
        if u.ndim != 1 or u.size < 2:
            raise ValueError("need at least 2 coefficients")
        if not np.all(np.isfinite(u)):
            raise ValueError("coefficients must be finite")
        u.flags.writeable = False
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return self.u.size


def as_coeff(u) -> CoeffVector:
    """Coerce an array-like to a CoeffVector."""
    return u if isinstance(u, CoeffVector) else CoeffVector(np.asarray(u, dtype=float))


@dataclass(frozen=True)
class PolyF:
    """F and its first two p-derivatives, coefficients in descending powers."""

    n: int
    coeffs: np.ndarray
    fp_coeffs: np.ndarray = field(repr=False, default=None)
    fpp_coeffs: np.ndarray = field(repr=False, default=None)

    def __call__(self, p):
        return np.polyval(self.coeffs, p)

    def fp(self, p):
        return np.polyval(self.fp_coeffs, p)

    def fpp(self, p):
        return np.polyval(self.fpp_coeffs, p)


@dataclass(frozen=True)
class EigenData:
    """Wave speeds (roots of F'), their critical values, and the regime tag.

    lambdas are sorted by (real part, imaginary part); in the hyperbolic
    regime they are real, strictly increasing, and sum to zero.
    """

    lambdas: np.ndarray
    rs: np.ndarray
    regime: Regime

    @property
    def is_hyperbolic(self) -> bool:
        return self.regime is Regime.HYPERBOLIC


def build_poly(u) -> PolyF:
    """Assemble F(p) = p^(n+1)/(n+1) + u1 p^(n-1) + ... + un."""
    cv = as_coeff(u)
    n = cv.n
    coeffs = np.concatenate([[1.0 / (n + 1), 0.0], cv.u])
    fp = np.polyder(coeffs)
    fpp = np.polyder(fp)
    return PolyF(n=n, coeffs=coeffs, fp_coeffs=fp, fpp_coeffs=fpp)


def matrix_A(u) -> np.ndarray:
    """System matrix A(U); its characteristic polynomial is (-1)^n F'(lambda).

    For n=3 the rows are [0,1,0], [-2u1,0,1], [-u2,0,0].
    """
    cv = as_coeff(u)
    n = cv.n
    A = np.zeros((n, n))
    for i in range(n - 1):
        A[i, i + 1] = 1.0
    for i in range(1, n):
        A[i, 0] = -(n - i) * cv.u[i - 1]
    return A


def discriminant(u1, u2):
    """Discriminant of p^3 + 2 u1 p + u2; positive iff three distinct real roots."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    return -32.0 * u1**3 - 27.0 * u2**2


def _cubic_roots(u1: float, u2: float, tol: RegimeTolerance) -> np.ndarray:
    """Roots of F'(p) = p^3 + 2 u1 p + u2 by closed form, one Newton polish each.

    Branch selection follows the discriminant so the formulas stay stable
    near the degenerate locus.  Returns a complex array sorted by
    (real, imag).
    """
    a, b = 2.0 * u1, u2
    disc = -4.0 * a**3 - 27.0 * b**2
    if disc > tol.eps_disc:
        # three distinct real roots: trigonometric form
        m = 2.0 * math.sqrt(-a / 3.0)
        arg = min(1.0, max(-1.0, 3.0 * b / (a * m)))
        phi = math.acos(arg)
        roots = np.array([m * math.cos((phi - 2.0 * math.pi * k) / 3.0) for k in range(3)])
        roots = _polish_real(roots, a, b)
        roots.sort()
        return roots.astype(complex)
    if disc < -tol.eps_disc:
        # one real root (Cardano) plus a conjugate pair
        s = math.sqrt(b * b / 4.0 + a**3 / 27.0)
        t0 = math.copysign(abs(-b / 2.0 + s) ** (1.0 / 3.0), -b / 2.0 + s) + math.copysign(
            abs(-b / 2.0 - s) ** (1.0 / 3.0), -b / 2.0 - s
        )
        t0 = float(_polish_real(np.array([t0]), a, b)[0])
        c = t0 * t0 + a  # product of the conjugate pair
        beta = math.sqrt(max(c - t0 * t0 / 4.0, 0.0))
        pair = -t0 / 2.0
        roots = np.array([complex(pair, -beta), complex(pair, beta), complex(t0, 0.0)])
        return _sort_complex(roots)
    # degenerate band
    if abs(u1) <= tol.eps_zero and abs(u2) <= tol.eps_zero:
        return np.zeros(3, dtype=complex)
    # double root at -3b/(2a), simple root at -2 times that (zero-sum)
    if abs(a) > tol.eps_zero:
        d = -3.0 * b / (2.0 * a)
        roots = np.array([d, d, -2.0 * d], dtype=complex)
    else:
        # a ~ 0, b != 0: the three cube roots of -b (one real, one pair)
        d = -math.copysign(abs(b) ** (1.0 / 3.0), b)
        roots = d * np.exp(2j * math.pi * np.arange(3) / 3.0)
    return _sort_complex(roots)


def _polish_real(roots: np.ndarray, a: float, b: float) -> np.ndarray:
    f = roots**3 + a * roots + b
    fp = 3.0 * roots**2 + a
    safe = np.abs(fp) > 1e-300
    return np.where(safe, roots - f / np.where(safe, fp, 1.0), roots)


def _sort_complex(roots: np.ndarray) -> np.ndarray:
    order = np.lexsort((roots.imag, roots.real))
    return roots[order]


def _companion_roots(poly: PolyF) -> np.ndarray:
    """Roots of F' via companion-matrix eigenvalues, two complex Newton polishes."""
    fp = poly.fp_coeffs
    roots = np.roots(fp).astype(complex)
    for _ in range(2):
        val = np.polyval(fp, roots)
        der = np.polyval(np.polyder(fp), roots)
        safe = np.abs(der) > 1e-300
        roots = np.where(safe, roots - val / np.where(safe, der, 1.0), roots)
    return _sort_complex(roots)


def _classify_roots(lambdas: np.ndarray, tol: RegimeTolerance, gap_eps: float = 1e-8) -> Regime:
    """Regime from root clustering: used for general n and as a cross-check."""
    if np.max(np.abs(lambdas.imag)) > gap_eps:
        return Regime.ELLIPTIC
    lam = np.sort(lambdas.real)
    if np.min(np.diff(lam)) <= gap_eps:
        if np.max(np.abs(lam)) <= max(tol.eps_zero, gap_eps):
            return Regime.MAX_DEGENERATE
        return Regime.DEGENERATE
    return Regime.HYPERBOLIC


def classify_regime(u, tol: RegimeTolerance = DEFAULT_TOL) -> Regime:
    """Regime at a point: discriminant rule for n=3, root clustering otherwise."""
    cv = as_coeff(u)
    if cv.n == 3:
        d = float(discriminant(cv.u[0], cv.u[1]))
        if d > tol.eps_disc:
            return Regime.HYPERBOLIC
        if d < -tol.eps_disc:
            return Regime.ELLIPTIC
        if abs(cv.u[0]) <= tol.eps_zero and abs(cv.u[1]) <= tol.eps_zero:
            return Regime.MAX_DEGENERATE
        return Regime.DEGENERATE
    return _classify_roots(_companion_roots(build_poly(cv)), tol)


def eigen_data(u, tol: RegimeTolerance = DEFAULT_TOL) -> EigenData:
    """Wave speeds and critical values at a point.

    n=3 uses the closed-form cubic solution; general n falls back to
    companion-matrix eigenvalues.  Raises RootFindingError if the backward
    error of any root exceeds 1e-12 relative to the coefficient scale
    (cannot happen on the closed-form path).
    """
    cv = as_coeff(u)
    poly = build_poly(cv)
    if cv.n == 3:
        lambdas = _cubic_roots(cv.u[0], cv.u[1], tol)
    else:
        lambdas = _companion_roots(poly)
        scale = max(1.0, np.max(np.abs(poly.fp_coeffs))) * max(1.0, np.max(np.abs(lambdas))) ** cv.n
        if np.max(np.abs(poly.fp(lambdas))) > 1e-12 * scale:
            raise RootFindingError(f"root backward error too large for n={cv.n}")
    rs = poly(lambdas)
    regime = classify_regime(cv, tol)
    if regime is Regime.HYPERBOLIC:
        lambdas = lambdas.real.astype(float)
        rs = rs.real.astype(float)
    return EigenData(lambdas=lambdas, rs=rs, regime=regime)


def maclane_forward(u, tol: RegimeTolerance = DEFAULT_TOL) -> np.ndarray:
    """Critical values (r1, ..., rn) ordered by ascending wave speed.

    Only defined on the strictly hyperbolic region, where the map
    u -> r is a global diffeomorphism onto the admissible cone.
    """
    ed = eigen_data(u, tol)
    if not ed.is_hyperbolic:
        raise NotHyperbolicError(f"point is {ed.regime.value}, not hyperbolic")
    return np.asarray(ed.rs, dtype=float)


def _required_sign(n: int, k: int) -> int:
    """Sign of (r_k - r_{k+1}) on the hyperbolic image, 1-based k.

    With ascending wave speeds the last critical point is always a local
    minimum of F (monic derivative), so the critical values alternate
    max/min ending in a min: sign(r_k - r_{k+1}) = (-1)^(n-k+1).
    """
    return 1 if (n - k) % 2 == 1 else -1


def admissible(r, n: int | None = None) -> bool:
    """True iff r lies in the open cone of critical values of hyperbolic points.

    For n=3 this is r2 > r1 and r2 > r3, strictly.
    """
    return not admissible_violations(r, n)


def admissible_violations(r, n: int | None = None) -> list[str]:
    """Human-readable list of the strict inequalities r violates (empty if none)."""
    r = np.asarray(r, dtype=float)
    if n is None:
        n = r.size
    if r.size != n:
        raise ValueError("critical-value vector has wrong length")
    out = []
    for k in range(1, n):
        sign = _required_sign(n, k)
        diff = r[k - 1] - r[k]
        if not (diff * sign > 0):
            rel = ">" if sign > 0 else "<"
            out.append(f"r{k} {rel} r{k + 1} violated: r{k}={r[k - 1]:.12g}, r{k + 1}={r[k]:.12g}")
    return out


def maclane_inverse(
    r,
    u_guess,
    tol_newton: float = 1e-12,
    tol: RegimeTolerance = DEFAULT_TOL,
    max_iter: int = 60,
) -> CoeffVector:
    """Invert the critical-value map by Newton iteration.

    The Jacobian is dr_i/du_k = lambda_i^(n-k) (Vandermonde in the wave
    speeds, since F'(lambda_i) = 0 kills the root-motion term).  Steps are
    halved until the iterate stays strictly hyperbolic; the map is a
    diffeomorphism there, so an interior path exists.

    Raises NotAdmissibleError for targets outside the hyperbolic image and
    NewtonDivergedError (with iterate history) on failure to converge.
    """
    r = np.asarray(r, dtype=float)
    guess = as_coeff(u_guess)
    n = guess.n
    violations = admissible_violations(r, n)
    if violations:
        raise NotAdmissibleError("; ".join(violations))
    if classify_regime(guess, tol) is not Regime.HYPERBOLIC:
        raise NotHyperbolicError("initial guess must be strictly hyperbolic")

    u = guess.u.copy()
    history = [u.copy()]
    for _ in range(max_iter):
        ed = eigen_data(CoeffVector(u), tol)
        lam = np.asarray(ed.lambdas, dtype=float)
        resid = np.asarray(ed.rs, dtype=float) - r
        if np.max(np.abs(resid)) <= tol_newton:
            break
        # J[i, k-1] = lambda_i^(n-k), columns k = 1..n
        J = np.vander(lam, N=n, increasing=False)
        try:
            delta = np.linalg.solve(J, resid)
        except np.linalg.LinAlgError as exc:
            raise NewtonDivergedError(f"singular Jacobian: {exc}", history) from exc
        step = 1.0
        for _ in range(60):
            trial = u - step * delta
            if classify_regime(CoeffVector(trial), tol) is Regime.HYPERBOLIC:
                break
            step *= 0.5
        else:
            raise NewtonDivergedError("line search exhausted at hyperbolic boundary", history)
        u = u - step * delta
        history.append(u.copy())
    else:
        raise NewtonDivergedError(
            f"no convergence in {max_iter} iterations (residual "
            f"{np.max(np.abs(resid)):.3e})",
            history,
        )
    # Exact reconstruction of the constant term: un = r1 - (F - un)(lambda_1).
    ed = eigen_data(CoeffVector(u), tol)
    u[-1] += r[0] - float(np.asarray(ed.rs, dtype=float)[0])
    result = CoeffVector(u)
    final = maclane_forward(result, tol)
    if np.max(np.abs(final - r)) > max(tol_newton, 1e-9 * max(1.0, np.max(np.abs(r)))):
        raise NewtonDivergedError(
            f"converged iterate misses target by {np.max(np.abs(final - r)):.3e}", history
        )
    return result


# ---------------------------------------------------------------------------
# Batch operations on arrays of n=3 states (grid sweeps).
# ---------------------------------------------------------------------------


def hyperbolic_roots_batch(u1, u2) -> np.ndarray:
    """Sorted real roots of p^3 + 2 u1 p + u2 over arrays, trig closed form.

    Only valid where the discriminant is positive; callers mask.  One
    vectorized Newton polish restores full precision.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    a, b = 2.0 * u1, u2
    m = 2.0 * np.sqrt(np.maximum(-a / 3.0, 1e-300))
    arg = np.clip(3.0 * b / (a * m), -1.0, 1.0)
    phi = np.arccos(arg)
    k = np.arange(3.0)
    roots = m[..., None] * np.cos((phi[..., None] - 2.0 * np.pi * k) / 3.0)
    f = roots**3 + a[..., None] * roots + b[..., None]
    fp = 3.0 * roots**2 + a[..., None]
    roots = roots - f / np.where(np.abs(fp) > 1e-300, fp, 1.0)
    return np.sort(roots, axis=-1)


def real_root_batch(u1, u2) -> np.ndarray:
    """The single real root of p^3 + 2 u1 p + u2 where the discriminant <= 0."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    a, b = 2.0 * u1, u2
    s = np.sqrt(np.maximum(b * b / 4.0 + a**3 / 27.0, 0.0))
    t0 = np.cbrt(-b / 2.0 + s) + np.cbrt(-b / 2.0 - s)
    for _ in range(2):
        f = t0**3 + a * t0 + b
        fp = 3.0 * t0**2 + a
        t0 = t0 - f / np.where(np.abs(fp) > 1e-300, fp, 1.0)
    return t0


def critical_values_batch(U: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """F evaluated at the wave speeds, U of shape (..., 3), lam (..., 3)."""
    return lam**4 / 4.0 + U[..., 0:1] * lam**2 + U[..., 1:2] * lam + U[..., 2:3]


def spectral_radius_batch(U: np.ndarray) -> np.ndarray:
    """max_i |lambda_i(U_j)| per cell, covering real and complex-pair regimes."""
    d = discriminant(U[..., 0], U[..., 1])
    rho = np.zeros(U.shape[:-1])
    hyp = d > 0
    if hyp.any():
        lam = hyperbolic_roots_batch(U[hyp, 0], U[hyp, 1])
        rho[hyp] = np.max(np.abs(lam), axis=-1)
    rest = ~hyp
    if rest.any():
        t0 = real_root_batch(U[rest, 0], U[rest, 1])
        pair_sq = t0**2 + 2.0 * U[rest, 0]  # |pair|^2 = product of the pair
        rho[rest] = np.maximum(np.abs(t0), np.sqrt(np.maximum(pair_sq, 0.0)))
    return rho


# integer regime codes for per-cell maps
REGIME_CODES = {
    Regime.HYPERBOLIC: 0,
    Regime.ELLIPTIC: 1,
    Regime.DEGENERATE: 2,
    Regime.MAX_DEGENERATE: 3,
}
REGIME_BY_CODE = {v: k for k, v in REGIME_CODES.items()}


def classify_batch(U: np.ndarray, tol: RegimeTolerance = DEFAULT_TOL) -> np.ndarray:
    """Integer regime codes per cell (see REGIME_CODES), n=3 discriminant rule."""
    d = discriminant(U[..., 0], U[..., 1])
    codes = np.where(d > tol.eps_disc, 0, np.where(d < -tol.eps_disc, 1, 2))
    maxdeg = (
        (codes == 2)
        & (np.abs(U[..., 0]) <= tol.eps_zero)
        & (np.abs(U[..., 1]) <= tol.eps_zero)
    )
    return np.where(maxdeg, 3, codes)


def maclane_inverse_batch(
    r: np.ndarray,
    u_guess: np.ndarray,
    tol_newton: float = 1e-12,
    tol: RegimeTolerance = DEFAULT_TOL,
    max_iter: int = 40,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Newton inversion of the critical-value map, n=3 only.

    Returns (u, converged_mask).  Guesses must be strictly hyperbolic;
    cells whose line search hits the boundary are reported unconverged
    rather than raising.
    """
    r = np.asarray(r, dtype=float)
    u = np.array(u_guess, dtype=float)
    converged = np.zeros(len(u), dtype=bool)
    for _ in range(max_iter):
        lam = hyperbolic_roots_batch(u[:, 0], u[:, 1])
        resid = critical_values_batch(u, lam) - r
        converged = np.max(np.abs(resid), axis=1) <= tol_newton
        if converged.all():
            break
        J = np.stack([lam**2, lam, np.ones_like(lam)], axis=2)
        delta = np.linalg.solve(J, resid[..., None])[..., 0]
        delta[converged] = 0.0
        step = np.ones(len(u))
        for _ in range(60):
            trial = u - step[:, None] * delta
            bad = discriminant(trial[:, 0], trial[:, 1]) <= tol.eps_disc
            if not bad.any():
                break
            step[bad] *= 0.5
        else:
            u = u - step[:, None] * delta
            break
        u = u - step[:, None] * delta
    lam = hyperbolic_roots_batch(u[:, 0], u[:, 1])
    u[:, 2] += r[:, 0] - critical_values_batch(u, lam)[:, 0]
    resid = critical_values_batch(u, lam) - r
    converged = np.max(np.abs(resid), axis=1) <= 10.0 * tol_newton
    return u, converged
