"""Analytic derivative calculus in critical-value coordinates.

Everything here is evaluated in the wave-speed representation: with
lambda_i the roots of F' and r_i = F(lambda_i),

    d lambda_i / d r_i = -(1/F''(lambda_i)) * sum_{k != i} 1/(lambda_i - lambda_k)
    d lambda_j / d r_i = -(1/F''(lambda_i)) * 1/(lambda_j - lambda_i),  j != i
    F''(lambda_i) * du1/dr_i = 1

together with the exactness potentials G_i = (1/2) log|F''(lambda_i)| and
the blow-up coefficients K_i = |F''(lambda_i)|^(-1/2) * (lambda_i)_{r_i}.
For n=3 the zero-sum of roots collapses the diagonal to
(lambda_i)_{r_i} = -3 lambda_i / F''(lambda_i)^2.

Root-finder differentiation is never used; the independent
finite-difference checks live in the verify module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSignError, NotHyperbolicError
from .polycore import (
    GAP_MIN,
    DEFAULT_TOL,
    RegimeTolerance,
    as_coeff,
    build_poly,
    eigen_data,
    hyperbolic_roots_batch,
)


@dataclass(frozen=True)
class DerivativeTable:
    """First-order derivative data at a strictly hyperbolic point.

    dlam[i, j] = d lambda_i / d r_j; du[i] = du1/dr_i = 1/F''(lambda_i);
    fpp[i] = F''(lambda_i).  Columns of dlam sum to zero (the roots sum
    to zero for every r), and du sums to zero (residue identity for 1/F').
    """

    lambdas: np.ndarray
    fpp: np.ndarray
    dlam: np.ndarray
    du: np.ndarray


@dataclass(frozen=True)
class BlowupCoeffs:
    """Exactness potentials G_i and transport coefficients K_i.

    In the strictly hyperbolic n=3 regime K_1 > 0 and K_3 < 0, since
    lambda_1 < 0 < lambda_3 and K_i is proportional to -lambda_i.
    """

    G: np.ndarray
    K: np.ndarray


def _hyperbolic_speeds(u, tol: RegimeTolerance):
    ed = eigen_data(u, tol)
    if not ed.is_hyperbolic:
        raise NotHyperbolicError(f"point is {ed.regime.value}, not hyperbolic")
    lam = np.asarray(ed.lambdas, dtype=float)
    if np.min(np.diff(lam)) <= GAP_MIN:
        raise NotHyperbolicError(
            f"root gap {np.min(np.diff(lam)):.3e} below {GAP_MIN:g}; treat as boundary"
        )
    return lam


def derivative_table(u, tol: RegimeTolerance = DEFAULT_TOL) -> DerivativeTable:
    """Full first-derivative table d lambda/d r and du1/dr at a hyperbolic point."""
    cv = as_coeff(u)
    lam = _hyperbolic_speeds(cv, tol)
    n = cv.n
    poly = build_poly(cv)
    fpp = np.asarray(poly.fpp(lam), dtype=float)
    dlam = np.empty((n, n))
    for i in range(n):
        gaps = lam[i] - np.delete(lam, i)
        dlam[i, i] = -np.sum(1.0 / gaps) / fpp[i]
        for j in range(n):
            if j != i:
                dlam[j, i] = -1.0 / (fpp[i] * (lam[j] - lam[i]))
    du = 1.0 / fpp
    return DerivativeTable(lambdas=lam, fpp=fpp, dlam=dlam, du=du)


def n3_simplified(u, tol: RegimeTolerance = DEFAULT_TOL):
    """Closed forms special to n=3 (zero root sum):

    (lambda_i)_{r_i} = -3 lambda_i / F''(lambda_i)^2,
    K_i = -3 lambda_i / |F''(lambda_i)|^(5/2),
    F''(lambda_i) = prod_{j != i} (lambda_i - lambda_j).

    Returns (dlam_diag, K, fpp); agrees with derivative_table's diagonal
    to full precision.
    """
    cv = as_coeff(u)
    if cv.n != 3:
        raise ValueError("closed forms require n = 3")
    lam = _hyperbolic_speeds(cv, tol)
    fpp = np.array(
        [
            (lam[0] - lam[1]) * (lam[0] - lam[2]),
            (lam[1] - lam[0]) * (lam[1] - lam[2]),
            (lam[2] - lam[0]) * (lam[2] - lam[1]),
        ]
    )
    dlam_diag = -3.0 * lam / fpp**2
    K = -3.0 * lam / np.abs(fpp) ** 2.5
    return dlam_diag, K, fpp


def blowup_coeffs(u, tol: RegimeTolerance = DEFAULT_TOL) -> BlowupCoeffs:
    """G_i = (1/2) log|F''(lambda_i)| and K_i = |F''|^(-1/2) (lambda_i)_{r_i}."""
    table = derivative_table(u, tol)
    G = 0.5 * np.log(np.abs(table.fpp))
    K = np.abs(table.fpp) ** (-0.5) * np.diag(table.dlam)
    return BlowupCoeffs(G=G, K=K)


def genuine_nonlinearity(u, tol: RegimeTolerance = DEFAULT_TOL) -> tuple[int, int]:
    """Signs of the extreme diagonal entries d lambda_1/d r_1, d lambda_n/d r_n.

    Both are provably nonzero in the strict hyperbolic regime; a magnitude
    below 1e-14 is flagged as DegenerateSignError (a precision event, not
    an admissible outcome).
    """
    table = derivative_table(u, tol)
    first, last = table.dlam[0, 0], table.dlam[-1, -1]
    if abs(first) < 1e-14 or abs(last) < 1e-14:
        raise DegenerateSignError(
            f"extreme diagonal entries ({first:.3e}, {last:.3e}) numerically vanish"
        )
    return (1 if first > 0 else -1), (1 if last > 0 else -1)


def blowup_batch(u1, u2):
    """Vectorized n=3 wave speeds, F''(lambda_i) and K_i over hyperbolic cells.

    Returns (lam, fpp, K) with trailing axis of size 3.  Callers must mask
    to cells with positive discriminant.
    """
    lam = hyperbolic_roots_batch(u1, u2)
    l1, l2, l3 = lam[..., 0], lam[..., 1], lam[..., 2]
    fpp = np.stack(
        [(l1 - l2) * (l1 - l3), (l2 - l1) * (l2 - l3), (l3 - l1) * (l3 - l2)], axis=-1
    )
    K = -3.0 * lam / np.abs(fpp) ** 2.5
    return lam, fpp, K
