"""Numerical laboratory for the 3x3 dispersionless Benney reduction."""

__version__ = "0.1.0"

from .polycore import (  # noqa: F401
    CoeffVector,
    EigenData,
    PolyF,
    Regime,
    RegimeTolerance,
    admissible,
    build_poly,
    classify_regime,
    eigen_data,
    maclane_forward,
    maclane_inverse,
    matrix_A,
)
