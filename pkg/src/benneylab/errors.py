"""Exception types shared across the package."""


class BenneyLabError(Exception):
    """Base class for all package errors."""


class NotHyperbolicError(BenneyLabError):
    """Operation requires strict hyperbolicity (distinct real wave speeds)."""


class NotAdmissibleError(BenneyLabError):
    """Critical-value vector violates the ordering required for a hyperbolic preimage."""


class NewtonDivergedError(BenneyLabError):
    """Newton inversion failed to converge; carries the iterate history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class RootFindingError(BenneyLabError):
    """Root finder produced roots with unacceptable backward error."""


class StepTooLargeError(BenneyLabError):
    """Finite-difference step left the strictly hyperbolic region."""


class DegenerateSignError(BenneyLabError):
    """An extreme wave speed has numerically vanishing derivative along its own invariant."""


class RegimeChangeError(BenneyLabError):
    """A cell left the strictly hyperbolic region during an invariant-based update."""


class OutsideHyperbolicError(BenneyLabError):
    """Characteristic seed point is not in a strictly hyperbolic region."""


class NoBlowupPredictedError(BenneyLabError):
    """All transported slopes have the decaying sign; no finite blow-up time."""


class BadSpecError(BenneyLabError):
    """Malformed initial-data description."""


class ConfigError(BenneyLabError):
    """Invalid run configuration; message carries the offending field."""
