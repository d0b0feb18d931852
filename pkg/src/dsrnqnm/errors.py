"""Exception hierarchy shared by all dsrnqnm modules.

Two families: ``ValidationError`` for rejected inputs (CLI exit code 2)
and ``NumericalError`` for failures of a numerical procedure on inputs
that passed validation (CLI exit code 3).
"""


class DsrnError(Exception):
    """Base class for all package errors."""


class ValidationError(DsrnError):
    """Inputs violate a documented precondition."""


class NonPositive(ValidationError):
    """M, Lambda or the field mass is not strictly positive."""


class DeltaViolation(ValidationError):
    """4*Lambda*Q**2 >= 1, the quartic cannot have the required roots."""


class MassWindowViolation(ValidationError):
    """Black-hole mass outside the open window (M1, M2)."""


class NariaiViolation(ValidationError):
    """9*Lambda*M**2 >= 1 (Nariai-type limit)."""


class NumericalError(DsrnError):
    """A numerical procedure failed or left its domain of validity."""


class DegenerateRoots(NumericalError):
    """Two horizon roots coincide within tolerance."""


class OutOfExterior(NumericalError):
    """Radius outside the open exterior (r_minus, r_plus)."""


class ConvergenceFailure(NumericalError):
    """Iteration exhausted without meeting its tolerance."""


class TruncationUnstable(NumericalError):
    """Inverse-series coefficients diverge before the truncation order."""


class StripViolation(NumericalError):
    """Frequency below the strip Im z > -kappa + margin."""


class IntegratorFailure(NumericalError):
    """ODE step control underflowed or exceeded its step budget."""


class AtResonance(NumericalError):
    """Wronskian too small: resolvent kernel undefined at this z."""


class BoundaryZero(NumericalError):
    """A contour passes too close to a Wronskian zero."""


class NonIntegerWinding(NumericalError):
    """Argument-principle integral did not round cleanly to an integer."""


class CountMismatch(NumericalError):
    """Located multiplicities disagree with the contour count."""


class SupportTooWide(ValidationError):
    """Initial bump does not fit inside the evolution grid."""


class NaNDetected(NumericalError):
    """Field blow-up during time evolution."""


class IllConditioned(NumericalError):
    """Ringdown fit window too short or over-modeled."""
