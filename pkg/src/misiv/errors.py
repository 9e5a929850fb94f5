"""Exception and warning types shared across the package."""

from __future__ import annotations

__all__ = [
    "MisivError",
    "ZeroArm",
    "ZeroDenominator",
    "NonInformativeRates",
    "ZeroComplianceMass",
    "InfeasibleZChannel",
    "DegenerateDenominator",
    "StrongMonoViolated",
    "NoFeasiblePoint",
    "ZeroCorrectedDenominator",
    "DegenerateResample",
    "ImplausibleCorrection",
]


class MisivError(Exception):
    """Base class for all errors raised by this package."""


class ZeroArm(MisivError):
    """An instrument arm has zero total count, so conditional frequencies are undefined."""

    def __init__(self, arm: int):
        self.arm = arm
        super().__init__(f"arm z={arm} has zero total count")


class ZeroDenominator(MisivError):
    """A Wald-type ratio has a zero denominator (weak or non-identifying instrument).

    Carries the numerator so callers can distinguish 0/0 from x/0.
    """

    def __init__(self, numerator, context: str = "risk-difference ratio"):
        self.numerator = numerator
        super().__init__(f"{context}: denominator is zero (numerator = {numerator})")


class NonInformativeRates(MisivError):
    """A misclassification channel has sensitivity + specificity - 1 <= 0.

    Correction factors and their sign reasoning require strictly informative
    channels, so this is a hard error rather than a silent sign flip.
    """


class ZeroComplianceMass(MisivError):
    """The total compliance mass across thresholds is zero; weights are undefined."""


class InfeasibleZChannel(MisivError):
    """No valid observed-instrument channel exists for the given marginal and rates."""


class DegenerateDenominator(MisivError):
    """An inversion denominator vanished (a stratum mass is exactly zero)."""

    def __init__(self, quantity: str, value=None):
        self.quantity = quantity
        self.value = value
        super().__init__(f"inversion denominator for {quantity} vanished")


class StrongMonoViolated(MisivError):
    """Observed treated mass in the unencouraged arm exceeds the one-sided tolerance."""

    def __init__(self, observed, tol):
        self.observed = observed
        self.tol = tol
        super().__init__(
            f"P(D=1|Z=0) = {observed} exceeds one-sided-compliance tolerance {tol}"
        )


class NoFeasiblePoint(MisivError):
    """The rate grid contains no feasible point at the given resolution.

    `nearest_violation` is the smallest constraint-violation magnitude seen,
    useful for diagnosing near-feasibility.
    """

    def __init__(self, nearest_violation: float):
        self.nearest_violation = nearest_violation
        super().__init__(
            f"no feasible grid point (nearest violation magnitude {nearest_violation:.3g})"
        )


class ZeroCorrectedDenominator(MisivError):
    """The misclassification-corrected compliance difference is zero."""


class DegenerateResample(UserWarning):
    """A bootstrap resample emptied a conditioning cell and was skipped."""


class ImplausibleCorrection(UserWarning):
    """A corrected effect landed outside [-1, 1].

    The raw value is still returned; the warning flags that the assumed
    rates are incompatible with the data rather than merely imprecise.
    """
