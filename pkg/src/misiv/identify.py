"""Point identification: the Wald ratio, misclassification corrections, and
the dichotomization weight for ordered treatments."""

from __future__ import annotations

from dataclasses import dataclass

from .core import ObservedDistribution, RD_D, RD_Y, risk_difference
from .errors import NonInformativeRates, ZeroComplianceMass, ZeroDenominator

__all__ = [
    "CaceEstimate",
    "NondiffRates",
    "MultiTreatmentMargins",
    "naive_cace",
    "corrected_cace",
    "bross_attenuation",
    "dichotomize_weight",
]


@dataclass(frozen=True)
class CaceEstimate:
    """A risk-difference ratio: value = numerator / denominator."""

    value: object
    numerator: object
    denominator: object


def _check_prob(name: str, v) -> None:
    if not 0 <= v <= 1:
        raise ValueError(f"{name} = {v} outside [0, 1]")


@dataclass(frozen=True)
class NondiffRates:
    """Non-differential channel rates for each coordinate, identity by default.

    Treatment and outcome channels run forward: sn_d = P(D'=1 | D=1),
    sp_d = P(D'=0 | D=0), and likewise for Y. The instrument channel is
    parameterized in the reverse direction, sn_z_rev = P(Z=1 | observed Z=1)
    and sp_z_rev = P(Z=0 | observed Z=0), because that is the direction in
    which the observed law inverts linearly.
    """

    sn_d: object = 1
    sp_d: object = 1
    sn_y: object = 1
    sp_y: object = 1
    sn_z_rev: object = 1
    sp_z_rev: object = 1

    def __post_init__(self):
        for name in ("sn_d", "sp_d", "sn_y", "sp_y", "sn_z_rev", "sp_z_rev"):
            _check_prob(name, getattr(self, name))

    @property
    def r_d(self):
        return self.sn_d + self.sp_d - 1

    @property
    def r_y(self):
        return self.sn_y + self.sp_y - 1

    @property
    def r_z_rev(self):
        return self.sn_z_rev + self.sp_z_rev - 1


@dataclass(frozen=True)
class MultiTreatmentMargins:
    """Exceedance margins q_z[j] = P(D_z >= j) for an ordered treatment 1..J.

    Monotonicity of potential treatment (D_1 >= D_0) requires q1[j] >= q0[j].
    """

    q1: tuple
    q0: tuple

    def __post_init__(self):
        if len(self.q1) != len(self.q0) or not self.q1:
            raise ValueError("q1 and q0 must be equal-length, non-empty")
        for name, q in (("q1", self.q1), ("q0", self.q0)):
            for j, v in enumerate(q):
                _check_prob(f"{name}[{j}]", v)
                if j > 0 and v > q[j - 1]:
                    raise ValueError(f"{name} is not non-increasing at level {j + 1}")
        for j, (a, b) in enumerate(zip(self.q1, self.q0)):
            if a < b:
                raise ValueError(f"q1[{j}] < q0[{j}] violates treatment monotonicity")

    @property
    def levels(self) -> int:
        return len(self.q1)


def naive_cace(dist: ObservedDistribution) -> CaceEstimate:
    """Wald ratio RD_Y / RD_D on the given (possibly mismeasured) distribution."""
    num = risk_difference(dist, RD_Y)
    den = risk_difference(dist, RD_D)
    if den == 0:
        raise ZeroDenominator(num, context="Wald ratio")
    return CaceEstimate(value=num / den, numerator=num, denominator=den)


def corrected_cace(naive: CaceEstimate, rates: NondiffRates):
    """Rescale a naive estimate by r_d / r_y.

    Instrument misclassification cancels in the ratio, so only the treatment
    and outcome channels enter. Raises NonInformativeRates when either
    channel is uninformative (r <= 0), since the sign of the result is then
    meaningless.
    """
    r_d, r_y = rates.r_d, rates.r_y
    if r_d <= 0 or r_y <= 0:
        raise NonInformativeRates(f"r_d = {r_d}, r_y = {r_y}; both must be > 0")
    return naive.value * r_d / r_y


def bross_attenuation(rd_true, a1, a0, b1, b0):
    """Observed risk difference after misclassifying both variables.

    `a1`, `a0` parameterize the conditioning variable's channel in the
    reverse direction (P(true=s | observed=s)); `b1`, `b0` the response
    variable's channel forward (P(observed=q | true=q)). The observed risk
    difference is the true one scaled by (a1+a0-1)(b1+b0-1).
    """
    for name, v in (("a1", a1), ("a0", a0), ("b1", b1), ("b0", b0)):
        _check_prob(name, v)
    if not -1 <= rd_true <= 1:
        raise ValueError(f"rd_true = {rd_true} outside [-1, 1]")
    return (a1 + a0 - 1) * (b1 + b0 - 1) * rd_true


def dichotomize_weight(margins: MultiTreatmentMargins, k: int):
    """Weight carried by threshold k when an ordered treatment is dichotomized.

    The Wald estimand for the dichotomized treatment D >= k equals the
    ordered-treatment estimand divided by this weight; equivalently the
    ordered estimand is the dichotomized one times w_k.
    """
    if not 1 <= k <= margins.levels:
        raise ValueError(f"k = {k} outside 1..{margins.levels}")
    gaps = [q1 - q0 for q1, q0 in zip(margins.q1, margins.q0)]
    total = sum(gaps)
    if total == 0:
        raise ZeroComplianceMass("all exceedance gaps are zero")
    return gaps[k - 1] / total
