"""Arm-specific misclassification: exact corrections and range bounds.

When the error rates of one variable differ between instrument arms, the
effect is still point-identified given those four rates. This module
evaluates the exact corrections and, when the rates are only known to
intervals, the range of the correction over the whole box.

Differential errors in both D and Y at once are rejected: that surface
has too many free parameters to support a meaningful point correction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import product

from .bounds import BoundsReport
from .core import ObservedDistribution, RD_D, RD_Y, arm_probability, risk_difference
from .errors import (
    ImplausibleCorrection,
    NonInformativeRates,
    ZeroCorrectedDenominator,
    ZeroDenominator,
)

__all__ = [
    "DifferentialRates",
    "RateBox",
    "cace_diff_outcome",
    "cace_diff_treatment",
    "sensitivity_region",
]


@dataclass(frozen=True)
class DifferentialRates:
    """Arm-specific sensitivity/specificity for one mismeasured variable.

    sn1/sp1 apply in the encouraged arm (Z=1), sn0/sp0 in the other.
    Both arms must be informative: sn + sp > 1.
    """

    variable: str
    sn1: object
    sn0: object
    sp1: object
    sp0: object

    def __post_init__(self):
        v = str(self.variable).lower()
        if v not in ("y", "d"):
            raise ValueError(f"variable must be 'y' or 'd', got {self.variable!r}")
        object.__setattr__(self, "variable", v)
        for nm in ("sn1", "sn0", "sp1", "sp0"):
            val = getattr(self, nm)
            if not 0 <= val <= 1:
                raise ValueError(f"{nm} = {val} outside [0, 1]")
        if self.sn1 + self.sp1 <= 1 or self.sn0 + self.sp0 <= 1:
            raise NonInformativeRates(
                f"need sn + sp > 1 in each arm; got arm1 {self.sn1 + self.sp1}, arm0 {self.sn0 + self.sp0}"
            )

    @property
    def r1(self):
        return self.sn1 + self.sp1 - 1

    @property
    def r0(self):
        return self.sn0 + self.sp0 - 1


@dataclass(frozen=True)
class RateBox:
    """Closed intervals for the four differential rates of one variable.

    Intervals must sit inside [0, 1]; informativeness over the whole box
    is checked by the operation that consumes it, since a violating box
    is a legitimate object to construct and inspect.
    """

    variable: str
    sn1: tuple
    sn0: tuple
    sp1: tuple
    sp0: tuple

    def __post_init__(self):
        v = str(self.variable).lower()
        if v not in ("y", "d"):
            raise ValueError(f"variable must be 'y' or 'd', got {self.variable!r}")
        object.__setattr__(self, "variable", v)
        for nm in ("sn1", "sn0", "sp1", "sp0"):
            lo, hi = getattr(self, nm)
            if not (0 <= lo <= hi <= 1):
                raise ValueError(f"{nm} = ({lo}, {hi}) is not a closed interval inside [0, 1]")
            object.__setattr__(self, nm, (lo, hi))


def _warn_if_implausible(value):
    if value < -1 or value > 1:
        warnings.warn(
            f"corrected effect {float(value):.6g} lies outside [-1, 1]; "
            "the assumed rates are incompatible with the data",
            ImplausibleCorrection,
            stacklevel=3,
        )
    return value


def _corrected_arm_rate(p, sn, sp):
    return (p - (1 - sp)) / (sn + sp - 1)


def cace_diff_outcome(dist: ObservedDistribution, rates: DifferentialRates):
    """Exact effect when the outcome channel differs between arms.

    Corrects each arm's outcome rate separately, then forms the usual
    ratio over the compliance difference. The raw signed value is
    returned unclamped; values outside [-1, 1] warn.
    """
    if rates.variable != "y":
        raise ValueError("cace_diff_outcome needs rates for the outcome (variable='y')")
    rd_d = risk_difference(dist, RD_D)
    if rd_d == 0:
        raise ZeroDenominator(0, context="compliance difference")
    corrected = _corrected_arm_rate(arm_probability(dist, 1, y=1), rates.sn1, rates.sp1) - _corrected_arm_rate(
        arm_probability(dist, 0, y=1), rates.sn0, rates.sp0
    )
    return _warn_if_implausible(corrected / rd_d)


def cace_diff_treatment(dist: ObservedDistribution, rates: DifferentialRates):
    """Exact effect when the treatment channel differs between arms."""
    if rates.variable != "d":
        raise ValueError("cace_diff_treatment needs rates for the treatment (variable='d')")
    corrected = _corrected_arm_rate(arm_probability(dist, 1, d=1), rates.sn1, rates.sp1) - _corrected_arm_rate(
        arm_probability(dist, 0, d=1), rates.sn0, rates.sp0
    )
    if corrected == 0:
        raise ZeroCorrectedDenominator("corrected compliance difference is zero")
    return _warn_if_implausible(risk_difference(dist, RD_Y) / corrected)


def _arm_corner_range(p, sn_iv, sp_iv):
    """Range of (p-(1-sp))/(sn+sp-1) over a rate box for one arm.

    For fixed sp the term is monotone in sn, and at either sn endpoint it
    is monotone in sp, so both extremes sit at corners.
    """
    corners = [
        ((p - (1 - sp)) / (sn + sp - 1), (sn, sp))
        for sn, sp in product(sn_iv, sp_iv)
    ]
    lo = min(corners, key=lambda c: c[0])
    hi = max(corners, key=lambda c: c[0])
    return lo, hi


def sensitivity_region(dist: ObservedDistribution, box: RateBox) -> BoundsReport:
    """Range of the differential correction over a box of rates.

    Exact: the correction is arm-separable and corner-extreme in each
    arm's pair, so the sixteen corner combinations contain both ends; no
    grid search is needed. For the treatment variable the corrected
    compliance difference may straddle zero over the box, in which case
    the effect is unbounded on both sides and reported as infinities
    with a warning.
    """
    for arm in ("1", "0"):
        sn_lo = getattr(box, f"sn{arm}")[0]
        sp_lo = getattr(box, f"sp{arm}")[0]
        if sn_lo + sp_lo <= 1:
            raise NonInformativeRates(
                f"arm-{arm} box corner sn={sn_lo}, sp={sp_lo} is non-informative"
            )

    obs = "y" if box.variable == "y" else "d"
    p1 = arm_probability(dist, 1, **{obs: 1})
    p0 = arm_probability(dist, 0, **{obs: 1})
    (lo1, lo1_at), (hi1, hi1_at) = _arm_corner_range(p1, box.sn1, box.sp1)
    (lo0, lo0_at), (hi0, hi0_at) = _arm_corner_range(p0, box.sn0, box.sp0)
    diff_lo, diff_lo_at = lo1 - hi0, (lo1_at, hi0_at)
    diff_hi, diff_hi_at = hi1 - lo0, (hi1_at, lo0_at)

    warnings_out = []
    if box.variable == "y":
        rd_d = risk_difference(dist, RD_D)
        if rd_d == 0:
            raise ZeroDenominator(0, context="compliance difference")
        a, b = diff_lo / rd_d, diff_hi / rd_d
        (cace_lo, lo_at), (cace_hi, hi_at) = sorted(
            [(a, diff_lo_at), (b, diff_hi_at)], key=lambda t: t[0]
        )
    else:
        rd_y = risk_difference(dist, RD_Y)
        if diff_lo <= 0 <= diff_hi:
            cace_lo, cace_hi = float("-inf"), float("inf")
            lo_at = hi_at = None
            warnings_out.append(
                "corrected compliance difference straddles zero over the box; effect unbounded"
            )
        else:
            a, b = rd_y / diff_lo, rd_y / diff_hi
            (cace_lo, lo_at), (cace_hi, hi_at) = sorted(
                [(a, diff_lo_at), (b, diff_hi_at)], key=lambda t: t[0]
            )

    def witness(at):
        if at is None:
            return None
        (sn1, sp1), (sn0, sp0) = at
        return {"sn1": sn1, "sp1": sp1, "sn0": sn0, "sp0": sp0}

    if any(abs(v) > 1 and abs(v) != float("inf") for v in (cace_lo, cace_hi)):
        warnings_out.append(
            "region endpoint outside [-1, 1]; parts of the box are incompatible with the data"
        )

    return BoundsReport(
        theorem=f"differential_{'outcome' if box.variable == 'y' else 'treatment'}",
        variable=box.variable,
        cace_lo=cace_lo,
        cace_hi=cace_hi,
        sn_lo={"z1": box.sn1[0], "z0": box.sn0[0]},
        sn_hi={"z1": box.sn1[1], "z0": box.sn0[1]},
        sp_lo={"z1": box.sp1[0], "z0": box.sp0[0]},
        sp_hi={"z1": box.sp1[1], "z0": box.sp0[1]},
        feasible=True,
        recoded=False,
        binding=(("cace_lo", "corner"), ("cace_hi", "corner")),
        intermediates={
            "witness_lo": witness(lo_at),
            "witness_hi": witness(hi_at),
            "corrected_arm1_range": (lo1, hi1),
            "corrected_arm0_range": (lo0, hi0),
            "corrected_diff_range": (diff_lo, diff_hi),
        },
        warnings=tuple(warnings_out),
    )
