"""Closed-form sharp bounds on channel rates and the complier effect.

Four bounding regimes: outcome or treatment misclassified, with or without
one-sided compliance. Plus the observable consistency conditions that a
valid encouragement design must satisfy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

from .core import (
    ObservedDistribution,
    RiskDiffSpec,
    RD_D,
    RD_Y,
    arm_probability,
    recode_outcome,
    risk_difference,
)
from .errors import StrongMonoViolated, ZeroDenominator
from .identify import naive_cace

__all__ = [
    "BoundsReport",
    "ConditionReport",
    "STRONG_MONO_TOL",
    "bounds_outcome_nondiff",
    "bounds_treatment_nondiff",
    "bounds_outcome_strongmono",
    "bounds_treatment_strongmono",
    "testable_conditions",
]

STRONG_MONO_TOL = 1e-9


@dataclass(frozen=True)
class BoundsReport:
    """Envelope on channel rates and the complier risk difference.

    Violating rate bounds are reported unclamped (a lower bound of 1.0037
    is evidence, not an artifact), while cace_lo/cace_hi are kept inside
    [-1, 1]. `binding` names the constraint attaining each finite bound.
    """

    theorem: str
    variable: str
    cace_lo: object
    cace_hi: object
    sn_lo: object
    sn_hi: object
    sp_lo: object
    sp_hi: object
    feasible: bool
    recoded: bool
    binding: tuple
    intermediates: Mapping
    warnings: tuple = ()

    @property
    def cace_interval(self) -> tuple:
        return (self.cace_lo, self.cace_hi)


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one family of observable consistency checks.

    Each entry is (name, slack, passed); slack >= 0 means satisfied.
    Checks whose conditioning event has zero mass are listed in `skipped`.
    """

    variant: str
    checks: tuple
    passed: bool
    recoded: bool
    skipped: tuple = ()


def _cond(dist, z, *, d=None, y=None, given_d=None, given_y=None):
    """P(event | conditioning event, Z=z); None when the condition has zero mass."""
    denom = arm_probability(dist, z, d=given_d, y=given_y)
    if denom == 0:
        return None
    num = arm_probability(
        dist,
        z,
        d=d if d is not None else given_d,
        y=y if y is not None else given_y,
    )
    return num / denom


def _cap_interval(lo, hi):
    lo = max(lo, -1) if lo == lo else lo
    hi = min(hi, 1) if hi == hi else hi
    return lo, hi


def _extremum(candidates, kind):
    """(value, name) over non-None candidates; kind is min or max."""
    live = [(v, n) for n, v in candidates if v is not None]
    value = kind(v for v, _ in live)
    name = next(n for v, n in live if v == value)
    return value, name


def bounds_outcome_nondiff(dist: ObservedDistribution) -> BoundsReport:
    """Rate floors and effect interval when only the outcome is misclassified.

    A negative point estimate is sign-normalized by recoding the outcome;
    the report maps everything back to the caller's coding (interval
    reflected, sensitivity and specificity labels swapped).
    """
    naive = naive_cace(dist)
    recoded = naive.value < 0
    work = recode_outcome(dist) if recoded else dist
    naive_w = -naive.value if recoded else naive.value

    rd_d = risk_difference(work, RD_D)
    rd_yd = risk_difference(work, RiskDiffSpec(y=1, d=1))
    rd_y_unt = risk_difference(work, RiskDiffSpec(y=1, d=0, flip_z=True))

    candidates = [
        ("y_rate_untreated_arm1", _cond(work, 1, y=1, given_d=0)),
        ("y_rate_treated_arm0", _cond(work, 0, y=1, given_d=1)),
        ("rd_ratio_treated", rd_yd / rd_d),
        ("rd_ratio_untreated", rd_y_unt / rd_d),
    ]
    m, m_name = _extremum(candidates, max)
    n, n_name = _extremum(candidates, min)

    width = m - n
    hi_raw = 1 if width <= 0 else naive_w / width
    lo_w, hi_w = _cap_interval(naive_w, hi_raw)
    feasible = not (m > 1 or n < 0)

    # Map back: recoding the outcome swaps the channel's two error rates.
    sn_lo, sp_lo = (1 - n, m) if recoded else (m, 1 - n)
    sn_name, sp_name = (n_name, m_name) if recoded else (m_name, n_name)
    cace_lo, cace_hi = (-hi_w, -lo_w) if recoded else (lo_w, hi_w)

    return BoundsReport(
        theorem="outcome_nondiff",
        variable="y",
        cace_lo=cace_lo,
        cace_hi=cace_hi,
        sn_lo=sn_lo,
        sn_hi=1,
        sp_lo=sp_lo,
        sp_hi=1,
        feasible=feasible,
        recoded=recoded,
        binding=(("sn_lo", sn_name), ("sp_lo", sp_name)),
        intermediates={
            "M_Y": m,
            "N_Y": n,
            "elements": {name: v for name, v in candidates if v is not None},
            "naive": naive.value,
            "naive_normalized": naive_w,
        },
    )


def bounds_treatment_nondiff(dist: ObservedDistribution) -> BoundsReport:
    """Rate envelope and effect interval when only treatment is misclassified.

    Evaluated in the caller's outcome coding: the published diagnostics
    for a negative point estimate plug the table in directly, and the
    magnitude of any out-of-range bound is the evidence of interest. The
    sign-normalized evaluation is attached under
    intermediates["sign_normalized"] whenever the point estimate is
    negative.
    """
    naive = naive_cace(dist)
    rd_y = naive.numerator
    if rd_y == 0:
        raise ZeroDenominator(rd_y, context="outcome risk difference in rate ratios")
    rd_yd = risk_difference(dist, RiskDiffSpec(y=1, d=1))
    rd_compl = risk_difference(dist, RiskDiffSpec(y=0, d=1, flip_z=True))
    rho = rd_yd / rd_y
    gamma = rd_compl / rd_y

    marg = [
        ("p_d1_given_z0", _cond(dist, 0, d=1)),
        ("p_d1_given_z1", _cond(dist, 1, d=1)),
    ]
    m_cands = marg + [
        ("p_d1_given_y0_z1", _cond(dist, 1, d=1, given_y=0)),
        ("p_d1_given_y1_z1", _cond(dist, 1, d=1, given_y=1)),
        ("rd_ratio_complement", gamma),
    ]
    n_cands = marg + [
        ("p_d1_given_y0_z0", _cond(dist, 0, d=1, given_y=0)),
        ("p_d1_given_y1_z0", _cond(dist, 0, d=1, given_y=1)),
        ("rd_ratio_joint", rho),
    ]
    m, m_name = _extremum(m_cands, max)
    n, n_name = _extremum(n_cands, min)
    u = min(1, rho)
    v = max(0, gamma)

    sn_empty = m > u
    sp_empty = (1 - n) > (1 - v)
    feasible = not (sn_empty or sp_empty or m > 1 or n < 0 or u < 0 or v > 1)

    cace_a = naive.value * (m - n)
    cace_b = naive.value * (u - v)
    cace_lo, cace_hi = _cap_interval(min(cace_a, cace_b), max(cace_a, cace_b))

    intermediates = {
        "M_D": m,
        "N_D": n,
        "U_D": u,
        "V_D": v,
        "naive": naive.value,
    }
    if naive.value < 0:
        normalized = bounds_treatment_nondiff(recode_outcome(dist))
        intermediates["sign_normalized"] = {
            "M_D": normalized.intermediates["M_D"],
            "N_D": normalized.intermediates["N_D"],
            "U_D": normalized.intermediates["U_D"],
            "V_D": normalized.intermediates["V_D"],
            "sn_interval": (normalized.sn_lo, normalized.sn_hi),
            "sp_interval": (normalized.sp_lo, normalized.sp_hi),
            "cace_interval": (-normalized.cace_hi, -normalized.cace_lo),
            "feasible": normalized.feasible,
        }

    return BoundsReport(
        theorem="treatment_nondiff",
        variable="d",
        cace_lo=cace_lo,
        cace_hi=cace_hi,
        sn_lo=m,
        sn_hi=u,
        sp_lo=1 - n,
        sp_hi=1 - v,
        feasible=feasible,
        recoded=False,
        binding=(("sn_lo", m_name), ("sp_lo", n_name)),
        intermediates=intermediates,
    )


def _require_strong_mono(dist: ObservedDistribution, tol):
    pd0 = arm_probability(dist, 0, d=1)
    if pd0 > tol:
        raise StrongMonoViolated(pd0, tol)


def bounds_outcome_strongmono(
    dist: ObservedDistribution, *, strong_mono_tol: float = STRONG_MONO_TOL
) -> BoundsReport:
    """Outcome-misclassification bounds sharpened by one-sided compliance."""
    _require_strong_mono(dist, strong_mono_tol)
    naive = naive_cace(dist)
    recoded = naive.value < 0
    work = recode_outcome(dist) if recoded else dist
    naive_w = -naive.value if recoded else naive.value

    a = _cond(work, 1, y=1, given_d=0)
    b = _cond(work, 1, y=1, given_d=1)
    if b is None:
        raise ZeroDenominator(0, context="treated share of the encouraged arm")

    n_cands = [("y_rate_untreated_arm1", a), ("y_rate_treated_arm1_shifted", b - naive_w)]
    m_cands = [("y_rate_untreated_arm1", a), ("y_rate_treated_arm1", b)]
    n, n_name = _extremum(n_cands, min)
    m, m_name = _extremum(m_cands, max)

    width = m - n
    hi_raw = 1 if width <= 0 else naive_w / width
    lo_w, hi_w = _cap_interval(naive_w, hi_raw)
    feasible = not (m > 1 or n < 0)

    sn_lo, sp_lo = (1 - n, m) if recoded else (m, 1 - n)
    sn_name, sp_name = (n_name, m_name) if recoded else (m_name, n_name)
    cace_lo, cace_hi = (-hi_w, -lo_w) if recoded else (lo_w, hi_w)

    return BoundsReport(
        theorem="outcome_strongmono",
        variable="y",
        cace_lo=cace_lo,
        cace_hi=cace_hi,
        sn_lo=sn_lo,
        sn_hi=1,
        sp_lo=sp_lo,
        sp_hi=1,
        feasible=feasible,
        recoded=recoded,
        binding=(("sn_lo", sn_name), ("sp_lo", sp_name)),
        intermediates={
            "M_Y_m": m,
            "N_Y_m": n,
            "naive": naive.value,
            "naive_normalized": naive_w,
        },
    )


def bounds_treatment_strongmono(
    dist: ObservedDistribution, *, strong_mono_tol: float = STRONG_MONO_TOL
) -> BoundsReport:
    """Treatment-misclassification bounds under one-sided compliance.

    The treatment channel is conditional on the encouraged arm (sn_lo and
    sp_lo bound SN and SP given Z=1). When the treated rate among outcome
    successes dominates the rate among failures, the simplified bound
    expressions apply; otherwise the general minimum-over-S_D form is
    used. Both come out of one code path that reduces correctly.
    """
    _require_strong_mono(dist, strong_mono_tol)
    rd_y = risk_difference(dist, RD_Y)
    recoded = rd_y < 0
    work = recode_outcome(dist) if recoded else dist
    rd_y_w = -rd_y if recoded else rd_y
    if rd_y_w == 0:
        raise ZeroDenominator(0, context="outcome risk difference under one-sided compliance")

    pd1 = arm_probability(work, 1, d=1)
    p11 = work.p[1][1][1]  # P(Y=1, D'=1 | Z=1), sign-normalized coding
    q1 = arm_probability(work, 1, y=1)
    q0 = arm_probability(work, 0, y=1)
    c1 = _cond(work, 1, d=1, given_y=1)
    c0 = _cond(work, 1, d=1, given_y=0)

    cond_simple = c1 is not None and c0 is not None and c1 >= c0
    c_max, c_max_name = _extremum(
        [("p_d1_given_y1_z1", c1), ("p_d1_given_y0_z1", c0)], max
    )

    s_cands = [("p_d1_given_y1_z1", c1), ("p_d1_given_y0_z1", c0)]
    if q0 > 0:
        s_cands.append(("joint_rate_ratio", (p11 - rd_y_w * c_max) / q0))
    s_min, s_min_name = _extremum(s_cands, min)

    # Effect bounds: sharp at the specificity-envelope corners. Both limits
    # are monotone in SP, so the corners sp = 1 and sp = 1 - min(S_D) cover
    # the extremes; at sp = 1 the effect is the treated success rate.
    lo_a = c_max * rd_y_w / pd1
    lo_b = (c_max - s_min) * rd_y_w / (pd1 - s_min) if pd1 != s_min else lo_a
    hi_a = p11 / pd1 if pd1 > 0 else 0
    hi_b = (p11 - s_min * q1) / (pd1 - s_min) if pd1 != s_min else hi_a
    lo_w_val = min(lo_a, lo_b)
    hi_w_val = max(hi_a, hi_b)
    lo_w_val, hi_w_val = _cap_interval(lo_w_val, hi_w_val)

    sn_lo = c_max
    sp_lo = 1 - s_min
    feasible = not (sn_lo > 1 or sp_lo > 1)

    def sn_cap(sp):
        """Upper bound on the encouraged-arm sensitivity at specificity sp."""
        return (p11 - (1 - sp) * q0) / rd_y_w

    cace_lo, cace_hi = (-hi_w_val, -lo_w_val) if recoded else (lo_w_val, hi_w_val)

    return BoundsReport(
        theorem="treatment_strongmono",
        variable="d",
        cace_lo=cace_lo,
        cace_hi=cace_hi,
        sn_lo=sn_lo,
        sn_hi=min(1, sn_cap(1)),
        sp_lo=sp_lo,
        sp_hi=1,
        feasible=feasible,
        recoded=recoded,
        binding=(("sn_lo", c_max_name), ("sp_lo", s_min_name)),
        intermediates={
            "condition_simple": cond_simple,
            "branch": "simplified" if cond_simple else "general",
            "S_D": {name: v for name, v in s_cands},
            "min_S_D": s_min,
            "sn_cap_given_sp": sn_cap,
            "sn_cap_at_sp_lo": sn_cap(sp_lo) if sp_lo <= 1 else None,
            "sn_cap_at_sp_1": sn_cap(1),
            "p_d1_given_y1_z1": c1,
            "p_d1_given_y0_z1": c0,
        },
    )


def _bp_checks(dist):
    """The four instrument inequalities on the observed joint law."""
    out = []
    for y in (1, 0):
        lhs = arm_probability(dist, 1, d=1, y=y)
        rhs = arm_probability(dist, 0, d=1, y=y)
        out.append((f"p_y{y}_d1_arm1_ge_arm0", lhs - rhs))
    for y in (1, 0):
        lhs = arm_probability(dist, 0, d=0, y=y)
        rhs = arm_probability(dist, 1, d=0, y=y)
        out.append((f"p_y{y}_d0_arm0_ge_arm1", lhs - rhs))
    return out


def testable_conditions(dist: ObservedDistribution, variant: str) -> ConditionReport:
    """Evaluate one family of observable consistency inequalities.

    Variants: "balke-pearl" (instrument inequalities on the data as
    recorded), "outcome-miserr" (identical checks; outcome error does not
    weaken them), "treatment-miserr" (the weaker family that survives
    treatment misclassification, sign-normalized first). Slacks >= 0 pass.
    """
    if variant in ("balke-pearl", "outcome-miserr"):
        checks = _bp_checks(dist)
        named = tuple((name, slack, slack >= 0) for name, slack in checks)
        return ConditionReport(
            variant=variant,
            checks=named,
            passed=all(ok for _, _, ok in named),
            recoded=False,
        )
    if variant != "treatment-miserr":
        raise ValueError(f"unknown variant {variant!r}")

    naive = naive_cace(dist)
    recoded = naive.value < 0
    work = recode_outcome(dist) if recoded else dist
    rd_y = risk_difference(work, RD_Y)
    rd_yd = risk_difference(work, RiskDiffSpec(y=1, d=1))
    gamma_num = risk_difference(work, RiskDiffSpec(y=0, d=1, flip_z=True))

    checks = [
        ("p_y1_d1_arm1_ge_arm0", rd_yd),
        (
            "p_y0_d0_arm0_ge_arm1",
            arm_probability(work, 0, d=0, y=0) - arm_probability(work, 1, d=0, y=0),
        ),
    ]
    skipped = []
    # Ratio conditions are multiplied through by the (positive) outcome
    # risk difference so zero-division never arises.
    for y in (0, 1):
        c = _cond(work, 1, d=1, given_y=y)
        if c is None:
            skipped.append(f"treated_rate_y{y}_le_joint_ratio")
        else:
            checks.append((f"treated_rate_y{y}_le_joint_ratio", rd_yd - c * rd_y))
    for y in (0, 1):
        c = _cond(work, 0, d=1, given_y=y)
        if c is None:
            skipped.append(f"control_rate_y{y}_ge_flip_ratio")
        else:
            checks.append((f"control_rate_y{y}_ge_flip_ratio", c * rd_y - gamma_num))

    named = tuple((name, slack, slack >= 0) for name, slack in checks)
    return ConditionReport(
        variant=variant,
        checks=named,
        passed=all(ok for _, _, ok in named),
        recoded=recoded,
        skipped=tuple(skipped),
    )
