"""Closed-form bound reports against independently derived exact values.

Every constant here was regenerated with a standalone exact-rational
script kept outside the package; the bound formulas and the oracle were
written separately and agree fraction for fraction.
"""

from fractions import Fraction

import numpy as np
import pytest

from conftest import random_model, random_rates
from misiv.bounds import (
    bounds_outcome_nondiff,
    bounds_outcome_strongmono,
    bounds_treatment_nondiff,
    bounds_treatment_strongmono,
)
from misiv.bounds import testable_conditions as conditions_report
from misiv.core import ObservedCounts, from_counts, recode_outcome
from misiv.errors import ZeroDenominator
from misiv.identify import naive_cace
from misiv.latentmap import StrongMonoRates, forward_map


def test_outcome_nondiff_ex1_exact(dist1):
    r = bounds_outcome_nondiff(dist1)
    assert r.theorem == "outcome_nondiff" and r.variable == "y"
    assert r.feasible and not r.recoded
    assert r.sn_lo == Fraction(3, 4)
    assert r.sp_lo == Fraction(21, 55)
    assert r.sn_hi == 1 and r.sp_hi == 1
    assert r.cace_lo == Fraction(441, 5554)
    assert r.cace_hi == Fraction(48510, 80533)


def test_outcome_nondiff_ex2_recodes_and_flags_infeasible(dist2):
    r = bounds_outcome_nondiff(dist2)
    assert r.recoded and not r.feasible
    # The flipped-coding specificity floor exceeds one; that is the
    # infeasibility witness.
    assert r.sp_lo == Fraction(11660, 11617)
    assert r.sn_lo == Fraction(10, 89)


def test_treatment_nondiff_ex1_exact(dist1):
    r = bounds_treatment_nondiff(dist1)
    assert r.theorem == "treatment_nondiff" and r.variable == "d"
    assert r.feasible and not r.recoded
    assert r.sn_lo == Fraction(107, 175)
    assert r.sn_hi == 1
    assert r.sp_lo == Fraction(79, 87)
    assert r.sp_hi == 1
    assert r.cace_lo == Fraction(166089, 4026650)
    assert r.cace_hi == Fraction(441, 5554)


def test_treatment_nondiff_ex2_as_given_infeasible(dist2):
    r = bounds_treatment_nondiff(dist2)
    assert not r.feasible and not r.recoded
    assert r.sn_lo == Fraction(2915, 336)  # > 1: no channel can explain the data
    assert r.sp_lo == Fraction(1301, 1344)


def test_treatment_nondiff_ex2_sign_normalized(dist2):
    r = bounds_treatment_nondiff(recode_outcome(dist2))
    assert r.feasible and not r.recoded
    assert r.sn_lo == Fraction(53, 171)
    assert r.sn_hi == 1
    assert r.sp_lo == Fraction(347, 426)
    assert r.sp_hi == Fraction(1301, 1344)
    assert r.cace_lo == Fraction(677152, 47013999)
    assert r.cace_hi == Fraction(1301, 11617)


def test_outcome_strongmono_ex3_exact(dist3):
    r = bounds_outcome_strongmono(dist3)
    assert r.theorem == "outcome_strongmono"
    assert r.feasible and not r.recoded
    assert r.sn_lo == Fraction(3221, 3225)
    assert r.sp_lo == Fraction(34, 2419)
    assert r.cace_lo == Fraction(10053, 3114275)
    assert r.cace_hi == Fraction(72954621, 289624678)


def test_treatment_strongmono_ex3_exact(dist3):
    r = bounds_treatment_strongmono(dist3)
    assert r.theorem == "treatment_strongmono"
    assert r.feasible and not r.recoded
    assert r.sn_lo == Fraction(3221, 4016)
    assert r.sp_lo == Fraction(17, 23)
    assert r.cace_lo == Fraction(32380713, 12506928400)
    assert r.cace_hi == 1
    assert r.intermediates["condition_simple"] is True
    assert r.intermediates["min_S_D"] == Fraction(6, 23)


def test_treatment_strongmono_sensitivity_cap_is_monotone(dist3):
    cap = bounds_treatment_strongmono(dist3).intermediates["sn_cap_given_sp"]
    r = bounds_treatment_strongmono(dist3)
    lo = r.sp_lo
    values = [cap(lo + (1 - lo) * Fraction(i, 4)) for i in range(5)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[0] >= r.sn_lo


@pytest.mark.parametrize(
    "bound_fn, subset",
    [(bounds_outcome_nondiff, "y"), (bounds_treatment_nondiff, "d")],
)
def test_bounds_contain_truth_on_random_channels(bound_fn, subset):
    rng = np.random.default_rng(21)
    hits = 0
    for _ in range(60):
        model = random_model(rng)
        dist = forward_map(model, random_rates(rng, subset))
        if naive_cace(dist).value < 0:
            model_cace, dist = -model.cace, recode_outcome(dist)
        else:
            model_cace = model.cace
        r = bound_fn(dist)
        assert r.feasible
        assert r.cace_lo - 1e-9 <= model_cace <= r.cace_hi + 1e-9
        hits += 1
    assert hits == 60


def test_outcome_recode_equivariance():
    rng = np.random.default_rng(22)
    for _ in range(30):
        dist = forward_map(random_model(rng), random_rates(rng, "y"))
        if naive_cace(dist).value < 0:
            dist = recode_outcome(dist)
        direct = bounds_outcome_nondiff(dist)
        via_flip = bounds_outcome_nondiff(recode_outcome(dist))
        assert via_flip.recoded and not direct.recoded
        # Exact on rationals; the float path may differ in the last ulp.
        assert via_flip.cace_lo == pytest.approx(-direct.cace_hi, abs=1e-12)
        assert via_flip.cace_hi == pytest.approx(-direct.cace_lo, abs=1e-12)
        assert via_flip.sn_lo == direct.sp_lo
        assert via_flip.sp_lo == direct.sn_lo


def test_treatment_strongmono_upper_tracks_treated_success_rate():
    # When the success-ordering condition between treated and untreated
    # subgroups fails, the upper endpoint drops below one and must still
    # dominate the truth.
    rng = np.random.default_rng(23)
    seen_informative_upper = 0
    for _ in range(200):
        model = random_model(rng, strong_mono=True)
        if model.cace <= 0:
            continue
        rates = StrongMonoRates(sn_d1=float(rng.uniform(0.8, 1)), sp_d1=float(rng.uniform(0.8, 1)))
        dist = forward_map(model, rates)
        if naive_cace(dist).value <= 0:
            continue
        r = bounds_treatment_strongmono(dist)
        if not r.feasible:
            continue
        assert r.cace_lo - 1e-9 <= model.cace <= r.cace_hi + 1e-9
        if not r.intermediates["condition_simple"]:
            assert r.cace_hi < 1
            seen_informative_upper += 1
    assert seen_informative_upper > 0


def test_testable_conditions_balke_pearl_ex2(dist2):
    r = conditions_report(dist2, "balke-pearl")
    assert not r.passed and not r.recoded
    failing = {name: slack for name, slack, ok in r.checks if not ok}
    assert failing == {"p_y1_d1_arm1_ge_arm0": Fraction(-43, 99428)}


def test_testable_conditions_all_variants_pass_ex3(dist3):
    for variant in ("balke-pearl", "outcome-miserr", "treatment-miserr"):
        r = conditions_report(dist3, variant)
        assert r.passed, variant
        assert all(ok for _, _, ok in r.checks)


def test_testable_conditions_treatment_recodes_ex2(dist2):
    r = conditions_report(dist2, "treatment-miserr")
    assert r.recoded
    assert r.passed


def test_testable_conditions_unknown_variant(dist1):
    with pytest.raises(ValueError):
        conditions_report(dist1, "nonesuch")


def test_treatment_conditions_weaker_than_balke_pearl():
    # Whenever the instrument-inequality screen passes, the treatment
    # misclassification screen must pass too: its acceptance region is
    # strictly larger.
    rng = np.random.default_rng(24)
    bp_passes = 0
    for _ in range(400):
        n = [[[int(v) for v in rng.integers(1, 40, 2)] for _ in (0, 1)] for _ in (0, 1)]
        dist = from_counts(ObservedCounts.from_nested(n))
        try:
            bp = conditions_report(dist, "balke-pearl")
            tr = conditions_report(dist, "treatment-miserr")
        except (ZeroDivisionError, ZeroDenominator):
            continue
        if bp.passed:
            bp_passes += 1
            assert tr.passed
    assert bp_passes > 10
