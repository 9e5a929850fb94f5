"""Differential-rate corrections: exact recovery, frozen examples, regions."""

from fractions import Fraction

import numpy as np
import pytest

from conftest import random_model
from misiv.core import ObservedDistribution, from_counts
from misiv.errors import (
    ImplausibleCorrection,
    NonInformativeRates,
    ZeroCorrectedDenominator,
)
from misiv.identify import NondiffRates
from misiv.latentmap import forward_map
from misiv.sensitivity import (
    DifferentialRates,
    RateBox,
    cace_diff_outcome,
    cace_diff_treatment,
    sensitivity_region,
)


def _blur_outcome_by_arm(dist, sn, sp):
    """Apply an arm-specific outcome channel to an exact observed law."""
    p = []
    for z in (0, 1):
        rows = []
        for d in (0, 1):
            y1 = sn[z] * dist.p[z][d][1] + (1 - sp[z]) * dist.p[z][d][0]
            y0 = dist.p[z][d][0] + dist.p[z][d][1] - y1
            rows.append((y0, y1))
        p.append(tuple(rows))
    return ObservedDistribution(pz=dist.pz, p=tuple(p))


def _blur_treatment_by_arm(dist, sn, sp):
    p = []
    for z in (0, 1):
        rows = {0: [0, 0], 1: [0, 0]}
        for y in (0, 1):
            d1 = sn[z] * dist.p[z][1][y] + (1 - sp[z]) * dist.p[z][0][y]
            d0 = dist.p[z][0][y] + dist.p[z][1][y] - d1
            rows[1][y], rows[0][y] = d1, d0
        p.append((tuple(rows[0]), tuple(rows[1])))
    return ObservedDistribution(pz=dist.pz, p=tuple(p))


def test_spec_point_ex3_treatment(dist3):
    rates = DifferentialRates(variable="d", sn1=Fraction(9, 10), sn0=1, sp1=1, sp0=1)
    value = cace_diff_treatment(dist3, rates)
    assert float(value) == pytest.approx(0.002905234765715937, abs=1e-15)


def test_diff_outcome_recovers_truth():
    rng = np.random.default_rng(31)
    for _ in range(40):
        model = random_model(rng)
        truth = forward_map(model, NondiffRates())
        sn = (rng.uniform(0.8, 1), rng.uniform(0.8, 1))
        sp = (rng.uniform(0.8, 1), rng.uniform(0.8, 1))
        blurred = _blur_outcome_by_arm(truth, sn, sp)
        rates = DifferentialRates(variable="y", sn1=sn[1], sn0=sn[0], sp1=sp[1], sp0=sp[0])
        assert cace_diff_outcome(blurred, rates) == pytest.approx(model.cace, abs=1e-12)


def test_diff_treatment_recovers_truth():
    rng = np.random.default_rng(32)
    for _ in range(40):
        model = random_model(rng)
        truth = forward_map(model, NondiffRates())
        sn = (rng.uniform(0.8, 1), rng.uniform(0.8, 1))
        sp = (rng.uniform(0.8, 1), rng.uniform(0.8, 1))
        blurred = _blur_treatment_by_arm(truth, sn, sp)
        rates = DifferentialRates(variable="d", sn1=sn[1], sn0=sn[0], sp1=sp[1], sp0=sp[0])
        assert cace_diff_treatment(blurred, rates) == pytest.approx(model.cace, abs=1e-12)


def test_outcome_rate_gap_can_flip_the_sign(dist1):
    rates = DifferentialRates(variable="y", sn1=0.9, sn0=0.85, sp1=0.9, sp0=0.95)
    value = cace_diff_outcome(dist1, rates)
    assert value == pytest.approx(-0.04181220741807729, abs=1e-15)
    assert value < 0  # the uncorrected ratio is positive


def test_variable_mismatch_rejected(dist1):
    rates = DifferentialRates(variable="y", sn1=0.9, sn0=0.9, sp1=0.9, sp0=0.9)
    with pytest.raises(ValueError):
        cace_diff_treatment(dist1, rates)


def test_differential_rates_validation():
    with pytest.raises(ValueError):
        DifferentialRates(variable="q", sn1=0.9, sn0=0.9, sp1=0.9, sp0=0.9)
    with pytest.raises(NonInformativeRates):
        DifferentialRates(variable="y", sn1=0.5, sn0=0.9, sp1=0.5, sp0=0.9)
    with pytest.raises(ValueError):
        DifferentialRates(variable="y", sn1=1.2, sn0=0.9, sp1=0.9, sp0=0.9)


def test_implausible_correction_warns(dist1):
    # Shrinking the corrected compliance difference toward zero sends the
    # ratio past 1, which the data cannot support.
    rates = DifferentialRates(variable="d", sn1=1, sn0=1, sp1=0.505, sp0=1)
    with pytest.warns(ImplausibleCorrection):
        value = cace_diff_treatment(dist1, rates)
    assert abs(value) > 1


def test_zero_corrected_denominator():
    arm = ((Fraction(1, 4),) * 2,) * 2
    dist = ObservedDistribution(pz=Fraction(1, 2), p=(arm, arm))
    rates = DifferentialRates(variable="d", sn1=0.9, sn0=0.9, sp1=0.9, sp0=0.9)
    with pytest.raises(ZeroCorrectedDenominator):
        cace_diff_treatment(dist, rates)


def test_region_degenerate_box_is_a_point(dist3):
    box = RateBox(variable="d", sn1=(0.9, 0.9), sn0=(1, 1), sp1=(1, 1), sp0=(1, 1))
    r = sensitivity_region(dist3, box)
    point = cace_diff_treatment(
        dist3, DifferentialRates(variable="d", sn1=0.9, sn0=1, sp1=1, sp0=1)
    )
    assert r.cace_lo == pytest.approx(float(point), abs=1e-12)
    assert r.cace_hi == pytest.approx(float(point), abs=1e-12)


def test_region_contains_every_interior_point(dist1):
    box = RateBox(variable="y", sn1=(0.85, 0.95), sn0=(0.85, 0.95), sp1=(0.9, 1), sp0=(0.9, 1))
    r = sensitivity_region(dist1, box)
    rng = np.random.default_rng(33)
    for _ in range(25):
        pick = {
            nm: float(rng.uniform(*getattr(box, nm))) for nm in ("sn1", "sn0", "sp1", "sp0")
        }
        val = cace_diff_outcome(dist1, DifferentialRates(variable="y", **pick))
        assert r.cace_lo - 1e-12 <= val <= r.cace_hi + 1e-12
    w = r.intermediates["witness_lo"]
    at_witness = cace_diff_outcome(dist1, DifferentialRates(variable="y", **w))
    assert at_witness == pytest.approx(r.cace_lo, abs=1e-12)


def test_region_straddling_compliance_is_unbounded(dist1):
    # Wide treatment boxes let the corrected compliance difference cross
    # zero, and the ratio blows up on both sides.
    box = RateBox(variable="d", sn1=(0.55, 1), sn0=(0.55, 1), sp1=(0.55, 1), sp0=(0.55, 1))
    r = sensitivity_region(dist1, box)
    assert r.cace_lo == float("-inf") and r.cace_hi == float("inf")
    assert r.warnings


def test_region_noninformative_box_rejected(dist1):
    with pytest.raises(NonInformativeRates):
        sensitivity_region(
            dist1, RateBox(variable="y", sn1=(0.4, 1), sn0=(0.9, 1), sp1=(0.4, 1), sp0=(0.9, 1))
        )


def test_rate_box_validation():
    with pytest.raises(ValueError):
        RateBox(variable="y", sn1=(0.9, 0.8), sn0=(0.9, 1), sp1=(0.9, 1), sp0=(0.9, 1))
    with pytest.raises(ValueError):
        RateBox(variable="w", sn1=(0.9, 1), sn0=(0.9, 1), sp1=(0.9, 1), sp0=(0.9, 1))
