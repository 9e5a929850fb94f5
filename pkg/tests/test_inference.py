"""Tests for variance estimates, Wald intervals, inequality tests, and the
two-stage union interval.

Interval endpoints below were frozen from a standalone exact-rational
script (delta method worked by hand from the two arm risk differences);
bootstrap and union values are seeded pins checked for determinism.
"""

import warnings

import pytest

from misiv.core import ObservedCounts
from misiv.errors import DegenerateResample
from misiv.fixtures import EX1, EX2, EX3
from misiv.inference import (
    AsymptoticVariance,
    CiConfig,
    ConfidenceInterval,
    ci_union,
    ci_wald,
    estimate_variance,
)
from misiv.inference import test_inequalities as inequality_tests


def test_variance_components_ex3():
    v = estimate_variance(EX3)
    assert v.sigma1_sq == pytest.approx(0.020386952283164894, abs=1e-15)
    assert v.sigma2_sq == pytest.approx(0.31332520033505207, abs=1e-15)
    assert v.rho == pytest.approx(0.050239231934606624, abs=1e-15)


def test_variance_validation():
    with pytest.raises(ValueError):
        AsymptoticVariance(sigma1_sq=-0.1, sigma2_sq=0.2, rho=0.0)
    with pytest.raises(ValueError):
        AsymptoticVariance(sigma1_sq=0.1, sigma2_sq=0.2, rho=1.2)


@pytest.mark.parametrize(
    "counts, lo, hi, est",
    [
        (EX1, -0.1073419044643554, 0.26614636971462546, 0.07940223262513504),
        (EX3, 0.0009561210366313901, 0.005499956220515136, 0.0032280386285732632),
    ],
)
def test_wald_delta_endpoints(counts, lo, hi, est):
    ci = ci_wald(counts, CiConfig())
    assert ci.method == "delta"
    assert ci.lo == pytest.approx(lo, abs=1e-12)
    assert ci.hi == pytest.approx(hi, abs=1e-12)
    assert ci.meta["estimate"] == pytest.approx(est, abs=1e-12)
    assert ci.lo < ci.meta["estimate"] < ci.hi


def test_wald_bootstrap_pin():
    cfg = CiConfig(method="bootstrap", bootstrap_reps=2000, seed=0)
    ci = ci_wald(EX1, cfg)
    assert ci.lo == pytest.approx(-0.11297961893357625, abs=1e-12)
    assert ci.hi == pytest.approx(0.27461526652466367, abs=1e-12)
    assert ci.meta["reps"] == 2000
    assert ci.meta["degenerate_resamples"] == 0
    assert ci.meta["estimate"] == pytest.approx(0.07940223262513504, abs=1e-12)


def test_wald_bootstrap_deterministic():
    cfg = CiConfig(method="bootstrap", bootstrap_reps=300, seed=11)
    a = ci_wald(EX1, cfg)
    b = ci_wald(EX1, cfg)
    c = ci_wald(EX1, CiConfig(method="bootstrap", bootstrap_reps=300, seed=12))
    assert (a.lo, a.hi) == (b.lo, b.hi)
    assert (a.lo, a.hi) != (c.lo, c.hi)


def test_wald_bootstrap_degenerate_resamples_warn():
    # Arm 1 is half treated on four observations, so a resample drops the
    # compliance difference to zero with probability (1/2)^4 per draw.
    tiny = ObservedCounts.from_nested([[[2, 2], [0, 0]], [[1, 1], [1, 1]]])
    cfg = CiConfig(method="bootstrap", bootstrap_reps=200, seed=3)
    with pytest.warns(DegenerateResample):
        ci = ci_wald(tiny, cfg)
    assert ci.meta["degenerate_resamples"] > 0
    assert (ci.lo, ci.hi) == (-1.0, 1.0)


def test_inequalities_balke_pearl_ex2():
    rep = inequality_tests(EX2, "balke-pearl")
    assert rep.variant == "balke-pearl"
    assert not rep.recoded
    name, slack, se, p = rep.tests[0]
    assert name == "p_y1_d1_arm1_ge_arm0"
    assert slack == pytest.approx(-0.00043247374984913705, abs=1e-15)
    assert se == pytest.approx(0.0053491595826673155, abs=1e-15)
    assert p == pytest.approx(0.46778105330314923, abs=1e-12)
    assert rep.min_p == pytest.approx(0.46778105330314923, abs=1e-12)
    assert rep.bonferroni_p == 1.0


def test_inequalities_treatment_recodes_ex2():
    # Negative naive effect, so the treatment variant recodes before testing.
    rep = inequality_tests(EX2, "treatment-miserr")
    assert rep.recoded
    assert rep.min_p == pytest.approx(0.669324144848591, abs=1e-12)
    assert "Bonferroni" in rep.note


@pytest.mark.parametrize("variant", ["outcome-miserr", "treatment-miserr", "balke-pearl"])
def test_inequalities_ex3_all_pass(variant):
    rep = inequality_tests(EX3, variant)
    assert not rep.recoded
    assert rep.skipped == ()
    assert rep.min_p == pytest.approx(0.9997356929322364, abs=1e-12)
    assert all(slack >= 0 for _, slack, _, _ in rep.tests)


def test_inequalities_unknown_variant():
    with pytest.raises(ValueError):
        inequality_tests(EX1, "nonsense")


def test_union_pins_ex1():
    cfg = CiConfig(method="bootstrap", bootstrap_reps=500, seed=0)
    u2 = ci_union(EX1, "thm2", cfg)
    # Factor interval straddles zero here, so the union collapses to the cap.
    assert (u2.lo, u2.hi) == (-1.0, 1.0)
    u3 = ci_union(EX1, "thm3", cfg)
    assert u3.lo == pytest.approx(-0.16226451141399476, abs=1e-12)
    assert u3.hi == pytest.approx(0.35591381539115063, abs=1e-12)
    assert u3.lo < 0.07940223262513504 < u3.hi  # contains the point estimate


def test_union_pins_ex3():
    cfg = CiConfig(method="bootstrap", bootstrap_reps=400, seed=0)
    u4 = ci_union(EX3, "thm4", cfg)
    assert u4.lo == pytest.approx(0.0002655254464946258, abs=1e-12)
    assert u4.hi == pytest.approx(0.7007889989517779, abs=1e-12)
    u5 = ci_union(EX3, "thm5", cfg)
    assert u5.lo == pytest.approx(0.0008124496684393203, abs=1e-12)
    assert u5.hi == 1.0


def test_union_meta_shape():
    cfg = CiConfig(method="bootstrap", bootstrap_reps=400, seed=0)
    u = ci_union(EX3, "thm4", cfg)
    assert sorted(u.meta.keys()) == [
        "bound_kind",
        "degenerate_resamples",
        "gamma",
        "length_by_gamma",
        "reps",
        "stage1",
    ]
    assert u.meta["bound_kind"] == "thm4"
    assert u.meta["gamma"] == 0.005
    assert u.meta["reps"] == 400
    lo1, hi1 = u.meta["stage1"]
    assert lo1 <= hi1
    lbg = u.meta["length_by_gamma"]
    assert all(length > 0 for _, length in lbg)
    assert any(g == 0.005 for g, _ in lbg)


def test_union_deterministic():
    cfg = CiConfig(method="bootstrap", bootstrap_reps=400, seed=0)
    a = ci_union(EX3, "thm4", cfg)
    b = ci_union(EX3, "thm4", cfg)
    c = ci_union(EX3, "thm4", CiConfig(method="bootstrap", bootstrap_reps=400, seed=7))
    assert (a.lo, a.hi) == (b.lo, b.hi)
    assert (a.lo, a.hi) != (c.lo, c.hi)


def test_union_unknown_bound_kind():
    with pytest.raises(ValueError):
        ci_union(EX1, "thm9", CiConfig())


def test_ci_config_validation():
    assert CiConfig().gamma == 0.005  # defaults to a tenth of alpha
    with pytest.raises(ValueError):
        CiConfig(alpha=0.05, gamma=0.05)
    with pytest.raises(ValueError):
        CiConfig(method="jackknife")
    with pytest.raises(ValueError):
        CiConfig(method="bootstrap", bootstrap_reps=0)
    with pytest.raises(ValueError):
        CiConfig(grid_points=1)


def test_confidence_interval_iterates_as_pair():
    ci = ConfidenceInterval(lo=-0.1, hi=0.2, alpha=0.05, method="delta")
    assert tuple(ci) == (-0.1, 0.2)
