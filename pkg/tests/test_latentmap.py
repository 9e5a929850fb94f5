"""Round-trip and feasibility behavior of the measurement bijection."""

import numpy as np
import pytest

from conftest import SUBSETS, model_fields, random_model, random_rates
from misiv.core import ObservedDistribution, from_counts
from misiv.errors import (
    DegenerateDenominator,
    InfeasibleZChannel,
    NonInformativeRates,
    StrongMonoViolated,
)
from misiv.fixtures import EX1
from misiv.identify import NondiffRates, naive_cace
from misiv.latentmap import (
    LatentIvModel,
    StrongMonoRates,
    check_feasibility,
    forward_map,
    inverse_map,
)


@pytest.mark.parametrize("subset", SUBSETS)
def test_round_trip_recovers_model(subset):
    rng = np.random.default_rng(hash(subset) % (2**32))
    for _ in range(60):
        model = random_model(rng)
        rates = random_rates(rng, subset)
        back = inverse_map(forward_map(model, rates), rates)
        err = max(abs(a - b) for a, b in zip(model_fields(model), model_fields(back)))
        assert err < 1e-10


def test_forward_map_outputs_valid_distribution():
    rng = np.random.default_rng(11)
    for _ in range(30):
        dist = forward_map(random_model(rng), random_rates(rng, "zdy"))
        for z in (0, 1):
            cells = [dist.p[z][d][y] for d in (0, 1) for y in (0, 1)]
            assert all(c >= -1e-12 for c in cells)
            assert sum(cells) == pytest.approx(1, abs=1e-12)
        assert 0 <= dist.pz <= 1


def test_forward_identity_rates_reproduce_true_law():
    model = LatentIvModel(
        pz=0.5, pi_a=0.2, pi_n=0.3, pi_c=0.5,
        py_always=0.6, py_never=0.3, py_complier_control=0.4, py_complier_treated=0.7,
    )
    dist = forward_map(model, NondiffRates())
    # Encouraged arm: always-takers and compliers are treated.
    assert dist.p[1][1][1] == pytest.approx(0.2 * 0.6 + 0.5 * 0.7, abs=1e-15)
    assert dist.p[0][1][1] == pytest.approx(0.2 * 0.6, abs=1e-15)
    assert naive_cace(dist).value == pytest.approx(model.cace, abs=1e-15)


def test_forward_strong_mono_rates_keep_control_arm_untreated():
    rng = np.random.default_rng(12)
    for _ in range(20):
        model = random_model(rng, strong_mono=True)
        rates = StrongMonoRates(sn_d1=rng.uniform(0.8, 1), sp_d1=rng.uniform(0.8, 1))
        dist = forward_map(model, rates)
        assert dist.p[0][1][0] == 0 and dist.p[0][1][1] == 0
        back = inverse_map(dist, rates)
        err = max(abs(a - b) for a, b in zip(model_fields(model), model_fields(back)))
        assert err < 1e-10


def test_strong_mono_inverse_rejects_treated_control_arm(dist1):
    # EX1 has treated units in the unencouraged arm.
    with pytest.raises(StrongMonoViolated):
        inverse_map(dist1, StrongMonoRates(sn_d1=0.9, sp_d1=0.95))


def test_inverse_rejects_noninformative_rates(dist1):
    with pytest.raises(NonInformativeRates):
        inverse_map(dist1, NondiffRates(sn_y=0.5, sp_y=0.5))


def test_inverse_degenerate_stratum_denominator():
    # A law with an empty always-taker stratum leaves that stratum's
    # outcome rate undetermined; the general inverse refuses it.
    rng = np.random.default_rng(13)
    model = random_model(rng, strong_mono=True)
    dist = forward_map(model, NondiffRates())
    with pytest.raises(DegenerateDenominator):
        inverse_map(dist, NondiffRates())


def test_infeasible_z_channel():
    model = LatentIvModel(
        pz=0.95, pi_a=0.2, pi_n=0.3, pi_c=0.5,
        py_always=0.6, py_never=0.3, py_complier_control=0.4, py_complier_treated=0.7,
    )
    # P(Z=1) = 0.95 cannot arise from any observed marginal when at most
    # 90% of either recorded arm is truly encouraged.
    with pytest.raises(InfeasibleZChannel):
        forward_map(model, NondiffRates(sn_z_rev=0.9, sp_z_rev=0.9))


def test_check_feasibility_accepts_sampled_models():
    rng = np.random.default_rng(14)
    for _ in range(20):
        report = check_feasibility(random_model(rng))
        assert report.feasible and report.worst == 0.0


def test_check_feasibility_flags_out_of_range_rate():
    model = LatentIvModel(
        pz=0.5, pi_a=0.2, pi_n=0.3, pi_c=0.5,
        py_always=1.2, py_never=0.3, py_complier_control=0.4, py_complier_treated=0.7,
    )
    report = check_feasibility(model)
    assert not report.feasible
    assert any("py_always" in name for name, _, _ in report.violations)
    assert report.worst == pytest.approx(0.2, abs=1e-12)


def test_model_shares_must_sum_to_one():
    with pytest.raises(ValueError):
        LatentIvModel(
            pz=0.5, pi_a=0.5, pi_n=0.5, pi_c=0.5,
            py_always=0.5, py_never=0.5, py_complier_control=0.5, py_complier_treated=0.5,
        )


def test_wald_identity_through_any_channel():
    # naive on the blurred law, rescaled by r_d/r_y, equals the complier
    # effect no matter which coordinates are blurred.
    rng = np.random.default_rng(15)
    for _ in range(100):
        model = random_model(rng)
        rates = random_rates(rng, SUBSETS[rng.integers(len(SUBSETS))])
        est = naive_cace(forward_map(model, rates))
        assert est.value * rates.r_d / rates.r_y == pytest.approx(model.cace, abs=1e-12)
