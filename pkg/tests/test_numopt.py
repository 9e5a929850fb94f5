"""Grid-search bounds against the closed forms and basic search invariants."""

import numpy as np
import pytest

from conftest import random_model
from misiv.bounds import (
    bounds_outcome_nondiff,
    bounds_outcome_strongmono,
    bounds_treatment_nondiff,
    bounds_treatment_strongmono,
)
from misiv.errors import NoFeasiblePoint
from misiv.identify import naive_cace
from misiv.latentmap import check_feasibility
from misiv.numopt import SearchConfig, numeric_bounds

PARITY_TOL = 2e-3


def test_config_normalizes_and_validates():
    cfg = SearchConfig(mismeasured="DY")
    assert cfg.mismeasured == frozenset({"d", "y"})
    assert cfg.resolution == 101
    assert SearchConfig(mismeasured="zdy").resolution == 41
    with pytest.raises(ValueError):
        SearchConfig(mismeasured="")
    with pytest.raises(ValueError):
        SearchConfig(mismeasured="x")
    with pytest.raises(ValueError):
        SearchConfig(mismeasured="y", grid_resolution=1)


def test_instrument_only_search_is_a_point(dist1):
    # Instrument blur cancels in the Wald ratio, so every feasible rate
    # pair maps to the same effect.
    r = numeric_bounds(dist1, SearchConfig(mismeasured="z"))
    naive = float(naive_cace(dist1).value)
    assert r.cace_lo == pytest.approx(naive, abs=1e-9)
    assert r.cace_hi == pytest.approx(naive, abs=1e-9)


def test_matches_outcome_closed_form_ex1(dist1):
    closed = bounds_outcome_nondiff(dist1)
    r = numeric_bounds(dist1, SearchConfig(mismeasured="y"))
    assert r.cace_lo == pytest.approx(float(closed.cace_lo), abs=PARITY_TOL)
    assert r.cace_hi == pytest.approx(float(closed.cace_hi), abs=PARITY_TOL)


def test_matches_treatment_closed_form_ex1(dist1):
    closed = bounds_treatment_nondiff(dist1)
    r = numeric_bounds(dist1, SearchConfig(mismeasured="d"))
    assert r.cace_lo == pytest.approx(float(closed.cace_lo), abs=PARITY_TOL)
    assert r.cace_hi == pytest.approx(float(closed.cace_hi), abs=PARITY_TOL)


def test_matches_strongmono_closed_forms_ex3(dist3):
    closed_y = bounds_outcome_strongmono(dist3)
    r_y = numeric_bounds(dist3, SearchConfig(mismeasured="y", strong_mono=True))
    assert r_y.cace_lo == pytest.approx(float(closed_y.cace_lo), abs=PARITY_TOL)
    assert r_y.cace_hi == pytest.approx(float(closed_y.cace_hi), abs=PARITY_TOL)

    closed_d = bounds_treatment_strongmono(dist3)
    r_d = numeric_bounds(dist3, SearchConfig(mismeasured="d", strong_mono=True))
    assert r_d.cace_lo == pytest.approx(float(closed_d.cace_lo), abs=PARITY_TOL)
    assert r_d.cace_hi == pytest.approx(float(closed_d.cace_hi), abs=PARITY_TOL)


def test_extra_channels_only_widen(dist1):
    single = numeric_bounds(dist1, SearchConfig(mismeasured="y", grid_resolution=41))
    double = numeric_bounds(dist1, SearchConfig(mismeasured="dy", grid_resolution=41))
    assert double.cace_lo <= single.cace_lo + 1e-9
    assert double.cace_hi >= single.cace_hi - 1e-9


def test_refinement_only_widens(dist1):
    coarse = numeric_bounds(
        dist1, SearchConfig(mismeasured="y", grid_resolution=41, refinement_rounds=0)
    )
    refined = numeric_bounds(
        dist1, SearchConfig(mismeasured="y", grid_resolution=41, refinement_rounds=2)
    )
    assert refined.cace_lo <= coarse.cace_lo + 1e-12
    assert refined.cace_hi >= coarse.cace_hi - 1e-12


def test_witness_models_are_feasible(dist3):
    r = numeric_bounds(dist3, SearchConfig(mismeasured="y", strong_mono=True))
    for side in ("witness_lo", "witness_hi"):
        witness = r.intermediates[side]
        report = check_feasibility(witness["model"], tol=1e-7)
        assert report.feasible, (side, report.violations)


def test_no_feasible_point_raises(dist2):
    # The instrument inequalities fail on this table, and outcome blur
    # cannot repair them.
    with pytest.raises(NoFeasiblePoint):
        numeric_bounds(dist2, SearchConfig(mismeasured="y", grid_resolution=41))


def test_report_shape(dist1):
    r = numeric_bounds(dist1, SearchConfig(mismeasured="zy", grid_resolution=21, refinement_rounds=0))
    assert r.theorem == "numeric"
    assert r.variable == "zy"
    assert set(r.sn_lo) == {"z", "y"} and set(r.sp_hi) == {"z", "y"}
    assert r.intermediates["evaluated_points"] >= 21**4
    assert r.intermediates["feasible_points"] > 0
