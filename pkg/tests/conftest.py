"""Shared fixtures and random-model helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from misiv.core import from_counts
from misiv.fixtures import EX1, EX2, EX3
from misiv.identify import NondiffRates
from misiv.latentmap import LatentIvModel

# All non-empty mismeasurement subsets, smallest first.
SUBSETS = ("z", "d", "y", "zd", "zy", "dy", "zdy")


@pytest.fixture(scope="session")
def dist1():
    return from_counts(EX1)


@pytest.fixture(scope="session")
def dist2():
    return from_counts(EX2)


@pytest.fixture(scope="session")
def dist3():
    return from_counts(EX3)


def random_model(rng: np.random.Generator, strong_mono: bool = False) -> LatentIvModel:
    """Draw a latent model with uniform stratum shares and outcome rates.

    pz stays inside (0.3, 0.7) so that mild instrument misclassification
    never pushes the observed marginal out of [0, 1].
    """
    if strong_mono:
        pi_n = float(rng.uniform())
        pi_a, pi_c = 0.0, 1.0 - pi_n
    else:
        lo, hi = np.sort(rng.uniform(size=2))
        pi_a, pi_n, pi_c = float(lo), float(hi - lo), float(1.0 - hi)
    py = rng.uniform(size=4)
    # An empty always-taker stratum makes its outcome rate vacuous; pin it
    # at 0 to match the inverse map's convention.
    return LatentIvModel(
        pz=float(rng.uniform(0.3, 0.7)),
        pi_a=pi_a,
        pi_n=pi_n,
        pi_c=pi_c,
        py_always=0.0 if strong_mono else float(py[0]),
        py_never=float(py[1]),
        py_complier_control=float(py[2]),
        py_complier_treated=float(py[3]),
    )


def random_rates(rng: np.random.Generator, subset: str, lo: float = 0.8, hi: float = 0.995) -> NondiffRates:
    """Informative channel rates for the named subset; others stay exact."""
    kw = {}
    if "d" in subset:
        kw["sn_d"], kw["sp_d"] = map(float, rng.uniform(lo, hi, 2))
    if "y" in subset:
        kw["sn_y"], kw["sp_y"] = map(float, rng.uniform(lo, hi, 2))
    if "z" in subset:
        kw["sn_z_rev"], kw["sp_z_rev"] = map(float, rng.uniform(lo, hi, 2))
    return NondiffRates(**kw)


def model_fields(model: LatentIvModel) -> tuple:
    return (
        model.pz,
        model.pi_a,
        model.pi_n,
        model.pi_c,
        model.py_always,
        model.py_never,
        model.py_complier_control,
        model.py_complier_treated,
    )
