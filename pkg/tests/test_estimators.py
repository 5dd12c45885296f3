import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plumedist.core import ConfigError, SimParams, SurrogateParams, TxConfig, Vec3
from plumedist.estimators import (EstimationError, LcParams, MetricError, chi_error, fit_slope_through_origin,
                                  fit_velocity_scale, lc_estimate)
from plumedist.plume import simulate

R0 = 0.66 / 0.34


def test_lc_examples():
    p = LcParams(1.0, R0, 0.03, 500.0)
    assert lc_estimate(R0, p) == 0.0
    assert lc_estimate(2 * R0, p) == 0.0
    assert lc_estimate(R0 * 0.97 ** 100, p) == pytest.approx(100.0, rel=1e-12)
    assert lc_estimate(R0 * 0.97 ** 100, LcParams(1.0, R0, 0.03, 60.0)) == 60.0
    with pytest.raises(EstimationError):
        lc_estimate(0.0, p)
    with pytest.raises(EstimationError):
        lc_estimate(np.array([1.0, -1.0]), p)


@pytest.mark.parametrize("p", [0.0, 1.0])
def test_lc_rejects_degenerate_degradation(p):
    with pytest.raises(ConfigError):
        LcParams(1.0, R0, p, 10.0)


@given(st.floats(1e-3, 1e3), st.floats(1e-6, 1e6), st.floats(0.1, 10.0), st.floats(0.001, 0.9))
def test_lc_output_range_and_monotonicity(r, r2, v, pd):
    p = LcParams(v, R0, pd, 50.0)
    a, b = lc_estimate(r, p), lc_estimate(r * (1 + r2 * 1e-6) + 1e-9, p)
    assert 0 <= a <= 50 and 0 <= b <= 50
    assert b <= a


@given(st.floats(0, 80), st.floats(0.2, 5.0), st.floats(0.001, 0.5))
def test_lc_roundtrip(d, v, pd):
    p = LcParams(v, R0, pd, 80.0)
    r = R0 * (1 - pd) ** (d / v)
    assert lc_estimate(r, p) == pytest.approx(d, rel=1e-10, abs=1e-10)


def test_slope_oracles():
    x = np.arange(1, 50, dtype=float)
    v, r2 = fit_slope_through_origin(x, 2 * x)
    assert v == 2.0 and r2 == 1.0
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 10, 200)
    y = 1.7 * x + rng.normal(0, 0.5, 200)
    v, _ = fit_slope_through_origin(x, y)
    assert v == pytest.approx(np.sum(x * y) / np.sum(x * x), rel=1e-12)
    with pytest.raises(EstimationError):
        fit_slope_through_origin([1.0], [1.0])


def test_velocity_scale_straight_lines():
    huge = dict(domain_min=Vec3(-1e6, -1e6, -1e6), domain_max=Vec3(1e6, 1e6, 1e6))
    params = SimParams(mean_wind=0.25, dt=2.0, surrogate=SurrogateParams(0.0, 10.0, 0.0, 20.0), **huge)
    snaps = simulate(TxConfig(radius=1e-12, release_per_step=3), params, 40)
    fit = fit_velocity_scale(snaps)
    assert fit.v == pytest.approx(0.5, rel=1e-9)
    assert fit.r2 == pytest.approx(1.0, abs=1e-9)


def test_velocity_scale_surrogate_is_linear():
    fit = fit_velocity_scale(simulate(TxConfig(release_per_step=150), SimParams(seed=6), 250))
    assert fit.v > 0 and fit.r2 >= 0.8


def test_velocity_scale_needs_data():
    with pytest.raises(EstimationError):
        fit_velocity_scale([])


def test_chi_examples(rng):
    assert chi_error([1.0, 3.0], [1.0, 3.0]) == 0.0
    assert chi_error([2.0, 2.0], [1.0, 3.0]) == 1.0
    t = rng.uniform(0, 20, 500)
    assert chi_error(np.full(500, t.mean()), t) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(MetricError):
        chi_error([1.0, 2.0], [3.0, 3.0])
    with pytest.raises(MetricError):
        chi_error([1.0], [3.0])


@given(st.lists(st.tuples(st.floats(0, 30), st.floats(0, 30)), min_size=2, max_size=50), st.randoms())
def test_chi_permutation_invariant(pairs, rnd):
    est, tru = map(np.array, zip(*pairs))
    if np.ptp(tru) < 1e-6:
        return
    perm = list(range(len(pairs)))
    rnd.shuffle(perm)
    assert chi_error(est[perm], tru[perm]) == pytest.approx(chi_error(est, tru), rel=1e-9)
