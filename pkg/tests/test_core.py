import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plumedist.core import (ConfigError, Particle, RxConfig, SimParams, SurrogateParams, TxConfig, Vec3,
                            distance, sample_uniform_in_sphere)
from conftest import binom_3sigma

finite = st.floats(-1e6, 1e6, allow_nan=False)
vec = st.tuples(finite, finite, finite)


def test_distance_examples():
    assert distance([0, 0, 0], [0, 0, 0]) == 0
    assert distance([0, 0, 0], [3, 4, 0]) == 5


def test_distance_vs_sum_of_squares(rng):
    for _ in range(100):
        a, b = rng.normal(size=3) * 10, rng.normal(size=3) * 10
        oracle = math.sqrt(sum((ai - bi) ** 2 for ai, bi in zip(a, b)))
        assert distance(a, b) == pytest.approx(oracle, abs=1e-12)


@given(vec, vec)
def test_distance_symmetric_nonnegative(a, b):
    assert distance(a, b) == distance(b, a)
    assert distance(a, b) >= 0
    assert distance(a, a) == 0


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), -float("inf")])
def test_types_reject_non_finite(bad):
    with pytest.raises(ConfigError):
        Vec3(bad, 0, 0)
    with pytest.raises(ConfigError):
        RxConfig(Vec3(0, 0, 0), bad)
    with pytest.raises(ConfigError):
        TxConfig(radius=bad)
    with pytest.raises(ConfigError):
        SimParams(dt=bad)
    with pytest.raises(ConfigError):
        SurrogateParams(bad, 1, 1, 1)


def test_config_validation():
    with pytest.raises(ConfigError):
        TxConfig(p1=1.5)
    with pytest.raises(ConfigError):
        TxConfig(release_per_step=0)
    with pytest.raises(ConfigError):
        Particle(3, Vec3(0, 0, 0), 0)
    with pytest.raises(ConfigError):
        Particle(1, Vec3(0, 0, 0), -1)
    with pytest.raises(ConfigError):
        SimParams(domain_min=Vec3(0, 0, 0), domain_max=Vec3(1, 0, 1))
    with pytest.raises(ConfigError):
        SimParams(surrogate=SurrogateParams(0.1, 0.5, 0.1, 5.0), dt=1.0)
    tx = TxConfig(p1=0.34)
    assert tx.p1 + tx.p2 == 1.0


def test_sphere_containment(rng):
    c = Vec3(1.0, -2.0, 0.5)
    pts = sample_uniform_in_sphere(c, 0.7, rng, size=20000)
    assert np.all(np.linalg.norm(pts - c.as_array(), axis=1) <= 0.7)
    p = sample_uniform_in_sphere(c, 0.7, rng)
    assert distance(p, c) <= 0.7


def test_sphere_volume_ratio_and_mean(rng):
    n = 100_000
    pts = sample_uniform_in_sphere([0, 0, 0], 2.0, rng, size=n)
    r = np.linalg.norm(pts, axis=1)
    frac = np.mean(r <= 1.0)
    assert abs(frac - 1 / 8) <= binom_3sigma(n, 1 / 8)
    # per-axis variance of a uniform ball of radius R is R^2 / 5
    assert np.all(np.abs(pts.mean(axis=0)) <= 3 * math.sqrt(4 / 5 / n))


def test_sphere_reproducible():
    a = sample_uniform_in_sphere([0, 0, 0], 1.0, np.random.default_rng(7), size=50)
    b = sample_uniform_in_sphere([0, 0, 0], 1.0, np.random.default_rng(7), size=50)
    assert a.tobytes() == b.tobytes()
