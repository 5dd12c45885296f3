import numpy as np
import pytest
from hypothesis import given, strategies as st

from plumedist.core import RxConfig, Vec3
from plumedist.features import (FEATURES, build_feature_vector, compute_r_obs, feature_matrix, feature_z1,
                                feature_z2, feature_z3, feature_z4, feature_z5, feature_z6, raw_features,
                                read_feature_csv, segment, whiff_threshold, write_feature_csv)
from plumedist.receiver import ObservationWindow
from oracles import brute_features

series = st.lists(st.integers(0, 30), min_size=1, max_size=40)


def window(y1, y2=None):
    y2 = [0] * len(y1) if y2 is None else y2
    return ObservationWindow(RxConfig(Vec3(1, 0, 0), 0.3), 0, np.array([y1, y2]), 1.0)


def test_threshold_examples():
    assert whiff_threshold([0, 0, 0]) == 0
    assert whiff_threshold([5, 5]) == 2.5
    assert whiff_threshold([0, 2, 4, 6]) == 1.5


def test_segmentation_examples():
    s = segment([3, 3, 3])
    assert s.runs == ((0, 3, True),) and s.n_whiffs == 1 and s.n_blanks == 0
    s = segment([0, 0, 0, 0])
    assert s.runs == ((0, 4, False),) and s.n_whiffs == 0 and s.n_blanks == 1
    s = segment([4, 0, 4, 0])
    assert s.threshold == 1
    assert s.runs == ((0, 1, True), (1, 1, False), (2, 1, True), (3, 1, False))
    assert (s.n_whiffs, s.n_blanks) == (2, 2)


def test_feature_examples():
    for f in (feature_z1,):
        assert f([7, 7, 7]) == 7 and f([0, 0]) == 0 and f([1, 2, 3]) == 2
    c, z, a = [7, 7, 7], [0, 0, 0, 0], [4, 0, 4, 0]
    assert feature_z2(c, segment(c)) == 7 and feature_z2(z, segment(z)) == 0 and feature_z2(a, segment(a)) == 4
    r = [0, 4, 8, 12]
    assert feature_z3(c, segment(c)) == 0 and feature_z3(z, segment(z)) == 0
    # threshold 3: whiff samples are 4, 8, 12, each with |diff| = 4
    assert feature_z3(r, segment(r)) == 4
    assert feature_z4(segment(c), 3) == 1 and feature_z4(segment(a), 4) == 0.25 and feature_z4(segment(z), 4) == 0
    assert feature_z5(segment(z), 4) == 1 and feature_z5(segment(c), 3) == 0 and feature_z5(segment(a), 4) == 0.25
    assert feature_z6(segment(c), 3) == 1 and feature_z6(segment(z), 4) == 0 and feature_z6(segment(a), 4) == 0.5


def test_r_obs_examples():
    assert compute_r_obs([0, 0], [0, 0]) == 1.0
    assert compute_r_obs([1, 1], [3, 3], 0.01) == pytest.approx(3.01 / 1.01, abs=1e-12)
    assert compute_r_obs([1, 1], [3, 3], 0.01) == pytest.approx(2.9802, abs=1e-4)
    assert compute_r_obs([1, 1], [0, 0], 0.01) == pytest.approx(0.0099, abs=1e-4)
    with pytest.raises(ValueError):
        compute_r_obs([1], [1], 0.0)


@given(series, series)
def test_matches_brute_force(y1, y2):
    n = min(len(y1), len(y2))
    y1, y2 = y1[:n], y2[:n]
    assert raw_features(y1, y2) == brute_features(y1, y2)


@given(series)
def test_segmentation_invariants(y):
    s = segment(y)
    assert sum(r[1] for r in s.runs) == len(y)
    flags = [r[2] for r in s.runs]
    assert all(a != b for a, b in zip(flags, flags[1:]))
    z4, z5, z6 = feature_z4(s, len(y)), feature_z5(s, len(y)), feature_z6(s, len(y))
    assert 0 <= z6 <= 1
    if s.n_whiffs and s.n_blanks:
        assert z4 * s.n_whiffs + z5 * s.n_blanks == pytest.approx(1.0)


@given(series, st.integers(1, 9))
def test_scaling_invariance(y, k):
    y2 = list(reversed(y))
    scaled = [k * v for v in y]
    assert feature_z6(segment(scaled), len(y)) == feature_z6(segment(y), len(y))
    r = compute_r_obs(y, y2, 1e-12)
    assert compute_r_obs(scaled, [k * v for v in y2], 1e-12) == pytest.approx(r, rel=1e-6)
    assert compute_r_obs(y, y2) > 0


@given(series)
def test_r_obs_reciprocal_for_equal_means(y):
    assert compute_r_obs(y, y[::-1]) * compute_r_obs(y[::-1], y) == pytest.approx(1.0)


def test_all_zero_window_defaults():
    raw = raw_features([0] * 10, [0] * 10)
    assert raw == {"r_obs": 1.0, "z1": 0.0, "z2": 0.0, "z3": 0.0, "z4": 0.0, "z5": 1.0, "z6": 0.0}
    # z5 = 1 is the formula value for a single blank spanning the window


def test_feature_vector_log_and_order():
    w = window([4, 0, 4, 0], [1, 1, 1, 1])
    fv = build_feature_vector(w, ["z6", "r_obs"])
    assert fv.mask == ("r_obs", "z6") and fv.log_applied
    np.testing.assert_allclose(fv.values, np.log(np.array([1.01 / 2.01, 0.5]) + 1e-6))
    assert np.array_equal(build_feature_vector(w, ["z6", "r_obs"]).values, fv.values)
    with pytest.raises(ValueError):
        build_feature_vector(w, [])
    with pytest.raises(ValueError):
        build_feature_vector(w, ["z9"])


def test_feature_csv_roundtrip(tmp_path):
    ws = [window([1, 2, 3], [0, 1, 0]), window([0, 0, 5], [2, 2, 2])]
    X = feature_matrix(ws, FEATURES)
    write_feature_csv(tmp_path / "f.csv", X, FEATURES, [1.0, 2.5])
    X2, mask, d, log = read_feature_csv(tmp_path / "f.csv")
    assert np.array_equal(X, X2) and mask == FEATURES and d.tolist() == [1.0, 2.5] and log
    assert (tmp_path / "f.csv").read_text().splitlines()[0].startswith("log_r_obs,log_z1")
