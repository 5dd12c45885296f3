import numpy as np

from plumedist.rng import CounterStream, generator


def test_counter_stream_is_order_independent():
    s = CounterStream(42, "turbulence")
    ids = np.arange(1000, dtype=np.uint64)
    whole = s.normal(ids, 17, 3)
    perm = np.random.default_rng(0).permutation(1000)
    assert np.array_equal(s.normal(ids[perm], 17, 3), whole[perm])
    assert np.array_equal(s.normal(ids[:10], 17, 3), whole[:10])


def test_counter_streams_differ_by_key():
    ids = np.arange(100, dtype=np.uint64)
    a = CounterStream(1, "a").uniform(ids, 0)
    assert not np.array_equal(a, CounterStream(2, "a").uniform(ids, 0))
    assert not np.array_equal(a, CounterStream(1, "b").uniform(ids, 0))
    assert not np.array_equal(a, CounterStream(1, "a").uniform(ids, 1))
    assert not np.array_equal(a, CounterStream(1, "a").uniform(ids, 0, lane=1))


def test_counter_uniform_moments():
    u = CounterStream(9, "x").uniform(np.arange(200_000, dtype=np.uint64), 3)
    assert np.all((u > 0) & (u < 1))
    assert abs(u.mean() - 0.5) < 3 * np.sqrt(1 / 12 / u.size)
    # decile histogram, chi-square with 9 dof well below the 0.999 quantile (27.9)
    h = np.histogram(u, bins=10, range=(0, 1))[0]
    e = u.size / 10
    assert ((h - e) ** 2 / e).sum() < 27.9


def test_counter_normal_moments():
    z = CounterStream(5, "n").normal(np.arange(100_000, dtype=np.uint64), 0, 3)
    assert np.all(np.abs(z.mean(axis=0)) < 3 / np.sqrt(z.shape[0]))
    assert np.all(np.abs(z.var(axis=0) - 1) < 0.02)
    assert abs(np.corrcoef(z[:, 0], z[:, 1])[0, 1]) < 0.02


def test_named_generators_reproducible_and_distinct():
    assert generator(3, "dataset").random() == generator(3, "dataset").random()
    assert generator(3, "dataset").random() != generator(3, "split").random()
