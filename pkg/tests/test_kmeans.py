import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skillforge.kmeans import kmeans, n_clusters_for


def test_k_formula_sweep():
    for n in range(1, 501):
        assert n_clusters_for(n) == max(1, min(n, math.isqrt(n)))
    assert [n_clusters_for(n) for n in (1, 4, 16, 200, 207)] == [1, 2, 4, 14, 14]


points = st.integers(1, 40).flatmap(
    lambda n: st.lists(st.lists(st.floats(-5, 5), min_size=3, max_size=3), min_size=n, max_size=n))


@settings(max_examples=40, deadline=None)
@given(points, st.integers(0, 10))
def test_partition_and_monotone_inertia(rows, seed):
    x = np.asarray(rows)
    k = n_clusters_for(len(x))
    res = kmeans(x, k, seed=seed, n_init=3)
    assert res.labels.shape == (len(x),)
    assert set(res.labels.tolist()) == set(range(k))
    for hist in res.history:
        for a, b in zip(hist, hist[1:]):
            assert b <= a + 1e-9 * max(1.0, a)
    assert res.inertia == min(h[-1] for h in res.history)


def test_same_seed_same_result_and_separated_blobs():
    rng = np.random.default_rng(0)
    centers = np.array([[0, 0], [10, 0], [0, 10]])
    x = np.concatenate([c + rng.normal(0, 0.3, (20, 2)) for c in centers])
    a, b = kmeans(x, 3), kmeans(x, 3)
    assert np.array_equal(a.labels, b.labels) and a.inertia == b.inertia
    groups = {tuple(sorted(set(a.labels[i * 20:(i + 1) * 20].tolist()))) for i in range(3)}
    assert all(len(g) == 1 for g in groups) and len(groups) == 3


def test_identical_points_still_fill_every_cluster():
    res = kmeans(np.ones((5, 2)), 2, n_init=2)
    assert sorted(np.bincount(res.labels).tolist()) == [1, 4] or set(res.labels.tolist()) == {0, 1}


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        kmeans(np.array([[np.nan, 0.0]]), 1)
    with pytest.raises(ValueError):
        kmeans(np.zeros((2, 2)), 3)
