import numpy as np
from scipy import stats

from ionlab import rng as R


def test_keys_are_reproducible_and_distinct():
    a = R.sequence_keys(7, 0, 1000)
    assert np.array_equal(a, R.sequence_keys(7, 0, 1000))
    assert np.array_equal(a[10:20], R.sequence_keys(7, 10, 20))
    assert np.unique(a).size == a.size
    assert not np.array_equal(a, R.sequence_keys(8, 0, 1000))
    assert R.sequence_key(7, 5) == a[5]


def test_uniform_stream_is_uniform():
    u = R.uniform_block(R.sequence_key(1, 0), 200_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_streams_are_uncorrelated():
    a = R.uniform_block(R.sequence_key(3, 0), 50_000)
    b = R.uniform_block(R.sequence_key(3, 1), 50_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02
