import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mecsim.workload import (
    PopularityProfile, VideoCatalog, generate_trace, shuffle_popularity, zipf_pmf,
)

# 1 / sum_{i=1..1000} i**-0.8, evaluated with 40-digit mpmath summation
P1_ZIPF_1000 = 0.06464203343751789


def test_zipf_single_item():
    assert zipf_pmf(1, 0.8).tolist() == [1.0]


def test_zipf_alpha_zero_is_uniform():
    assert zipf_pmf(4, 0.0).tolist() == [0.25, 0.25, 0.25, 0.25]


def test_zipf_top_rank_matches_direct_summation():
    p = zipf_pmf(1000, 0.8)
    assert p[0] == pytest.approx(P1_ZIPF_1000, rel=1e-13)
    assert p[0] == pytest.approx(1.0 / math.fsum(i ** -0.8 for i in range(1, 1001)), rel=1e-13)


@pytest.mark.parametrize("n", [0, -3])
def test_zipf_rejects_empty(n):
    with pytest.raises(ValueError):
        zipf_pmf(n, 0.8)


@given(st.integers(1, 3000), st.floats(0.0, 3.0))
def test_zipf_normalized_and_non_increasing(n, alpha):
    p = zipf_pmf(n, alpha)
    assert abs(p.sum() - 1.0) < 1e-12
    assert np.all(np.diff(p) <= 0)


def test_shuffle_is_deterministic():
    a = shuffle_popularity(10, 3, seed=5)
    b = shuffle_popularity(10, 3, seed=5)
    assert np.array_equal(a.per_bs_rank, b.per_bs_rank)


def test_shuffle_single_bs_is_a_permutation():
    prof = shuffle_popularity(10, 1, seed=2)
    assert prof.per_bs_rank.shape == (1, 10)
    assert sorted(prof.per_bs_rank[0]) == list(range(10))


def test_shuffle_permutations_pairwise_distinct():
    for seed in range(100):
        ranks = shuffle_popularity(1000, 5, seed).per_bs_rank
        for i, j in itertools.combinations(range(5), 2):
            assert not np.array_equal(ranks[i], ranks[j])


def test_per_bs_pmf_sums_to_one():
    prof = shuffle_popularity(1000, 5, seed=3)
    for b in range(5):
        assert abs(prof.pmf(b).sum() - 1.0) < 1e-12
        assert prof.pmf(b)[prof.order(b)[0]] == pytest.approx(P1_ZIPF_1000, rel=1e-13)


def test_adding_bs_leaves_other_streams_alone(catalog):
    small = shuffle_popularity(1000, 2, seed=9)
    big = shuffle_popularity(1000, 4, seed=9)
    assert np.array_equal(small.per_bs_rank, big.per_bs_rank[:2])
    t_small = generate_trace(small, catalog, 2.0, 3600, seed=9)
    t_big = generate_trace(big, catalog, 2.0, 3600, seed=9)
    for b in range(2):
        a, c = t_small.bs == b, t_big.bs == b
        assert np.array_equal(t_small.times[a], t_big.times[c])
        assert np.array_equal(t_small.video[a], t_big.video[c])


def test_zero_rate_gives_empty_trace(catalog):
    prof = shuffle_popularity(1000, 5, seed=0)
    assert len(generate_trace(prof, catalog, 0.0, 3600, seed=0)) == 0


def test_negative_rate_rejected(catalog):
    with pytest.raises(ValueError):
        generate_trace(shuffle_popularity(1000, 1, 0), catalog, -1.0, 10, seed=0)


def test_poisson_count_within_four_sigma(catalog):
    prof = shuffle_popularity(1000, 5, seed=11)
    for seed in range(5):
        n = len(generate_trace(prof, catalog, 2.0, 3600, seed=seed))
        assert abs(n - 600) <= 4 * math.sqrt(600)


def test_interarrivals_exponential(catalog):
    prof = shuffle_popularity(1000, 1, seed=4)
    t = generate_trace(prof, catalog, 6.0, 200_000, seed=4).times
    gaps = np.diff(np.concatenate([[0.0], t]))
    assert gaps.mean() == pytest.approx(10.0, rel=0.02)
    assert stats.kstest(gaps, "expon", args=(0, 10.0)).pvalue > 0.01


def test_trace_sorted_and_bounded(catalog):
    prof = shuffle_popularity(1000, 5, seed=1)
    tr = generate_trace(prof, catalog, 3.0, 7200, seed=1)
    assert np.all(np.diff(tr.times) >= 0)
    assert tr.times.max() <= 7200 and tr.times.min() >= 0
    assert tr.video.max() < 1000 and tr.variant.max() < 4 and tr.bs.max() < 5


def test_trace_byte_identical(catalog):
    prof = shuffle_popularity(1000, 5, seed=8)
    a = generate_trace(prof, catalog, 2.0, 86400, seed=8)
    b = generate_trace(shuffle_popularity(1000, 5, seed=8), catalog, 2.0, 86400, seed=8)
    assert a.tobytes() == b.tobytes()


def _rank_samples(catalog, n_expected, seed):
    prof = shuffle_popularity(1000, 1, seed)
    horizon = n_expected / 100.0 * 60.0
    tr = generate_trace(prof, catalog, 100.0, horizon, seed=seed)
    return prof.per_bs_rank[0][tr.video]


def test_rank_frequencies_chi_square(catalog):
    ranks = _rank_samples(catalog, 100_000, seed=21)
    observed = np.bincount(ranks, minlength=1000)
    expected = zipf_pmf(1000, 0.8) * len(ranks)
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_rank_frequencies_ks_distance(catalog):
    ranks = _rank_samples(catalog, 1_000_000, seed=22)
    ecdf = np.cumsum(np.bincount(ranks, minlength=1000)) / len(ranks)
    assert np.max(np.abs(ecdf - np.cumsum(zipf_pmf(1000, 0.8)))) < 0.01


def test_variant_mix_follows_distribution(catalog):
    prof = shuffle_popularity(1000, 2, seed=5)
    dist = [0.4, 0.3, 0.2, 0.1]
    tr = generate_trace(prof, catalog, 50.0, 60_000, variant_dist=dist, seed=5)
    freq = np.bincount(tr.variant, minlength=4) / len(tr)
    assert np.allclose(freq, dist, atol=0.01)


def test_catalog_invariants():
    assert VideoCatalog().bitrate(3) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        VideoCatalog(variant_ratios=(0.5, 0.6))
    with pytest.raises(ValueError):
        VideoCatalog(variant_ratios=(1.2,))
    with pytest.raises(ValueError):
        VideoCatalog(n_videos=0)
