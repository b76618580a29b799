import itertools
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from bcnmf.evaluation import (
    DegenerateGroup,
    InsufficientPoints,
    LengthMismatch,
    SingleClass,
    ari,
    bootstrap_ari,
    kmeans,
    topic_associations,
    welch_t,
)


# --------------------------------------------------------------------------
# oracles


def ari_by_pairs(pred, truth):
    """Hubert-Arabie ARI from explicit enumeration of every sample pair, in exact arithmetic."""
    n11 = n10 = n01 = n00 = 0
    for i, j in itertools.combinations(range(len(pred)), 2):
        same_p, same_t = pred[i] == pred[j], truth[i] == truth[j]
        n11 += same_p and same_t
        n10 += same_p and not same_t
        n01 += same_t and not same_p
        n00 += not same_p and not same_t
    den = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11)
    if den == 0:
        return Fraction(1)
    return Fraction(2 * (n00 * n11 - n01 * n10), den)


def brute_force_wcss(points):
    best = np.inf
    n = len(points)
    for mask in range(1, 2 ** (n - 1)):
        member = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        wcss = sum(((points[g] - points[g].mean(0)) ** 2).sum() for g in (member, ~member))
        best = min(best, wcss)
    return best


def welch_reference(a, b, dps=40):
    """Welch statistic and two-sided p by direct quadrature of the Student-t density."""
    with mpmath.workdps(dps):
        a = [mpmath.mpf(float(x)) for x in a]
        b = [mpmath.mpf(float(x)) for x in b]
        ma, mb = sum(a) / len(a), sum(b) / len(b)
        va = sum((x - ma) ** 2 for x in a) / (len(a) - 1)
        vb = sum((x - mb) ** 2 for x in b) / (len(b) - 1)
        sa, sb = va / len(a), vb / len(b)
        t = (ma - mb) / mpmath.sqrt(sa + sb)
        df = (sa + sb) ** 2 / (sa ** 2 / (len(a) - 1) + sb ** 2 / (len(b) - 1))
        const = mpmath.gamma((df + 1) / 2) / (mpmath.sqrt(df * mpmath.pi) * mpmath.gamma(df / 2))
        pdf = lambda x: const * (1 + x * x / df) ** (-(df + 1) / 2)  # noqa: E731
        p = 2 * mpmath.quad(pdf, [abs(t), mpmath.inf])
        return float(t), float(df), float(p)


# --------------------------------------------------------------------------
# ARI


class TestARI:
    def test_identical(self):
        assert ari([0, 1, 1, 2], [0, 1, 1, 2]) == 1.0

    def test_single_cluster_is_zero(self):
        assert ari([0] * 6, [0, 0, 0, 1, 1, 1]) == 0.0

    def test_small_example(self):
        # Frozen from the pair enumeration: index 2, expected 1.6, max 4.
        assert ari([0, 0, 1, 1, 1], [0, 0, 0, 1, 1]) == pytest.approx(1 / 6, rel=1e-15)
        assert ari_by_pairs([0, 0, 1, 1, 1], [0, 0, 0, 1, 1]) == Fraction(1, 6)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_pair_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 13))
        pred = rng.integers(0, rng.integers(1, 5), n)
        truth = rng.integers(0, rng.integers(1, 5), n)
        assert ari(pred, truth) == float(ari_by_pairs(list(pred), list(truth)))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=2, max_size=30))
    def test_symmetric_and_permutation_invariant(self, pairs):
        a = np.array([p[0] for p in pairs])
        b = np.array([p[1] for p in pairs])
        assert ari(a, b) == pytest.approx(ari(b, a), abs=1e-15)
        relabel = np.array([7, 3, 11, 0])
        assert ari(relabel[a], b) == pytest.approx(ari(a, b), abs=1e-15)

    def test_random_labelings_center_on_zero(self):
        rng = np.random.default_rng(0)
        vals = [ari(rng.integers(0, 3, 200), rng.integers(0, 3, 200)) for _ in range(10)]
        assert abs(np.mean(vals)) <= 0.05

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            ari([0, 1], [0, 1, 1])


# --------------------------------------------------------------------------
# k-means


class TestKMeans:
    def test_separated_blobs(self, rng):
        pts = np.vstack([rng.normal(0, 0.1, (30, 2)), rng.normal(5, 0.1, (30, 2))])
        truth = np.repeat([0, 1], 30)
        assert ari(kmeans(pts, 2).labels, truth) == 1.0

    def test_identical_points_single_cluster(self):
        res = kmeans(np.ones((5, 3)), 1)
        assert res.wcss == 0.0 and np.all(res.labels == 0)

    @pytest.mark.parametrize("seed", range(20))
    def test_wcss_is_exhaustive_minimum(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(3, 9))
        pts = rng.normal(size=(n, 2))
        assert kmeans(pts, 2, seed=seed).wcss == pytest.approx(brute_force_wcss(pts), rel=1e-12, abs=1e-12)

    def test_objective_never_increases(self, rng):
        pts = rng.normal(size=(200, 3))
        for seed in range(5):
            trace = np.array(kmeans(pts, 4, seed=seed, restarts=1).trace)
            assert np.all(np.diff(trace) <= 1e-12 * trace[:-1])

    def test_deterministic(self, rng):
        pts = rng.normal(size=(50, 2))
        np.testing.assert_array_equal(kmeans(pts, 3, seed=2).labels, kmeans(pts, 3, seed=2).labels)

    def test_too_many_clusters(self):
        with pytest.raises(InsufficientPoints):
            kmeans(np.array([[0.0], [0.0], [1.0]]), 3)


# --------------------------------------------------------------------------
# Welch


class TestWelch:
    def test_documented_example(self):
        # Equal variances 5/3 and sizes 4: t = -sqrt(6/5), df = 6 exactly.
        res = welch_t([1, 2, 3, 4], [2, 3, 4, 5])
        assert res.t == pytest.approx(-np.sqrt(6 / 5), rel=1e-14)
        assert res.df == pytest.approx(6.0, rel=1e-14)
        _, _, p = welch_reference([1, 2, 3, 4], [2, 3, 4, 5])
        assert res.p == pytest.approx(p, rel=1e-9)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_high_precision_reference(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(0, rng.uniform(0.5, 3), int(rng.integers(2, 30)))
        b = rng.normal(rng.uniform(-2, 2), rng.uniform(0.5, 3), int(rng.integers(2, 30)))
        t, df, p = welch_reference(a, b)
        res = welch_t(a, b)
        assert res.t == pytest.approx(t, rel=1e-12)
        assert res.df == pytest.approx(df, rel=1e-12)
        assert res.p == pytest.approx(p, rel=1e-9)

    def test_agrees_with_scipy(self, rng):
        a, b = rng.normal(size=12), rng.normal(0.5, 2, size=9)
        ref = stats.ttest_ind(a, b, equal_var=False)
        res = welch_t(a, b)
        assert res.t == pytest.approx(ref.statistic, rel=1e-12)
        assert res.p == pytest.approx(ref.pvalue, rel=1e-10)

    def test_extreme_p_keeps_relative_accuracy(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(0, 1, 40), rng.normal(4, 1, 40)
        _, _, p = welch_reference(a, b, dps=60)
        assert p < 1e-20
        assert welch_t(a, b).p == pytest.approx(p, rel=1e-9)

    def test_identical_groups(self):
        res = welch_t([1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
        assert res.t == 0.0 and res.p == 1.0 and res.signed_logp == 0.0

    def test_direction(self, rng):
        a = np.zeros(5) + 1e-3 * rng.normal(size=5)
        b = np.full(5, 10.0) + 1e-3 * rng.normal(size=5)
        res = welch_t(a, b)
        assert res.t < -100 and res.signed_logp < -5

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_p_range_and_sign_flip(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=6), rng.normal(size=8)
        ab, ba = welch_t(a, b), welch_t(b, a)
        assert 0 < ab.p <= 1
        assert ab.signed_logp == pytest.approx(-ba.signed_logp)

    @pytest.mark.parametrize("a, b", [([1.0], [1.0, 2.0]), ([1.0, 1.0], [1.0, 2.0]), ([1.0, 3.0], [2.0, 2.0, 2.0])])
    def test_degenerate_groups(self, a, b):
        with pytest.raises(DegenerateGroup):
            welch_t(a, b)


class TestTopicAssociations:
    def test_planted_topic_ranked_first(self, rng):
        labels = np.repeat([0, 1], 40)
        H = rng.uniform(0, 1, (4, 80))
        H[2, labels == 1] += 2.0
        table = topic_associations(H, labels)
        assert table.ranked[0].topic == 2
        assert table.ranked[0].signed_logp > 0  # higher usage in the larger label value

    def test_constant_row_excluded(self, rng):
        H = rng.uniform(size=(3, 10))
        H[1] = 0.5
        table = topic_associations(H, np.repeat([0, 1], 5))
        assert 1 in table.excluded and "DegenerateGroup" in table.excluded[1]
        scores = [abs(r.signed_logp) for r in table.ranked]
        assert scores == sorted(scores, reverse=True)
        assert 1 not in [r.topic for r in table.ranked]

    def test_tie_break_by_index(self, rng):
        row = rng.uniform(size=12)
        H = np.vstack([rng.uniform(size=12), row, row])
        table = topic_associations(H, np.repeat([0, 1], 6))
        tied = [r for r in table.ranked if r.topic in (1, 2)]
        assert tied[0].signed_logp == tied[1].signed_logp
        order = [r.topic for r in table.ranked]
        assert order.index(1) < order.index(2)

    def test_single_class(self):
        with pytest.raises(SingleClass):
            topic_associations(np.ones((2, 4)), [1, 1, 1, 1])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            topic_associations(np.ones((2, 4)), [0, 1, 1])


def test_bootstrap(rng):
    pts = np.vstack([rng.normal(0, 0.1, (20, 2)), rng.normal(5, 0.1, (20, 2))])
    truth = np.repeat([0, 1], 20)
    mean, se, values = bootstrap_ari(pts, truth, 2, resamples=8, seed=1)
    assert mean == 1.0 and se == 0.0 and values.shape == (8,)
    noisy = rng.normal(size=(40, 2))
    m1 = bootstrap_ari(noisy, truth, 2, resamples=5, resample_size=30, seed=2)
    m2 = bootstrap_ari(noisy, truth, 2, resamples=5, resample_size=30, seed=2)
    assert m1[0] == m2[0] and m1[1] >= 0
