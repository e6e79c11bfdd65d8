import numpy as np
import pytest
import scipy.stats

from sitadda.errors import MetricError
from sitadda.stats import (
    average_ranks,
    holm_adjust,
    paired_test,
    paired_test_family,
    spearman,
    wilcoxon_signed_rank,
)


class TestRanks:
    def test_no_ties(self):
        assert average_ranks(np.array([10.0, 30.0, 20.0])).tolist() == [1.0, 3.0, 2.0]

    def test_ties_average(self):
        assert average_ranks(np.array([5.0, 5.0, 1.0])).tolist() == [2.5, 2.5, 1.0]


class TestWilcoxon:
    def test_all_zero_differences_degenerate(self):
        a = np.arange(8.0)
        with pytest.raises(MetricError):
            wilcoxon_signed_rank(a, a)

    def test_constant_positive_shift_exact_p(self):
        # all ten ranks on one side: two-sided p = 2 / 2^10
        b = np.arange(10.0)
        a = b + 3.0
        stat, p = wilcoxon_signed_rank(a, b)
        assert stat == pytest.approx(55.0)
        assert p == pytest.approx(2.0 / 1024.0, abs=1e-12)

    def test_sign_symmetry(self, rng):
        a = rng.normal(0, 1, 12)
        b = rng.normal(0.3, 1, 12)
        stat_ab, p_ab = wilcoxon_signed_rank(a, b)
        stat_ba, p_ba = wilcoxon_signed_rank(b, a)
        assert stat_ab == pytest.approx(-stat_ba)
        assert p_ab == pytest.approx(p_ba)

    def test_matches_scipy_exact_no_ties(self, rng):
        for _ in range(25):
            n = int(rng.integers(6, 20))
            d = rng.normal(0.2, 1.0, n)
            d = d[d != 0]
            a = np.cumsum(np.abs(rng.normal(1, 0.1, d.size)))  # distinct magnitudes
            base = rng.normal(0, 5, d.size)
            x = base + np.where(d > 0, a, -a)
            if np.unique(a).size != a.size:
                continue
            _, p = wilcoxon_signed_rank(x, base)
            expected = scipy.stats.wilcoxon(x, base, method="exact").pvalue
            assert p == pytest.approx(expected, abs=1e-10)

    def test_normal_approximation_large_n(self, rng):
        a = rng.normal(0.5, 1.0, 60)
        b = rng.normal(0.0, 1.0, 60)
        _, p = wilcoxon_signed_rank(a, b)
        expected = scipy.stats.wilcoxon(a, b, method="approx", correction=False).pvalue
        assert p == pytest.approx(expected, rel=1e-6)

    def test_mismatched_lengths(self):
        with pytest.raises(MetricError):
            wilcoxon_signed_rank(np.zeros(4), np.zeros(5))


class TestHolm:
    def test_single_member_family_unchanged(self):
        assert holm_adjust([0.03]) == [pytest.approx(0.03)]

    def test_known_adjustment(self):
        adjusted = holm_adjust([0.01, 0.04, 0.03])
        assert adjusted == [
            pytest.approx(0.03),
            pytest.approx(0.06),
            pytest.approx(0.06),
        ]

    def test_monotone_and_capped(self):
        adjusted = holm_adjust([0.5, 0.6, 0.9])
        assert all(0 <= p <= 1 for p in adjusted)
        assert adjusted == sorted(adjusted)

    def test_matches_statsmodels_convention(self):
        pvals = [0.005, 0.011, 0.02, 0.04]
        expected = []
        m = len(pvals)
        running = 0.0
        for i, p in enumerate(sorted(pvals)):
            running = max(running, min(1.0, (m - i) * p))
            expected.append(running)
        assert holm_adjust(sorted(pvals)) == [pytest.approx(e) for e in expected]


class TestPairedTest:
    def test_family_of_one(self):
        a = np.arange(10.0) + 1.0
        b = np.arange(10.0)
        result = paired_test(a, b)
        assert result.p_adjusted == result.p_value

    def test_family_adjustment(self, rng):
        pairs = {}
        for name in ("m1", "m2", "m3"):
            base = rng.normal(0, 1, 15)
            pairs[name] = (base + rng.normal(0.5, 0.5, 15), base)
        results = paired_test_family(pairs)
        raw = [results[n].p_value for n in pairs]
        adjusted = [results[n].p_adjusted for n in pairs]
        assert adjusted == holm_adjust(raw)
        assert all(a >= r for a, r in zip(adjusted, raw))


class TestSpearman:
    def test_monotone_perfect(self):
        x = np.array([1.0, 5.0, 3.0, 4.0])
        assert spearman(x, x**3) == pytest.approx(1.0)
        assert spearman(x, -x) == pytest.approx(-1.0)

    def test_matches_scipy(self, rng):
        for _ in range(20):
            x = rng.normal(0, 1, 15)
            y = x + rng.normal(0, 1, 15)
            expected = scipy.stats.spearmanr(x, y).statistic
            assert spearman(x, y) == pytest.approx(expected, abs=1e-10)

    def test_constant_errors(self):
        with pytest.raises(MetricError):
            spearman(np.ones(5), np.arange(5.0))
