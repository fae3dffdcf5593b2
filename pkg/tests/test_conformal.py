"""Tests for conformal p-values, trimming, jitter, and outlier detection."""

from __future__ import annotations

import numpy as np
import pytest

from synthbh import (
    JitterSpec,
    ScoreBundle,
    StepUpConfig,
    apply_jitter,
    bh,
    conformal_pvalue,
    conformal_pvalues,
    detect_outliers,
    merged_conformal_pvalue,
    merged_conformal_pvalues,
    trim_by_score,
)


def reference_conformal(real, test):
    """Direct count over the definition, no sorting tricks."""
    count = sum(1 for r in real if r >= test)
    return (count + 1) / (len(real) + 1)


class TestConformalPvalue:
    def test_basic_example(self):
        assert conformal_pvalue([1, 2, 3, 4], 2.5) == 0.6

    def test_above_all_references(self):
        assert conformal_pvalue([1, 2, 3, 4], 10.0) == 1 / 5

    def test_at_or_below_minimum(self):
        assert conformal_pvalue([1, 2, 3, 4], 1.0) == 1.0
        assert conformal_pvalue([1, 2, 3, 4], -5.0) == 1.0

    def test_weak_inequality_at_ties(self):
        # A test score equal to a reference score counts that reference.
        assert conformal_pvalue([1.0, 2.0, 3.0], 2.0) == 3 / 4

    def test_matches_reference_count(self):
        rng = np.random.default_rng(30)
        for _ in range(200):
            n = int(rng.integers(1, 50))
            real = rng.normal(size=n)
            t = float(rng.normal())
            assert conformal_pvalue(real, t) == reference_conformal(real, t)

    def test_vectorized_consistent_with_scalar(self):
        rng = np.random.default_rng(31)
        real = rng.normal(size=25)
        test = rng.normal(size=40)
        vec = conformal_pvalues(real, test)
        assert vec.shape == (40,)
        for j, t in enumerate(test):
            assert vec[j] == conformal_pvalue(real, t)

    def test_lattice_membership(self):
        rng = np.random.default_rng(32)
        n = 20
        real = rng.normal(size=n)
        p = conformal_pvalues(real, rng.normal(size=500))
        lattice = np.arange(1, n + 2) / (n + 1)
        assert np.isin(p, lattice).all()

    def test_nonincreasing_in_test_score(self):
        rng = np.random.default_rng(33)
        real = rng.normal(size=30)
        test = np.sort(rng.normal(size=50))
        p = conformal_pvalues(real, test)
        assert (np.diff(p) <= 0).all()

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            conformal_pvalue([], 0.5)

    def test_nan_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            conformal_pvalue([0.1, float("nan")], 0.5)
        with pytest.raises(ValueError, match="finite"):
            conformal_pvalue([0.1, 0.2], float("nan"))


class TestMergedConformalPvalue:
    def test_basic_example(self):
        assert merged_conformal_pvalue([1, 2, 3, 4], [5, 6], 2.5) == 5 / 7

    def test_empty_auxiliary_degenerates(self):
        rng = np.random.default_rng(34)
        real = rng.normal(size=15)
        test = rng.normal(size=20)
        merged = merged_conformal_pvalues(real, [], test)
        assert np.array_equal(merged, conformal_pvalues(real, test))

    def test_above_everything(self):
        assert merged_conformal_pvalue([1, 2], [3, 4, 5], 9.0) == 1 / 6

    def test_matches_reference_count(self):
        rng = np.random.default_rng(35)
        for _ in range(200):
            n = int(rng.integers(1, 30))
            big_n = int(rng.integers(0, 40))
            real = rng.normal(size=n)
            synth = rng.normal(size=big_n)
            t = float(rng.normal())
            expected = (
                sum(1 for r in real if r >= t)
                + sum(1 for s in synth if s >= t)
                + 1
            ) / (n + big_n + 1)
            assert merged_conformal_pvalue(real, synth, t) == expected

    def test_duplicated_reference_stays_within_discretization(self):
        rng = np.random.default_rng(36)
        n = 40
        real = rng.normal(size=n)
        test = rng.normal(size=100)
        p = conformal_pvalues(real, test)
        merged = merged_conformal_pvalues(real, real, test)
        assert np.abs(merged - p).max() <= 1 / (n + 1)

    def test_lattice_membership(self):
        rng = np.random.default_rng(37)
        real = rng.normal(size=12)
        synth = rng.normal(size=7)
        p = merged_conformal_pvalues(real, synth, rng.normal(size=300))
        lattice = np.arange(1, 21) / 20
        assert np.isin(p, lattice).all()


class TestTrimByScore:
    def test_two_percent_of_hundred(self):
        out = trim_by_score(np.arange(100.0), 0.02)
        assert out.size == 98
        assert out.max() == 97.0

    def test_rho_zero_is_identity(self):
        scores = np.array([3.0, 1.0, 2.0])
        out = trim_by_score(scores, 0.0)
        assert np.array_equal(out, scores)

    def test_ceiling_rule(self):
        assert trim_by_score(np.arange(10.0), 0.15).size == 8

    def test_preserves_input_order(self):
        scores = np.array([5.0, 1.0, 9.0, 3.0, 7.0])
        out = trim_by_score(scores, 0.3)  # ceil(1.5) = 2 removed: 9 and 7
        assert np.array_equal(out, [5.0, 1.0, 3.0])

    def test_ties_drop_later_index_first(self):
        out = trim_by_score(np.array([5.0, 7.0, 5.0, 7.0]), 0.25)
        assert np.array_equal(out, [5.0, 7.0, 5.0])
        out2 = trim_by_score(np.array([5.0, 7.0, 5.0, 7.0]), 0.5)
        assert np.array_equal(out2, [5.0, 5.0])
        out3 = trim_by_score(np.array([5.0, 7.0, 5.0, 7.0]), 0.75)
        assert np.array_equal(out3, [5.0])

    def test_empty_input(self):
        assert trim_by_score([], 0.5).size == 0

    def test_product_at_integer_boundary(self):
        # 0.07 * 300 lands one ULP below 21 in floats; exactly 21 must go.
        assert trim_by_score(np.arange(300.0), 0.07).size == 279

    @pytest.mark.parametrize("rho", [-0.1, 1.0, 1.5, float("nan")])
    def test_invalid_rho(self, rho):
        with pytest.raises(ValueError, match="rho"):
            trim_by_score([1.0, 2.0], rho)


class TestJitter:
    def test_same_seed_same_result(self):
        rng = np.random.default_rng(38)
        bundle = ScoreBundle(rng.normal(size=10), rng.normal(size=5), rng.normal(size=8))
        a = apply_jitter(bundle, JitterSpec(seed=99))
        b = apply_jitter(bundle, JitterSpec(seed=99))
        assert np.array_equal(a.real_scores, b.real_scores)
        assert np.array_equal(a.synth_scores, b.synth_scores)
        assert np.array_equal(a.test_scores, b.test_scores)

    def test_noise_is_negligible(self):
        rng = np.random.default_rng(39)
        bundle = ScoreBundle(rng.normal(size=50), rng.normal(size=50), rng.normal(size=50))
        jittered = apply_jitter(bundle, JitterSpec(seed=1))
        spread = np.ptp(
            np.concatenate(
                [bundle.real_scores, bundle.synth_scores, bundle.test_scores]
            )
        )
        delta = np.abs(jittered.real_scores - bundle.real_scores).max()
        assert 0 < delta < 1e-8 * spread

    def test_breaks_exact_ties(self):
        bundle = ScoreBundle(
            np.array([1.0, 1.0, 2.0]), np.array([1.0, 2.0]), np.array([2.0, 1.0])
        )
        jittered = apply_jitter(bundle, JitterSpec(seed=5))
        pooled = np.concatenate(
            [jittered.real_scores, jittered.synth_scores, jittered.test_scores]
        )
        assert np.unique(pooled).size == pooled.size

    def test_constant_scores_unchanged(self):
        bundle = ScoreBundle(np.ones(4), np.ones(3), np.ones(2))
        jittered = apply_jitter(bundle, JitterSpec(seed=3))
        assert np.array_equal(jittered.real_scores, bundle.real_scores)

    def test_negative_scale_rejected(self):
        with pytest.raises(ValueError, match="relative_scale"):
            JitterSpec(seed=0, relative_scale=-1e-9)


class TestScoreBundle:
    def test_counts(self):
        bundle = ScoreBundle([1.0, 2.0], [], [3.0])
        assert (bundle.n_real, bundle.n_synth, bundle.n_test) == (2, 0, 1)

    def test_empty_real_rejected(self):
        with pytest.raises(ValueError, match="real_scores"):
            ScoreBundle([], [1.0], [2.0])

    def test_empty_test_rejected(self):
        with pytest.raises(ValueError, match="test_scores"):
            ScoreBundle([1.0], [1.0], [])

    def test_nan_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            ScoreBundle([1.0, float("inf")], [], [2.0])


class TestDetectOutliers:
    def test_single_extreme_point_is_rejected(self):
        real = np.arange(1.0, 21.0)
        synth = np.linspace(-3.0, 0.5, 30)
        bundle = ScoreBundle(real, synth, np.array([25.0]))
        result = detect_outliers(bundle, StepUpConfig(alpha=0.2, epsilon=0.1))
        assert result.k_star == 1
        assert list(result.rejected) == [0]
        # p = 1/21, pooled = 1/51; the static guard lands at (2/3) * (1/21).
        assert result.modified_pvalues[0] == pytest.approx((0.2 / 0.3) / 21)

    def test_everything_below_reference_minimum(self):
        bundle = ScoreBundle(
            np.arange(10.0, 20.0), np.arange(5.0), np.array([1.0, 2.0, 3.0])
        )
        result = detect_outliers(bundle, StepUpConfig(alpha=0.2, epsilon=0.1))
        assert result.k_star == 0
        assert result.rejected.size == 0

    def test_no_auxiliary_equals_plain_stepup(self):
        rng = np.random.default_rng(40)
        real = rng.normal(size=50)
        test = rng.normal(size=30)
        test[:3] += 4.0
        bundle = ScoreBundle(real, np.empty(0), test)
        result = detect_outliers(bundle, StepUpConfig(alpha=0.2, epsilon=0.3))
        plain = bh(conformal_pvalues(real, test), 0.2)
        assert result.k_star == plain.k_star
        assert np.array_equal(result.rejected, plain.rejected)

    def test_weighted_config_rejected(self):
        bundle = ScoreBundle([1.0], [], [2.0])
        config = StepUpConfig(alpha=0.1, epsilon=0.1, weights=[1.0])
        with pytest.raises(ValueError, match="without weights"):
            detect_outliers(bundle, config)

    def test_jitter_keeps_clear_rejections(self):
        rng = np.random.default_rng(41)
        real = rng.normal(size=100)
        test = np.concatenate([rng.normal(size=20), [30.0]])
        bundle = ScoreBundle(real, rng.normal(size=50), test)
        config = StepUpConfig(alpha=0.2, epsilon=0.1)
        plain = detect_outliers(bundle, config)
        jittered = detect_outliers(bundle, config, jitter=JitterSpec(seed=7))
        assert np.array_equal(plain.rejected, jittered.rejected)
