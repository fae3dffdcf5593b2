"""Tests for the scalar guarded p-value kernels."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from synthbh import static_modified_pvalue, synthetic_powered_pvalue


class TestSyntheticPoweredPvalue:
    def test_pooled_between_guard_and_real_is_returned(self):
        assert synthetic_powered_pvalue(0.5, 0.3, 0.4) == 0.3

    def test_pooled_below_guard_clamps_to_guard(self):
        assert synthetic_powered_pvalue(0.5, 0.01, 0.1) == pytest.approx(0.4)

    def test_pooled_above_real_returns_real(self):
        assert synthetic_powered_pvalue(0.2, 0.9, 0.1) == 0.2

    def test_guard_may_go_negative(self):
        # p - delta is not clamped at zero; the pooled value may still win.
        assert synthetic_powered_pvalue(0.05, 0.0, 0.1) == 0.0
        assert synthetic_powered_pvalue(0.05, 0.02, 0.1) == 0.02

    def test_zero_delta_returns_real(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            p, q = rng.random(2)
            assert synthetic_powered_pvalue(p, q, 0.0) == p

    def test_result_is_within_guard_band(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            p, q = rng.random(2)
            delta = rng.random()
            r = synthetic_powered_pvalue(p, q, delta)
            assert p - delta <= r <= p

    def test_fraction_inputs_stay_exact(self):
        r = synthetic_powered_pvalue(
            Fraction(1, 2), Fraction(1, 3), Fraction(1, 10)
        )
        assert r == Fraction(2, 5)
        assert isinstance(r, Fraction)

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), -0.1, 1.5])
    def test_rejects_bad_probabilities(self, bad):
        with pytest.raises(ValueError):
            synthetic_powered_pvalue(bad, 0.5, 0.1)
        with pytest.raises(ValueError):
            synthetic_powered_pvalue(0.5, bad, 0.1)

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), -0.01])
    def test_rejects_bad_delta(self, bad):
        with pytest.raises(ValueError):
            synthetic_powered_pvalue(0.5, 0.5, bad)


class TestStaticModifiedPvalue:
    def test_hand_example(self):
        # c = alpha / (alpha + epsilon) with alpha = epsilon gives c = 1/2.
        assert static_modified_pvalue(0.08, 0.01, 0.5) == pytest.approx(0.04)
        assert static_modified_pvalue(0.9, 0.9, 0.5) == 0.9

    def test_c_equal_one_returns_real(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            p, q = rng.random(2)
            assert static_modified_pvalue(p, q, 1.0) == p

    def test_result_bounded_by_scaled_real(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            p, q = rng.random(2)
            c = rng.uniform(0.01, 1.0)
            r = static_modified_pvalue(p, q, c)
            assert c * p <= r <= p

    def test_threshold_crossing_matches_guarded_form(self):
        # For any threshold t, the guarded value with delta = (eps/alpha) t
        # falls at or below t exactly when the static value with
        # c = alpha/(alpha+eps) does.  Exercised on exact rationals so the
        # equivalence is sharp.
        rng = np.random.default_rng(4)
        for _ in range(500):
            p = Fraction(int(rng.integers(0, 1001)), 1000)
            q = Fraction(int(rng.integers(0, 1001)), 1000)
            alpha = Fraction(int(rng.integers(1, 31)), 100)
            eps = Fraction(int(rng.integers(1, 31)), 100)
            t = Fraction(int(rng.integers(0, 201)), 1000)
            delta = eps / alpha * t
            c = alpha / (alpha + eps)
            lhs = synthetic_powered_pvalue(p, q, delta) <= t
            rhs = static_modified_pvalue(p, q, c) <= t
            assert lhs == rhs

    def test_fraction_inputs_stay_exact(self):
        r = static_modified_pvalue(Fraction(2, 25), Fraction(1, 100), Fraction(1, 2))
        assert r == Fraction(1, 25)

    @pytest.mark.parametrize("bad", [0.0, -0.5, 1.1, float("nan"), float("inf")])
    def test_rejects_bad_ratio(self, bad):
        with pytest.raises(ValueError):
            static_modified_pvalue(0.5, 0.5, bad)

    def test_monotone_in_inputs(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            p, q = rng.random(2)
            c = rng.uniform(0.01, 1.0)
            base = static_modified_pvalue(p, q, c)
            p2 = min(1.0, p + rng.random() * (1 - p))
            q2 = min(1.0, q + rng.random() * (1 - q))
            assert static_modified_pvalue(p2, q, c) >= base
            assert static_modified_pvalue(p, q2, c) >= base
