import math

import numpy as np
import pytest

from threshdiff import escape, stationary
from threshdiff.errors import PreconditionError
from threshdiff.model import ThresholdModel
from threshdiff.verification import random_models


def rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


class TestCoefficients:
    def test_single_threshold_seed(self, symmetric_transient):
        coeffs = escape.escape_coefficients(symmetric_transient)
        assert coeffs.a == (1.0,)
        assert coeffs.b == (0.0,)

    def test_two_threshold_positive_middle(self):
        m = ThresholdModel([0.0, 1.0], [-1.0, 1.0, 1.0], [1.0, 1.0, 1.0])
        coeffs = escape.escape_coefficients(m)
        assert coeffs.a[0] == pytest.approx(math.e, rel=1e-14)
        assert coeffs.b[0] == pytest.approx(0.0, abs=1e-14)

    def test_two_threshold_zero_middle(self):
        m = ThresholdModel([0.0, 1.0], [-1.0, 0.0, 1.0], [1.0, 1.0, 1.0])
        coeffs = escape.escape_coefficients(m)
        assert coeffs.a[0] == pytest.approx(1.0, rel=1e-14)
        assert coeffs.b[0] == pytest.approx(2.0, rel=1e-14)

    def test_negative_interior_drift_flips_a_sign(self):
        # a_i is a signed product; only a_i + b_i is required positive
        m = ThresholdModel([0.0, 1.0], [-1.0, -2.0, 1.0], [1.0, 1.0, 1.0])
        coeffs = escape.escape_coefficients(m)
        assert coeffs.a[0] < 0.0
        assert coeffs.a[0] + coeffs.b[0] > 0.0

    def test_sum_positive_across_models(self):
        for model in random_models(81, 20, drift_ends="outward", zero_interior=True):
            coeffs = escape.escape_coefficients(model)
            assert all(a + b > 0 for a, b in zip(coeffs.a, coeffs.b))

    def test_requires_upward_top_drift(self, laplace_model):
        with pytest.raises(PreconditionError):
            escape.escape_coefficients(laplace_model)


class TestEscapeProbability:
    def test_symmetric_midpoint(self, symmetric_transient):
        assert escape.escape_to_minus_infinity(symmetric_transient, 0.0) == pytest.approx(
            0.5, rel=1e-14
        )

    def test_above_threshold_closed_form(self, symmetric_transient):
        assert escape.escape_to_minus_infinity(symmetric_transient, 1.0) == pytest.approx(
            0.5 * math.exp(-2.0), rel=1e-13
        )

    def test_below_threshold_closed_form(self, symmetric_transient):
        got = escape.escape_to_minus_infinity(symmetric_transient, -1.0)
        assert got == pytest.approx(1.0 - math.exp(-2.0) / 2.0, rel=1e-13)
        assert got == pytest.approx(0.932332, abs=1e-6)

    def test_complement_is_exact(self):
        for model in random_models(83, 10, drift_ends="outward", zero_interior=True):
            for y in np.linspace(model.thresholds[0] - 2, model.thresholds[-1] + 2, 9):
                pm = escape.escape_to_minus_infinity(model, float(y))
                pp = escape.escape_to_plus_infinity(model, float(y))
                assert pm + pp == 1.0

    def test_monotone_non_increasing_in_start(self):
        for model in random_models(85, 10, drift_ends="outward", zero_interior=True):
            ys = np.linspace(model.thresholds[0] - 3, model.thresholds[-1] + 3, 41)
            vals = [escape.escape_to_minus_infinity(model, float(y)) for y in ys]
            assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
            assert all(0.0 <= v <= 1.0 for v in vals)

    def test_continuity_at_thresholds(self):
        for model in random_models(87, 10, drift_ends="outward", zero_interior=True):
            coeffs = escape.escape_coefficients(model)
            denom = escape._denominator(model, coeffs)
            for i in range(1, model.n + 1):
                yi = model.thresholds[i - 1]
                left = escape._escape_minus_in_interval(model, coeffs, denom, yi, i)
                right = escape._escape_minus_in_interval(model, coeffs, denom, yi, i + 1)
                assert rel(left, right) < 1e-10

    def test_scale_function_cross_check(self):
        for model in random_models(89, 10, drift_ends="outward", zero_interior=True):
            lo, hi = stationary.scale_function_limits(model)
            assert math.isfinite(lo) and math.isfinite(hi)
            for y in np.linspace(model.thresholds[0] - 2, model.thresholds[-1] + 2, 9):
                p = escape.escape_to_minus_infinity(model, float(y))
                via_scale = (hi - stationary.scale_function(model, float(y))) / (hi - lo)
                assert rel(p, via_scale) < 1e-10

    def test_far_right_start_never_comes_back(self, symmetric_transient):
        assert escape.escape_to_minus_infinity(symmetric_transient, 40.0) < 1e-30

    def test_requires_outward_drift(self, laplace_model, symmetric_transient):
        with pytest.raises(PreconditionError, match="outward drift"):
            escape.escape_to_minus_infinity(laplace_model, 0.0)
        one_sided = ThresholdModel([0.0], [1.0, 1.0], [1.0, 1.0])
        with pytest.raises(PreconditionError, match="outward drift"):
            escape.escape_to_minus_infinity(one_sided, 0.0)


class TestSmallRateCoefficientLink:
    def test_decreasing_weight_limit(self):
        # c_1^-(q) tends to the escape-share expression as q vanishes
        from threshdiff.fundamentals import minus_coefficients

        for model in random_models(91, 5, drift_ends="outward"):
            coeffs = escape.escape_coefficients(model)
            mu, sig = model.drifts, model.vols
            unit = mu[1] / sig[1] ** 2 if mu[1] != 0.0 else 1.0
            target = unit / (mu[0] / sig[0] ** 2) * coeffs.a[0] / (coeffs.a[0] + coeffs.b[0])
            _, c = minus_coefficients(model, 1e-8)
            assert abs(c[0] - target) < 1e-3
