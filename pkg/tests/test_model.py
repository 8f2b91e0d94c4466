import json
import math

import numpy as np
import pytest

from threshdiff.errors import ModelValidationError, PreconditionError
from threshdiff.model import (
    ThresholdModel,
    drift_at,
    model_from_json,
    model_to_json,
    regime_index,
    validate,
    vol_at,
)


def test_minimal_valid_model():
    assert validate(ThresholdModel([0.0], [1.0, -1.0], [1.0, 1.0])) == []


def test_unsorted_thresholds_rejected():
    problems = validate(ThresholdModel([1.0, 0.0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]))
    assert any("strictly increasing" in p for p in problems)


def test_nonpositive_volatility_rejected():
    problems = validate(ThresholdModel([0.0], [1.0, -1.0], [1.0, 0.0]))
    assert any("volatility must be positive" in p for p in problems)


def test_length_mismatches_rejected():
    problems = validate(ThresholdModel([0.0], [1.0], [1.0, 1.0]))
    assert any("drifts" in p for p in problems)
    problems = validate(ThresholdModel([0.0], [1.0, -1.0], [1.0, 1.0, 1.0]))
    assert any("vols" in p for p in problems)


def test_non_finite_entries_rejected():
    problems = validate(ThresholdModel([0.0], [math.nan, -1.0], [1.0, 1.0]))
    assert any("finite" in p for p in problems)
    problems = validate(ThresholdModel([math.inf], [1.0, -1.0], [1.0, 1.0]))
    assert any("finite" in p for p in problems)


class TestRegimeIndex:
    def test_threshold_belongs_to_lower_regime(self):
        m = ThresholdModel([0.0, 1.0], [0.0] * 3, [1.0] * 3)
        assert regime_index(m, 0.0) == 0
        assert regime_index(m, 0.5) == 1
        assert regime_index(m, 1.0) == 1
        assert regime_index(m, 2.0) == 2

    def test_monotone_and_left_continuous(self):
        m = ThresholdModel([-0.5, 0.3, 1.7], [0.0] * 4, [1.0] * 4)
        eps = 1e-12
        xs = []
        for a in m.thresholds:
            xs += [a - eps, a, a + eps]
        regs = [regime_index(m, x) for x in xs]
        assert regs == sorted(regs)
        for i, a in enumerate(m.thresholds):
            assert regime_index(m, a) == regime_index(m, a - eps) == i

    def test_vectorized_matches_scalar(self):
        m = ThresholdModel([-1.0, 0.0, 2.0], [0.0] * 4, [1.0] * 4)
        xs = np.linspace(-3.0, 3.0, 41)
        vec = regime_index(m, xs)
        assert list(vec) == [regime_index(m, float(x)) for x in xs]

    def test_non_finite_state_rejected(self):
        m = ThresholdModel([0.0], [0.0, 0.0], [1.0, 1.0])
        with pytest.raises(PreconditionError):
            regime_index(m, math.nan)
        with pytest.raises(PreconditionError):
            regime_index(m, math.inf)


class TestCoefficientLookup:
    def test_drift_at(self):
        m = ThresholdModel([0.0], [1.0, -1.0], [1.0, 1.0])
        assert drift_at(m, -3.0) == 1.0
        assert drift_at(m, 0.0) == 1.0  # closed-left convention
        assert drift_at(m, 0.1) == -1.0

    def test_vol_at(self):
        m = ThresholdModel([0.0], [0.0, 0.0], [1.0, 2.0])
        assert vol_at(m, 0.0) == 1.0
        assert vol_at(m, 0.1) == 2.0

    def test_constant_on_each_regime(self):
        m = ThresholdModel([-1.0, 0.5], [0.3, -0.7, 1.1], [0.5, 1.5, 2.5])
        probes = [(-5.0, -1.0), (-0.9, 0.5), (0.6, 9.0)]
        for i, (x1, x2) in enumerate(probes):
            assert drift_at(m, x1) == drift_at(m, x2) == m.drifts[i]
            assert vol_at(m, x1) == vol_at(m, x2) == m.vols[i]


class TestModelFile:
    def test_round_trip(self):
        m = ThresholdModel([0.1, 1.3], [0.5, 0.0, -2.0], [1.0, 0.3, 2.0])
        again = model_from_json(model_to_json(m))
        assert again == m

    def test_extra_field_rejected(self):
        doc = {"thresholds": [0.0], "drifts": [1.0, -1.0], "vols": [1.0, 1.0], "name": "x"}
        with pytest.raises(ModelValidationError, match="unknown field"):
            model_from_json(json.dumps(doc))

    def test_missing_field_rejected(self):
        with pytest.raises(ModelValidationError, match="missing field"):
            model_from_json(json.dumps({"thresholds": [0.0], "drifts": [1.0, -1.0]}))

    def test_length_mismatch_rejected(self):
        doc = {"thresholds": [0.0], "drifts": [1.0], "vols": [1.0, 1.0]}
        with pytest.raises(ModelValidationError):
            model_from_json(json.dumps(doc))

    def test_non_numeric_rejected(self):
        doc = {"thresholds": [0.0], "drifts": ["a", 1.0], "vols": [1.0, 1.0]}
        with pytest.raises(ModelValidationError):
            model_from_json(json.dumps(doc))

    def test_invalid_json_rejected(self):
        with pytest.raises(ModelValidationError, match="not valid JSON"):
            model_from_json("{not json")
