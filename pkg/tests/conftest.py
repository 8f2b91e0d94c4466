import math

import pytest

from threshdiff.model import ThresholdModel


@pytest.fixture
def standard_bm():
    """Driftless unit-volatility model with one (inactive) threshold."""
    return ThresholdModel([0.0], [0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def laplace_model():
    """Positive-recurrent model whose stationary law is e^{-|z|}/2."""
    s = math.sqrt(2.0)
    return ThresholdModel([0.0], [1.0, -1.0], [s, s])


@pytest.fixture
def symmetric_transient():
    """Two-sided transient model, symmetric about its single threshold."""
    return ThresholdModel([0.0], [-1.0, 1.0], [1.0, 1.0])


@pytest.fixture
def three_regime():
    """Generic three-regime model with distinct drifts and volatilities."""
    return ThresholdModel([0.0, 1.0], [1.0, -0.5, -1.0], [1.0, 2.0, 1.0])
