"""Escape probabilities of two-sided transient models.

When the drift points outward at both ends (mu_0 < 0, mu_n > 0) the
process drifts off to -inf or +inf almost surely; the probability of each
destination is explicit in a backward-recursed coefficient pair (a_i,
b_i) seeded at the top regime.  The recursion is evaluated in plain
arithmetic: its factors grow like exp(|mu| * width / sigma^2) and a model
extreme enough to overflow them gets an explicit error with rescaling
guidance rather than a silent switch of representation (log space would
have to track the sign of b_i, which may legitimately be negative).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NumericalInstabilityError, PreconditionError
from .model import ThresholdModel, regime_index, require_valid

__all__ = [
    "EscapeCoefficients",
    "escape_coefficients",
    "escape_to_minus_infinity",
    "escape_to_plus_infinity",
]

_TRANSIENT_CONDITION = (
    "escape probabilities require outward drift at both ends: "
    "drifts[0] < 0 and drifts[-1] > 0"
)


def _drift_ratio_unit(mu: float, sigma: float) -> float:
    """mu/sigma^2 when the drift is nonzero, else the unit placeholder the
    recursion substitutes for a vanished drift."""
    return mu / (sigma * sigma) if mu != 0.0 else 1.0


@dataclass(frozen=True)
class EscapeCoefficients:
    """Backward pair (a_i, b_i), i = 1..n, seeded a_n = 1, b_n = 0.

    a_i is a pure product (possibly negative when an interior drift is
    negative); b_i accumulates the correction terms and may carry either
    sign.  a_i + b_i must be positive for every i: the escape formulas and
    the tiny-rate coefficient limits divide by it, so that is asserted at
    construction time.
    """

    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        for i, (ai, bi) in enumerate(zip(self.a, self.b), start=1):
            if not math.isfinite(ai) or not math.isfinite(bi):
                raise NumericalInstabilityError(
                    f"escape coefficients overflowed at index {i}; rescale the "
                    "model (state units or time units) and retry"
                )
            if not ai + bi > 0.0:
                raise NumericalInstabilityError(
                    f"escape coefficient sum a_{i} + b_{i} = {ai + bi!r} is not "
                    "positive"
                )


def escape_coefficients(model: ThresholdModel) -> EscapeCoefficients:
    """Evaluate the backward recursion; requires drifts[-1] > 0."""
    require_valid(model)
    a, mu, sig = model.thresholds, model.drifts, model.vols
    n = model.n
    if not mu[n] > 0.0:
        raise PreconditionError(
            "escape coefficients require drifts[-1] > 0, got "
            f"{mu[n]!r}"
        )
    top_rate = mu[n] / (sig[n] * sig[n])
    A = [0.0] * n
    B = [0.0] * n
    A[n - 1] = 1.0
    B[n - 1] = 0.0
    for i in range(n - 1, 0, -1):
        # direct product form for a_i (1-based index i, 0-based i-1)
        expo = math.fsum(
            mu[l] * (a[l] - a[l - 1]) / (sig[l] * sig[l]) for l in range(i, n)
        )
        A[i - 1] = top_rate / _drift_ratio_unit(mu[i], sig[i]) * math.exp(expo)
        gap = a[i] - a[i - 1]
        unit = _drift_ratio_unit(mu[i], sig[i])
        # both correction terms carry the unit placeholder when the regime
        # above has zero drift (a_{i+1} always enters through its boundary
        # slope, which is unit * A there); using the raw rate instead
        # breaks C^1 gluing whenever two adjacent regimes are driftless
        nxt_unit = _drift_ratio_unit(mu[i + 1], sig[i + 1])
        correction = A[i] + B[i] - nxt_unit / unit * A[i]
        if mu[i] == 0.0:
            correction += 2.0 * nxt_unit * gap * A[i]
        B[i - 1] = correction * math.exp(-mu[i] * gap / (sig[i] * sig[i]))
    return EscapeCoefficients(a=tuple(A), b=tuple(B))


def _require_transient(model: ThresholdModel):
    require_valid(model)
    if not (model.drifts[0] < 0.0 and model.drifts[-1] > 0.0):
        raise PreconditionError(_TRANSIENT_CONDITION)


def _initial_value_pair(model: ThresholdModel, coeffs: EscapeCoefficients, y: float, i: int):
    """(a_i(y), b_i(y)) for a starting point y in regime interval i
    (1-based, y in (a_{i-1}, a_i])."""
    a, mu, sig = model.thresholds, model.drifts, model.vols
    ai, bi = coeffs.a[i - 1], coeffs.b[i - 1]
    prev_mu = mu[i - 1]
    prev_s2 = sig[i - 1] * sig[i - 1]
    unit = _drift_ratio_unit(mu[i], sig[i])
    dist = a[i - 1] - y
    if prev_mu != 0.0:
        ratio = unit / (prev_mu / prev_s2)
        ay = ratio * ai * math.exp(prev_mu * dist / prev_s2)
        by = (ai + bi - ratio * ai) * math.exp(-prev_mu * dist / prev_s2)
    else:
        ay = 0.0
        by = ai + bi + 2.0 * unit * dist * ai
    return ay, by


def _denominator(model: ThresholdModel, coeffs: EscapeCoefficients) -> float:
    mu, sig = model.drifts, model.vols
    unit1 = _drift_ratio_unit(mu[1], sig[1])
    d = (1.0 - unit1 / (mu[0] / (sig[0] * sig[0]))) * coeffs.a[0] + coeffs.b[0]
    if not d > 0.0 or not math.isfinite(d):
        raise NumericalInstabilityError(
            f"escape denominator must be positive and finite, got {d!r}"
        )
    return d


def _escape_minus_in_interval(model, coeffs, denom, y: float, i: int) -> float:
    """Escape-to--inf probability with y assigned to interval i (1-based,
    (a_{i-1}, a_i]); i = n+1 selects the branch above the top threshold.
    Forcing the interval exposes one-sided limits for continuity tests."""
    a, mu, sig = model.thresholds, model.drifts, model.vols
    n = model.n
    if i == n + 1:
        expo = -math.fsum(
            mu[l] * (a[l] - a[l - 1]) / (sig[l] * sig[l]) for l in range(1, n)
        )
        expo -= 2.0 * mu[n] * (y - a[n - 1]) / (sig[n] * sig[n])
        return math.exp(expo) / denom
    ay, by = _initial_value_pair(model, coeffs, y, i)
    expo = mu[i - 1] * (a[i - 1] - y) / (sig[i - 1] * sig[i - 1])
    expo -= math.fsum(
        mu[l] * (a[l] - a[l - 1]) / (sig[l] * sig[l]) for l in range(1, i)
    )
    value = (ay + by) / denom * math.exp(expo)
    if not math.isfinite(value):
        raise NumericalInstabilityError(
            "escape probability overflowed; rescale the model and retry"
        )
    return value


def escape_to_minus_infinity(model: ThresholdModel, y) -> float:
    """P_y{X drifts to -inf} for a two-sided transient model."""
    _require_transient(model)
    y = float(y)
    coeffs = escape_coefficients(model)
    denom = _denominator(model, coeffs)
    r = regime_index(model, y)  # regime r <-> interval i = r + 1
    value = _escape_minus_in_interval(model, coeffs, denom, y, r + 1)
    return min(max(value, 0.0), 1.0)


def escape_to_plus_infinity(model: ThresholdModel, y) -> float:
    """P_y{X drifts to +inf}: the exact complement."""
    return 1.0 - escape_to_minus_infinity(model, y)
