"""Long-run behaviour: scale function, speed density, stationary law.

The scale function phi is the strictly increasing zero-rate solution of
the generator equation, normalized by phi(a_1) = 0; the speed density is
m = 1 / (sigma^2 phi'), and when the drift points inward at both ends
(mu_0 > 0, mu_n < 0) the normalized speed density is the stationary law.
Everything here is closed form: the inner integrals of phi are piecewise
linear, so the outer integrals are sums of exponential segments.

The limit sequences (forward/backward) are the q -> 0 scaling constants
of the fundamental-solution mixing weights; they feed the stationary
normalizer and serve as numeric consistency targets for tiny-q runs.
Long-run quantities are always computed from these explicit limit
formulas, never by evaluating the q-machinery at tiny q (that route has
0/0 cancellations and is test-only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalInstabilityError, PreconditionError
from .model import ThresholdModel, regime_index, require_valid
from .piecewise import ExpTerm, PiecewiseExpDensity, Segment

__all__ = [
    "StationaryLaw",
    "LimitSequences",
    "scale_function",
    "scale_derivative",
    "scale_function_limits",
    "speed_density",
    "speed_density_in_regime",
    "speed_total_mass",
    "stationary_normalizer",
    "stationary_law",
    "stationary_density",
    "limit_sequences",
]

_STATIONARY_CONDITION = (
    "a stationary law requires inward drift at both ends: "
    "drifts[0] > 0 and drifts[-1] < 0"
)


def _cumulative_exponents(model: ThresholdModel) -> list[float]:
    """E_i = sum over interior gaps below regime i of 2 mu dx / sigma^2.

    Index i runs over regimes 1..n; E_1 = 0.  These are the log-prefactors
    that chain the per-regime exponentials together continuously.
    """
    a, mu, sig = model.thresholds, model.drifts, model.vols
    out = [0.0]
    for j in range(1, model.n):
        out.append(out[-1] + 2.0 * mu[j] * (a[j] - a[j - 1]) / (sig[j] * sig[j]))
    return out


def speed_density_in_regime(model: ThresholdModel, x, r: int):
    """Regime r's speed-density branch evaluated at x (x need not lie in
    regime r; forcing the branch exposes one-sided limits at thresholds)."""
    a, mu, sig = model.thresholds, model.drifts, model.vols
    s2 = sig[r] * sig[r]
    x = np.asarray(x, dtype=float)
    if r == 0:
        return np.exp(2.0 * mu[0] * (x - a[0]) / s2) / s2
    E = _cumulative_exponents(model)
    return np.exp(E[r - 1] + 2.0 * mu[r] * (x - a[r - 1]) / s2) / s2


def speed_density(model: ThresholdModel, x):
    """Speed density m(x) = 1 / (sigma(x)^2 phi'(x)), in closed form."""
    require_valid(model)
    scalar = np.isscalar(x) or np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    regs = regime_index(model, xs)
    out = np.empty_like(xs)
    for r in np.unique(regs):
        mask = regs == r
        out[mask] = speed_density_in_regime(model, xs[mask], int(r))
    return float(out[0]) if scalar else out


def speed_total_mass(model: ThresholdModel) -> float:
    """Closed-form integral of the speed density; +inf when not recurrent."""
    require_valid(model)
    a, mu, sig = model.thresholds, model.drifts, model.vols
    n = model.n
    E = _cumulative_exponents(model)
    if mu[0] <= 0.0 or mu[n] >= 0.0:
        return math.inf
    total = 1.0 / (2.0 * mu[0])
    for r in range(1, n):
        s2 = sig[r] * sig[r]
        gap = a[r] - a[r - 1]
        if mu[r] != 0.0:
            total += math.exp(E[r - 1]) * math.expm1(2.0 * mu[r] * gap / s2) / (2.0 * mu[r])
        else:
            total += math.exp(E[r - 1]) * gap / s2
    total += -math.exp(E[n - 1]) / (2.0 * mu[n])
    return total


# -- scale function ---------------------------------------------------------


def scale_derivative(model: ThresholdModel, x):
    """phi'(x) = exp(-int_{a_1}^x 2 b / sigma^2); equals 1/(sigma^2 m)."""
    sig2 = np.asarray(model.vols) ** 2
    regs = regime_index(model, x)
    m = speed_density(model, x)
    return 1.0 / (sig2[regs] * m)


def _segment_integral(mu: float, sigma: float, width: float) -> float:
    """int_0^width exp(-2 mu u / sigma^2) du, exact for mu = 0."""
    if mu == 0.0:
        return width
    s2 = sigma * sigma
    return -s2 / (2.0 * mu) * math.expm1(-2.0 * mu * width / s2)


def _phi_at_thresholds(model: ThresholdModel) -> list[float]:
    a, mu, sig = model.thresholds, model.drifts, model.vols
    E = _cumulative_exponents(model)
    phi = [0.0]
    for j in range(1, model.n):
        phi.append(
            phi[-1] + math.exp(-E[j - 1]) * _segment_integral(mu[j], sig[j], a[j] - a[j - 1])
        )
    return phi


def scale_function(model: ThresholdModel, x) -> float:
    """phi(x): strictly increasing, phi(a_1) = 0, generator-harmonic."""
    require_valid(model)
    x = float(x)
    a, mu, sig = model.thresholds, model.drifts, model.vols
    r = regime_index(model, x)
    if r == 0:
        if mu[0] == 0.0:
            return x - a[0]
        s2 = sig[0] * sig[0]
        return -s2 / (2.0 * mu[0]) * math.expm1(2.0 * mu[0] * (a[0] - x) / s2)
    E = _cumulative_exponents(model)
    phi = _phi_at_thresholds(model)
    return phi[r - 1] + math.exp(-E[r - 1]) * _segment_integral(mu[r], sig[r], x - a[r - 1])


def scale_function_limits(model: ThresholdModel) -> tuple[float, float]:
    """(phi(-inf), phi(+inf)); each is finite iff the drift at that end
    points outward (mu_0 < 0 for the left end, mu_n > 0 for the right)."""
    require_valid(model)
    a, mu, sig = model.thresholds, model.drifts, model.vols
    n = model.n
    if mu[0] < 0.0:
        lo = sig[0] * sig[0] / (2.0 * mu[0])
    else:
        lo = -math.inf
    if mu[n] > 0.0:
        E = _cumulative_exponents(model)
        phi = _phi_at_thresholds(model)
        hi = phi[n - 1] + math.exp(-E[n - 1]) * sig[n] * sig[n] / (2.0 * mu[n])
    else:
        hi = math.inf
    return lo, hi


# -- stationary law ---------------------------------------------------------


def _require_recurrent(model: ThresholdModel):
    require_valid(model)
    if not (model.drifts[0] > 0.0 and model.drifts[-1] < 0.0):
        raise PreconditionError(_STATIONARY_CONDITION)


def stationary_normalizer(model: ThresholdModel) -> float:
    """The time-scale normalizer of the stationary law.

    Finite sum over k = 1..n of exp(E_k) times the bracket

        1/mu_{k-1} [mu_{k-1} != 0]  -  1/mu_k [mu_k != 0]
        + 2 (a_{k+1} - a_k)/sigma_k^2 [mu_k = 0]

    with a_{n+1} = +inf (the mu_k = 0 branch cannot fire at k = n because
    mu_n < 0).  Equals twice the total speed mass.
    """
    _require_recurrent(model)
    a, mu, sig = model.thresholds, model.drifts, model.vols
    n = model.n
    E = _cumulative_exponents(model)
    total = 0.0
    for k in range(1, n + 1):
        bracket = 0.0
        if mu[k - 1] != 0.0:
            bracket += 1.0 / mu[k - 1]
        if mu[k] != 0.0:
            bracket -= 1.0 / mu[k]
        else:
            # interior regime with zero drift contributes its width term
            bracket += 2.0 * (a[k] - a[k - 1]) / (sig[k] * sig[k])
        total += math.exp(E[k - 1]) * bracket
    if not (total > 0.0) or not math.isfinite(total):
        raise NumericalInstabilityError(
            f"stationary normalizer must be positive and finite, got {total!r}"
        )
    return total


@dataclass(frozen=True)
class StationaryLaw:
    """Normalized long-run law of a positive-recurrent model.

    normalizer is the time-scale constant above; pieces is the density as
    one exponential segment per regime; log_prefactors[i] is the chained
    exponent E_i entering regime i's piece (0 for regimes 0 and 1).
    """

    model: ThresholdModel
    normalizer: float
    pieces: PiecewiseExpDensity
    log_prefactors: tuple[float, ...]

    def density(self, z):
        return self.pieces.evaluate(z)


def stationary_law(model: ThresholdModel) -> StationaryLaw:
    _require_recurrent(model)
    a, mu, sig = model.thresholds, model.drifts, model.vols
    n = model.n
    E = _cumulative_exponents(model)
    norm = stationary_normalizer(model)
    segments = []
    s2 = sig[0] * sig[0]
    segments.append(
        Segment(
            -math.inf,
            a[0],
            (ExpTerm(2.0 / (s2 * norm), 2.0 * mu[0] / s2, a[0]),),
        )
    )
    for r in range(1, n + 1):
        s2 = sig[r] * sig[r]
        right = a[r] if r < n else math.inf
        amp = 2.0 * math.exp(E[r - 1]) / (s2 * norm)
        segments.append(
            Segment(a[r - 1], right, (ExpTerm(amp, 2.0 * mu[r] / s2, a[r - 1]),))
        )
    prefactors = (0.0,) + tuple(E)
    return StationaryLaw(
        model=model,
        normalizer=norm,
        pieces=PiecewiseExpDensity(tuple(segments)),
        log_prefactors=prefactors,
    )


def stationary_density(model: ThresholdModel, z):
    """Long-run density at z for a positive-recurrent model."""
    return stationary_law(model).density(z)


# -- q -> 0 limit sequences -------------------------------------------------


@dataclass(frozen=True)
class LimitSequences:
    """Scaling constants of the mixing weights as the rate q vanishes.

    forward[i-1] is the constant attached to the increasing side at
    threshold i (defined when mu_0 > 0); backward[i-1] the decreasing
    side's (defined when mu_n < 0).  Either is None when its drift-sign
    hypothesis fails; the other may still be available.
    """

    forward: tuple[float, ...] | None
    backward: tuple[float, ...] | None


def _forward_limits(model: ThresholdModel) -> tuple[float, ...]:
    a, mu, sig = model.thresholds, model.drifts, model.vols
    n = model.n
    out = [1.0 / mu[0] - (1.0 / mu[1] if mu[1] != 0.0 else 0.0)]
    for i in range(2, n + 1):
        gap = a[i - 1] - a[i - 2]
        s2 = sig[i - 1] * sig[i - 1]
        term = (
            1.0 / mu[i - 1]
            if mu[i - 1] != 0.0
            else 2.0 * gap / s2
        )
        if mu[i] != 0.0:
            term -= 1.0 / mu[i]
        term += math.exp(-2.0 * mu[i - 1] * gap / s2) * out[-1]
        out.append(term)
    return tuple(out)


def _backward_limits(model: ThresholdModel) -> tuple[float, ...]:
    a, mu, sig = model.thresholds, model.drifts, model.vols
    n = model.n
    out = [0.0] * n
    out[n - 1] = (1.0 / mu[n - 1] if mu[n - 1] != 0.0 else 0.0) - 1.0 / mu[n]
    for i in range(n - 1, 0, -1):
        gap = a[i] - a[i - 1]
        s2 = sig[i] * sig[i]
        term = 1.0 / mu[i - 1] if mu[i - 1] != 0.0 else 0.0
        if mu[i] != 0.0:
            term -= 1.0 / mu[i]
        else:
            term += 2.0 * gap / s2
        term += math.exp(2.0 * mu[i] * gap / s2) * out[i]
        out[i - 1] = term
    return tuple(out)


def limit_sequences(model: ThresholdModel) -> LimitSequences:
    """Evaluate both limit recursions, each under its own hypothesis."""
    require_valid(model)
    forward = _forward_limits(model) if model.drifts[0] > 0.0 else None
    backward = _backward_limits(model) if model.drifts[-1] < 0.0 else None
    if forward is None and backward is None:
        raise PreconditionError(
            "limit sequences need drifts[0] > 0 (forward) or drifts[-1] < 0 "
            "(backward); neither holds for this model"
        )
    return LimitSequences(forward=forward, backward=backward)
