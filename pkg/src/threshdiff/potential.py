"""Resolvent (potential) density: the law of the state at a rate-q
exponential clock, both pointwise and as an exactly integrable
piecewise-exponential object.

The density dispatches on the regime of the evaluation point z and the
order of x and z.  Every prefactor mixes quantities of wildly different
magnitude (threshold-anchor amplitudes against local exponentials), so
assembly happens in log space and is exponentiated once at the end.
"""

from __future__ import annotations

import math

from .errors import NumericalInstabilityError, PreconditionError
from .fundamentals import FundamentalSolution, solution_pair
from .model import ThresholdModel, regime_index
from .piecewise import ExpTerm, PiecewiseExpDensity, Segment
from .piecewise import total_mass as _pieces_total_mass

__all__ = [
    "potential_density",
    "potential_density_in_regime",
    "potential_pieces",
    "total_mass",
]


def _log_weight(plus: FundamentalSolution, minus: FundamentalSolution, r: int):
    """Per-regime log prefactor pieces shared by both entry points.

    Returns (log_pref, extras) where extras carries the regime's rates.
    """
    model = plus.model
    sp = plus.spectral
    q = sp.q
    n = model.n
    sig2 = model.vols[r] * model.vols[r]
    base = math.log(q) - math.log(sp.l[r] * sig2)
    if r == 0:
        w = 1.0 - minus.coeffs_c[0]
        if w <= 0.0:
            raise NumericalInstabilityError(
                "decreasing-solution weight 1 - c_1 must be positive"
            )
        return base - math.log(w)
    if r == n:
        w = 1.0 - plus.coeffs_c[n - 1]
        if w <= 0.0:
            raise NumericalInstabilityError(
                "increasing-solution weight 1 - c_n must be positive"
            )
        return base - math.log(w)
    return base - _log_interior_constant(plus, minus, r)


def _log_interior_constant(plus, minus, r: int) -> float:
    """log of the interior-regime coupling constant

        (1-c_r^+)(1-c_{r+1}^-) e^{dm_r gap} - c_r^+ c_{r+1}^- e^{-dp_r gap}

    which must be positive for a valid model/rate pair.
    """
    model = plus.model
    sp = plus.spectral
    gap = model.thresholds[r] - model.thresholds[r - 1]
    cp = plus.coeffs_c[r - 1]
    cm = minus.coeffs_c[r]
    w1 = (1.0 - cp) * (1.0 - cm)
    w2 = -cp * cm
    e1 = sp.delta_minus[r] * gap
    e2 = -sp.delta_plus[r] * gap
    m = max(e1 if w1 != 0.0 else -math.inf, e2 if w2 != 0.0 else -math.inf)
    s = (w1 * math.exp(e1 - m) if w1 != 0.0 else 0.0) + (
        w2 * math.exp(e2 - m) if w2 != 0.0 else 0.0
    )
    if not s > 0.0:
        raise NumericalInstabilityError(
            f"interior coupling constant non-positive in regime {r}"
        )
    return m + math.log(s)


def _log_density(model: ThresholdModel, q: float, x: float, z: float, r: int) -> float:
    """log potential density with the regime of z forced to r (the public
    entry uses the model's own regime; forcing exposes one-sided limits
    at thresholds for continuity diagnostics)."""
    plus, minus = solution_pair(model, q)
    sp = plus.spectral
    a = model.thresholds
    n = model.n
    dm, dp = sp.delta_minus, sp.delta_plus
    log_pref = _log_weight(plus, minus, r)
    if r == 0:
        out = log_pref - dp[0] * (a[0] - z) - minus.log_anchors[0]
        if x >= z:
            return out + minus.log_value(x)
        return out + minus.log_value(z) - dm[0] * (z - x)
    if r == n:
        out = log_pref - dm[n] * (z - a[n - 1]) - plus.log_anchors[n - 1]
        if z >= x:
            return out + plus.log_value(x)
        return out + plus.log_value(z) - dp[n] * (x - z)
    sig2 = model.vols[r] * model.vols[r]
    out = log_pref - 2.0 * model.drifts[r] * (a[r] - z) / sig2
    out -= plus.log_anchors[r - 1] + minus.log_anchors[r]
    if x <= z:
        return out + plus.log_value(x) + minus.log_value(z)
    return out + minus.log_value(x) + plus.log_value(z)


def potential_density(model: ThresholdModel, q: float, x, z) -> float:
    """Lebesgue density at z of the state sampled at an independent
    exponential time of rate q, started from x."""
    x, z = float(x), float(z)
    r = regime_index(model, z)
    return math.exp(_log_density(model, q, x, z, r))


def potential_density_in_regime(model: ThresholdModel, q: float, x, z, r: int) -> float:
    """Density with z's regime branch forced to r; at a threshold the two
    adjacent branches give the one-sided limits (the raw density may jump
    there, only the speed-normalized kernel is continuous)."""
    return math.exp(_log_density(model, q, float(x), float(z), r))


def _segment_terms(model, q, x, r: int, below_x: bool):
    """Exponential terms of the density restricted to one side of x inside
    regime r, anchored at that regime's natural threshold."""
    plus, minus = solution_pair(model, q)
    sp = plus.spectral
    a = model.thresholds
    n = model.n
    dm, dp = sp.delta_minus, sp.delta_plus
    log_pref = _log_weight(plus, minus, r)

    def term(sign_weight: float, extra_log: float, rate: float, ref: float) -> ExpTerm:
        if sign_weight == 0.0:
            return ExpTerm(0.0, rate, ref)
        amp = math.copysign(1.0, sign_weight) * math.exp(
            log_pref + extra_log + math.log(abs(sign_weight))
        )
        return ExpTerm(amp, rate, ref)

    if r == 0:
        cm = minus.coeffs_c[0]
        if below_x:  # x >= z on the whole sub-segment
            lead = minus.log_value(x) - minus.log_anchors[0]
            return (term(1.0, lead, dp[0], a[0]),)
        lead = dm[0] * (x - a[0])
        return (
            term(cm, lead, dp[0], a[0]),
            term(1.0 - cm, lead, -dm[0], a[0]),
        )
    if r == n:
        cp = plus.coeffs_c[n - 1]
        if not below_x:  # z >= x
            lead = plus.log_value(x) - plus.log_anchors[n - 1]
            return (term(1.0, lead, -dm[n], a[n - 1]),)
        lead = -dp[n] * (x - a[n - 1])
        return (
            term(1.0 - cp, lead, dp[n], a[n - 1]),
            term(cp, lead, -dm[n], a[n - 1]),
        )
    gap = a[r] - a[r - 1]
    cp = plus.coeffs_c[r - 1]
    cm = minus.coeffs_c[r]
    if not below_x:  # x <= z
        lead = plus.log_value(x) - plus.log_anchors[r - 1]
        return (
            term(cm, lead, dp[r], a[r]),
            term(1.0 - cm, lead, -dm[r], a[r]),
        )
    lead = minus.log_value(x) - minus.log_anchors[r]
    return (
        term((1.0 - cp), lead + dm[r] * gap, dp[r], a[r]),
        term(cp, lead - dp[r] * gap, -dm[r], a[r]),
    )


def potential_pieces(model: ThresholdModel, q: float, x) -> PiecewiseExpDensity:
    """The same density materialized as exponential segments.

    Breakpoints are the thresholds plus the conditioning point x, so every
    segment is a pure two-term (or one-term) exponential sum, integrable
    in closed form.
    """
    x = float(x)
    if not math.isfinite(x):
        raise PreconditionError(f"starting point must be finite, got {x!r}")
    bps = sorted(set(model.thresholds) | {x})
    edges = [-math.inf] + bps + [math.inf]
    segments = []
    for left, right in zip(edges, edges[1:]):
        r = regime_index(model, right) if math.isfinite(right) else model.n
        below = math.isfinite(right) and right <= x
        terms = _segment_terms(model, q, x, r, below)
        kept = tuple(t for t in terms if t.amplitude != 0.0) or terms
        segments.append(Segment(left, right, kept))
    return PiecewiseExpDensity(tuple(segments))


def total_mass(pieces: PiecewiseExpDensity) -> float:
    """Exact integral of a piecewise-exponential density."""
    return _pieces_total_mass(pieces)
