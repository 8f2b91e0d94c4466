"""Closed forms for the single-regime linear diffusion x + mu*t + sigma*B.

These are the analytic oracles: a threshold model whose regimes all carry
the same (mu, sigma) must reproduce every one of them exactly, and the
Monte Carlo engine is checked against them as well.  sinh ratios are
evaluated with the dominant exponential factored out so wide intervals do
not overflow.
"""

from __future__ import annotations

import math

from .errors import PreconditionError

__all__ = [
    "linear_resolvent_density",
    "linear_fpt_laplace",
    "linear_fpt_density",
    "linear_two_sided_laplace",
    "linear_killed_density",
    "linear_killed_onesided_density",
]


def _check_params(sigma: float, q: float):
    if sigma <= 0.0:
        raise PreconditionError(f"sigma must be positive, got {sigma!r}")
    if q <= 0.0:
        raise PreconditionError(f"q must be positive, got {q!r}")


def _rates(mu: float, sigma: float, q: float):
    s2 = sigma * sigma
    l = math.sqrt(2.0 * q * s2 + mu * mu) / s2
    return l, s2


def linear_resolvent_density(mu, sigma, q, x, z) -> float:
    """Density of the process at an independent rate-q exponential time:
    q/(l sigma^2) * exp(mu (z-x)/sigma^2 - |z-x| l)."""
    _check_params(sigma, q)
    l, s2 = _rates(mu, sigma, q)
    return q / (l * s2) * math.exp(mu * (z - x) / s2 - abs(z - x) * l)


def linear_fpt_laplace(mu, sigma, q, x, a) -> float:
    """E[e^{-q tau_a}] = exp(mu (a-x)/sigma^2 - |a-x| l)."""
    _check_params(sigma, q)
    l, s2 = _rates(mu, sigma, q)
    return math.exp(mu * (a - x) / s2 - abs(a - x) * l)


def linear_fpt_density(mu, sigma, x, a, t) -> float:
    """First-passage-time density at time t > 0:
    |a-x| / (sigma sqrt(2 pi t^3)) * exp(-(a-x-mu t)^2 / (2 sigma^2 t))."""
    if sigma <= 0.0:
        raise PreconditionError(f"sigma must be positive, got {sigma!r}")
    if t <= 0.0:
        return 0.0
    s2 = sigma * sigma
    return (
        abs(a - x)
        / (sigma * math.sqrt(2.0 * math.pi * t**3))
        * math.exp(-((a - x - mu * t) ** 2) / (2.0 * s2 * t))
    )


def _sinh_ratio(num_halfwidth: float, den_halfwidth: float, l: float) -> float:
    """sinh(num * l) / sinh(den * l) * exp(-(den - num) * l), i.e. the ratio
    with its dominant exponential already pulled out by the caller."""
    return -math.expm1(-2.0 * l * num_halfwidth) / -math.expm1(-2.0 * l * den_halfwidth)


def linear_two_sided_laplace(mu, sigma, q, x, a, b, hit: str) -> float:
    """E[e^{-q (tau_a ^ tau_b)}; the chosen barrier is reached first],
    for a <= x <= b; hit is "lower" (tau_a first) or "upper"."""
    _check_params(sigma, q)
    if not a <= x <= b or not a < b:
        raise PreconditionError(f"need a <= x <= b with a < b, got {(a, x, b)!r}")
    l, s2 = _rates(mu, sigma, q)
    if hit == "lower":
        # e^{mu(a-x)/s2} sinh((b-x)l)/sinh((b-a)l)
        return math.exp(mu * (a - x) / s2 - l * (x - a)) * _sinh_ratio(b - x, b - a, l)
    if hit == "upper":
        return math.exp(mu * (b - x) / s2 - l * (b - x)) * _sinh_ratio(x - a, b - a, l)
    raise PreconditionError(f"hit must be 'lower' or 'upper', got {hit!r}")


def linear_killed_density(mu, sigma, q, x, a, b, z) -> float:
    """Density of the process at e_q on {still inside (a, b)}:
    2q sinh((x^z - a)l) sinh((b - x v z)l) e^{mu(z-x)/sigma^2}
    / (l sigma^2 sinh((b-a)l)), zero outside [a, b]."""
    _check_params(sigma, q)
    if not a <= x <= b or not a < b:
        raise PreconditionError(f"need a <= x <= b with a < b, got {(a, x, b)!r}")
    if z < a or z > b:
        return 0.0
    l, s2 = _rates(mu, sigma, q)
    lo, hi = (x, z) if x <= z else (z, x)
    # sinh((lo-a)l) sinh((b-hi)l)/sinh((b-a)l)
    #   = e^{-l(hi-lo)} (1-e^{-2l(lo-a)})(1-e^{-2l(b-hi)})/(2(1-e^{-2l(b-a)}))
    factor = (
        math.exp(-l * (hi - lo))
        * (-math.expm1(-2.0 * l * (lo - a)))
        * (-math.expm1(-2.0 * l * (b - hi)))
        / (2.0 * -math.expm1(-2.0 * l * (b - a)))
    )
    return 2.0 * q / (l * s2) * math.exp(mu * (z - x) / s2) * factor


def linear_killed_onesided_density(mu, sigma, q, x, a, z) -> float:
    """Density at e_q on {the single barrier a not yet hit}.

    x and z must sit on the same side of the barrier (the killed process
    cannot cross it); the density vanishes at and beyond the barrier.
    """
    _check_params(sigma, q)
    if (x - a) * (z - a) < 0.0:
        return 0.0
    l, s2 = _rates(mu, sigma, q)
    dm = l - mu / s2
    dp = l + mu / s2
    if x >= a and z >= a:
        if z >= x:
            bracket = math.exp(dm * (x - a)) - math.exp(-dp * (x - a))
            tail = math.exp(-dm * (z - a))
        else:
            bracket = math.exp(dp * (z - a)) - math.exp(-dm * (z - a))
            tail = math.exp(-dp * (x - a))
        return q / (l * s2) * bracket * tail
    # mirror image for both points below the barrier (flip x -> -x, mu -> -mu,
    # which swaps the roles of dm and dp)
    if z <= x:
        bracket = math.exp(dp * (a - x)) - math.exp(-dm * (a - x))
        tail = math.exp(dp * (z - a))
    else:
        bracket = math.exp(dm * (a - z)) - math.exp(-dp * (a - z))
        tail = math.exp(dm * (x - a))
    return q / (l * s2) * bracket * tail
