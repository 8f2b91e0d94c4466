"""First-passage functionals: hitting-time Laplace transforms and exits.

Everything is a ratio of the two fundamental solutions, evaluated in log
space with anchors factored out so wide models cannot overflow.  The
zero-rate exit probability goes through the scale function instead (the
coefficient recursions are undefined at q = 0).
"""

from __future__ import annotations

import math

from .errors import NumericalInstabilityError, PreconditionError
from .fundamentals import solution_pair
from .model import ThresholdModel
from .stationary import scale_function

__all__ = [
    "laplace_exit_down",
    "laplace_exit_up",
    "laplace_hit",
    "exit_probability_down",
]


def _signed_sum(terms) -> tuple[float, float]:
    """(sign, log|sum|) of sum(sign_k * exp(log_k)); sign 0 for exact 0."""
    finite = [(s, lg) for s, lg in terms if lg != -math.inf and s != 0.0]
    if not finite:
        return 0.0, -math.inf
    m = max(lg for _, lg in finite)
    acc = math.fsum(s * math.exp(lg - m) for s, lg in finite)
    if acc == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, acc), m + math.log(abs(acc))


def _check_ordering(x: float, y: float, z: float):
    if not (y <= x <= z):
        raise PreconditionError(f"need y <= x <= z, got y={y!r}, x={x!r}, z={z!r}")
    if not y < z:
        raise PreconditionError(f"barriers must be distinct: y={y!r}, z={z!r}")


def _bracket(plus, minus, x: float, z: float) -> tuple[float, float]:
    """Signed log of g_minus(x) g_plus(z) - g_plus(x) g_minus(z)."""
    return _signed_sum(
        [
            (1.0, minus.log_value(x) + plus.log_value(z)),
            (-1.0, plus.log_value(x) + minus.log_value(z)),
        ]
    )


def laplace_exit_down(model: ThresholdModel, q: float, x, y, z) -> float:
    """E_x[e^{-q tau_y}; tau_y before tau_z] for y <= x <= z, q > 0."""
    x, y, z = float(x), float(y), float(z)
    _check_ordering(x, y, z)
    plus, minus = solution_pair(model, q)
    num_sign, num_log = _bracket(plus, minus, x, z)
    den_sign, den_log = _bracket(plus, minus, y, z)
    if den_sign <= 0.0:
        raise NumericalInstabilityError(
            "exit-transform denominator underflowed to zero; barriers are too "
            "far apart at this rate for double precision"
        )
    if num_sign <= 0.0:
        return 0.0
    return min(math.exp(num_log - den_log), 1.0)


def laplace_exit_up(model: ThresholdModel, q: float, x, y, z) -> float:
    """E_x[e^{-q tau_z}; tau_z before tau_y] for y <= x <= z, q > 0."""
    x, y, z = float(x), float(y), float(z)
    _check_ordering(x, y, z)
    plus, minus = solution_pair(model, q)
    num_sign, num_log = _bracket(plus, minus, x, y)
    den_sign, den_log = _bracket(plus, minus, z, y)
    if den_sign == 0.0:
        raise NumericalInstabilityError(
            "exit-transform denominator underflowed to zero; barriers are too "
            "far apart at this rate for double precision"
        )
    value = num_sign * den_sign * math.exp(num_log - den_log)
    return min(max(value, 0.0), 1.0)


def laplace_hit(model: ThresholdModel, q: float, x, target) -> float:
    """E_x[e^{-q tau_target}]: the decreasing-solution ratio from above,
    the increasing-solution ratio from below."""
    x, target = float(x), float(target)
    if x == target:
        return 1.0
    plus, minus = solution_pair(model, q)
    if x > target:
        return math.exp(minus.log_value(x) - minus.log_value(target))
    return math.exp(plus.log_value(x) - plus.log_value(target))


def exit_probability_down(model: ThresholdModel, x, y, z) -> float:
    """P_x{tau_y before tau_z}: affine in the scale function (zero-rate case)."""
    x, y, z = float(x), float(y), float(z)
    _check_ordering(x, y, z)
    py, px, pz = scale_function(model, y), scale_function(model, x), scale_function(model, z)
    return (pz - px) / (pz - py)
