"""Fundamental solutions of the killed generator equation.

For a rate q > 0 the equation  (1/2) sigma(x)^2 g'' + b(x) g' = q g  has a
pair of positive C^1 solutions: an increasing one vanishing at -infinity
("plus" side) and a decreasing one vanishing at +infinity ("minus" side).
On each regime either solution is a two-term exponential mixture

    amplitude * [ w * exp(dm * u) + (1 - w) * exp(-dp * u) ]

with local decay rates dm, dp derived from that regime's drift and
volatility, u the distance to an anchor threshold, and mixing weights
produced by a one-sweep recursion that enforces C^1 gluing at every
threshold.  All downstream quantities (hitting transforms, resolvent
densities) are ratios of these solutions, so evaluation is exposed in log
form anchored at the thresholds: raw amplitudes grow exponentially with
the span of the thresholds and would overflow long before the ratios do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericalInstabilityError, PreconditionError
from .model import ThresholdModel, regime_index, require_valid

__all__ = [
    "SpectralParams",
    "FundamentalSolution",
    "spectral_params",
    "plus_coefficients",
    "minus_coefficients",
    "build_solution",
    "solution_pair",
]


@dataclass(frozen=True)
class SpectralParams:
    """Per-regime decay rates at a given transform rate q.

    For regime i with drift mu and squared volatility s2:

        l  = sqrt(2 q s2 + mu^2) / s2
        dm = l - mu / s2      (rate of the increasing exponential)
        dp = l + mu / s2      (rate of the decreasing exponential)

    Identities: dm + dp = 2 l and dm * dp = 2 q / s2.  For q > 0 all three
    are strictly positive.  The subtraction in dm (or dp) is evaluated via
    the product identity when it would cancel, so tiny-q values keep full
    relative precision.
    """

    q: float
    l: tuple[float, ...]
    delta_minus: tuple[float, ...]
    delta_plus: tuple[float, ...]


def _regime_rates(mu: float, sigma: float, q: float) -> tuple[float, float, float]:
    s2 = sigma * sigma
    l = math.sqrt(2.0 * q * s2 + mu * mu) / s2
    if mu > 0.0:
        dp = l + mu / s2
        dm = (2.0 * q / s2) / dp if dp > 0.0 else 0.0
    elif mu < 0.0:
        dm = l - mu / s2
        dp = (2.0 * q / s2) / dm if dm > 0.0 else 0.0
    else:
        dm = dp = l
    return l, dm, dp


def spectral_params(model: ThresholdModel, q: float) -> SpectralParams:
    """Decay-rate triple (l, dm, dp) for every regime; requires q >= 0."""
    require_valid(model)
    if not (q >= 0.0) or not math.isfinite(q):
        raise PreconditionError(f"rate q must be a finite nonnegative real, got {q!r}")
    rates = [_regime_rates(mu, s, q) for mu, s in zip(model.drifts, model.vols)]
    return SpectralParams(
        q=float(q),
        l=tuple(r[0] for r in rates),
        delta_minus=tuple(r[1] for r in rates),
        delta_plus=tuple(r[2] for r in rates),
    )


def _log_mix2(w1: float, e1: float, w2: float, e2: float) -> float:
    """log(w1*exp(e1) + w2*exp(e2)) for a mixture that must be positive.

    The weights may be negative individually; only the sum is required to
    be positive.  Overflow-free: the dominant exponent is factored out.
    """
    m = max(e1 if w1 != 0.0 else -math.inf, e2 if w2 != 0.0 else -math.inf)
    if m == -math.inf:
        raise NumericalInstabilityError("exponential mixture vanished identically")
    s = w1 * math.exp(e1 - m) + w2 * math.exp(e2 - m)
    if s <= 0.0:
        raise NumericalInstabilityError(
            f"exponential mixture is non-positive ({s!r} at scale exp({m!r})); "
            "the coefficients cancelled catastrophically"
        )
    return m + math.log(s)


def _plus_with_logs(model: ThresholdModel, sp: SpectralParams):
    """Forward sweep producing (b, c, log_b) for the increasing solution."""
    a = model.thresholds
    dm, dp = sp.delta_minus, sp.delta_plus
    n = len(a)
    c = [0.0] * n
    log_b = [0.0] * n
    c[0] = (dm[1] - dm[0]) / (dp[1] + dm[1])
    for i in range(1, n):
        # regime i sits on (a_i, a_{i+1}]; the step below crosses a_{i+1}
        gap = a[i] - a[i - 1]
        u = (dm[i] + dp[i]) * gap
        eu = math.exp(-u)
        denom = (1.0 - c[i - 1]) + c[i - 1] * eu
        if denom <= 0.0:
            raise NumericalInstabilityError(
                f"plus-side recursion denominator non-positive at threshold {i + 1}"
            )
        carried = c[i - 1] * eu / denom
        c[i] = (dm[i + 1] - dm[i]) / (dp[i + 1] + dm[i + 1]) + (
            (dp[i] + dm[i]) / (dp[i + 1] + dm[i + 1])
        ) * carried
        log_b[i] = log_b[i - 1] + _log_mix2(
            1.0 - c[i - 1], dm[i] * gap, c[i - 1], -dp[i] * gap
        )
    b = tuple(math.exp(v) for v in log_b)
    return b, tuple(c), tuple(log_b)


def _minus_with_logs(model: ThresholdModel, sp: SpectralParams):
    """Backward sweep producing (b, c, log_b) for the decreasing solution."""
    a = model.thresholds
    dm, dp = sp.delta_minus, sp.delta_plus
    n = len(a)
    c = [0.0] * n
    log_b = [0.0] * n
    c[n - 1] = (dp[n - 1] - dp[n]) / (dp[n - 1] + dm[n - 1])
    for i in range(n - 2, -1, -1):
        gap = a[i + 1] - a[i]
        u = (dm[i + 1] + dp[i + 1]) * gap
        eu = math.exp(-u)
        denom = c[i + 1] * eu + (1.0 - c[i + 1])
        if denom <= 0.0:
            raise NumericalInstabilityError(
                f"minus-side recursion denominator non-positive at threshold {i + 1}"
            )
        carried = c[i + 1] * eu / denom
        c[i] = (dp[i] - dp[i + 1]) / (dp[i] + dm[i]) + (
            (dm[i + 1] + dp[i + 1]) / (dp[i] + dm[i])
        ) * carried
        log_b[i] = log_b[i + 1] + _log_mix2(
            c[i + 1], -dm[i + 1] * gap, 1.0 - c[i + 1], dp[i + 1] * gap
        )
    b = tuple(math.exp(v) for v in log_b)
    return b, tuple(c), tuple(log_b)


def _require_positive_rate(q: float) -> float:
    if not (q > 0.0) or not math.isfinite(q):
        raise PreconditionError(
            f"rate q must be a finite positive real for the coefficient "
            f"recursions, got {q!r}; long-run quantities have dedicated "
            f"closed forms instead of q = 0 evaluation"
        )
    return float(q)


def plus_coefficients(model: ThresholdModel, q: float):
    """Mixing weights of the increasing solution: (b_1..b_n, c_1..c_n)."""
    sp = spectral_params(model, _require_positive_rate(q))
    b, c, _ = _plus_with_logs(model, sp)
    return b, c


def minus_coefficients(model: ThresholdModel, q: float):
    """Mixing weights of the decreasing solution: (b_1..b_n, c_1..c_n)."""
    sp = spectral_params(model, _require_positive_rate(q))
    b, c, _ = _minus_with_logs(model, sp)
    return b, c


@dataclass(frozen=True)
class FundamentalSolution:
    """One side of the fundamental pair, in evaluation-ready form.

    coeffs_b / coeffs_c are the per-threshold amplitudes and mixing
    weights (b_1..b_n, c_1..c_n); log_anchors[i-1] = log of the solution's
    value at threshold a_i.  The amplitude normalization is value 1 at a_1
    for side "plus" and at a_n for side "minus".  Mixing weights are not
    confined to [0, 1].
    """

    side: str
    model: ThresholdModel
    spectral: SpectralParams
    coeffs_b: tuple[float, ...]
    coeffs_c: tuple[float, ...]
    log_anchors: tuple[float, ...]

    # -- evaluation -----------------------------------------------------

    def _piece(self, reg: int):
        """Local form of the regime piece: (anchor_log, w1, r1, w2, r2).

        The piece value is exp(anchor_log) * (w1 e^{r1 u} + w2 e^{r2 u})
        with u = x - anchor_point(reg).
        """
        dm, dp = self.spectral.delta_minus, self.spectral.delta_plus
        n = self.model.n
        if self.side == "plus":
            if reg == 0:
                return 0.0, 1.0, dm[0], 0.0, 0.0
            c = self.coeffs_c[reg - 1]
            return self.log_anchors[reg - 1], 1.0 - c, dm[reg], c, -dp[reg]
        if reg == n:
            return 0.0, 0.0, 0.0, 1.0, -dp[n]
        c = self.coeffs_c[reg]
        return self.log_anchors[reg], c, dm[reg], 1.0 - c, -dp[reg]

    def log_value(self, x):
        """log of the solution, scalar or vectorized, overflow-free."""
        scalar = np.isscalar(x) or np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        regs = regime_index(self.model, xs)
        out = np.empty_like(xs)
        for reg in np.unique(regs):
            mask = regs == reg
            anchor, w1, r1, w2, r2 = self._piece(int(reg))
            u = xs[mask] - self._anchor_point(int(reg))
            out[mask] = anchor + _log_mix2_vec(w1, r1 * u, w2, r2 * u)
        return float(out[0]) if scalar else out

    def value(self, x):
        """The solution itself; overflows for extreme arguments, in which
        case use log_value (all package-internal formulas do)."""
        lv = self.log_value(x)
        return np.exp(lv) if isinstance(lv, np.ndarray) else math.exp(lv)

    def derivative(self, x):
        """First derivative; at a threshold this is the shared C^1 value."""
        return self._derivative(x, order=1)

    def second_derivative(self, x):
        """Second derivative from the explicit exponential pieces (defined
        away from thresholds; at a threshold the lower regime's value is
        returned)."""
        return self._derivative(x, order=2)

    def _derivative(self, x, order: int):
        scalar = np.isscalar(x) or np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        regs = regime_index(self.model, xs)
        out = np.empty_like(xs)
        for reg in np.unique(regs):
            mask = regs == reg
            out[mask] = self._piece_derivative(int(reg), xs[mask], order)
        return float(out[0]) if scalar else out

    def _anchor_point(self, reg: int) -> float:
        a = self.model.thresholds
        n = len(a)
        if self.side == "plus":
            return a[0] if reg == 0 else a[reg - 1]
        return a[n - 1] if reg == n else a[reg]

    def _piece_derivative(self, reg: int, xs, order: int):
        anchor, w1, r1, w2, r2 = self._piece(reg)
        u = xs - self._anchor_point(reg)
        amp = math.exp(anchor)
        return amp * (
            w1 * r1**order * np.exp(r1 * u) + w2 * r2**order * np.exp(r2 * u)
        )

    # -- diagnostics ----------------------------------------------------

    def one_sided_at_threshold(self, i: int):
        """(value-, value+, deriv-, deriv+) one-sided limits at a_i (1-based).

        Exposed for gluing tests; regular evaluation always returns the
        common C^1 value.
        """
        if not 1 <= i <= self.model.n:
            raise PreconditionError(f"threshold index out of range: {i}")
        a = self.model.thresholds[i - 1]
        left_reg, right_reg = i - 1, i
        vals = []
        for reg in (left_reg, right_reg):
            anchor, w1, r1, w2, r2 = self._piece(reg)
            u = a - self._anchor_point(reg)
            val = math.exp(anchor) * (w1 * math.exp(r1 * u) + w2 * math.exp(r2 * u))
            der = math.exp(anchor) * (
                w1 * r1 * math.exp(r1 * u) + w2 * r2 * math.exp(r2 * u)
            )
            vals.append((val, der))
        return vals[0][0], vals[1][0], vals[0][1], vals[1][1]

    def coefficient_rows(self):
        """Rows (i, b_i, c_i, log_anchor_i) for debugging dumps."""
        return [
            (i + 1, self.coeffs_b[i], self.coeffs_c[i], self.log_anchors[i])
            for i in range(self.model.n)
        ]

    def coefficients_csv(self) -> str:
        lines = ["i,b,c,log_anchor"]
        for i, b, c, la in self.coefficient_rows():
            lines.append(f"{i},{b:.17g},{c:.17g},{la:.17g}")
        return "\n".join(lines) + "\n"


def _log_mix2_vec(w1: float, e1, w2, e2):
    """Vectorized signed two-term log-sum-exp; raises on non-positive sums."""
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    e1_eff = e1 if w1 != 0.0 else np.full_like(e1, -np.inf)
    e2_eff = e2 if w2 != 0.0 else np.full_like(e2, -np.inf)
    m = np.maximum(e1_eff, e2_eff)
    s = w1 * np.exp(e1 - m) + w2 * np.exp(e2 - m)
    if np.any(s <= 0.0) or np.any(~np.isfinite(m)):
        raise NumericalInstabilityError(
            "exponential mixture is non-positive at some evaluation points"
        )
    return m + np.log(s)


def build_solution(model: ThresholdModel, q: float, side: str) -> FundamentalSolution:
    """Construct one side ("plus" or "minus") of the fundamental pair."""
    if side not in ("plus", "minus"):
        raise PreconditionError(f"side must be 'plus' or 'minus', got {side!r}")
    sp = spectral_params(model, _require_positive_rate(q))
    if side == "plus":
        b, c, log_b = _plus_with_logs(model, sp)
    else:
        b, c, log_b = _minus_with_logs(model, sp)
    return FundamentalSolution(
        side=side,
        model=model,
        spectral=sp,
        coeffs_b=b,
        coeffs_c=c,
        log_anchors=log_b,
    )


@lru_cache(maxsize=256)
def solution_pair(model: ThresholdModel, q: float):
    """Cached (plus, minus) pair for a model and rate."""
    return build_solution(model, q, "plus"), build_solution(model, q, "minus")
