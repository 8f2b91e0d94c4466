"""Threshold-diffusion model definition and regime bookkeeping.

A model is the SDE  dX = b(X) dt + sigma(X) dB  whose drift and volatility
are step functions of the state: constant on each of the n+1 regimes

    (-inf, a_1], (a_1, a_2], ..., (a_n, +inf)

cut by thresholds a_1 < ... < a_n.  Regime membership at a threshold
follows the half-open convention above: a_i belongs to the regime below
it.  Every other module keys its formulas to this convention, so it lives
here and nowhere else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ModelValidationError, PreconditionError

__all__ = [
    "ThresholdModel",
    "validate",
    "require_valid",
    "regime_index",
    "drift_at",
    "vol_at",
    "model_from_dict",
    "model_from_json",
    "model_to_dict",
    "model_to_json",
]


@dataclass(frozen=True)
class ThresholdModel:
    """Complete parameterization of a threshold diffusion.

    thresholds: n strictly increasing reals a_1 < ... < a_n.
    drifts:     n+1 reals mu_0 ... mu_n, one per regime.
    vols:       n+1 strictly positive reals sigma_0 ... sigma_n.

    Instances are immutable; all operations on them are pure.  Exact zero
    drifts are meaningful (they select dedicated branches in the long-run
    formulas) and are never snapped or perturbed.
    """

    thresholds: tuple[float, ...]
    drifts: tuple[float, ...]
    vols: tuple[float, ...]

    def __init__(self, thresholds, drifts, vols):
        object.__setattr__(self, "thresholds", tuple(float(a) for a in thresholds))
        object.__setattr__(self, "drifts", tuple(float(m) for m in drifts))
        object.__setattr__(self, "vols", tuple(float(s) for s in vols))

    @property
    def n(self) -> int:
        """Number of thresholds (there are n+1 regimes)."""
        return len(self.thresholds)

    def regime(self, x):
        """Regime index of state x, scalar or array; see regime_index."""
        return regime_index(self, x)

    def drift(self, x):
        return drift_at(self, x)

    def vol(self, x):
        return vol_at(self, x)


def validate(model: ThresholdModel) -> list[str]:
    """Check every structural invariant; return the list of violations.

    An empty list means the model is valid.  All problems are gathered so
    callers can surface them in one shot.
    """
    problems = []
    a, mu, sigma = model.thresholds, model.drifts, model.vols
    n = len(a)
    if n < 1:
        problems.append("at least one threshold is required")
    for name, seq in (("thresholds", a), ("drifts", mu), ("vols", sigma)):
        if any(not math.isfinite(v) for v in seq):
            problems.append(f"{name} must all be finite")
    if len(mu) != n + 1:
        problems.append(
            f"drifts must have exactly one more entry than thresholds "
            f"(got {len(mu)} for {n} thresholds)"
        )
    if len(sigma) != n + 1:
        problems.append(
            f"vols must have exactly one more entry than thresholds "
            f"(got {len(sigma)} for {n} thresholds)"
        )
    if any(hi <= lo for lo, hi in zip(a, a[1:])):
        problems.append("thresholds not strictly increasing")
    if any(s <= 0 for s in sigma if math.isfinite(s)):
        problems.append("volatility must be positive")
    return problems


def require_valid(model: ThresholdModel) -> ThresholdModel:
    """Raise ModelValidationError unless the model is valid; return it."""
    problems = validate(model)
    if problems:
        raise ModelValidationError(problems)
    return model


def regime_index(model: ThresholdModel, x):
    """Index in {0, ..., n} of the regime containing x.

    Returns 0 for x <= a_1, i for x in (a_i, a_{i+1}], n for x > a_n:
    the coefficient at a threshold belongs to the regime below it.
    Accepts scalars or arrays (vectorized); non-finite scalars are a
    precondition violation.
    """
    a = np.asarray(model.thresholds)
    if np.isscalar(x) or np.ndim(x) == 0:
        xf = float(x)
        if not math.isfinite(xf):
            raise PreconditionError(f"state must be finite, got {x!r}")
        return int(np.searchsorted(a, xf, side="left"))
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise PreconditionError("states must all be finite")
    return np.searchsorted(a, x, side="left")


def drift_at(model: ThresholdModel, x):
    """Drift coefficient mu_{regime(x)}."""
    idx = regime_index(model, x)
    mu = np.asarray(model.drifts)
    out = mu[idx]
    return float(out) if np.ndim(out) == 0 else out


def vol_at(model: ThresholdModel, x):
    """Volatility coefficient sigma_{regime(x)} (always positive)."""
    idx = regime_index(model, x)
    sigma = np.asarray(model.vols)
    out = sigma[idx]
    return float(out) if np.ndim(out) == 0 else out


_MODEL_FIELDS = ("thresholds", "drifts", "vols")


def model_from_dict(doc: dict) -> ThresholdModel:
    """Build and validate a model from a plain dict (the file schema).

    The document must contain exactly the keys thresholds/drifts/vols with
    numeric lists of consistent lengths; extra keys are rejected.
    """
    if not isinstance(doc, dict):
        raise ModelValidationError(["model document must be a JSON object"])
    extra = sorted(set(doc) - set(_MODEL_FIELDS))
    if extra:
        raise ModelValidationError([f"unknown field(s) in model file: {', '.join(extra)}"])
    missing = sorted(set(_MODEL_FIELDS) - set(doc))
    if missing:
        raise ModelValidationError([f"missing field(s) in model file: {', '.join(missing)}"])
    for key in _MODEL_FIELDS:
        seq = doc[key]
        if not isinstance(seq, (list, tuple)) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in seq
        ):
            raise ModelValidationError([f"field {key!r} must be a list of numbers"])
    model = ThresholdModel(doc["thresholds"], doc["drifts"], doc["vols"])
    return require_valid(model)


def model_from_json(text: str) -> ThresholdModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelValidationError([f"model file is not valid JSON: {exc}"]) from exc
    return model_from_dict(doc)


def model_to_dict(model: ThresholdModel) -> dict:
    return {
        "thresholds": list(model.thresholds),
        "drifts": list(model.drifts),
        "vols": list(model.vols),
    }


def model_to_json(model: ThresholdModel) -> str:
    """Serialize with full float precision so round-trips are exact."""
    doc = model_to_dict(model)
    return json.dumps(doc, indent=2)
