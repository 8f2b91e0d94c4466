"""Runnable verification battery.

Each check pins one family of identities at a fixed tolerance and returns
a structured pass/fail record.  The CLI `verify` subcommand prints these
as a table; the test suite asserts them one by one.  All randomness is
driven by seeds embedded here so runs are reproducible everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import escape as esc
from . import montecarlo as mc
from . import passage, potential, reference, stationary
from .errors import PreconditionError
from .fundamentals import build_solution, plus_coefficients, minus_coefficients, spectral_params
from .model import ThresholdModel

__all__ = ["CheckResult", "random_models", "run_checks", "MC_TEST_MODEL", "MC_TRANSIENT_MODEL"]

STRUCTURE_SEED = 20250811
STATIONARY_SEED = 20250812
ESCAPE_SEED = 20250813
MC_SEED = 20250814

MC_TEST_MODEL = ThresholdModel([0.0, 1.0], [1.0, -0.5, -1.0], [1.0, 2.0, 1.0])
MC_TRANSIENT_MODEL = ThresholdModel([0.0, 1.0], [-1.0, 0.2, 1.0], [1.0, 2.0, 1.0])


@dataclass(frozen=True)
class CheckResult:
    criterion: str
    name: str
    passed: bool
    detail: str


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def random_models(seed: int, count: int, n_max: int = 5, drift_ends: str = "any",
                  zero_interior: bool = False) -> list[ThresholdModel]:
    """Reproducible random model battery.

    drift_ends: "any", "inward" (recurrent) or "outward" (transient).
    zero_interior snaps roughly a third of interior drifts to exact zero.
    """
    rng = np.random.default_rng(seed)
    models = []
    while len(models) < count:
        n = int(rng.integers(1, n_max + 1))
        a = np.sort(rng.uniform(-3.0, 3.0, n))
        if n > 1 and np.min(np.diff(a)) < 0.15:
            continue
        mu = rng.uniform(-3.0, 3.0, n + 1)
        sig = rng.uniform(0.3, 3.0, n + 1)
        if zero_interior and n >= 2:
            for i in range(1, n):
                if rng.random() < 0.34:
                    mu[i] = 0.0
        if drift_ends == "inward":
            mu[0] = abs(mu[0]) + 0.2
            mu[-1] = -abs(mu[-1]) - 0.2
        elif drift_ends == "outward":
            mu[0] = -abs(mu[0]) - 0.2
            mu[-1] = abs(mu[-1]) + 0.2
        models.append(ThresholdModel(a, mu, sig))
    return models


# -- criterion 1: single-regime oracle equivalence ---------------------------

_ORACLE_SETS = [
    # (mu, sigma, q, n)
    (-2.0, 0.5, 0.1, 1),
    (-2.0, 1.0, 1.0, 3),
    (-2.0, 3.0, 10.0, 1),
    (0.0, 0.5, 1.0, 3),
    (0.0, 1.0, 0.1, 1),
    (0.0, 3.0, 10.0, 3),
    (1.5, 0.5, 10.0, 1),
    (1.5, 1.0, 0.1, 3),
    (1.5, 3.0, 1.0, 1),
    (0.0, 1.0, 10.0, 3),
]


def check_single_regime_oracles() -> CheckResult:
    tol = 1e-10
    worst = 0.0
    for mu, sigma, q, n in _ORACLE_SETS:
        thresholds = [0.3] if n == 1 else [-0.5, 0.1, 0.9]
        model = ThresholdModel(thresholds, [mu] * (n + 1), [sigma] * (n + 1))
        lo, hi = thresholds[0] - 2.0, thresholds[-1] + 2.0
        xs = np.linspace(lo, hi, 10)
        zs = np.linspace(lo, hi, 10)
        for x in xs:
            for z in zs:
                worst = max(worst, _rel(
                    potential.potential_density(model, q, x, z),
                    reference.linear_resolvent_density(mu, sigma, q, x, z),
                ))
                worst = max(worst, _rel(
                    passage.laplace_hit(model, q, x, z),
                    reference.linear_fpt_laplace(mu, sigma, q, x, z),
                ))
        y, z = lo - 1.0, hi + 1.0
        for x in xs:
            worst = max(worst, _rel(
                passage.laplace_exit_down(model, q, x, y, z),
                reference.linear_two_sided_laplace(mu, sigma, q, x, y, z, "lower"),
            ))
            worst = max(worst, _rel(
                passage.laplace_exit_up(model, q, x, y, z),
                reference.linear_two_sided_laplace(mu, sigma, q, x, y, z, "upper"),
            ))
    return CheckResult("1", "single-regime oracle equivalence",
                       worst <= tol, f"max rel err {worst:.3e} (tol 1e-10)")


# -- criterion 2: fundamental-solution structure ------------------------------


def _interior_points(model: ThresholdModel, per_regime: int) -> np.ndarray:
    a = model.thresholds
    lo, hi = a[0] - 2.0, a[-1] + 2.0
    edges = [lo, *a, hi]
    pts = []
    for left, right in zip(edges, edges[1:]):
        width = right - left
        pts.append(np.linspace(left + 0.02 * width, right - 0.02 * width, per_regime))
    return np.concatenate(pts)


def check_fundamental_structure(extra_models=()) -> CheckResult:
    rng = np.random.default_rng(STRUCTURE_SEED)
    models = random_models(STRUCTURE_SEED, 50)
    worst_glue = 0.0
    worst_resid = 0.0
    batches = [(m, float(rng.uniform(1e-3, 10.0))) for m in models]
    batches += [(m, 0.7) for m in extra_models]
    for model, q in batches:
        mu = np.asarray(model.drifts)
        sig2 = np.asarray(model.vols) ** 2
        xs = _interior_points(model, 20)
        regs = model.regime(xs)
        for side in ("plus", "minus"):
            sol = build_solution(model, q, side)
            for i in range(1, model.n + 1):
                vl, vr, dl, dr = sol.one_sided_at_threshold(i)
                worst_glue = max(worst_glue, _rel(vl, vr), _rel(dl, dr))
            g = sol.value(xs)
            g1 = sol.derivative(xs)
            g2 = sol.second_derivative(xs)
            resid = 0.5 * sig2[regs] * g2 + mu[regs] * g1 - q * g
            scale = 0.5 * sig2[regs] * np.abs(g2) + np.abs(mu[regs] * g1) + q * g
            worst_resid = max(worst_resid, float(np.max(np.abs(resid) / scale)))
    passed = worst_glue <= 1e-9 and worst_resid <= 1e-9
    return CheckResult("2", "fundamental-solution structure", passed,
                       f"max gluing err {worst_glue:.3e}, max ODE residual {worst_resid:.3e} (tol 1e-9)")


# -- criterion 3: potential measure -------------------------------------------


def check_potential_measure(extra_models=()) -> CheckResult:
    rng = np.random.default_rng(STRUCTURE_SEED + 1)
    models = random_models(STRUCTURE_SEED, 50) + list(extra_models)
    worst_mass = 0.0
    worst_sym = 0.0
    worst_cont = 0.0
    for model in models:
        a = model.thresholds
        for q in (0.1, 1.0, 10.0):
            x = float(rng.uniform(a[0] - 1.5, a[-1] + 1.5))
            pieces = potential.potential_pieces(model, q, x)
            worst_mass = max(worst_mass, abs(potential.total_mass(pieces) - 1.0))
            for _ in range(3):
                u = float(rng.uniform(a[0] - 1.5, a[-1] + 1.5))
                v = float(rng.uniform(a[0] - 1.5, a[-1] + 1.5))
                lhs = potential.potential_density(model, q, u, v) / stationary.speed_density(model, v)
                rhs = potential.potential_density(model, q, v, u) / stationary.speed_density(model, u)
                worst_sym = max(worst_sym, _rel(lhs, rhs))
            for i in range(1, model.n + 1):
                zi = a[i - 1]
                left = potential.potential_density_in_regime(model, q, x, zi, i - 1) / \
                    float(stationary.speed_density_in_regime(model, zi, i - 1))
                right = potential.potential_density_in_regime(model, q, x, zi, i) / \
                    float(stationary.speed_density_in_regime(model, zi, i))
                worst_cont = max(worst_cont, _rel(left, right))
    passed = worst_mass <= 1e-8 and worst_sym <= 1e-9 and worst_cont <= 1e-9
    return CheckResult("3", "potential-measure normalization and symmetry", passed,
                       f"max |mass-1| {worst_mass:.3e} (tol 1e-8), "
                       f"max symmetry err {worst_sym:.3e}, max continuity err {worst_cont:.3e} (tol 1e-9)")


# -- criterion 4: stationary law ----------------------------------------------


def check_stationary_law() -> CheckResult:
    rng = np.random.default_rng(STATIONARY_SEED)
    models = random_models(STATIONARY_SEED, 10, drift_ends="inward", zero_interior=True)
    worst_speed = 0.0
    monotone_ok = True
    for model in models:
        a = model.thresholds
        total = stationary.speed_total_mass(model)
        zs = np.linspace(a[0] - 2.0, a[-1] + 2.0, 50)
        dens = stationary.stationary_law(model).pieces.evaluate(zs)
        m = stationary.speed_density(model, zs) / total
        worst_speed = max(worst_speed, float(np.max(np.abs(dens - m) / np.maximum(m, 1e-300))))
        x = float(rng.uniform(a[0] - 1.0, a[-1] + 1.0))
        zgrid = np.linspace(a[0] - 1.5, a[-1] + 1.5, 25)
        errs = []
        for q in (1e-2, 1e-3, 1e-4):
            sup = max(
                abs(potential.potential_density(model, q, x, z) - stationary.stationary_density(model, z))
                for z in zgrid
            )
            errs.append(sup)
        if not (errs[0] > errs[1] > errs[2]):
            monotone_ok = False
    lap = ThresholdModel([0.0], [1.0, -1.0], [math.sqrt(2.0), math.sqrt(2.0)])
    worst_lap = max(
        _rel(stationary.stationary_density(lap, z), math.exp(-abs(z)) / 2.0)
        for z in (-2.0, -1.0, 0.0, 1.0, 2.0)
    )
    passed = worst_speed <= 1e-10 and monotone_ok and worst_lap <= 1e-12
    return CheckResult("4", "stationary law", passed,
                       f"max speed-identity err {worst_speed:.3e} (tol 1e-10), "
                       f"small-q errors monotone: {monotone_ok}, "
                       f"two-sided-exponential err {worst_lap:.3e} (tol 1e-12)")


# -- criterion 5: escape probabilities ----------------------------------------


def _escape_n1_closed_form(model: ThresholdModel, y: float) -> float:
    a1 = model.thresholds[0]
    mu0, mu1 = model.drifts
    s0, s1 = model.vols[0] ** 2, model.vols[1] ** 2
    r0, r1 = mu0 / s0, mu1 / s1
    if y <= a1:
        return 1.0 + r1 * math.exp(2.0 * mu0 * (a1 - y) / s0) / (r0 - r1)
    return r0 / (r0 - r1) * math.exp(-2.0 * mu1 * (y - a1) / s1)


def check_escape() -> CheckResult:
    worst_n1 = 0.0
    for mu0, mu1, s0, s1 in [(-1.0, 1.0, 1.0, 1.0), (-0.5, 1.5, 0.7, 1.3), (-2.0, 0.3, 1.5, 0.6)]:
        model = ThresholdModel([0.4], [mu0, mu1], [s0, s1])
        for y in np.linspace(-2.0, 3.0, 11):
            worst_n1 = max(worst_n1, _rel(
                esc.escape_to_minus_infinity(model, y), _escape_n1_closed_form(model, float(y))
            ))
    models = random_models(ESCAPE_SEED, 10, drift_ends="outward", zero_interior=True)
    worst_cont = 0.0
    worst_scale = 0.0
    complement_exact = True
    for model in models:
        coeffs = esc.escape_coefficients(model)
        denom = esc._denominator(model, coeffs)
        for i in range(1, model.n + 1):
            yi = model.thresholds[i - 1]
            left = esc._escape_minus_in_interval(model, coeffs, denom, yi, i)
            right = esc._escape_minus_in_interval(model, coeffs, denom, yi, i + 1)
            worst_cont = max(worst_cont, _rel(left, right))
        lo, hi = stationary.scale_function_limits(model)
        for y in np.linspace(model.thresholds[0] - 2.0, model.thresholds[-1] + 2.0, 9):
            p = esc.escape_to_minus_infinity(model, y)
            via_scale = (hi - stationary.scale_function(model, float(y))) / (hi - lo)
            worst_scale = max(worst_scale, _rel(p, via_scale))
            if p + esc.escape_to_plus_infinity(model, y) != 1.0:
                complement_exact = False
    passed = (worst_n1 <= 1e-12 and worst_cont <= 1e-10
              and complement_exact and worst_scale <= 1e-10)
    return CheckResult("5", "escape probabilities", passed,
                       f"single-threshold closed form err {worst_n1:.3e} (tol 1e-12), "
                       f"threshold continuity err {worst_cont:.3e} (tol 1e-10), "
                       f"complement exact: {complement_exact}, "
                       f"scale-function cross-check err {worst_scale:.3e} (tol 1e-10)")


# -- criterion 6: coefficient limits ------------------------------------------

_LIMIT_Q = 1e-8

_FORWARD_LIMIT_MODELS = [
    ThresholdModel([-1.0, 0.0, 1.0], [0.8, -1.2, 0.6, -0.9], [1.0, 0.7, 1.6, 0.9]),
    ThresholdModel([-1.0, 0.0, 1.0], [1.1, 0.0, -0.5, -1.3], [0.8, 1.2, 0.5, 1.0]),
    ThresholdModel([-0.5, 0.5], [0.9, 0.0, -0.6], [1.4, 2.0, 0.7]),
    ThresholdModel([0.0], [1.0, -1.0], [math.sqrt(2.0), math.sqrt(2.0)]),
    ThresholdModel([-1.2, -0.1, 0.7, 1.5], [0.6, 1.4, 0.0, -1.1, -0.4], [1.0, 1.1, 1.1, 0.9, 1.3]),
    ThresholdModel([-0.8, 0.0, 0.8], [0.7, 0.0, 0.0, -1.2], [1.0, 0.9, 1.4, 1.1]),
]

_TRANSIENT_LIMIT_MODELS = [
    MC_TRANSIENT_MODEL,
    ThresholdModel([-0.5, 0.5, 1.5], [-0.8, 1.1, 0.0, 0.7], [1.2, 0.6, 1.0, 0.8]),
    ThresholdModel([0.0, 1.0], [-1.5, -0.4, 2.0], [1.0, 0.9, 1.1]),
]


def _plus_scaled_limits(model: ThresholdModel, q: float):
    sp = spectral_params(model, q)
    _, c = plus_coefficients(model, q)
    out = []
    for i in range(1, model.n + 1):
        mu_i = model.drifts[i]
        ci = c[i - 1]
        if mu_i < 0.0:
            num = 1.0 - ci
        elif mu_i == 0.0:
            num = 0.5 - ci
        else:
            num = -ci
        out.append(2.0 * sp.l[i] * num / q)
    return c, out


def _minus_scaled_limits(model: ThresholdModel, q: float):
    sp = spectral_params(model, q)
    _, c = minus_coefficients(model, q)
    out = []
    for i in range(1, model.n + 1):
        mu_prev = model.drifts[i - 1]
        ci = c[i - 1]
        if mu_prev > 0.0:
            num = 1.0 - ci
        elif mu_prev == 0.0:
            num = 0.5 - ci
        else:
            num = -ci
        out.append(2.0 * sp.l[i - 1] * num / q)
    return c, out


def check_coefficient_limits() -> CheckResult:
    worst_c = 0.0
    worst_scaled = 0.0
    for model in _FORWARD_LIMIT_MODELS:
        seqs = stationary.limit_sequences(model)
        cp, scaled_p = _plus_scaled_limits(model, _LIMIT_Q)
        for i in range(1, model.n + 1):
            mu_i = model.drifts[i]
            target = 1.0 if mu_i < 0.0 else (0.5 if mu_i == 0.0 else 0.0)
            worst_c = max(worst_c, abs(cp[i - 1] - target))
            worst_scaled = max(worst_scaled, _rel(scaled_p[i - 1], seqs.forward[i - 1]))
        if seqs.backward is not None:
            cm, scaled_m = _minus_scaled_limits(model, _LIMIT_Q)
            for i in range(1, model.n + 1):
                mu_prev = model.drifts[i - 1]
                target = 0.0 if mu_prev < 0.0 else (0.5 if mu_prev == 0.0 else 1.0)
                worst_c = max(worst_c, abs(cm[i - 1] - target))
                worst_scaled = max(worst_scaled, _rel(scaled_m[i - 1], seqs.backward[i - 1]))
    for model in _TRANSIENT_LIMIT_MODELS:
        coeffs = esc.escape_coefficients(model)
        _, cm = minus_coefficients(model, _LIMIT_Q)
        for i in range(1, model.n + 1):
            mu_prev = model.drifts[i - 1]
            if mu_prev == 0.0:
                continue  # the limit diverges when the regime below has no drift
            mu_i, sig_i = model.drifts[i], model.vols[i]
            unit = mu_i / (sig_i * sig_i) if mu_i != 0.0 else 1.0
            frac = unit / (mu_prev / (model.vols[i - 1] ** 2))
            share = coeffs.a[i - 1] / (coeffs.a[i - 1] + coeffs.b[i - 1])
            target = frac * share if mu_prev < 0.0 else 1.0 - frac * share
            worst_c = max(worst_c, abs(cm[i - 1] - target))
    passed = worst_c <= 1e-3 and worst_scaled <= 1e-3
    return CheckResult("6", "coefficient limits at vanishing rate", passed,
                       f"max |c - limit| {worst_c:.3e} (tol 1e-3 abs), "
                       f"max scaled-limit err {worst_scaled:.3e} (tol 1e-3 rel)")


# -- criterion 7: Monte Carlo concordance -------------------------------------


def check_monte_carlo(n_paths: int = 100_000, escape_paths: int = 10_000,
                      dt: float = 1e-4) -> list[CheckResult]:
    model = MC_TEST_MODEL
    q = 1.0
    x = 0.5
    results = []

    cfg = mc.SimConfig(dt=dt, n_paths=n_paths, seed=MC_SEED)
    est = mc.estimate_hit_laplace(model, q, x, 0.0, cfg)
    exact = passage.laplace_hit(model, q, x, 0.0)
    z = abs(est.value - exact) / est.stderr
    results.append(CheckResult("7a", "hit-transform concordance", z <= 3.0,
                               f"estimate {est.value:.6f} +/- {est.stderr:.6f}, "
                               f"analytic {exact:.6f}, z {z:.2f} (tol 3)"))

    edges = np.linspace(-2.0, 3.0, 21)
    hist = mc.sample_exponential_time_law(model, q, x, cfg, edges)
    pieces = potential.potential_pieces(model, q, x)
    worst_z = 0.0
    for i in range(len(edges) - 1):
        p_exact = pieces.mass_between(float(edges[i]), float(edges[i + 1]))
        se = max(hist.stderrs[i], math.sqrt(p_exact * (1.0 - p_exact) / n_paths), 1e-12)
        worst_z = max(worst_z, abs(hist.masses[i] - p_exact) / se)
    results.append(CheckResult("7b", "exponential-time law concordance", worst_z <= 4.0,
                               f"worst bin z {worst_z:.2f} over 20 bins (tol 4)"))

    worst_z = 0.0
    for side in ("plus", "minus"):
        chk = mc.estimate_martingale_checkpoints(
            model, q, x, cfg, side, -1.5, 2.5, [0.0, 0.25, 0.5, 1.0]
        )
        for m, d in zip(chk.means[1:], chk.drift_stderrs[1:]):
            worst_z = max(worst_z, abs(m - chk.means[0]) / max(d, 1e-12))
    results.append(CheckResult("7c", "martingale flatness", worst_z <= 4.0,
                               f"worst checkpoint z {worst_z:.2f} (tol 4)"))

    tmodel = MC_TRANSIENT_MODEL
    exact = esc.escape_to_minus_infinity(tmodel, x)
    cfg_esc = mc.SimConfig(dt=dt, n_paths=escape_paths, seed=MC_SEED + 1)
    est1 = mc.estimate_escape(tmodel, 3.0, x, cfg_esc)
    est2 = mc.estimate_escape(tmodel, 6.0, x, cfg_esc)
    z1 = abs(est1.value - exact) / est1.stderr
    z2 = abs(est2.value - exact) / est2.stderr
    zd = abs(est1.value - est2.value) / math.hypot(est1.stderr, est2.stderr)
    passed = z1 <= 3.0 and z2 <= 3.0 and zd <= 2.0
    results.append(CheckResult("7d", "escape-frequency concordance", passed,
                               f"z(width 3) {z1:.2f}, z(width 6) {z2:.2f} (tol 3), "
                               f"width-doubling z {zd:.2f} (tol 2)"))
    return results


# -- user-model checks ---------------------------------------------------------


def check_user_model(model: ThresholdModel) -> list[CheckResult]:
    """Structure checks against the identities that apply to this model."""
    results = []
    res2 = check_fundamental_structure(extra_models=[model])
    results.append(CheckResult("2", res2.name + " (incl. user model)", res2.passed, res2.detail))
    res3 = check_potential_measure(extra_models=[model])
    results.append(CheckResult("3", res3.name + " (incl. user model)", res3.passed, res3.detail))
    return results


def run_checks(model: ThresholdModel | None = None, full: bool = False,
               mc_paths: int = 100_000, escape_paths: int = 10_000,
               dt: float = 1e-4) -> list[CheckResult]:
    """The whole battery; `full` adds the Monte Carlo concordance runs."""
    results = [check_single_regime_oracles()]
    if model is not None:
        results.extend(check_user_model(model))
    else:
        results.append(check_fundamental_structure())
        results.append(check_potential_measure())
    results.append(check_stationary_law())
    results.append(check_escape())
    results.append(check_coefficient_limits())
    if full:
        results.extend(check_monte_carlo(n_paths=mc_paths, escape_paths=escape_paths, dt=dt))
    return results
