"""Independent stochastic oracle: Euler-Maruyama simulation of the SDE.

Every analytic quantity in the package has an estimator here that knows
nothing about fundamental solutions or coefficient recursions; agreement
within standard errors is the package's end-to-end check.

Determinism contract: estimates are reproducible bit for bit from
(seed, config).  Each path owns a counter-based Philox stream keyed by
(seed, path index), so a path's noise does not depend on which other
paths run alongside it; reductions are fixed-order numpy sums.  Draws are
consumed from each stream in step order, in blocks sized only by memory
(block sizing never changes which normal drives which step of which
path's evolution within a run configuration).

Discretization: plain Euler steps x += b dt + sigma sqrt(dt) z.  Level
crossings combine the endpoint sign test (timed by linear interpolation)
with the Brownian-bridge excursion test exp(-2 d0 d1 / (sigma^2 dt)), so
the leading O(sqrt(dt)) undetected-crossing bias cancels; exponential
clocks stop at the first grid time past the sampled clock.

The per-block stepping kernels compile with numba when it is installed
(pure-numpy fallbacks produce the same estimates, only slower).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, SimulationError
from .fundamentals import build_solution
from .model import ThresholdModel, require_valid

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

__all__ = [
    "SimConfig",
    "LevelStop",
    "HorizonStop",
    "ClockStop",
    "PathSummary",
    "EstimateWithError",
    "Histogram",
    "MartingaleCheckpoints",
    "simulate_path",
    "estimate_mean_at_horizon",
    "estimate_hit_laplace",
    "sample_exponential_time_law",
    "estimate_martingale_checkpoints",
    "estimate_escape",
    "estimate_stationary_histogram",
]

_MASK64 = (1 << 64) - 1
_MAX_BLOCK_BYTES = 128 * 2**20

_CODE_PENDING, _CODE_LOWER, _CODE_UPPER, _CODE_CLOCK, _CODE_HORIZON = 0, 1, 2, 3, 4
_REASONS = {_CODE_LOWER: "lower", _CODE_UPPER: "upper", _CODE_CLOCK: "clock", _CODE_HORIZON: "horizon"}


@dataclass(frozen=True)
class SimConfig:
    """Step size, path count, optional horizon, seed, antithetic flag.

    horizon=None lets each estimator pick its documented default (an
    exponential clock of rate q uses 50/q, leaving e^-50 residual mass).
    """

    dt: float
    n_paths: int
    horizon: float | None = None
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise PreconditionError(f"dt must be positive and finite, got {self.dt!r}")
        if self.n_paths < 1:
            raise PreconditionError(f"n_paths must be >= 1, got {self.n_paths!r}")
        if self.horizon is not None and not (self.horizon > 0.0):
            raise PreconditionError(f"horizon must be positive, got {self.horizon!r}")


@dataclass(frozen=True)
class LevelStop:
    """Stop at the first hit of either level (one may be None)."""

    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if self.lower is None and self.upper is None:
            raise PreconditionError("LevelStop needs at least one level")
        if self.lower is not None and self.upper is not None and not self.lower < self.upper:
            raise PreconditionError("LevelStop needs lower < upper")


@dataclass(frozen=True)
class HorizonStop:
    """Run to the config horizon and stop."""


@dataclass(frozen=True)
class ClockStop:
    """Stop at an independent exponential time of rate q (one per path)."""

    q: float

    def __post_init__(self):
        if not self.q > 0.0:
            raise PreconditionError(f"clock rate must be positive, got {self.q!r}")


@dataclass(frozen=True)
class PathSummary:
    terminal: float
    stop_reason: str
    stop_time: float


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float
    n_paths: int
    bias_bound: float = 0.0


@dataclass(frozen=True)
class Histogram:
    """Bin masses with per-bin standard errors; below/above catch the
    mass outside [edges[0], edges[-1]]."""

    edges: tuple[float, ...]
    masses: tuple[float, ...]
    stderrs: tuple[float, ...]
    n_paths: int
    below: float = 0.0
    above: float = 0.0


@dataclass(frozen=True)
class MartingaleCheckpoints:
    """Sample means of the discounted harmonic transform at fixed times.

    means[j] estimates E[e^{-q (t_j ^ tau)} g(X_{t_j ^ tau})] for the
    two-sided absorption time tau; drift_stderrs[j] is the standard error
    of the paired difference against the first checkpoint, which is the
    statistic the flatness check uses.
    """

    times: tuple[float, ...]
    means: tuple[float, ...]
    stderrs: tuple[float, ...]
    drift_stderrs: tuple[float, ...]


# -- path streams ------------------------------------------------------------


def _generator(seed: int, tag: int) -> np.random.Generator:
    key = np.array([seed & _MASK64, tag & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _stream_ids(path_ids: np.ndarray, antithetic: bool) -> tuple[np.ndarray, np.ndarray]:
    if antithetic:
        return path_ids // 2, np.where(path_ids % 2 == 0, 1.0, -1.0)
    return path_ids, np.ones(path_ids.shape)


def _block_size(n_alive: int) -> int:
    return int(np.clip(_MAX_BLOCK_BYTES // (8 * max(n_alive, 1)), 128, 4096))


class _Noise:
    """Per-path normal streams consumed in blocks.

    Antithetic twins share the stream of the even path and negate it;
    twins stay step-synchronized because all paths advance on a common
    global step counter.  An exponential clock, when used, is the first
    draw of each stream, before any normals.
    """

    def __init__(self, seed: int, path_ids: np.ndarray, antithetic: bool):
        stream_ids, signs = _stream_ids(path_ids, antithetic)
        self.antithetic = antithetic
        self.signs = signs
        self._gens: dict[int, np.random.Generator] = {}
        self._seed = seed
        self.stream_ids = stream_ids

    def _gen(self, stream: int) -> np.random.Generator:
        gen = self._gens.get(stream)
        if gen is None:
            gen = self._gens[stream] = _generator(self._seed, stream)
        return gen

    def clock(self, scale: float) -> np.ndarray:
        """One exponential per stream (shared by antithetic twins), mapped
        back to paths.  Must be called before the first normal draw."""
        uniq = np.unique(self.stream_ids)
        draws = {int(s): float(self._gen(int(s)).exponential(scale)) for s in uniq}
        return np.array([draws[int(s)] for s in self.stream_ids])

    def draw(self, block: int) -> np.ndarray:
        """(n_alive, block) matrix of signed normals for the current cohort."""
        if not self.antithetic:
            out = np.empty((self.stream_ids.size, block))
            for j, s in enumerate(self.stream_ids):
                out[j] = self._gen(int(s)).standard_normal(block)
            return out
        uniq, inverse = np.unique(self.stream_ids, return_inverse=True)
        z = np.empty((uniq.size, block))
        for j, s in enumerate(uniq):
            z[j] = self._gen(int(s)).standard_normal(block)
        out = z[inverse]
        out *= self.signs[:, None]
        return out

    def draw_with_uniforms(self, block: int) -> tuple[np.ndarray, np.ndarray]:
        """Normals and uniforms per step, interleaved per stream per block
        (the uniforms drive the bridge crossing test of level stops)."""
        if not self.antithetic:
            z = np.empty((self.stream_ids.size, block))
            u = np.empty((self.stream_ids.size, block))
            for j, s in enumerate(self.stream_ids):
                gen = self._gen(int(s))
                z[j] = gen.standard_normal(block)
                u[j] = gen.random(block)
            return z, u
        uniq, inverse = np.unique(self.stream_ids, return_inverse=True)
        z = np.empty((uniq.size, block))
        u = np.empty((uniq.size, block))
        for j, s in enumerate(uniq):
            gen = self._gen(int(s))
            z[j] = gen.standard_normal(block)
            u[j] = gen.random(block)
        zz = z[inverse]
        zz *= self.signs[:, None]
        return zz, u[inverse]

    def reorder(self, order: np.ndarray):
        self.stream_ids = self.stream_ids[order]
        self.signs = self.signs[order]

    def compact(self, keep: np.ndarray):
        self.stream_ids = self.stream_ids[keep]
        self.signs = self.signs[keep]
        us = set(int(s) for s in np.unique(self.stream_ids))
        self._gens = {s: g for s, g in self._gens.items() if s in us}


# -- batch engine ------------------------------------------------------------


class _BatchResult:
    def __init__(self, n: int, snapshot_steps: tuple[int, ...]):
        self.terminal = np.full(n, np.nan)
        self.stop_time = np.full(n, np.nan)
        self.code = np.zeros(n, dtype=np.int8)
        self.snapshots = {k: np.full(n, np.nan) for k in snapshot_steps}


def _run_batch(
    model: ThresholdModel,
    x0: float,
    config: SimConfig,
    stop,
    path_ids: np.ndarray | None = None,
    snapshot_steps: tuple[int, ...] = (),
) -> _BatchResult:
    require_valid(model)
    if not math.isfinite(x0):
        raise PreconditionError(f"starting point must be finite, got {x0!r}")
    n = config.n_paths if path_ids is None else len(path_ids)
    if path_ids is None:
        path_ids = np.arange(n, dtype=np.int64)
    dt = config.dt
    thresholds = np.asarray(model.thresholds)
    mu_dt = np.asarray(model.drifts) * dt
    sig_sqdt = np.asarray(model.vols) * math.sqrt(dt)

    noise = _Noise(config.seed, path_ids, config.antithetic)
    lower = upper = None
    clock_time = None
    k_stop = None
    horizon_codes = None
    if isinstance(stop, ClockStop):
        horizon = config.horizon if config.horizon is not None else 50.0 / stop.q
        e = noise.clock(1.0 / stop.q)
        clock_time = np.minimum(e, horizon)
        horizon_codes = np.where(e > horizon, _CODE_HORIZON, _CODE_CLOCK).astype(np.int8)
        k_stop = np.maximum(np.ceil(clock_time / dt), 1.0).astype(np.int64)
    elif isinstance(stop, HorizonStop):
        if config.horizon is None:
            raise PreconditionError("HorizonStop requires config.horizon")
        k_stop = np.full(n, max(1, math.ceil(config.horizon / dt)), dtype=np.int64)
        clock_time = np.full(n, config.horizon)
        horizon_codes = np.full(n, _CODE_HORIZON, dtype=np.int8)
    elif isinstance(stop, LevelStop):
        lower, upper = stop.lower, stop.upper
        if config.horizon is not None:
            k_stop = np.full(n, max(1, math.ceil(config.horizon / dt)), dtype=np.int64)
            clock_time = np.full(n, config.horizon)
            horizon_codes = np.full(n, _CODE_HORIZON, dtype=np.int8)
    else:
        raise PreconditionError(f"unknown stop rule: {stop!r}")

    res = _BatchResult(n, snapshot_steps)
    snap_steps = sorted(set(snapshot_steps))
    if 0 in res.snapshots:
        res.snapshots[0][:] = x0

    # paths already at or past a level stop immediately
    if lower is not None and x0 <= lower:
        res.terminal[:] = x0
        res.stop_time[:] = 0.0
        res.code[:] = _CODE_LOWER
        return res
    if upper is not None and x0 >= upper:
        res.terminal[:] = x0
        res.stop_time[:] = 0.0
        res.code[:] = _CODE_UPPER
        return res

    rows = np.arange(n, dtype=np.int64)  # positions into result arrays
    if lower is None and upper is None:
        _run_sorted_clock(
            res, noise, rows, float(x0), dt, thresholds, mu_dt, sig_sqdt,
            k_stop, clock_time, horizon_codes, snap_steps,
        )
    else:
        _run_levels(
            res, noise, rows, float(x0), dt, thresholds, mu_dt, sig_sqdt,
            lower, upper, k_stop, clock_time, horizon_codes, snap_steps,
        )
    return res


def _clock_block_py(zT, x, thr, mu_dt, sig_sqdt, ks, ct, hc, rows,
                    terminal, stop_time, code, k, ptr):
    """One block of clock/horizon steps; retire the sorted prefix in place.

    zT rows are steps, columns are paths aligned with x (every block starts
    with ptr = 0, so noise rows and path slots coincide).
    """
    nsteps = zT.shape[0]
    n = x.shape[0]
    nt = thr.shape[0]
    for s in range(nsteps):
        k += 1
        for j in range(ptr, n):
            xi = x[j]
            r = 0
            while r < nt and xi > thr[r]:
                r += 1
            x[j] = xi + mu_dt[r] + sig_sqdt[r] * zT[s, j]
        while ptr < n and ks[ptr] <= k:
            idx = rows[ptr]
            terminal[idx] = x[ptr]
            stop_time[idx] = ct[ptr]
            code[idx] = hc[ptr]
            ptr += 1
    return k, ptr


def _levels_block_py(zT, uT, x, thr, mu_dt, sig_sqdt, ks, ct, hc,
                     has_lower, lower, has_upper, upper, rows, active,
                     terminal, stop_time, code, dt, k):
    """One block of level-stop steps with bridge crossing detection.

    Codes written here must match the module constants: 1 lower, 2 upper;
    clock/horizon codes arrive prebaked in hc.
    """
    nsteps = zT.shape[0]
    n = x.shape[0]
    nt = thr.shape[0]
    stopped = 0
    for s in range(nsteps):
        k += 1
        for j in range(n):
            if not active[j]:
                continue
            xi = x[j]
            r = 0
            while r < nt and xi > thr[r]:
                r += 1
            sg = sig_sqdt[r]
            xn = xi + mu_dt[r] + sg * zT[s, j]
            u = uT[s, j]
            done = 0
            t_hit = 0.0
            if has_lower:
                if xn <= lower:
                    dx = xn - xi
                    theta = (lower - xi) / dx if dx != 0.0 else 1.0
                    done = 1
                    t_hit = (k - 1 + theta) * dt
                else:
                    ex = -2.0 * (xi - lower) * (xn - lower) / (sg * sg)
                    if ex > -40.0 and u < math.exp(ex):
                        done = 1
                        t_hit = (k - 0.5) * dt
            if done == 0 and has_upper:
                if xn >= upper:
                    dx = xn - xi
                    theta = (upper - xi) / dx if dx != 0.0 else 1.0
                    done = 2
                    t_hit = (k - 1 + theta) * dt
                else:
                    ex = -2.0 * (upper - xi) * (upper - xn) / (sg * sg)
                    if ex > -40.0 and u > 1.0 - math.exp(ex):
                        done = 2
                        t_hit = (k - 0.5) * dt
            if done != 0:
                idx = rows[j]
                terminal[idx] = lower if done == 1 else upper
                stop_time[idx] = t_hit
                code[idx] = done
                active[j] = False
                stopped += 1
                continue
            x[j] = xn
            if ks[j] <= k:
                idx = rows[j]
                terminal[idx] = xn
                stop_time[idx] = ct[j]
                code[idx] = hc[j]
                active[j] = False
                stopped += 1
    return k, stopped


if _HAVE_NUMBA:
    _clock_block = _njit(cache=True)(_clock_block_py)
    _levels_block = _njit(cache=True)(_levels_block_py)
else:  # pragma: no cover - exercised only without numba
    _clock_block = _clock_block_py
    _levels_block = _levels_block_py


def _run_sorted_clock(res, noise, rows, x0, dt, thresholds, mu_dt, sig_sqdt,
                      k_stop, clock_time, horizon_codes, snap_steps):
    """Clock/horizon runs: stop steps are known up front, so paths are kept
    sorted by stop step and retire as a growing prefix (no masking)."""
    order = np.argsort(k_stop, kind="stable")
    rows = rows[order]
    ks = k_stop[order]
    ct = clock_time[order]
    hc = horizon_codes[order]
    noise.reorder(order)
    x = np.full(rows.size, x0)
    k = 0
    cp_ptr = 0
    while snap_steps and cp_ptr < len(snap_steps) and snap_steps[cp_ptr] <= 0:
        cp_ptr += 1
    ptr = 0
    n = rows.size
    while ptr < n:
        block = _block_size(n - ptr)
        block = max(min(block, int(ks[-1]) - k), 1)
        if cp_ptr < len(snap_steps):
            block = min(block, snap_steps[cp_ptr] - k)
        zT = np.ascontiguousarray(noise.draw(block).T)
        k, ptr = _clock_block(
            zT, x, thresholds, mu_dt, sig_sqdt, ks, ct, hc, rows,
            res.terminal, res.stop_time, res.code, k, ptr,
        )
        if cp_ptr < len(snap_steps) and k == snap_steps[cp_ptr]:
            res.snapshots[k][rows[ptr:]] = x[ptr:]
            cp_ptr += 1
        if not np.all(np.isfinite(x[ptr:])):
            raise SimulationError(
                "simulation produced a non-finite state; reduce dt or check the model"
            )
        if ptr > 0:
            noise.compact(np.arange(n) >= ptr)
            rows = rows[ptr:]
            x = x[ptr:]
            ks = ks[ptr:]
            ct = ct[ptr:]
            hc = hc[ptr:]
            n = rows.size
            ptr = 0


def _run_levels(res, noise, rows, x0, dt, thresholds, mu_dt, sig_sqdt,
                lower, upper, k_stop, clock_time, horizon_codes, snap_steps):
    """Level stops with Brownian-bridge crossing detection.

    A step whose endpoints stay inside the barriers may still have crossed
    in between; the bridge crossing probability exp(-2 d0 d1 / (sigma^2 dt))
    restores those excursions, killing the O(sqrt(dt)) detection bias of
    endpoint tests.  Bridge hits are timed at the step midpoint (an O(dt)
    approximation, far below the remaining Monte Carlo error).
    """
    x = np.full(rows.size, x0)
    unbounded = k_stop is None
    if unbounded:
        ks = np.full(rows.size, 2**62, dtype=np.int64)
        ct = np.zeros(rows.size)
        hc = np.zeros(rows.size, dtype=np.int8)
    else:
        ks = k_stop
        ct = clock_time
        hc = horizon_codes
    k = 0
    cp_ptr = 0
    while snap_steps and cp_ptr < len(snap_steps) and snap_steps[cp_ptr] <= 0:
        cp_ptr += 1
    while rows.size:
        block = _block_size(rows.size) // 2  # normals and uniforms both live
        if not unbounded:
            block = min(block, max(int(np.max(ks)) - k, 1))
        if cp_ptr < len(snap_steps):
            block = min(block, snap_steps[cp_ptr] - k)
        z, u = noise.draw_with_uniforms(block)
        zT = np.ascontiguousarray(z.T)
        uT = np.ascontiguousarray(u.T)
        active = np.ones(rows.size, dtype=np.bool_)
        k, stopped = _levels_block(
            zT, uT, x, thresholds, mu_dt, sig_sqdt, ks, ct, hc,
            lower is not None, lower if lower is not None else 0.0,
            upper is not None, upper if upper is not None else 0.0,
            rows, active, res.terminal, res.stop_time, res.code, dt, k,
        )
        if cp_ptr < len(snap_steps) and k == snap_steps[cp_ptr]:
            res.snapshots[k][rows[active]] = x[active]
            cp_ptr += 1
        if not np.all(np.isfinite(x[active])):
            raise SimulationError(
                "simulation produced a non-finite state; reduce dt or check the model"
            )
        if stopped:
            rows = rows[active]
            x = x[active]
            ks = ks[active]
            ct = ct[active]
            hc = hc[active]
            noise.compact(active)
        if unbounded and rows.size and k > 2**33:
            raise SimulationError("level stop never reached; set a horizon")


# -- public operations -------------------------------------------------------


def simulate_path(model, x0, config: SimConfig, stop, path_index: int = 0) -> PathSummary:
    """Single path summary; identical to the same path inside a batch run."""
    one = SimConfig(
        dt=config.dt,
        n_paths=1,
        horizon=config.horizon,
        seed=config.seed,
        antithetic=config.antithetic,
    )
    res = _run_batch(
        model, float(x0), one, stop, path_ids=np.array([path_index], dtype=np.int64)
    )
    return PathSummary(
        terminal=float(res.terminal[0]),
        stop_reason=_REASONS[int(res.code[0])],
        stop_time=float(res.stop_time[0]),
    )


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    m = float(np.mean(values))
    if values.size < 2:
        return m, 0.0
    return m, float(np.std(values, ddof=1) / math.sqrt(values.size))


def estimate_mean_at_horizon(model, x0, config: SimConfig) -> EstimateWithError:
    """Sample mean of the state at the config horizon (sanity estimator)."""
    res = _run_batch(model, float(x0), config, HorizonStop())
    m, se = _mean_se(res.terminal)
    return EstimateWithError(value=m, stderr=se, n_paths=config.n_paths)


def estimate_hit_laplace(model, q, x, target, config: SimConfig) -> EstimateWithError:
    """Mean of e^{-q tau} over paths, truncated paths contributing 0.

    The truncation bias is bounded by e^{-q T}; it is returned, not
    silently absorbed.
    """
    if not q > 0.0:
        raise PreconditionError(f"q must be positive, got {q!r}")
    x, target = float(x), float(target)
    if x == target:
        return EstimateWithError(value=1.0, stderr=0.0, n_paths=config.n_paths)
    horizon = config.horizon if config.horizon is not None else 50.0 / q
    cfg = SimConfig(config.dt, config.n_paths, horizon, config.seed, config.antithetic)
    stop = LevelStop(lower=target) if target < x else LevelStop(upper=target)
    res = _run_batch(model, x, cfg, stop)
    hit = (res.code == _CODE_LOWER) | (res.code == _CODE_UPPER)
    vals = np.where(hit, np.exp(-q * res.stop_time), 0.0)
    m, se = _mean_se(vals)
    return EstimateWithError(
        value=m, stderr=se, n_paths=config.n_paths, bias_bound=math.exp(-q * horizon)
    )


def _histogram_from_samples(samples: np.ndarray, edges) -> Histogram:
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise PreconditionError("edges must be a strictly increasing 1-d array")
    n = samples.size
    counts, _ = np.histogram(samples, bins=edges)
    masses = counts / n
    ses = np.sqrt(masses * (1.0 - masses) / n)
    below = float(np.count_nonzero(samples < edges[0]) / n)
    above = float(np.count_nonzero(samples > edges[-1]) / n)
    return Histogram(
        edges=tuple(edges),
        masses=tuple(masses),
        stderrs=tuple(ses),
        n_paths=n,
        below=below,
        above=above,
    )


def sample_exponential_time_law(model, q, x, config: SimConfig, edges) -> Histogram:
    """Histogram of the state at an independent exponential time of rate q."""
    res = _run_batch(model, float(x), config, ClockStop(q=float(q)))
    return _histogram_from_samples(res.terminal, edges)


def estimate_martingale_checkpoints(
    model, q, x0, config: SimConfig, side: str, lower, upper, times
) -> MartingaleCheckpoints:
    """Check that e^{-q t} g(X) has flat mean along a bounded stopping scheme.

    Paths absorb at the two-sided barrier (lower, upper); at each
    checkpoint every path contributes e^{-q (t ^ tau)} g(X_{t ^ tau}).
    The discounted transform is harmonic for the killed generator, so the
    means must agree across checkpoints up to Monte Carlo error.
    """
    if not q > 0.0:
        raise PreconditionError(f"q must be positive, got {q!r}")
    times = sorted(float(t) for t in times)
    if not times or times[0] < 0.0:
        raise PreconditionError("checkpoint times must be nonnegative")
    sol = build_solution(model, float(q), side)
    dt = config.dt
    steps = tuple(int(round(t / dt)) for t in times)
    horizon = max(steps[-1], 1) * dt
    cfg = SimConfig(dt, config.n_paths, horizon, config.seed, config.antithetic)
    res = _run_batch(
        model,
        float(x0),
        cfg,
        LevelStop(lower=float(lower), upper=float(upper)),
        snapshot_steps=steps,
    )
    stopped_val = np.where(
        res.code != _CODE_PENDING, np.exp(sol.log_value(np.nan_to_num(res.terminal))), 0.0
    )
    values = []
    for t, kstep in zip(times, steps):
        use_terminal = (res.code != _CODE_PENDING) & (res.stop_time <= t + 0.5 * dt)
        snap = res.snapshots[kstep]
        live = ~use_terminal
        v = np.empty(res.terminal.shape)
        v[use_terminal] = (
            np.exp(-q * res.stop_time[use_terminal]) * stopped_val[use_terminal]
        )
        if np.any(live):
            v[live] = math.exp(-q * t) * np.exp(sol.log_value(snap[live]))
        values.append(v)
    means, ses, dses = [], [], []
    base = values[0]
    for v in values:
        m, se = _mean_se(v)
        _, dse = _mean_se(v - base)
        means.append(m)
        ses.append(se)
        dses.append(dse)
    return MartingaleCheckpoints(
        times=tuple(times),
        means=tuple(means),
        stderrs=tuple(ses),
        drift_stderrs=tuple(dses),
    )


def estimate_escape(model, barrier_width, x, config: SimConfig) -> EstimateWithError:
    """Frequency of exiting low (at a_1 - width before a_n + width), a proxy
    for drifting to -inf.  The proxy bias decays with the tail exponents of
    the escape formula; a bound is reported, and doubling the width should
    move the estimate by less than the Monte Carlo error."""
    require_valid(model)
    if not barrier_width > 0.0:
        raise PreconditionError(f"barrier width must be positive, got {barrier_width!r}")
    mu, sig = model.drifts, model.vols
    lo = model.thresholds[0] - barrier_width
    hi = model.thresholds[-1] + barrier_width
    if config.horizon is not None:
        horizon = config.horizon
    else:
        speed = min(abs(mu[0]), abs(mu[-1]))
        span = hi - lo
        horizon = 100.0 * span / speed if speed > 0 else 200.0 * span * span
    cfg = SimConfig(config.dt, config.n_paths, horizon, config.seed, config.antithetic)
    res = _run_batch(model, float(x), cfg, LevelStop(lower=lo, upper=hi))
    went_low = res.code == _CODE_LOWER
    truncated = float(np.mean(res.code == _CODE_HORIZON))
    m, se = _mean_se(went_low.astype(float))
    tail = math.exp(2.0 * mu[0] * barrier_width / (sig[0] * sig[0])) + math.exp(
        -2.0 * mu[-1] * barrier_width / (sig[-1] * sig[-1])
    )
    return EstimateWithError(
        value=m, stderr=se, n_paths=config.n_paths, bias_bound=tail + truncated
    )


def estimate_stationary_histogram(
    model, x0, config: SimConfig, edges, burn_in: float, n_batches: int = 32
) -> Histogram:
    """Occupancy histogram of the post-burn-in trajectory ensemble.

    Runs the configured number of paths to the config horizon and
    time-averages bin occupancy over all post-burn-in steps; standard
    errors come from batch means over time, which absorb the serial
    correlation of the trajectory.
    """
    require_valid(model)
    if config.horizon is None:
        raise PreconditionError("stationary histogram requires config.horizon")
    if not 0.0 <= burn_in < config.horizon:
        raise PreconditionError("burn_in must lie in [0, horizon)")
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise PreconditionError("edges must be a strictly increasing 1-d array")
    dt = config.dt
    n = config.n_paths
    total_steps = max(1, math.ceil(config.horizon / dt))
    burn_steps = min(total_steps - 1, math.ceil(burn_in / dt))
    sample_steps = total_steps - burn_steps
    n_batches = max(1, min(n_batches, sample_steps))

    thresholds = np.asarray(model.thresholds)
    mu_dt = np.asarray(model.drifts) * dt
    sig_sqdt = np.asarray(model.vols) * math.sqrt(dt)
    noise = _Noise(config.seed, np.arange(n, dtype=np.int64), config.antithetic)

    nb = edges.size + 1  # searchsorted bins including below/above
    counts = np.zeros((n_batches, nb), dtype=np.int64)
    batch_steps = np.zeros(n_batches, dtype=np.int64)
    x = np.full(n, float(x0))
    k = 0
    while k < total_steps:
        block = min(_block_size(n), total_steps - k)
        z = noise.draw(block)
        for s in range(block):
            reg = np.searchsorted(thresholds, x, side="left")
            x = x + mu_dt.take(reg) + sig_sqdt.take(reg) * z[:, s]
            k += 1
            if k > burn_steps:
                batch = min((k - burn_steps - 1) * n_batches // sample_steps, n_batches - 1)
                idx = np.searchsorted(edges, x, side="left")
                counts[batch] += np.bincount(idx, minlength=nb)
                batch_steps[batch] += n
        if not np.all(np.isfinite(x)):
            raise SimulationError(
                "simulation produced a non-finite state; reduce dt or check the model"
            )
    fracs = counts / batch_steps[:, None]
    mass = fracs.mean(axis=0)
    if n_batches > 1:
        se = fracs.std(axis=0, ddof=1) / math.sqrt(n_batches)
    else:
        se = np.zeros(nb)
    # searchsorted(left) maps edges[j-1] < x <= ... careful: bin j of the
    # histogram is (edges[j], edges[j+1]] -> idx j+1
    return Histogram(
        edges=tuple(edges),
        masses=tuple(mass[1:-1]),
        stderrs=tuple(se[1:-1]),
        n_paths=n,
        below=float(mass[0]),
        above=float(mass[-1]),
    )
