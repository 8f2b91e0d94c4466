"""Command-line front end.

Loads a model file, dispatches to the analytic or Monte Carlo operations,
and writes CSV (17 significant digits, LF line endings, fixed column
order, so downstream tooling sees bit-stable output).

Exit codes: 0 success; 1 usage error; 2 model validation error;
3 precondition violation (including numerical failures); 4 verification
failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import escape as esc
from . import montecarlo as mc
from . import passage, potential, stationary, verification
from .errors import (
    ModelValidationError,
    NumericalInstabilityError,
    PreconditionError,
    SimulationError,
)
from .model import model_from_json, model_to_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_PRECONDITION = 3
EXIT_VERIFY = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt(v: float) -> str:
    v = float(v)
    if v == 0.0:
        v = 0.0  # normalize -0.0 so output is bit-stable across code paths
    return format(v, ".17g")


_DASH_VALUE_FLAGS = ("--grid", "--edges", "--y")


def _merge_dash_values(argv: list[str]) -> list[str]:
    """Join flag/value pairs whose value may begin with '-' (grids, lists)."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _DASH_VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def _emit(lines: list[str], out: str | None):
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_model(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelValidationError([f"cannot read model file {path}: {exc}"]) from exc
    return model_from_json(text)


def _parse_grid(spec: str) -> np.ndarray:
    try:
        lo_s, hi_s, n_s = spec.split(":")
        lo, hi, count = float(lo_s), float(hi_s), int(n_s)
    except ValueError as exc:
        raise _UsageError(f"grid must be MIN:MAX:COUNT, got {spec!r}") from exc
    if count < 2 or not lo < hi:
        raise _UsageError(f"grid needs count >= 2 and min < max, got {spec!r}")
    return np.linspace(lo, hi, count)


def _parse_values(spec: str) -> list[float]:
    try:
        return [float(tok) for tok in spec.split(",") if tok != ""]
    except ValueError as exc:
        raise _UsageError(f"expected comma-separated numbers, got {spec!r}") from exc


def _build_parser() -> _Parser:
    p = _Parser(prog="threshdiff", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--model", required=True, help="model JSON file")
        sp.add_argument("--out", default=None, help="write CSV here instead of stdout")
        return sp

    sp = add("eval-density", "resolvent density on a grid")
    sp.add_argument("--q", type=float, required=True)
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--grid", required=True, help="MIN:MAX:COUNT grid of z values")
    sp.add_argument("--pieces", action="store_true",
                    help="dump the exponential segments instead of grid values")

    sp = add("hitting", "hitting-time Laplace transforms")
    sp.add_argument("--q", type=float, required=True)
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--target", type=float, default=None)
    sp.add_argument("--lower", type=float, default=None)
    sp.add_argument("--upper", type=float, default=None)

    sp = add("stationary", "long-run density on a grid")
    sp.add_argument("--grid", required=True)

    sp = add("scale", "scale function and speed density on a grid")
    sp.add_argument("--grid", required=True)

    sp = add("escape", "escape probabilities for starting points")
    sp.add_argument("--y", required=True, help="comma-separated starting points")

    sp = add("simulate", "Monte Carlo estimators")
    sp.add_argument("--kind", required=True,
                    choices=["hit-laplace", "exp-law", "escape", "stationary", "mean"])
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--q", type=float, default=None)
    sp.add_argument("--target", type=float, default=None)
    sp.add_argument("--width", type=float, default=None, help="escape barrier half-width")
    sp.add_argument("--edges", default=None, help="histogram edges MIN:MAX:COUNT")
    sp.add_argument("--burn-in", type=float, default=None)
    sp.add_argument("--n", type=int, default=10_000, help="path count")
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--horizon", type=float, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--antithetic", action="store_true")

    sp = add("verify", "run the verification battery")
    sp.add_argument("--full", action="store_true", help="include Monte Carlo concordance")
    sp.add_argument("--mc-paths", type=int, default=100_000)
    sp.add_argument("--mc-dt", type=float, default=1e-4)

    sp = add("dump-model", "round-trip the model file")

    return p


def _cmd_eval_density(model, args) -> list[str]:
    if args.pieces:
        pieces = potential.potential_pieces(model, args.q, args.x)
        lines = ["left,right,amplitude,rate,reference"]
        for seg in pieces.segments:
            for t in seg.terms:
                lines.append(
                    f"{_fmt(seg.left)},{_fmt(seg.right)},{_fmt(t.amplitude)},"
                    f"{_fmt(t.rate)},{_fmt(t.reference)}"
                )
        return lines
    zs = _parse_grid(args.grid)
    lines = ["z,density"]
    for z in zs:
        lines.append(f"{_fmt(z)},{_fmt(potential.potential_density(model, args.q, args.x, z))}")
    return lines


def _cmd_hitting(model, args) -> list[str]:
    lines = ["quantity,value"]
    if args.target is None and (args.lower is None or args.upper is None):
        raise _UsageError("hitting needs --target and/or both --lower and --upper")
    if args.target is not None:
        v = passage.laplace_hit(model, args.q, args.x, args.target)
        lines.append(f"hit_laplace,{_fmt(v)}")
    if args.lower is not None and args.upper is not None:
        down = passage.laplace_exit_down(model, args.q, args.x, args.lower, args.upper)
        up = passage.laplace_exit_up(model, args.q, args.x, args.lower, args.upper)
        lines.append(f"exit_down_laplace,{_fmt(down)}")
        lines.append(f"exit_up_laplace,{_fmt(up)}")
        lines.append(f"exit_down_probability,{_fmt(passage.exit_probability_down(model, args.x, args.lower, args.upper))}")
    return lines


def _cmd_stationary(model, args) -> list[str]:
    law = stationary.stationary_law(model)
    lines = ["z,density"]
    for z in _parse_grid(args.grid):
        lines.append(f"{_fmt(z)},{_fmt(law.density(float(z)))}")
    return lines


def _cmd_scale(model, args) -> list[str]:
    lines = ["x,scale,speed"]
    for x in _parse_grid(args.grid):
        lines.append(
            f"{_fmt(x)},{_fmt(stationary.scale_function(model, float(x)))},"
            f"{_fmt(stationary.speed_density(model, float(x)))}"
        )
    return lines


def _cmd_escape(model, args) -> list[str]:
    lines = ["y,p_minus,p_plus"]
    for y in _parse_values(args.y):
        pm = esc.escape_to_minus_infinity(model, y)
        lines.append(f"{_fmt(y)},{_fmt(pm)},{_fmt(1.0 - pm)}")
    return lines


def _cmd_simulate(model, args) -> list[str]:
    cfg = mc.SimConfig(dt=args.dt, n_paths=args.n, horizon=args.horizon,
                       seed=args.seed, antithetic=args.antithetic)
    kind = args.kind
    if kind == "hit-laplace":
        if args.q is None or args.target is None:
            raise _UsageError("hit-laplace needs --q and --target")
        est = mc.estimate_hit_laplace(model, args.q, args.x, args.target, cfg)
    elif kind == "escape":
        if args.width is None:
            raise _UsageError("escape needs --width")
        est = mc.estimate_escape(model, args.width, args.x, cfg)
    elif kind == "mean":
        if cfg.horizon is None:
            raise _UsageError("mean needs --horizon")
        est = mc.estimate_mean_at_horizon(model, args.x, cfg)
    elif kind in ("exp-law", "stationary"):
        if args.edges is None:
            raise _UsageError(f"{kind} needs --edges MIN:MAX:COUNT")
        edges = _parse_grid(args.edges)
        if kind == "exp-law":
            if args.q is None:
                raise _UsageError("exp-law needs --q")
            hist = mc.sample_exponential_time_law(model, args.q, args.x, cfg, edges)
        else:
            if cfg.horizon is None:
                raise _UsageError("stationary needs --horizon")
            burn = args.burn_in if args.burn_in is not None else cfg.horizon / 5.0
            hist = mc.estimate_stationary_histogram(model, args.x, cfg, edges, burn)
        lines = ["bin_left,bin_right,mass,se"]
        for i in range(len(hist.edges) - 1):
            lines.append(
                f"{_fmt(hist.edges[i])},{_fmt(hist.edges[i + 1])},"
                f"{_fmt(hist.masses[i])},{_fmt(hist.stderrs[i])}"
            )
        return lines
    else:  # pragma: no cover - argparse enforces choices
        raise _UsageError(f"unknown simulate kind {kind!r}")
    return [
        "estimate,stderr,n_paths,bias_bound",
        f"{_fmt(est.value)},{_fmt(est.stderr)},{est.n_paths},{_fmt(est.bias_bound)}",
    ]


def _cmd_verify(model, args) -> tuple[list[str], bool]:
    results = verification.run_checks(
        model=model, full=args.full, mc_paths=args.mc_paths, dt=args.mc_dt
    )
    width = max(len(r.name) for r in results)
    table = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        table.append(f"[{status}] {r.criterion:>2} {r.name:<{width}}  {r.detail}")
    sys.stdout.write("\n".join(table) + "\n")
    lines = ["criterion,name,status,detail"]
    for r in results:
        detail = r.detail.replace(",", ";")
        lines.append(f"{r.criterion},{r.name},{'pass' if r.passed else 'fail'},{detail}")
    return lines, all(r.passed for r in results)


def main(argv=None) -> int:
    parser = _build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = parser.parse_args(_merge_dash_values(list(argv)))
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    try:
        model = _load_model(args.model)
        if args.command == "eval-density":
            _emit(_cmd_eval_density(model, args), args.out)
        elif args.command == "hitting":
            _emit(_cmd_hitting(model, args), args.out)
        elif args.command == "stationary":
            _emit(_cmd_stationary(model, args), args.out)
        elif args.command == "scale":
            _emit(_cmd_scale(model, args), args.out)
        elif args.command == "escape":
            _emit(_cmd_escape(model, args), args.out)
        elif args.command == "simulate":
            _emit(_cmd_simulate(model, args), args.out)
        elif args.command == "dump-model":
            text = model_to_json(model) + "\n"
            if args.out:
                with open(args.out, "w", newline="\n") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
        elif args.command == "verify":
            lines, ok = _cmd_verify(model, args)
            if args.out:
                _emit(lines, args.out)
            if not ok:
                return EXIT_VERIFY
        else:  # pragma: no cover
            raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except ModelValidationError as exc:
        sys.stderr.write(f"model validation error: {exc}\n")
        return EXIT_VALIDATION
    except (PreconditionError, NumericalInstabilityError, SimulationError) as exc:
        sys.stderr.write(f"precondition violated: {exc}\n")
        return EXIT_PRECONDITION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
