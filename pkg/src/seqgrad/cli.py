"""Command-line entry point: ``seqgrad <subcommand> ...``.

Exit codes: 0 success, 1 pattern does not conform (``check-pattern`` only),
2 parameter or usage error, 3 a job missed its decode deadline.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from seqgrad import __version__
from seqgrad.bounds import lb_arbitrary, lb_bursty, optimality_gap
from seqgrad.errors import ParameterError, SeqGradError, SimulationInvariantError
from seqgrad.m_sgc import MSgcParams
from seqgrad.simulator import SCHEMES, SimConfig, run, scheme_T
from seqgrad.sr_sgc import SrSgcParams
from seqgrad.straggler import (
    ArbitraryModel,
    BurstyModel,
    GeParams,
    PerRoundModel,
    StragglerPattern,
    first_violation,
    gen_conforming,
    gen_ge,
    gen_periodic_arbitrary,
    gen_periodic_bursty,
    gen_uniform,
    profile_from_pattern,
    read_pattern,
    read_profile,
    write_pattern,
    write_profile,
)
from seqgrad.tuner import (
    Candidate,
    TuneConfig,
    fit_slope,
    gc_grid,
    grid_search,
    m_grid,
    probe_then_code,
    sr_grid,
)

log = logging.getLogger("seqgrad")


# --- helpers ----------------------------------------------------------------


def _default_seed() -> int:
    raw = os.environ.get("SEQGRAD_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ParameterError(f"SEQGRAD_SEED must be an integer, got {raw!r}") from None


def parse_int_list(text: str) -> list[int]:
    """``"1,3,5-9,10-40:10"`` -> sorted unique integers."""
    out: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        step = 1
        if ":" in part:
            part, step_s = part.split(":", 1)
            step = int(step_s)
            if step < 1:
                raise ParameterError(f"range step must be positive in {text!r}")
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.update(range(int(lo), int(hi) + 1, step))
        else:
            out.add(int(part))
    if not out:
        raise ParameterError(f"empty integer list {text!r}")
    return sorted(out)


def parse_grid(text: str) -> dict[str, list[int]]:
    """``"B=1,2;W=2-6;lambda=10-100:10"`` -> axis lists."""
    axes: dict[str, list[int]] = {}
    for item in text.split(";"):
        if not item.strip():
            continue
        if "=" not in item:
            raise ParameterError(f"grid axis {item!r} is not of the form name=values")
        name, values = item.split("=", 1)
        name = name.strip().lower()
        name = "lambda" if name in ("lam", "l") else name
        if name not in ("b", "w", "lambda", "s"):
            raise ParameterError(f"unknown grid axis {name!r}")
        axes[{"b": "B", "w": "W"}.get(name, name)] = parse_int_list(values)
    return axes


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _emit(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def write_manifest(args: argparse.Namespace, argv: Sequence[str], inputs: Sequence[str], out: Optional[str]) -> None:
    """Record what produced ``out`` next to it (``<out>.manifest.json``)."""
    target = args.manifest or (f"{out}.manifest.json" if out and out != "-" else None)
    if target is None:
        return
    skip = {"func", "manifest", "verbose"}
    config = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    manifest = {
        "subcommand": args.command,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "config": config,
        "argv": list(argv),
        "inputs": {p: _sha256(p) for p in inputs if p},
    }
    Path(target).write_text(dumps(manifest))


def _gen_pattern(gen_arg: str, n: int, rounds: int, seed: int, B, W, lam) -> StragglerPattern:
    kind, _, rest = gen_arg.partition(":")
    if kind == "ge":
        try:
            p_S, p_N = (float(v) for v in rest.split(","))
        except ValueError:
            raise ParameterError(f"expected ge:pS,pN, got {gen_arg!r}") from None
        return gen_ge(n, rounds, GeParams(p_S, p_N, seed))
    if kind == "uniform":
        return gen_uniform(n, rounds, float(rest), seed)
    if kind == "none":
        return StragglerPattern.empty(n, rounds)
    if kind in ("periodic", "periodic-arbitrary"):
        if None in (B, W, lam):
            raise ParameterError(f"--gen {kind} needs --B, --W and --lambda")
        if kind == "periodic":
            return gen_periodic_bursty(n, rounds, BurstyModel(B, W, lam))
        return gen_periodic_arbitrary(n, rounds, ArbitraryModel(B, W + B - 1, lam))
    raise ParameterError(f"unknown generator {gen_arg!r}; use ge:pS,pN, uniform:p, none, periodic or periodic-arbitrary")


# --- simulate ---------------------------------------------------------------


def events_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "waited", "stragglers", "duration_s", "elapsed_s", "jobs_completed"])
    done_by = [0] * (report.rounds + 1)
    for c in report.completion:
        done_by[c] += 1
    elapsed = 0.0
    completed = 0
    for t in range(1, report.rounds + 1):
        completed += done_by[t]
        dur = report.durations[t - 1] if report.durations is not None else None
        if dur is not None:
            elapsed += dur
        w.writerow([
            t, int(report.waited[t - 1]), len(report.stragglers[t - 1]),
            "" if dur is None else repr(dur), "" if dur is None else repr(elapsed), completed,
        ])
    return buf.getvalue()


def cmd_simulate(args, argv) -> int:
    pattern = profile = None
    inputs = []
    if args.pattern:
        pattern = read_pattern(args.pattern)
        inputs.append(args.pattern)
    elif args.profile:
        profile = read_profile(args.profile)
        inputs.append(args.profile)
    else:
        if args.scheme not in ("gc", "gc-rep", "none"):
            _need(args, "B", "W", "lam")
        T = scheme_T(args.scheme, args.B, args.W)
        pattern = _gen_pattern(args.gen, args.n, args.jobs + T, args.seed, args.B, args.W, args.lam)
    cfg = SimConfig(
        scheme=args.scheme, n=args.n, J=args.jobs, B=args.B, W=args.W, lam=args.lam, s=args.s,
        pattern=pattern, profile=profile, mu=args.mu, dim=args.dim, seed=args.seed,
        verify=not args.no_verify, waitout=not args.no_waitout,
    )
    report = run(cfg)
    _emit(dumps(report.to_dict()), args.out)
    if args.events:
        Path(args.events).write_text(events_csv(report))
    write_manifest(args, argv, inputs, args.out)
    log.info("max delay %d (T=%d), %d wait-outs", report.max_delay, report.T, report.waitout_count)
    return 0


# --- tune -------------------------------------------------------------------


def _read_samples(path: str) -> list[tuple[float, float]]:
    rows = [r for r in csv.reader(Path(path).read_text().splitlines()) if r]
    out = []
    for r in rows:
        try:
            out.append((float(r[0]), float(r[1])))
        except (ValueError, IndexError):
            if out:
                raise ParameterError(f"bad fit sample row {r!r} in {path}") from None
    return out


def _candidates(args, n: int) -> list[Candidate]:
    cands: list[Candidate] = []
    if args.grid_sr:
        g = parse_grid(args.grid_sr)
        cands += sr_grid(n, g.get("B", [1]), g["W"], g["lambda"])
    if args.grid_m:
        g = parse_grid(args.grid_m)
        cands += m_grid(n, g.get("B", [1]), g["W"], g["lambda"])
    if args.grid_gc:
        text = args.grid_gc.split("=", 1)[1] if "=" in args.grid_gc else args.grid_gc
        cands += gc_grid(n, parse_int_list(text))
    return cands


def ranking_csv(result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "params", "load", "estimated_runtime_s", "waitout_count"])
    for e in result.ranking():
        c = e.candidate
        w.writerow([c.scheme, c.label(), repr(float(c.load)), repr(e.runtime), e.waitouts])
    return buf.getvalue()


def cmd_tune(args, argv) -> int:
    profile = read_profile(args.profile)
    inputs = [args.profile]
    if args.fit_samples:
        fit = fit_slope(_read_samples(args.fit_samples))
        alpha = fit.alpha
        inputs.append(args.fit_samples)
    elif args.alpha is not None:
        alpha = args.alpha
    else:
        raise ParameterError("tune needs --alpha or --fit-samples")
    try:
        cands = _candidates(args, profile.n)
    except KeyError as exc:
        raise ParameterError(f"grid is missing axis {exc.args[0]}") from None

    if args.probe:
        summary = probe_then_code(profile, args.probe, cands, alpha, args.mu, args.switch_scheme)
        summary["alpha"] = alpha
        _emit(dumps(summary), args.out)
        write_manifest(args, argv, inputs, args.out)
        return 0

    result = grid_search(TuneConfig(profile, args.mu, cands, J=args.jobs), alpha, workers=args.workers)
    _emit(ranking_csv(result), args.out)
    best = {
        scheme: {"params": e.candidate.label(), "load": str(e.candidate.load),
                 "estimated_runtime_s": e.runtime, "waitout_count": e.waitouts}
        for scheme, e in sorted(result.best.items())
    }
    summary = dumps({"alpha": alpha, "best": best})
    if args.best_out:
        Path(args.best_out).write_text(summary)
    elif args.out and args.out != "-":
        sys.stdout.write(summary)
    write_manifest(args, argv, inputs, args.out)
    return 0


# --- bounds -----------------------------------------------------------------


def _fmt(x: Optional[Fraction]) -> str:
    return "n/a" if x is None else f"{x} ({float(x):.6f})"


def _try(fn, *a):
    try:
        return fn(*a)
    except ParameterError:
        return None


def bound_summary(n: int, B: int, W: int, lam: int, N=None, Wp=None, lam_a=None) -> dict:
    N = B if N is None else N
    Wp = W + B - 1 if Wp is None else Wp
    lam_a = lam if lam_a is None else lam_a
    lb_b = _try(lb_bursty, n, B, W, lam)
    lb_a = _try(lb_arbitrary, n, N, Wp, lam_a)
    m = _try(lambda: MSgcParams(n, B, W, lam).load)
    sr = _try(lambda: SrSgcParams(n, B, W, lam).load)
    return {
        "L_B*": lb_b, "L_A*": lb_a, "M-SGC": m, "SR-SGC": sr,
        "gap M-SGC": None if m is None or lb_b is None else m - lb_b,
        "gap SR-SGC": None if sr is None or lb_b is None else sr - lb_b,
        "arbitrary": (N, Wp, lam_a),
    }


def cmd_bounds(args, argv) -> int:
    info = bound_summary(args.n, args.B, args.W, args.lam, args.N, args.Wp, args.lam_arb)
    N, Wp, la = info.pop("arbitrary")
    lines = [
        f"L_B* = {_fmt(info['L_B*'])}",
        f"L_A* = {_fmt(info['L_A*'])}   [N={N}, W'={Wp}, lambda'={la}]",
        f"M-SGC load = {_fmt(info['M-SGC'])}",
        f"SR-SGC load = {_fmt(info['SR-SGC'])}",
        f"M-SGC gap = {_fmt(info['gap M-SGC'])}",
        f"SR-SGC gap = {_fmt(info['gap SR-SGC'])}",
    ]
    if info["L_B*"] is None and info["L_A*"] is None:
        raise ParameterError("neither bound is defined for these parameters")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.sweep_W:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "B", "W", "lambda", "lower_bound", "m_sgc_load", "gap", "gap_times_W", "gap_times_W_float"])
        for W in parse_int_list(args.sweep_W):
            if W <= args.B:
                continue
            r = optimality_gap(args.n, args.B, W, args.lam)
            d = r.as_dict()
            w.writerow([d["n"], d["B"], d["W"], d["lambda"], d["lower_bound"], d["m_sgc_load"],
                        d["gap"], d["gap_times_W"], repr(float(r.gap_times_w))])
        _emit(buf.getvalue(), args.csv)
    return 0


# --- patterns ---------------------------------------------------------------


def _model_from_args(args):
    if args.model == "bursty":
        _need(args, "B", "W", "lam")
        return BurstyModel(args.B, args.W, args.lam)
    if args.model == "arbitrary":
        N = args.N if args.N is not None else args.B
        Wp = args.Wp if args.Wp is not None else (args.W + args.B - 1 if args.W and args.B else None)
        if N is None or Wp is None or args.lam is None:
            raise ParameterError("arbitrary model needs --N/--Wp (or --B/--W) and --lambda")
        return ArbitraryModel(N, Wp, args.lam)
    _need(args, "s")
    return PerRoundModel(args.s)


def _need(args, *names):
    missing = [("lambda" if n == "lam" else n) for n in names if getattr(args, n) is None]
    if missing:
        raise ParameterError(f"missing --{', --'.join(missing)}")


def cmd_check(args, argv) -> int:
    pattern = read_pattern(args.pattern)
    model = _model_from_args(args)
    bad = first_violation(pattern, model)
    if bad is None:
        print("conforms")
        return 0
    print(f"does not conform: window starting at round {bad}")
    return 1


def cmd_gen(args, argv) -> int:
    if args.kind == "conforming":
        pattern = gen_conforming(args.n, args.rounds, _model_from_args(args), args.p, args.seed)
    elif args.kind == "ge":
        pattern = gen_ge(args.n, args.rounds, GeParams(args.p_S, args.p_N, args.seed))
    elif args.kind == "uniform":
        pattern = gen_uniform(args.n, args.rounds, args.p, args.seed)
    else:
        _need(args, "B", "W", "lam")
        gen_arg = "periodic" if args.kind == "periodic-bursty" else "periodic-arbitrary"
        pattern = _gen_pattern(gen_arg, args.n, args.rounds, args.seed, args.B, args.W, args.lam)
    if args.out:
        write_pattern(pattern, args.out)
    else:
        sys.stdout.write(_pattern_text(pattern))
    if args.profile_out:
        write_profile(profile_from_pattern(pattern, seed=args.seed), args.profile_out)
    write_manifest(args, argv, [], args.out)
    return 0


def _pattern_text(pattern: StragglerPattern) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round"] + [f"w{i}" for i in range(pattern.n)])
    for t in range(pattern.rounds):
        w.writerow([t + 1] + [int(v) for v in pattern.S[:, t]])
    return buf.getvalue()


def cmd_layout(args, argv) -> int:
    p = MSgcParams(args.n, args.B, args.W, args.lam, rep=args.rep)
    doc = {
        "n": p.n, "B": p.B, "W": p.W, "lambda": p.lam, "rep": p.rep,
        "d1_chunk_size": str(p.d1_size), "d2_chunk_size": str(p.d2_size), "load": str(p.load),
        "chunks": {str(c): {"size": str(v["size"]), "part": v["part"], "workers": v["workers"]}
                   for c, v in p.layout().items()},
    }
    _emit(dumps(doc), args.out)
    return 0


# --- parser -----------------------------------------------------------------


def _scheme_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, required=True, help="number of workers")
    p.add_argument("--B", type=int)
    p.add_argument("--W", type=int)
    p.add_argument("--lambda", dest="lam", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seqgrad", description="Sequential gradient coding simulator and tuner.")
    ap.add_argument("--version", action="version", version=f"seqgrad {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scheme round by round")
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    _scheme_args(p)
    p.add_argument("--s", type=int, help="straggler tolerance for gc / gc-rep")
    p.add_argument("--jobs", type=int, required=True, help="number of jobs J")
    p.add_argument("--mu", type=float, default=1.0)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--pattern", help="straggler pattern CSV")
    src.add_argument("--profile", help="delay profile CSV (timed mode)")
    src.add_argument("--gen", default="none", help="ge:pS,pN | uniform:p | periodic | periodic-arbitrary | none")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dim", type=int, default=4, help="gradient dimension of the verification oracle")
    p.add_argument("--no-verify", action="store_true", help="skip numeric decode checks")
    p.add_argument("--no-waitout", action="store_true", help="disable wait-outs (deadline misses raise)")
    p.add_argument("--out", help="report JSON (default stdout)")
    p.add_argument("--events", help="per-round CSV")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tune", help="pick scheme parameters from a delay profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--mu", type=float, default=1.0)
    a = p.add_mutually_exclusive_group()
    a.add_argument("--alpha", type=float, help="seconds per unit normalized load")
    a.add_argument("--fit-samples", help="CSV of load,seconds pairs for fitting alpha")
    p.add_argument("--grid-sr", help='e.g. "B=1,2;W=3,5;lambda=4-40:4"')
    p.add_argument("--grid-m", help='e.g. "B=1-3;W=2-6;lambda=10-100:10"')
    p.add_argument("--grid-gc", help='e.g. "0-20"')
    p.add_argument("--jobs", type=int, help="estimation horizon J (default: profile rounds)")
    p.add_argument("--workers", type=int, default=1, help="parallel evaluation processes")
    p.add_argument("--probe", type=int, help="probe-then-code: uncoded rounds before switching")
    p.add_argument("--switch-scheme", choices=[s for s in SCHEMES if s != "none"])
    p.add_argument("--out", help="ranking CSV (default stdout)")
    p.add_argument("--best-out", help="JSON with the best candidate per scheme")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("bounds", help="load lower bounds and gaps")
    _scheme_args(p)
    p.add_argument("--N", type=int, help="arbitrary-model N (default B)")
    p.add_argument("--Wp", type=int, help="arbitrary-model window (default W+B-1)")
    p.add_argument("--lambda-arb", dest="lam_arb", type=int, help="arbitrary-model lambda (default lambda)")
    p.add_argument("--sweep-W", help="W values for a gap sweep, e.g. 4-40")
    p.add_argument("--csv", help="sweep CSV (default stdout)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("check-pattern", help="test a pattern against a straggler model")
    p.add_argument("--model", choices=("bursty", "arbitrary", "per-round"), required=True)
    p.add_argument("--pattern", required=True)
    p.add_argument("--B", type=int)
    p.add_argument("--W", type=int)
    p.add_argument("--lambda", dest="lam", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--Wp", type=int)
    p.add_argument("--s", type=int)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("gen-pattern", help="generate a straggler pattern CSV")
    p.add_argument("--kind", choices=("ge", "periodic-bursty", "periodic-arbitrary", "uniform", "conforming"),
                   required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--p-S", dest="p_S", type=float, default=0.5)
    p.add_argument("--p-N", dest="p_N", type=float, default=0.05)
    p.add_argument("--p", type=float, default=0.3)
    p.add_argument("--model", choices=("bursty", "arbitrary", "per-round"), default="bursty")
    p.add_argument("--B", type=int)
    p.add_argument("--W", type=int)
    p.add_argument("--lambda", dest="lam", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--Wp", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.add_argument("--profile-out", help="also write a delay profile whose stragglers at mu=1 match")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("layout", help="M-SGC data placement")
    _scheme_args(p)
    p.add_argument("--rep", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_layout)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        if args.command in ("bounds", "layout"):
            _need(args, "B", "W", "lam")
        return args.func(args, argv)
    except SimulationInvariantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (SeqGradError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
