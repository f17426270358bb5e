"""Delay-profile-driven parameter selection.

Worker runtime grows linearly with normalized load, so a reference profile
measured without coding (load ``1/n``) can be shifted by ``(L - 1/n) * alpha``
to predict what a scheme with load ``L`` would see. Each candidate is then
simulated on its shifted profile and the fastest one per scheme wins.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from seqgrad.errors import FitError, AdjustmentError, ParameterError
from seqgrad.m_sgc import MSgcParams
from seqgrad.simulator import SimConfig, SimReport, run
from seqgrad.sr_sgc import SrSgcParams
from seqgrad.straggler import DelayProfile


@dataclass(frozen=True)
class SlopeFit:
    samples: tuple[tuple[float, float], ...]
    alpha: float
    intercept: float
    residual: float


def fit_slope(samples: Iterable[tuple[float, float]]) -> SlopeFit:
    """Ordinary least-squares line through ``(load, mean seconds)`` samples."""
    pts = tuple((float(x), float(y)) for x, y in samples)
    if len(pts) < 2 or len({x for x, _ in pts}) < 2:
        raise FitError("need at least two samples with distinct loads")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    A = np.column_stack([x, np.ones_like(x)])
    (alpha, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    residual = float(np.linalg.norm(A @ np.array([alpha, intercept]) - y))
    if not math.isfinite(alpha):
        raise FitError("slope is not finite")
    return SlopeFit(pts, float(alpha), float(intercept), residual)


def adjust_profile(ref: DelayProfile, load, alpha: float) -> DelayProfile:
    """Shift every entry by ``(load - 1/n) * alpha`` seconds."""
    if load < 0:
        raise ParameterError(f"load must be non-negative, got {load}")
    shift = float(Fraction(load) - Fraction(1, ref.n)) * alpha
    times = ref.times + shift
    if np.any(times <= 0):
        raise AdjustmentError(f"shift of {shift:+.6g} s makes some delays non-positive")
    return DelayProfile(times)


@dataclass(frozen=True, order=True)
class Candidate:
    scheme: str
    n: int
    B: Optional[int] = None
    W: Optional[int] = None
    lam: Optional[int] = None
    s: Optional[int] = None

    @property
    def key(self) -> tuple:
        if self.scheme in ("gc", "gc-rep"):
            return (self.s,)
        if self.scheme == "none":
            return ()
        return (self.B, self.W, self.lam)

    @property
    def load(self) -> Fraction:
        if self.scheme == "none":
            return Fraction(1, self.n)
        if self.scheme in ("gc", "gc-rep"):
            return Fraction(self.s + 1, self.n)
        if self.scheme.startswith("sr-sgc"):
            return SrSgcParams(self.n, self.B, self.W, self.lam, rep=self.scheme.endswith("rep")).load
        return MSgcParams(self.n, self.B, self.W, self.lam, rep=self.scheme.endswith("rep")).load

    @property
    def T(self) -> int:
        if self.scheme in ("gc", "gc-rep", "none"):
            return 0
        if self.scheme.startswith("sr-sgc"):
            return self.B
        return self.W - 2 + self.B

    def label(self) -> str:
        if self.scheme in ("gc", "gc-rep"):
            return f"s={self.s}"
        if self.scheme == "none":
            return "-"
        return f"B={self.B};W={self.W};lambda={self.lam}"


def sr_grid(n: int, Bs: Iterable[int], Ws: Iterable[int], lams: Iterable[int]) -> list[Candidate]:
    return [
        Candidate("sr-sgc", n, B, W, lam)
        for B in Bs for W in Ws for lam in lams
        if B >= 1 and W > B and (W - 1) % B == 0 and 0 < lam <= n
    ]


def m_grid(n: int, Bs: Iterable[int], Ws: Iterable[int], lams: Iterable[int]) -> list[Candidate]:
    return [
        Candidate("m-sgc", n, B, W, lam)
        for B in Bs for W in Ws for lam in lams
        if 0 < B < W and 0 <= lam <= n
    ]


def gc_grid(n: int, ss: Iterable[int]) -> list[Candidate]:
    return [Candidate("gc", n, s=s) for s in ss if 0 <= s < n]


@dataclass
class TuneConfig:
    profile: DelayProfile
    mu: float = 1.0
    candidates: list[Candidate] = field(default_factory=list)
    J: Optional[int] = None  # default: number of profile rounds
    include_baseline: bool = True

    @property
    def jobs(self) -> int:
        return self.J if self.J is not None else self.profile.rounds


@dataclass(frozen=True)
class Estimate:
    candidate: Candidate
    runtime: float
    waitouts: int

    @property
    def sort_key(self) -> tuple:
        return (self.runtime, self.candidate.load, self.candidate.key)


@dataclass
class TuneResult:
    estimates: list[Estimate]
    best: dict[str, Estimate]

    def ranking(self) -> list[Estimate]:
        return sorted(self.estimates, key=lambda e: (e.candidate.scheme,) + e.sort_key)


def cyclic_profile(profile: DelayProfile, rounds: int) -> DelayProfile:
    """Repeat the profile's rounds cyclically up to ``rounds`` columns."""
    idx = np.arange(rounds) % profile.rounds
    return DelayProfile(profile.times[:, idx])


def simulate_candidate(cand: Candidate, profile: DelayProfile, mu: float, alpha: float, J: int) -> SimReport:
    adjusted = adjust_profile(cyclic_profile(profile, J + cand.T), cand.load, alpha)
    cfg = SimConfig(
        scheme=cand.scheme, n=cand.n, J=J, B=cand.B, W=cand.W, lam=cand.lam, s=cand.s,
        profile=adjusted, mu=mu, verify=False,
    )
    return run(cfg)


def estimate_runtime(cand: Candidate, tune: TuneConfig, alpha: float) -> Estimate:
    rep = simulate_candidate(cand, tune.profile, tune.mu, alpha, tune.jobs)
    return Estimate(cand, rep.total_runtime, rep.waitout_count)


def _evaluate(args) -> Estimate:
    cand, tune, alpha = args
    return estimate_runtime(cand, tune, alpha)


def grid_search(tune: TuneConfig, alpha: float, workers: int = 1) -> TuneResult:
    """Evaluate every candidate; the best per scheme minimizes runtime, then load,
    then the parameter tuple."""
    cands = list(tune.candidates)
    if tune.include_baseline and not any(c.scheme == "none" for c in cands):
        cands.append(Candidate("none", tune.profile.n))
    if not cands:
        raise ParameterError("empty candidate grid")
    for c in cands:
        if c.n != tune.profile.n:
            raise ParameterError(f"candidate {c} has n={c.n}, profile has {tune.profile.n} workers")
    jobs = [(c, tune, alpha) for c in cands]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            estimates = list(pool.map(_evaluate, jobs))
    else:
        estimates = [_evaluate(j) for j in jobs]
    best: dict[str, Estimate] = {}
    for e in estimates:
        cur = best.get(e.candidate.scheme)
        if cur is None or e.sort_key < cur.sort_key:
            best[e.candidate.scheme] = e
    return TuneResult(estimates, best)


def probe_then_code(
    profile: DelayProfile,
    probe_rounds: int,
    candidates: Sequence[Candidate],
    alpha: float,
    mu: float = 1.0,
    scheme: Optional[str] = None,
) -> dict:
    """Run ``probe_rounds`` uncoded rounds, tune on them, then continue coded.

    The coded phase uses the remaining profile rounds (load-adjusted for the
    winner) and finishes ``remaining - T`` jobs. ``scheme`` restricts the winner
    to one scheme; by default the overall fastest coded candidate is used.
    """
    if not 0 < probe_rounds < profile.rounds:
        raise ParameterError(f"probe rounds must lie in (0, {profile.rounds}), got {probe_rounds}")
    probe = DelayProfile(profile.times[:, :probe_rounds])
    rest = DelayProfile(profile.times[:, probe_rounds:])
    coded = [c for c in candidates if c.scheme != "none" and (scheme is None or c.scheme == scheme)]
    if not coded:
        raise ParameterError("no coded candidates to switch to")
    result = grid_search(TuneConfig(probe, mu, coded, include_baseline=False), alpha)
    winner = min(result.best.values(), key=lambda e: e.sort_key).candidate
    jobs = rest.rounds - winner.T
    if jobs < 1:
        raise ParameterError(f"only {rest.rounds} rounds left after probing; winner needs T={winner.T}")
    adjusted = adjust_profile(DelayProfile(rest.times[:, :jobs + winner.T]), winner.load, alpha)
    rep = run(SimConfig(
        scheme=winner.scheme, n=winner.n, J=jobs, B=winner.B, W=winner.W, lam=winner.lam, s=winner.s,
        profile=adjusted, mu=mu, verify=False,
    ))
    probe_time = float(probe.times.max(axis=0).sum())
    return {
        "probe_rounds": probe_rounds,
        "probe_runtime_s": probe_time,
        "probe_jobs": probe_rounds,
        "winner": {"scheme": winner.scheme, "params": winner.label(), "load": str(winner.load)},
        "coded_jobs": jobs,
        "coded_runtime_s": rep.total_runtime,
        "coded_waitouts": rep.waitout_count,
        "total_jobs": probe_rounds + jobs,
        "total_runtime_s": probe_time + rep.total_runtime,
    }
