"""Selective-reattempt sequential gradient coding (SR-SGC) and its GC-Rep variant.

Every round each worker computes its GC task either for the current job ``t``
or, when job ``t - B`` came up short in round ``t - B``, for job ``t - B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from seqgrad.errors import ParameterError, SimulationInvariantError
from seqgrad.gc import GcCode, GcRepCode, build_gc, build_gc_rep
from seqgrad.straggler import BurstyModel, PerRoundModel, WindowUnion


@dataclass(frozen=True)
class SrSgcParams:
    n: int
    B: int
    W: int
    lam: int
    rep: bool = False

    def __post_init__(self):
        n, B, W, lam = self.n, self.B, self.W, self.lam
        if n < 1 or B < 1 or W < 2:
            raise ParameterError(f"SR-SGC needs n >= 1, B >= 1, W >= 2, got {self}")
        if (W - 1) % B:
            raise ParameterError(f"SR-SGC needs B | (W-1), got B={B}, W={W}")
        if not 0 < lam <= n:
            raise ParameterError(f"SR-SGC needs 0 < lambda <= n, got lambda={lam}, n={n}")
        if self.rep and n % (self.s + 1):
            raise ParameterError(f"SR-SGC-Rep needs (s+1) | n, got s={self.s}, n={n}")

    @property
    def x(self) -> int:
        return (self.W - 1) // self.B

    @property
    def s(self) -> int:
        return math.ceil(Fraction(self.B * self.lam, self.W - 1 + self.B))

    @property
    def T(self) -> int:
        return self.B

    @property
    def load(self) -> Fraction:
        return Fraction(self.s + 1, self.n)

    def default_model(self):
        """Per ``W``-window: bursty ``(B, W, lam)`` or at most ``s`` stragglers per round."""
        return WindowUnion((BurstyModel(self.B, self.W, self.lam), PerRoundModel(self.s)), self.W)

    def build_code(self, seed: int = 0) -> GcCode | GcRepCode:
        return build_gc_rep(self.n, self.s) if self.rep else build_gc(self.n, self.s, seed)


def derive_sr_params(n: int, B: int, W: int, lam: int, rep: bool = False) -> SrSgcParams:
    return SrSgcParams(n, B, W, lam, rep)


@dataclass
class SrLedger:
    """Which workers returned ``l_i(t)`` for each job, and how many did so in round ``t``."""

    n: int
    J: int
    received: dict[int, np.ndarray] = field(default_factory=dict)
    on_time: dict[int, int] = field(default_factory=dict)
    returned_in_own_round: dict[int, np.ndarray] = field(default_factory=dict)

    def in_range(self, job: int) -> bool:
        return 1 <= job <= self.J

    def got(self, job: int) -> np.ndarray:
        if not self.in_range(job):
            return np.ones(self.n, dtype=bool)
        return self.received.setdefault(job, np.zeros(self.n, dtype=bool))

    def N(self, job: int) -> int:
        if not self.in_range(job):
            return self.n
        return self.on_time.get(job, 0)

    def returned_in_round(self, job: int, i: int) -> bool:
        """Did worker ``i`` return ``l_i(job)`` in round ``job`` itself."""
        if not self.in_range(job):
            return True
        own = self.returned_in_own_round.get(job)
        return bool(own is not None and own[i])

    def record(self, t: int, assignment: list[int], responders) -> None:
        """Store round ``t`` results: worker ``i`` returned ``l_i(assignment[i])``."""
        own = self.returned_in_own_round.setdefault(t, np.zeros(self.n, dtype=bool)) if self.in_range(t) else None
        for i in responders:
            job = assignment[i]
            if not self.in_range(job):
                continue
            self.got(job)[i] = True
            if job == t:
                own[i] = True
        if own is not None:
            self.on_time[t] = int(own.sum())


def sr_assign_round(params: SrSgcParams, ledger: SrLedger, t: int) -> list[int]:
    """Job index (``t`` or ``t - B``) each worker computes in round ``t``."""
    n, s, B = params.n, params.s, params.B
    prev = t - B
    delta = ledger.N(prev)
    out = []
    for i in range(n):
        if delta < n - s and not ledger.returned_in_round(prev, i):
            out.append(prev)
            delta += 1
        else:
            out.append(t)
    if delta < n - s:
        raise SimulationInvariantError(f"round {t}: only {delta} results reachable for job {prev}")
    return out


def sr_rep_assign_round(params: SrSgcParams, ledger: SrLedger, t: int) -> list[int]:
    if not params.rep:
        raise ParameterError("sr_rep_assign_round needs params with rep=True")
    n, s, B = params.n, params.s, params.B
    size = s + 1
    prev = t - B
    delta = ledger.N(prev)
    covered = set()
    if ledger.in_range(prev):
        own = ledger.returned_in_own_round.get(prev, np.zeros(n, dtype=bool))
        covered = {i // size for i in np.flatnonzero(own)}
    else:
        covered = set(range(n // size))
    out = []
    for i in range(n):
        g = i // size
        if g in covered:
            out.append(t)
        elif delta < n - s and not ledger.returned_in_round(prev, i):
            out.append(prev)
            delta += 1
        else:
            out.append(t)
    return out


def sr_decodable(params: SrSgcParams, ledger: SrLedger, job: int) -> bool:
    got = ledger.got(job)
    if params.rep:
        size = params.s + 1
        return bool(got.reshape(-1, size).any(axis=1).all())
    return int(got.sum()) >= params.n - params.s
