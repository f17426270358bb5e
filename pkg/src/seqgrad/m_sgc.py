"""Multiplexed sequential gradient coding (M-SGC).

The dataset is split into a repeated part D1 (``(W-1)*n`` equal chunks, worker
``i`` owning ``W-1`` of them, failed computations reattempted) and a coded part
D2 (``B`` groups of ``n`` chunks, each protected by an ``(n, lam)`` gradient
code). Each round a worker runs ``W-1+B`` mini-tasks; slot ``j`` of round ``t``
always works on job ``t - j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from seqgrad.errors import InsufficientResultsError, ParameterError
from seqgrad.gc import GcCode, GcRepCode, build_gc, build_gc_rep, cyclic_support, gc_decode, gc_rep_decode
from seqgrad.straggler import ArbitraryModel, BurstyModel, EitherModel


@dataclass(frozen=True)
class MSgcParams:
    n: int
    B: int
    W: int
    lam: int
    rep: bool = False

    def __post_init__(self):
        n, B, W, lam = self.n, self.B, self.W, self.lam
        if n < 1 or not 0 < B < W:
            raise ParameterError(f"M-SGC needs n >= 1 and 0 < B < W, got {self}")
        if not 0 <= lam <= n:
            raise ParameterError(f"M-SGC needs 0 <= lambda <= n, got lambda={lam}, n={n}")
        if self.rep and lam < n and n % (lam + 1):
            raise ParameterError(f"M-SGC-Rep needs (lambda+1) | n, got lambda={lam}, n={n}")

    @property
    def T(self) -> int:
        return self.W - 2 + self.B

    @property
    def slots(self) -> int:
        return self.W - 1 + self.B

    @property
    def coded(self) -> bool:
        """False when ``lam == n``: D2 is empty and its slots carry no computation."""
        return self.lam < self.n

    @property
    def num_d1(self) -> int:
        return (self.W - 1) * self.n

    @property
    def num_chunks(self) -> int:
        return self.slots * self.n if self.coded else self.num_d1

    @property
    def d1_size(self) -> Fraction:
        n, B, W, lam = self.n, self.B, self.W, self.lam
        if not self.coded:
            return Fraction(1, (W - 1) * n)
        return Fraction(lam + 1, n * (B + (W - 1) * (lam + 1)))

    @property
    def d2_size(self) -> Fraction:
        if not self.coded:
            return Fraction(0)
        n, B, W, lam = self.n, self.B, self.W, self.lam
        return Fraction(1, n * (B + (W - 1) * (lam + 1)))

    @property
    def load(self) -> Fraction:
        """Provisioned per-worker load: every slot busy with one D1 chunk's worth of data."""
        n, B, W, lam = self.n, self.B, self.W, self.lam
        if not self.coded:
            return Fraction(W - 1 + B, n * (W - 1))
        return Fraction((lam + 1) * (W - 1 + B), n * (B + (W - 1) * (lam + 1)))

    def d1_chunk(self, i: int, j: int) -> int:
        return i * (self.W - 1) + j

    def d2_chunks(self, i: int, group: int) -> list[int]:
        """Worker ``i``'s chunks from D2 group ``group``."""
        base = (self.W - 1 + group) * self.n
        if self.rep:
            size = self.lam + 1
            g = i // size
            return [base + g * size + k for k in range(size)]
        return [base + l for l in cyclic_support(i, self.lam, self.n)]

    def chunk_size(self, c: int) -> Fraction:
        if not 0 <= c < self.num_chunks:
            raise ParameterError(f"chunk {c} outside [0, {self.num_chunks})")
        return self.d1_size if c < self.num_d1 else self.d2_size

    def worker_chunks(self, i: int) -> list[int]:
        out = [self.d1_chunk(i, j) for j in range(self.W - 1)]
        if self.coded:
            for m in range(self.B):
                out.extend(self.d2_chunks(i, m))
        return out

    def layout(self) -> dict[int, dict]:
        owners: dict[int, list[int]] = {c: [] for c in range(self.num_chunks)}
        for i in range(self.n):
            for c in self.worker_chunks(i):
                owners[c].append(i)
        return {
            c: {"size": self.chunk_size(c), "part": "D1" if c < self.num_d1 else "D2", "workers": sorted(w)}
            for c, w in owners.items()
        }

    def default_model(self) -> EitherModel:
        return EitherModel(
            (
                BurstyModel(self.B, self.W, self.lam),
                ArbitraryModel(self.B, self.W + self.B - 1, self.lam),
            )
        )

    def build_codes(self, seed: int = 0) -> list[GcCode | GcRepCode]:
        if not self.coded:
            return []
        if self.rep:
            code = build_gc_rep(self.n, self.lam)
            return [code] * self.B
        return [build_gc(self.n, self.lam, seed + m) for m in range(self.B)]


def derive_m_params(n: int, B: int, W: int, lam: int, rep: bool = False) -> MSgcParams:
    return MSgcParams(n, B, W, lam, rep)


SINGLE = "single"
CODED = "coded"
TRIVIAL = "trivial"


@dataclass(frozen=True)
class MiniTask:
    worker: int
    round: int
    slot: int
    kind: str
    job: int
    chunk: Optional[int] = None  # SINGLE: the D1 chunk
    group: Optional[int] = None  # CODED: D2 group index
    chunks: tuple[int, ...] = ()  # CODED: the lam+1 D2 chunks

    def load(self, params: MSgcParams) -> Fraction:
        return Fraction(0) if self.kind == TRIVIAL else params.d1_size


@dataclass
class MLedger:
    """Master-side receipts per job: D1 partials and, per D2 group, which workers' coded results arrived."""

    params: MSgcParams
    J: int
    d1: dict[int, np.ndarray] = field(default_factory=dict)
    coded_from: dict[int, np.ndarray] = field(default_factory=dict)  # job -> bool (B, n)
    # Result values, kept only when the caller passes them to ``record``.
    d1_values: dict[int, dict[int, np.ndarray]] = field(default_factory=dict)
    coded_values: dict[int, list[dict[int, np.ndarray]]] = field(default_factory=dict)

    def in_range(self, job: int) -> bool:
        return 1 <= job <= self.J

    def d1_received(self, job: int) -> np.ndarray:
        if not self.in_range(job):
            return np.ones(self.params.num_d1, dtype=bool)
        return self.d1.setdefault(job, np.zeros(self.params.num_d1, dtype=bool))

    def coded_mask(self, job: int) -> np.ndarray:
        return self.coded_from.setdefault(job, np.zeros((self.params.B, self.params.n), dtype=bool))

    def coded_received(self, job: int, group: int) -> set[int]:
        return set(np.flatnonzero(self.coded_mask(job)[group]).tolist())

    def worker_done(self, job: int, i: int) -> bool:
        w1 = self.params.W - 1
        return bool(self.d1_received(job)[i * w1:(i + 1) * w1].all())

    def record(self, task: MiniTask, value: Optional[np.ndarray] = None) -> None:
        if task.kind == SINGLE:
            self.d1_received(task.job)[task.chunk] = True
            if value is not None:
                self.d1_values.setdefault(task.job, {})[task.chunk] = value
        elif task.kind == CODED:
            self.coded_mask(task.job)[task.group, task.worker] = True
            if value is not None:
                groups = self.coded_values.setdefault(task.job, [{} for _ in range(self.params.B)])
                groups[task.group][task.worker] = value

    def forget(self, job: int) -> None:
        for store in (self.d1, self.coded_from, self.d1_values, self.coded_values):
            store.pop(job, None)

    def decodable(self, job: int) -> bool:
        p = self.params
        if not self.d1_received(job).all():
            return False
        if not p.coded:
            return True
        got = self.coded_mask(job)
        if p.rep:
            return bool(got.reshape(p.B, -1, p.lam + 1).any(axis=2).all())
        return bool((got.sum(axis=1) >= p.n - p.lam).all())


def m_assign_round(params: MSgcParams, ledger: MLedger, t: int) -> list[MiniTask]:
    """Mini-tasks for every worker and slot in round ``t`` (worker-major order)."""
    n, W, B = params.n, params.W, params.B
    w1 = W - 1
    out = []
    for i in range(n):
        for j in range(w1):
            job = t - j
            if ledger.in_range(job):
                out.append(MiniTask(i, t, j, SINGLE, job, chunk=params.d1_chunk(i, j)))
            else:
                out.append(MiniTask(i, t, j, TRIVIAL, job))
        for j in range(w1, w1 + B):
            job = t - j
            if not ledger.in_range(job):
                out.append(MiniTask(i, t, j, TRIVIAL, job))
                continue
            got = ledger.d1_received(job)
            mine = got[i * w1:(i + 1) * w1]
            if mine.all():
                group = j - w1
                if params.coded:
                    chunks = tuple(params.d2_chunks(i, group))
                    out.append(MiniTask(i, t, j, CODED, job, group=group, chunks=chunks))
                else:
                    out.append(MiniTask(i, t, j, TRIVIAL, job))
            else:
                jp = int(np.flatnonzero(~mine)[0])
                out.append(MiniTask(i, t, j, SINGLE, job, chunk=params.d1_chunk(i, jp)))
    return out


@dataclass
class RoundPlan:
    """Array form of one round's mini-tasks: ``kind[i, j]`` and ``chunk[i, j]``
    (the D1 chunk for SINGLE entries, -1 otherwise); slot ``j`` is job ``t - j``."""

    t: int
    kind: np.ndarray  # int8: 0 trivial, 1 single, 2 coded
    chunk: np.ndarray

    def jobs(self) -> np.ndarray:
        return self.t - np.arange(self.kind.shape[1])


KIND_CODES = {TRIVIAL: 0, SINGLE: 1, CODED: 2}


def m_assign_arrays(params: MSgcParams, ledger: MLedger, t: int) -> RoundPlan:
    """Vectorized equivalent of :func:`m_assign_round`."""
    n, w1, B = params.n, params.W - 1, params.B
    kind = np.zeros((n, w1 + B), dtype=np.int8)
    chunk = np.full((n, w1 + B), -1, dtype=np.int64)
    base = np.arange(n) * w1
    for j in range(w1):
        if ledger.in_range(t - j):
            kind[:, j] = 1
            chunk[:, j] = base + j
    for j in range(w1, w1 + B):
        job = t - j
        if not ledger.in_range(job):
            continue
        mine = ledger.d1_received(job).reshape(n, w1)
        done = mine.all(axis=1)
        first_missing = np.argmax(~mine, axis=1)
        kind[:, j] = np.where(done, 2 if params.coded else 0, 1)
        chunk[:, j] = np.where(done, -1, base + first_missing)
    return RoundPlan(t, kind, chunk)


def record_plan(ledger: MLedger, plan: RoundPlan, responders: np.ndarray) -> None:
    """Deliver every non-straggler mini-task result of ``plan`` into ``ledger``."""
    w1 = ledger.params.W - 1
    for j, job in enumerate(plan.jobs()):
        if not ledger.in_range(int(job)):
            continue
        col = plan.kind[:, j]
        single = (col == 1) & responders
        if single.any():
            ledger.d1_received(int(job))[plan.chunk[single, j]] = True
        if j >= w1:
            coded = (col == 2) & responders
            if coded.any():
                ledger.coded_mask(int(job))[j - w1, coded] = True


def plan_tasks(params: MSgcParams, plan: RoundPlan) -> list[MiniTask]:
    """Expand a :class:`RoundPlan` into :class:`MiniTask` records (worker-major)."""
    names = {v: k for k, v in KIND_CODES.items()}
    w1 = params.W - 1
    out = []
    for i in range(params.n):
        for j in range(plan.kind.shape[1]):
            kind = names[int(plan.kind[i, j])]
            job = plan.t - j
            if kind == SINGLE:
                out.append(MiniTask(i, plan.t, j, SINGLE, job, chunk=int(plan.chunk[i, j])))
            elif kind == CODED:
                out.append(MiniTask(i, plan.t, j, CODED, job, group=j - w1,
                                    chunks=tuple(params.d2_chunks(i, j - w1))))
            else:
                out.append(MiniTask(i, plan.t, j, TRIVIAL, job))
    return out


def coded_result(params: MSgcParams, code, task: MiniTask, partial) -> np.ndarray:
    """``l_{i,m}(t)`` from the partial-gradient function ``partial(job, chunk)``."""
    base = (params.W - 1 + task.group) * params.n
    local = {c - base: partial(task.job, c) for c in task.chunks}
    return code.encode(task.worker, local)


def m_decode_job(params: MSgcParams, ledger: MLedger, job: int, codes) -> np.ndarray:
    """Sum of all received D1 partials plus, per D2 group, a GC decode of the coded results."""
    d1_values = ledger.d1_values.get(job, {})
    missing = [c for c in range(params.num_d1) if c not in d1_values]
    if missing:
        raise InsufficientResultsError(
            f"job {job}: D1 partials missing: {missing[:8]}{'...' if len(missing) > 8 else ''}"
        )
    total = sum(d1_values[c] for c in range(params.num_d1))
    if not params.coded:
        return total
    groups = ledger.coded_values.get(job, [{} for _ in range(params.B)])
    for m, results in enumerate(groups):
        decode = gc_rep_decode if params.rep else gc_decode
        total = total + decode(codes[m], results.keys(), results)
    return total
