"""Deterministic round-by-round engine for all coding schemes.

Each round the engine asks the scheme for its task assignment, determines the
straggler set (a pattern column, or the ``mu`` rule applied to a delay-profile
column), waits out the round if that set would break the assumed straggler
model, delivers non-straggler results and checks every job against its decode
deadline ``t + T``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

import numpy as np

from seqgrad.errors import ParameterError, SimulationInvariantError
from seqgrad.gc import (
    GradientOracle,
    build_gc,
    build_gc_rep,
    gc_decode,
    gc_rep_decode,
    relative_error,
)
from seqgrad.m_sgc import (
    SINGLE,
    TRIVIAL,
    MLedger,
    MSgcParams,
    coded_result,
    m_assign_arrays,
    m_decode_job,
    plan_tasks,
    record_plan,
)
from seqgrad.sr_sgc import SrLedger, SrSgcParams, sr_assign_round, sr_decodable, sr_rep_assign_round
from seqgrad.straggler import (
    DelayProfile,
    EitherModel,
    GroupCoverModel,
    Model,
    PerRoundModel,
    StragglerPattern,
    conforms,
    last_window_ok,
)

log = logging.getLogger(__name__)

SCHEMES = ("gc", "gc-rep", "sr-sgc", "sr-sgc-rep", "m-sgc", "m-sgc-rep", "none")


@dataclass
class SimConfig:
    scheme: str
    n: int
    J: int
    B: Optional[int] = None
    W: Optional[int] = None
    lam: Optional[int] = None
    s: Optional[int] = None
    pattern: Optional[StragglerPattern] = None
    profile: Optional[DelayProfile] = None
    mu: float = 1.0
    model: Optional[Model] = None  # None: the scheme's design model
    dim: int = 4
    seed: int = 0
    verify: bool = True
    waitout: bool = True


@dataclass
class SimReport:
    scheme: str
    params: dict
    n: int
    J: int
    T: int
    load: Fraction
    completion: list[int]
    delays: list[int]
    waited: list[bool]
    stragglers: list[list[int]]  # effective (post wait-out) straggler sets per round
    loads: np.ndarray  # rounds x n realized normalized loads
    durations: Optional[list[float]] = None
    residuals: Optional[list[float]] = None
    effective: Optional[StragglerPattern] = field(default=None, repr=False)

    @property
    def rounds(self) -> int:
        return len(self.waited)

    @property
    def waitout_count(self) -> int:
        return int(sum(self.waited))

    @property
    def total_runtime(self) -> Optional[float]:
        return None if self.durations is None else float(sum(self.durations))

    @property
    def max_delay(self) -> int:
        return max(self.delays, default=0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scheme": self.scheme,
            "params": self.params,
            "n": self.n,
            "J": self.J,
            "T": self.T,
            "load": str(self.load),
            "load_float": float(self.load),
            "rounds": self.rounds,
            "completion_round": self.completion,
            "delay": self.delays,
            "max_delay": self.max_delay,
            "waited": self.waited,
            "waitout_count": self.waitout_count,
            "stragglers": self.stragglers,
            "realized_load": self.loads.tolist(),
            "round_duration_s": self.durations,
            "total_runtime_s": self.total_runtime,
            "decode_relative_error": self.residuals,
        }


# --- wait-out ---------------------------------------------------------------


def waitout_rule(prefix: np.ndarray, candidate, model: Model) -> tuple[np.ndarray, bool]:
    """Accept ``candidate`` as the next column of ``prefix`` if the extended
    pattern still conforms to ``model``; otherwise wait out the round.

    Returns ``(accepted straggler mask, waited)``.
    """
    prefix = np.asarray(prefix, dtype=bool)
    cand = np.asarray(candidate, dtype=bool)
    extended = np.concatenate([prefix, cand[:, None]], axis=1)
    if conforms(extended, model):
        return cand.copy(), False
    return np.zeros_like(cand), True


class WaitoutTracker:
    """Incremental form of :func:`waitout_rule` used inside the round loop."""

    def __init__(self, n: int, rounds: int, model: Model):
        self.S = np.zeros((n, rounds), dtype=bool)
        self.t = 0
        self.alive = list(model.alternatives) if isinstance(model, EitherModel) else [model]

    def offer(self, candidate: np.ndarray) -> tuple[np.ndarray, bool]:
        t = self.t
        self.S[:, t] = candidate
        prefix = self.S[:, :t + 1]
        alive = [m for m in self.alive if last_window_ok(prefix, m)]
        self.t += 1
        if alive:
            self.alive = alive
            return self.S[:, t].copy(), False
        self.S[:, t] = False
        return self.S[:, t].copy(), True


# --- scheme runners ---------------------------------------------------------


class _Runner:
    T: int
    load: Fraction

    def __init__(self, cfg: SimConfig, oracle: GradientOracle):
        self.cfg = cfg
        self.n = cfg.n
        self.J = cfg.J
        self.oracle = oracle
        self.verify = cfg.verify

    def in_range(self, job: int) -> bool:
        return 1 <= job <= self.J

    def params(self) -> dict:
        raise NotImplementedError

    def default_model(self) -> Model:
        raise NotImplementedError

    def assign(self, t: int) -> np.ndarray:
        """Plan round ``t``; returns each worker's realized normalized load."""
        raise NotImplementedError

    def deliver(self, t: int, responders: np.ndarray) -> None:
        raise NotImplementedError

    def decodable(self, job: int) -> bool:
        raise NotImplementedError

    def decode(self, job: int) -> np.ndarray:
        raise NotImplementedError

    def truth(self, job: int) -> np.ndarray:
        raise NotImplementedError

    def forget(self, job: int) -> None:
        pass


class _SingleRoundRunner(_Runner):
    """GC, GC-Rep and the uncoded baseline: every task of round ``t`` is for job ``t``."""

    def __init__(self, cfg, oracle):
        super().__init__(cfg, oracle)
        kind = cfg.scheme
        n = cfg.n
        if kind == "none":
            self.s = 0
        else:
            if cfg.s is None:
                raise ParameterError(f"scheme {kind} needs s")
            self.s = cfg.s
        self.kind = kind
        self.T = 0
        self.load = Fraction(self.s + 1, n)
        self.code = None
        if kind == "gc-rep":
            self.code = build_gc_rep(n, self.s)
        elif kind == "gc":
            if not 0 <= self.s < n:
                raise ParameterError(f"GC needs 0 <= s < n, got s={self.s}")
            if self.verify:
                self.code = build_gc(n, self.s, cfg.seed)
        self.got: dict[int, np.ndarray] = {}
        self.values: dict[int, dict[int, np.ndarray]] = {}

    def params(self):
        return {} if self.kind == "none" else {"s": self.s}

    def default_model(self):
        if self.kind == "gc-rep":
            return GroupCoverModel(self.s + 1)
        return PerRoundModel(self.s)

    def assign(self, t):
        return np.full(self.n, float(self.load) if self.in_range(t) else 0.0)

    def _result(self, t, i):
        if self.kind == "none":
            return self.oracle.partial(t, i)
        partials = {j: self.oracle.partial(t, j) for j in self.code.support(i)}
        return self.code.encode(i, partials)

    def deliver(self, t, responders):
        if not self.in_range(t):
            return
        self.got[t] = responders.copy()
        if self.verify:
            self.values[t] = {int(i): self._result(t, int(i)) for i in np.flatnonzero(responders)}

    def decodable(self, job):
        got = self.got.get(job)
        if got is None:
            return False
        if self.kind == "gc-rep":
            return bool(got.reshape(-1, self.s + 1).any(axis=1).all())
        return int(got.sum()) >= self.n - self.s

    def decode(self, job):
        vals = self.values[job]
        if self.kind == "none":
            return sum(vals[i] for i in range(self.n))
        if self.kind == "gc-rep":
            return gc_rep_decode(self.code, vals.keys(), vals)
        return gc_decode(self.code, vals.keys(), vals)

    def truth(self, job):
        return self.oracle.full(job, range(self.n))

    def forget(self, job):
        self.got.pop(job, None)
        self.values.pop(job, None)


class _SrRunner(_Runner):
    def __init__(self, cfg, oracle):
        super().__init__(cfg, oracle)
        self.p = SrSgcParams(cfg.n, cfg.B, cfg.W, cfg.lam, rep=cfg.scheme == "sr-sgc-rep")
        self.T = self.p.T
        self.load = self.p.load
        self.code = self.p.build_code(cfg.seed) if (self.verify or self.p.rep) else None
        self.ledger = SrLedger(cfg.n, cfg.J)
        self.values: dict[int, dict[int, np.ndarray]] = {}
        self.current: list[int] = []

    def params(self):
        p = self.p
        return {"B": p.B, "W": p.W, "lambda": p.lam, "s": p.s, "x": p.x}

    def default_model(self):
        return self.p.default_model()

    def assign(self, t):
        assign = sr_rep_assign_round if self.p.rep else sr_assign_round
        self.current = assign(self.p, self.ledger, t)
        lf = float(self.load)
        return np.array([lf if self.in_range(job) else 0.0 for job in self.current])

    def deliver(self, t, responders):
        who = np.flatnonzero(responders).tolist()
        self.ledger.record(t, self.current, who)
        if self.verify:
            for i in who:
                job = self.current[i]
                if self.in_range(job):
                    partials = {j: self.oracle.partial(job, j) for j in self.code.support(i)}
                    self.values.setdefault(job, {})[i] = self.code.encode(i, partials)

    def decodable(self, job):
        return sr_decodable(self.p, self.ledger, job)

    def decode(self, job):
        vals = self.values.get(job, {})
        if self.p.rep:
            return gc_rep_decode(self.code, vals.keys(), vals)
        return gc_decode(self.code, vals.keys(), vals)

    def truth(self, job):
        return self.oracle.full(job, range(self.n))

    def forget(self, job):
        self.values.pop(job, None)


class _MRunner(_Runner):
    def __init__(self, cfg, oracle):
        super().__init__(cfg, oracle)
        self.p = MSgcParams(cfg.n, cfg.B, cfg.W, cfg.lam, rep=cfg.scheme == "m-sgc-rep")
        self.T = self.p.T
        self.load = self.p.load
        self.codes = self.p.build_codes(cfg.seed) if self.verify else []
        self.ledger = MLedger(self.p, cfg.J)
        self.plan = None
        self.d1 = float(self.p.d1_size)

    def params(self):
        p = self.p
        return {"B": p.B, "W": p.W, "lambda": p.lam}

    def default_model(self):
        return self.p.default_model()

    def assign(self, t):
        self.plan = m_assign_arrays(self.p, self.ledger, t)
        return (self.plan.kind != 0).sum(axis=1) * self.d1

    def deliver(self, t, responders):
        if not self.verify:
            record_plan(self.ledger, self.plan, responders)
            return
        partial = self.oracle.partial
        for task in plan_tasks(self.p, self.plan):
            if task.kind == TRIVIAL or not responders[task.worker]:
                continue
            if task.kind == SINGLE:
                value = partial(task.job, task.chunk)
            else:
                value = coded_result(self.p, self.codes[task.group], task, partial)
            self.ledger.record(task, value)

    def decodable(self, job):
        return self.ledger.decodable(job)

    def decode(self, job):
        return m_decode_job(self.p, self.ledger, job, self.codes)

    def truth(self, job):
        return self.oracle.full(job, range(self.p.num_chunks))

    def forget(self, job):
        self.ledger.forget(job)


def make_runner(cfg: SimConfig, oracle: GradientOracle) -> _Runner:
    if cfg.scheme not in SCHEMES:
        raise ParameterError(f"unknown scheme {cfg.scheme!r}; choose from {', '.join(SCHEMES)}")
    if cfg.scheme in ("gc", "gc-rep", "none"):
        return _SingleRoundRunner(cfg, oracle)
    for name in ("B", "W", "lam"):
        if getattr(cfg, name) is None:
            raise ParameterError(f"scheme {cfg.scheme} needs {name}")
    if cfg.scheme.startswith("sr-sgc"):
        return _SrRunner(cfg, oracle)
    return _MRunner(cfg, oracle)


# --- engine -----------------------------------------------------------------


def run(cfg: SimConfig) -> SimReport:
    if cfg.J < 1:
        raise ParameterError(f"need at least one job, got J={cfg.J}")
    if (cfg.pattern is None) == (cfg.profile is None):
        raise ParameterError("exactly one of pattern or profile must be given")
    timed = cfg.profile is not None
    if timed and not cfg.mu > 0:
        raise ParameterError(f"mu must be positive, got {cfg.mu}")
    oracle = GradientOracle(cfg.dim, cfg.seed)
    runner = make_runner(cfg, oracle)
    source = cfg.profile if timed else cfg.pattern
    n, T, J = cfg.n, runner.T, cfg.J
    rounds = J + T
    if source.n != n:
        raise ParameterError(f"input has {source.n} workers, scheme has {n}")
    if source.rounds < rounds:
        raise ParameterError(f"input horizon {source.rounds} shorter than J+T={rounds}")

    model = cfg.model if cfg.model is not None else runner.default_model()
    tracker = WaitoutTracker(n, rounds, model)
    completion = [0] * J
    waited_flags: list[bool] = []
    straggler_sets: list[list[int]] = []
    loads = np.zeros((rounds, n))
    durations: list[float] | None = [] if timed else None
    residuals: list[float] | None = [float("nan")] * J if cfg.verify else None

    for t in range(1, rounds + 1):
        loads[t - 1] = runner.assign(t)
        if timed:
            col = cfg.profile.column(t)
            kappa = float(col.min())
            candidate = col > (1.0 + cfg.mu) * kappa
        else:
            candidate = cfg.pattern.column(t).copy()

        if cfg.waitout:
            accepted, waited = tracker.offer(candidate)
        else:
            accepted, waited = candidate, False
            tracker.S[:, t - 1] = candidate
            tracker.t += 1
        waited_flags.append(bool(waited))
        straggler_sets.append(np.flatnonzero(accepted).tolist())
        if timed:
            if waited or cfg.scheme == "none":
                durations.append(float(col.max()))
            else:
                durations.append((1.0 + cfg.mu) * kappa)

        runner.deliver(t, ~accepted)

        for job in range(max(1, t - T), min(t, J) + 1):
            if completion[job - 1] or not runner.decodable(job):
                continue
            completion[job - 1] = t
            if cfg.verify:
                residuals[job - 1] = relative_error(runner.decode(job), runner.truth(job))
        due = t - T
        if 1 <= due <= J:
            if not completion[due - 1]:
                raise SimulationInvariantError(
                    f"{cfg.scheme}: job {due} not decodable at its deadline (end of round {t})"
                )
            runner.forget(due)
            oracle.release(due)

    report = SimReport(
        scheme=cfg.scheme,
        params=runner.params(),
        n=n,
        J=J,
        T=T,
        load=runner.load,
        completion=completion,
        delays=[c - (j + 1) for j, c in enumerate(completion)],
        waited=waited_flags,
        stragglers=straggler_sets,
        loads=loads,
        durations=durations,
        residuals=residuals,
        effective=StragglerPattern(tracker.S.copy()),
    )
    log.debug("%s: %d rounds, %d wait-outs", cfg.scheme, rounds, report.waitout_count)
    return report


def scheme_T(scheme: str, B: int | None = None, W: int | None = None) -> int:
    if scheme in ("gc", "gc-rep", "none"):
        return 0
    if scheme.startswith("sr-sgc"):
        return B
    return W - 2 + B
