"""Straggler patterns, delay profiles, sliding-window straggler models and
pattern generators.

Rounds are 1-indexed in every public signature; arrays are stored 0-indexed,
so round ``t`` of a pattern is column ``t - 1``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from seqgrad.errors import ParameterError


@dataclass(frozen=True, eq=False)
class StragglerPattern:
    S: np.ndarray  # bool, shape (n, R)

    def __post_init__(self):
        arr = np.asarray(self.S)
        if arr.ndim != 2:
            raise ParameterError(f"pattern must be 2-D (workers x rounds), got shape {arr.shape}")
        if arr.dtype != bool:
            if not np.isin(arr, (0, 1)).all():
                raise ParameterError("pattern entries must be 0/1")
            arr = arr.astype(bool)
        object.__setattr__(self, "S", arr)

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def rounds(self) -> int:
        return self.S.shape[1]

    def column(self, t: int) -> np.ndarray:
        return self.S[:, t - 1]

    def stragglers(self, t: int) -> list[int]:
        return np.flatnonzero(self.S[:, t - 1]).tolist()

    @classmethod
    def empty(cls, n: int, rounds: int) -> "StragglerPattern":
        return cls(np.zeros((n, rounds), dtype=bool))

    @classmethod
    def from_sets(cls, n: int, rounds: int, sets: dict[int, Sequence[int]]) -> "StragglerPattern":
        """``sets`` maps round -> straggling workers."""
        S = np.zeros((n, rounds), dtype=bool)
        for t, workers in sets.items():
            S[list(workers), t - 1] = True
        return cls(S)

    def __eq__(self, other):
        return isinstance(other, StragglerPattern) and np.array_equal(self.S, other.S)


@dataclass(frozen=True, eq=False)
class DelayProfile:
    times: np.ndarray  # float seconds, shape (n, R)

    def __post_init__(self):
        arr = np.asarray(self.times, dtype=float)
        if arr.ndim != 2:
            raise ParameterError(f"profile must be 2-D (workers x rounds), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ParameterError("profile entries must be positive and finite")
        object.__setattr__(self, "times", arr)

    @property
    def n(self) -> int:
        return self.times.shape[0]

    @property
    def rounds(self) -> int:
        return self.times.shape[1]

    def column(self, t: int) -> np.ndarray:
        return self.times[:, t - 1]

    def fastest(self) -> np.ndarray:
        return self.times.min(axis=0)


# --- straggler models -------------------------------------------------------


@dataclass(frozen=True)
class BurstyModel:
    """At most ``lam`` distinct stragglers and per-worker burst span <= ``B`` in every ``W``-window."""

    B: int
    W: int
    lam: int

    def __post_init__(self):
        if not 1 <= self.B <= self.W or self.lam < 0:
            raise ParameterError(f"bursty model needs 1 <= B <= W and lambda >= 0, got {self}")

    @property
    def window(self) -> int:
        return self.W

    def window_ok(self, block: np.ndarray) -> bool:
        rows = block.any(axis=1)
        if rows.sum() > self.lam:
            return False
        if self.B >= block.shape[1]:
            return True
        sub = block[rows]
        width = block.shape[1]
        first = sub.argmax(axis=1)
        last = width - 1 - sub[:, ::-1].argmax(axis=1)
        return bool(np.all(last - first < self.B))


@dataclass(frozen=True)
class ArbitraryModel:
    """At most ``lam`` distinct stragglers and at most ``N`` straggling rounds per worker in every ``W``-window."""

    N: int
    W: int
    lam: int

    def __post_init__(self):
        if not 0 <= self.N <= self.W or self.W < 1 or self.lam < 0:
            raise ParameterError(f"arbitrary model needs 0 <= N <= W' and lambda' >= 0, got {self}")

    @property
    def window(self) -> int:
        return self.W

    def window_ok(self, block: np.ndarray) -> bool:
        counts = block.sum(axis=1)
        return int((counts > 0).sum()) <= self.lam and int(counts.max(initial=0)) <= self.N


@dataclass(frozen=True)
class PerRoundModel:
    s: int

    def __post_init__(self):
        if self.s < 0:
            raise ParameterError(f"per-round model needs s >= 0, got {self.s}")

    @property
    def window(self) -> int:
        return 1

    def window_ok(self, block: np.ndarray) -> bool:
        return int(block.sum(axis=0).max(initial=0)) <= self.s


@dataclass(frozen=True)
class GroupCoverModel:
    """Every round leaves at least one non-straggler in each replication group."""

    group_size: int

    @property
    def window(self) -> int:
        return 1

    def window_ok(self, block: np.ndarray) -> bool:
        n = block.shape[0]
        grouped = block.reshape(n // self.group_size, self.group_size, -1)
        return not bool(grouped.all(axis=1).any())


@dataclass(frozen=True)
class WindowUnion:
    """Each ``W``-window must satisfy at least one of ``models`` (checked on that window)."""

    models: tuple
    W: int

    @property
    def window(self) -> int:
        return self.W

    def window_ok(self, block: np.ndarray) -> bool:
        return any(m.window_ok(block) for m in self.models)


@dataclass(frozen=True)
class EitherModel:
    """The whole pattern must conform to at least one of ``alternatives``."""

    alternatives: tuple


Model = Union[BurstyModel, ArbitraryModel, PerRoundModel, GroupCoverModel, WindowUnion, EitherModel]


def _windows(S: np.ndarray, w: int):
    R = S.shape[1]
    # A horizon shorter than the window is checked as one truncated window.
    for j in range(max(1, R - w + 1)):
        yield S[:, j:j + w]


def conforms(pattern: StragglerPattern | np.ndarray, model: Model) -> bool:
    S = pattern.S if isinstance(pattern, StragglerPattern) else np.asarray(pattern, dtype=bool)
    if isinstance(model, EitherModel):
        return any(conforms(S, m) for m in model.alternatives)
    if S.shape[1] == 0:
        return True
    return all(model.window_ok(block) for block in _windows(S, model.window))


def first_violation(pattern: StragglerPattern | np.ndarray, model: Model) -> int | None:
    """1-indexed start round of the first window breaking ``model``, or None.

    For an :class:`EitherModel` the latest first-violation over the
    alternatives is reported (None if any alternative holds).
    """
    S = pattern.S if isinstance(pattern, StragglerPattern) else np.asarray(pattern, dtype=bool)
    if isinstance(model, EitherModel):
        hits = [first_violation(S, m) for m in model.alternatives]
        return None if any(h is None for h in hits) else max(hits)
    if S.shape[1] == 0:
        return None
    for j, block in enumerate(_windows(S, model.window)):
        if not model.window_ok(block):
            return j + 1
    return None


def last_window_ok(S: np.ndarray, model: Model) -> bool:
    """Conformance of the single window ending at the last round of ``S``."""
    w = model.window
    return model.window_ok(S[:, max(0, S.shape[1] - w):])


def check_bursty(pat: StragglerPattern, m: BurstyModel) -> bool:
    return conforms(pat, m)


def check_arbitrary(pat: StragglerPattern, m: ArbitraryModel) -> bool:
    return conforms(pat, m)


def check_per_round(pat: StragglerPattern, m: PerRoundModel) -> bool:
    return conforms(pat, m)


# --- generators -------------------------------------------------------------


@dataclass(frozen=True)
class GeParams:
    p_S: float  # straggler -> non-straggler
    p_N: float  # non-straggler -> straggler
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.p_S <= 1.0 and 0.0 <= self.p_N <= 1.0):
            raise ParameterError(f"GE probabilities must lie in [0, 1], got {self}")


def gen_ge(n: int, rounds: int, ge: GeParams) -> StragglerPattern:
    """Independent two-state Gilbert-Elliott chain per worker, starting non-straggler."""
    rng = np.random.default_rng(ge.seed)
    u = rng.random((n, rounds))
    S = np.zeros((n, rounds), dtype=bool)
    state = np.zeros(n, dtype=bool)
    for t in range(rounds):
        if t > 0:
            state = np.where(state, u[:, t] >= ge.p_S, u[:, t] < ge.p_N)
        S[:, t] = state
    return StragglerPattern(S)


def gen_periodic_bursty(n: int, rounds: int, m: BurstyModel) -> StragglerPattern:
    """Worst-case pattern: workers ``0..lam-1`` straggle together in bursts of ``B``
    every ``W - 1 + B`` rounds, or in every round when ``B == W``."""
    lam = min(m.lam, n)
    S = np.zeros((n, rounds), dtype=bool)
    t = np.arange(rounds)
    on = np.ones(rounds, dtype=bool) if m.B == m.W else (t % (m.W - 1 + m.B)) < m.B
    S[:lam] = on
    return StragglerPattern(S)


def gen_periodic_arbitrary(n: int, rounds: int, m: ArbitraryModel) -> StragglerPattern:
    """Workers ``0..lam-1`` straggle in the first ``N`` rounds of every ``W'``-period."""
    lam = min(m.lam, n)
    S = np.zeros((n, rounds), dtype=bool)
    S[:lam] = (np.arange(rounds) % m.W) < m.N
    return StragglerPattern(S)


def gen_uniform(n: int, rounds: int, p: float, seed: int = 0) -> StragglerPattern:
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"straggle probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    return StragglerPattern(rng.random((n, rounds)) < p)


def gen_conforming(n: int, rounds: int, model: Model, p: float, seed: int = 0) -> StragglerPattern:
    """Random pattern that conforms to ``model``.

    Each round, workers are visited in random order and proposed as stragglers
    with probability ``p``; a proposal is kept only if the windows ending at
    this round still conform.
    """
    if isinstance(model, EitherModel):
        rng = np.random.default_rng(seed)
        pick = model.alternatives[int(rng.integers(len(model.alternatives)))]
        return gen_conforming(n, rounds, pick, p, seed)
    rng = np.random.default_rng(seed)
    S = np.zeros((n, rounds), dtype=bool)
    for t in range(rounds):
        for i in rng.permutation(n):
            if rng.random() < p:
                S[i, t] = True
                if not last_window_ok(S[:, :t + 1], model):
                    S[i, t] = False
    return StragglerPattern(S)


def pattern_from_profile(profile: DelayProfile, mu: float) -> StragglerPattern:
    """Mark worker ``i`` a straggler in round ``t`` iff its time exceeds ``(1 + mu)`` times the fastest."""
    if not mu > 0:
        raise ParameterError(f"mu must be positive, got {mu}")
    cutoff = (1.0 + mu) * profile.fastest()
    return StragglerPattern(profile.times > cutoff[None, :])


def profile_from_pattern(
    pattern: StragglerPattern,
    *,
    base: float = 1.0,
    jitter: float = 0.3,
    slowdown: tuple[float, float] = (2.5, 6.0),
    seed: int = 0,
) -> DelayProfile:
    """Synthesize a delay profile whose stragglers (at ``mu = 1``) are exactly ``pattern``.

    Non-stragglers take ``base * U(1, 1 + jitter)``; stragglers take
    ``base * U(*slowdown)``. Requires ``1 + jitter < 2 <= slowdown[0]`` for the
    exact correspondence; every round also gets at least one worker at ``base``.
    """
    rng = np.random.default_rng(seed)
    n, R = pattern.S.shape
    fast = base * (1.0 + jitter * rng.random((n, R)))
    slow = base * rng.uniform(slowdown[0], slowdown[1], size=(n, R))
    times = np.where(pattern.S, slow, fast)
    for t in range(R):
        ok = np.flatnonzero(~pattern.S[:, t])
        if ok.size:
            times[ok[0], t] = base
    return DelayProfile(times)


# --- CSV I/O ----------------------------------------------------------------


def _read_rows(text: str) -> list[list[float]]:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParameterError("empty CSV")
    drop_first = False
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        drop_first = rows[0][0].strip().lower() == "round"
        rows = rows[1:]
    out = []
    for r in rows:
        vals = [float(c) for c in r]
        out.append(vals[1:] if drop_first else vals)
    if len({len(r) for r in out}) != 1:
        raise ParameterError("ragged CSV rows")
    return out


def read_profile(path: str | Path) -> DelayProfile:
    rows = _read_rows(Path(path).read_text())
    return DelayProfile(np.array(rows, dtype=float).T)


def read_pattern(path: str | Path) -> StragglerPattern:
    rows = _read_rows(Path(path).read_text())
    return StragglerPattern(np.array(rows).T)


def _write(matrix: np.ndarray, fmt, header: bool) -> str:
    n, R = matrix.shape
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(["round"] + [f"w{i}" for i in range(n)])
    for t in range(R):
        w.writerow(([t + 1] if header else []) + [fmt(v) for v in matrix[:, t]])
    return buf.getvalue()


def write_pattern(pattern: StragglerPattern, path: str | Path, header: bool = True) -> None:
    Path(path).write_text(_write(pattern.S, lambda v: str(int(v)), header))


def write_profile(profile: DelayProfile, path: str | Path, header: bool = True) -> None:
    Path(path).write_text(_write(profile.times, lambda v: repr(float(v)), header))
