"""(n, s) gradient codes with cyclic support, the replication variant, and a
deterministic partial-gradient oracle used to check decoding end to end."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from seqgrad.errors import (
    ConstructionError,
    DecodeError,
    InsufficientResultsError,
    ParameterError,
)

DECODE_RTOL = 1e-8
VERIFY_CAP = 10_000
VERIFY_SAMPLES = 256
MAX_RETRIES = 16


def cyclic_support(i: int, s: int, n: int) -> list[int]:
    """Indices ``{i mod n, ..., (i+s) mod n}`` in order."""
    return [(i + k) % n for k in range(s + 1)]


@dataclass(frozen=True, eq=False)
class GcCode:
    n: int
    s: int
    coeffs: np.ndarray
    seed: int

    @property
    def load(self):
        from fractions import Fraction

        return Fraction(self.s + 1, self.n)

    def support(self, i: int) -> list[int]:
        return cyclic_support(i, self.s, self.n)

    def encode(self, i: int, partials: Mapping[int, np.ndarray] | np.ndarray) -> np.ndarray:
        """Worker ``i``'s result: sum of ``coeffs[i, j] * partials[j]`` over its support."""
        return sum(self.coeffs[i, j] * partials[j] for j in self.support(i))


def _validate_ns(n: int, s: int) -> None:
    if n < 1 or not 0 <= s < n:
        raise ParameterError(f"need n >= 1 and 0 <= s < n, got n={n}, s={s}")


def _candidate_coeffs(n: int, s: int, rng: np.random.Generator) -> np.ndarray:
    # Rows live in the null space of a random s x n matrix whose rows sum to
    # zero, so the all-ones vector is in that (n - s)-dim space and any n - s
    # generic rows span it.
    coeffs = np.zeros((n, n))
    if s == 0:
        np.fill_diagonal(coeffs, 1.0)
        return coeffs
    h = rng.standard_normal((s, n))
    h[:, -1] = -h[:, :-1].sum(axis=1)
    for i in range(n):
        cols = cyclic_support(i, s, n)
        rest = np.linalg.solve(h[:, cols[1:]], -h[:, i])
        coeffs[i, i] = 1.0
        coeffs[i, cols[1:]] = rest
    return coeffs


def _straggler_sets(n: int, s: int, rng: np.random.Generator, cap: int) -> Iterable[tuple[int, ...]]:
    if math.comb(n, s) <= cap:
        yield from itertools.combinations(range(n), s)
        return
    for _ in range(VERIFY_SAMPLES):
        yield tuple(sorted(rng.choice(n, size=s, replace=False).tolist()))


def decode_coefficients(coeffs: np.ndarray, responders: list[int]) -> tuple[np.ndarray, float]:
    """Least-squares ``beta`` with ``sum_w beta_w * coeffs[w] ~= 1``; returns (beta, residual)."""
    a = coeffs[responders]
    ones = np.ones(coeffs.shape[1])
    beta, *_ = np.linalg.lstsq(a.T, ones, rcond=None)
    residual = float(np.linalg.norm(a.T @ beta - ones) / np.linalg.norm(ones))
    return beta, residual


def build_gc(n: int, s: int, seed: int = 0, *, verify_cap: int = VERIFY_CAP) -> GcCode:
    """Build a seeded (n, s) gradient code and verify it decodes from any n - s workers.

    All ``C(n, s)`` straggler sets are checked when there are at most
    ``verify_cap`` of them, otherwise a seeded sample is checked. A failing
    candidate is discarded and rebuilt from a derived seed.
    """
    _validate_ns(n, s)
    for attempt in range(MAX_RETRIES):
        rng = np.random.default_rng([seed, attempt])
        try:
            coeffs = _candidate_coeffs(n, s, rng)
        except np.linalg.LinAlgError:
            continue
        mask = np.zeros((n, n), dtype=bool)
        for i in range(n):
            mask[i, cyclic_support(i, s, n)] = True
        if np.any(np.abs(coeffs[mask]) < 1e-12) or not np.all(np.isfinite(coeffs)):
            continue
        ok = True
        for stragglers in _straggler_sets(n, s, rng, verify_cap):
            responders = [w for w in range(n) if w not in stragglers]
            _, residual = decode_coefficients(coeffs, responders)
            if residual > DECODE_RTOL:
                ok = False
                break
        if ok:
            coeffs.setflags(write=False)
            return GcCode(n=n, s=s, coeffs=coeffs, seed=seed)
    raise ConstructionError(f"no valid ({n},{s}) code after {MAX_RETRIES} attempts (seed={seed})")


def gc_decode(code: GcCode, responders: Iterable[int], results: Mapping[int, np.ndarray]) -> np.ndarray:
    responders = sorted(set(responders))
    if len(responders) < code.n - code.s:
        raise InsufficientResultsError(
            f"{len(responders)} responders, need {code.n - code.s} for ({code.n},{code.s})-GC"
        )
    missing = [w for w in responders if w not in results]
    if missing:
        raise InsufficientResultsError(f"no results for responders {missing}")
    beta, residual = decode_coefficients(code.coeffs, responders)
    if residual > DECODE_RTOL:
        raise DecodeError(f"decode residual {residual:.3e} exceeds {DECODE_RTOL:g}")
    return sum(b * results[w] for b, w in zip(beta, responders))


@dataclass(frozen=True)
class GcRepCode:
    """Replication-group simplification, valid when ``(s + 1) | n``.

    Worker ``i`` belongs to group ``i // (s + 1)``; group ``g`` owns chunks
    ``g*(s+1) .. g*(s+1)+s`` and every member returns the plain sum over them.
    """

    n: int
    s: int
    groups: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @property
    def load(self):
        from fractions import Fraction

        return Fraction(self.s + 1, self.n)

    def group_of(self, i: int) -> int:
        return i // (self.s + 1)

    def chunks(self, group: int) -> list[int]:
        return list(range(group * (self.s + 1), (group + 1) * (self.s + 1)))

    def support(self, i: int) -> list[int]:
        return self.chunks(self.group_of(i))

    def encode(self, i: int, partials: Mapping[int, np.ndarray] | np.ndarray) -> np.ndarray:
        return sum(partials[j] for j in self.support(i))

    def covered(self, responders: Iterable[int]) -> bool:
        seen = {self.group_of(w) for w in responders}
        return len(seen) == self.num_groups


def build_gc_rep(n: int, s: int) -> GcRepCode:
    _validate_ns(n, s)
    if n % (s + 1):
        raise ParameterError(f"GC-Rep needs (s+1) | n, got n={n}, s={s}")
    size = s + 1
    groups = tuple(tuple(range(g * size, (g + 1) * size)) for g in range(n // size))
    return GcRepCode(n=n, s=s, groups=groups)


def gc_rep_decode(code: GcRepCode, responders: Iterable[int], results: Mapping[int, np.ndarray]) -> np.ndarray:
    responders = sorted(set(responders))
    pick: dict[int, int] = {}
    for w in responders:
        pick.setdefault(code.group_of(w), w)
    empty = [g for g in range(code.num_groups) if g not in pick]
    if empty:
        raise InsufficientResultsError(f"groups {empty} have no responder")
    return sum(results[pick[g]] for g in range(code.num_groups))


@dataclass(frozen=True)
class GradientOracle:
    """Deterministic stand-in for partial gradients: ``(t, j) -> R^dim``."""

    dim: int = 4
    seed: int = 0
    # Seeding a generator dominates the cost, so values are memoized per job.
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError(f"gradient dimension must be positive, got {self.dim}")

    def partial(self, t: int, j: int) -> np.ndarray:
        job = self._cache.setdefault(t, {})
        val = job.get(j)
        if val is None:
            val = np.random.default_rng([self.seed, t, j]).standard_normal(self.dim)
            val.setflags(write=False)
            job[j] = val
        return val

    def release(self, t: int) -> None:
        self._cache.pop(t, None)

    def full(self, t: int, chunks: Iterable[int]) -> np.ndarray:
        return sum((self.partial(t, j) for j in chunks), np.zeros(self.dim))


def relative_error(got: np.ndarray, want: np.ndarray) -> float:
    scale = float(np.linalg.norm(want))
    diff = float(np.linalg.norm(np.asarray(got) - want))
    return diff / scale if scale > 0 else diff
