"""Lower bounds on the normalized load of any sequential gradient code, and the
gap between M-SGC's load and the bursty-model bound. All arithmetic is exact."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from seqgrad.errors import ParameterError
from seqgrad.m_sgc import MSgcParams


def lb_bursty(n: int, B: int, W: int, lam: int) -> Fraction:
    """Minimum load tolerating every ``(B, W, lam)``-bursty pattern."""
    if n < 1 or not 0 <= lam <= n or not 1 <= B <= W:
        raise ParameterError(f"need n >= 1, 0 <= lambda <= n, 1 <= B <= W; got n={n}, B={B}, W={W}, lambda={lam}")
    if B == W:
        if lam == n:
            raise ParameterError("bound undefined for B == W with lambda == n")
        return Fraction(1, n - lam)
    return Fraction(W - 1 + B, n * (W - 1) + B * (n - lam))


def lb_arbitrary(n: int, N: int, Wp: int, lam: int) -> Fraction:
    """Minimum load tolerating every ``(N, W', lam')``-arbitrary pattern."""
    if n < 1 or not 0 <= lam <= n or not 0 <= N <= Wp or Wp < 1:
        raise ParameterError(f"need n >= 1, 0 <= lambda' <= n, 0 <= N <= W'; got n={n}, N={N}, W'={Wp}, lambda'={lam}")
    if N == Wp:
        if lam == n:
            raise ParameterError("bound undefined for N == W' with lambda' == n")
        return Fraction(1, n - lam)
    return Fraction(Wp, n * (Wp - N) + N * (n - lam))


@dataclass(frozen=True)
class BoundReport:
    n: int
    B: int
    W: int
    lam: int
    bound: Fraction
    load: Fraction

    @property
    def gap(self) -> Fraction:
        return self.load - self.bound

    @property
    def gap_times_w(self) -> Fraction:
        return self.gap * self.W

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "B": self.B,
            "W": self.W,
            "lambda": self.lam,
            "lower_bound": str(self.bound),
            "m_sgc_load": str(self.load),
            "gap": str(self.gap),
            "gap_times_W": str(self.gap_times_w),
        }


def optimality_gap(n: int, B: int, W: int, lam: int) -> BoundReport:
    load = MSgcParams(n, B, W, lam).load
    return BoundReport(n, B, W, lam, bound=lb_bursty(n, B, W, lam), load=load)
