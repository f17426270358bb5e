from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from seqgrad.bounds import lb_arbitrary, lb_bursty, optimality_gap
from seqgrad.errors import ParameterError
from seqgrad.m_sgc import MSgcParams
from seqgrad.sr_sgc import SrSgcParams


def test_small_example():
    assert lb_bursty(4, 1, 2, 4) == Fraction(1, 2)
    assert lb_arbitrary(4, 1, 2, 4) == Fraction(1, 2)


def test_degenerate_window():
    assert lb_bursty(5, 3, 3, 2) == Fraction(1, 3)
    assert lb_arbitrary(5, 4, 4, 1) == Fraction(1, 4)
    with pytest.raises(ParameterError):
        lb_bursty(5, 3, 3, 5)
    with pytest.raises(ParameterError):
        lb_arbitrary(5, 2, 2, 5)


@pytest.mark.parametrize("args", [(4, 0, 2, 1), (4, 3, 2, 1), (4, 1, 2, 5)])
def test_invalid(args):
    with pytest.raises(ParameterError):
        lb_bursty(*args)


def test_gap_is_exact_at_top_lambda():
    for lam in (19, 20):
        assert optimality_gap(20, 3, 7, lam).gap == 0


def test_gap_report_fields():
    r = optimality_gap(20, 3, 4, 4)
    d = r.as_dict()
    assert d["lower_bound"] == str(lb_bursty(20, 3, 4, 4))
    assert Fraction(d["gap_times_W"]) == r.gap * 4


@given(n=st.integers(1, 40), B=st.integers(1, 6), extra=st.integers(1, 6), data=st.data())
def test_m_sgc_load_never_below_bound(n, B, extra, data):
    lam = data.draw(st.integers(0, n))
    W = B + extra
    assert MSgcParams(n, B, W, lam).load >= lb_bursty(n, B, W, lam)


@given(n=st.integers(1, 40), B=st.integers(1, 4), x=st.integers(1, 4), data=st.data())
def test_sr_sgc_load_never_below_bound(n, B, x, data):
    lam = data.draw(st.integers(1, n))
    W = B * x + 1
    assert SrSgcParams(n, B, W, lam).load >= lb_bursty(n, B, W, lam)
