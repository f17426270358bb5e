from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from seqgrad.errors import ParameterError
from seqgrad.sr_sgc import (
    SrLedger,
    SrSgcParams,
    derive_sr_params,
    sr_assign_round,
    sr_decodable,
    sr_rep_assign_round,
)


def test_table_parameters():
    p = derive_sr_params(256, 2, 3, 23)
    assert p.s == 12
    assert p.load == Fraction(13, 256)
    assert p.T == 2


def test_small_example_load():
    p = derive_sr_params(4, 1, 2, 4)
    assert p.s == 2 and p.load == Fraction(3, 4)


def test_x_and_equivalent_s_form():
    p = derive_sr_params(5, 2, 5, 5)
    assert p.x == 2 and p.s == 2
    for lam in range(1, 6):
        q = derive_sr_params(5, 2, 5, lam)
        assert q.s == -(-lam // (q.x + 1))


@pytest.mark.parametrize("args", [(4, 2, 4, 2), (4, 1, 2, 0), (4, 1, 2, 5), (4, 0, 2, 1)])
def test_invalid(args):
    with pytest.raises(ParameterError):
        derive_sr_params(*args)


def test_rep_requires_divisibility():
    with pytest.raises(ParameterError):
        SrSgcParams(5, 1, 2, 4, rep=True)  # s=2, 3 does not divide 5
    assert SrSgcParams(6, 1, 2, 4, rep=True).s == 2


def test_first_rounds_work_on_current_job():
    p = derive_sr_params(4, 1, 2, 4)
    ledger = SrLedger(4, 6)
    assert sr_assign_round(p, ledger, 1) == [1, 1, 1, 1]


def test_reattempt_after_full_straggle():
    # all four straggle in round 1; n - s = 2 of them redo job 1 in round 2
    p = derive_sr_params(4, 1, 2, 4)
    ledger = SrLedger(4, 6)
    ledger.record(1, [1, 1, 1, 1], [])
    assert sr_assign_round(p, ledger, 2) == [1, 1, 2, 2]


def test_reattempt_skips_workers_that_returned():
    p = derive_sr_params(5, 1, 2, 4)  # s = 2, need 3
    ledger = SrLedger(5, 6)
    ledger.record(1, [1] * 5, [0, 3])
    # delta starts at 2; worker 0 already returned, worker 1 reattempts
    assert sr_assign_round(p, ledger, 2) == [2, 1, 2, 2, 2]


def test_rep_uncovered_group_reattempts():
    p = SrSgcParams(6, 1, 2, 4, rep=True)
    ledger = SrLedger(6, 5)
    ledger.record(1, [1] * 6, [0, 1, 2])  # group 0 returned, group 1 did not
    out = sr_rep_assign_round(p, ledger, 2)
    assert out[:3] == [2, 2, 2]
    assert 1 in out[3:]


def test_rep_covered_everything_moves_on():
    p = SrSgcParams(6, 1, 2, 4, rep=True)
    ledger = SrLedger(6, 5)
    ledger.record(1, [1] * 6, [0, 3])
    assert sr_rep_assign_round(p, ledger, 2) == [2] * 6


def test_out_of_range_jobs_count_as_received():
    ledger = SrLedger(3, 4)
    assert ledger.N(0) == 3 and ledger.N(-2) == 3
    assert ledger.got(5).all()


def test_decodable_thresholds():
    p = derive_sr_params(4, 1, 2, 4)
    ledger = SrLedger(4, 3)
    ledger.record(1, [1, 1, 1, 1], [0])
    assert not sr_decodable(p, ledger, 1)
    ledger.record(2, [2, 1, 2, 2], [0])  # worker 0 now returns job 2
    assert not sr_decodable(p, ledger, 1)
    ledger.record(2, [2, 1, 2, 2], [1])
    assert sr_decodable(p, ledger, 1)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(2, 8),
    B=st.integers(1, 3),
    x=st.integers(1, 2),
    data=st.data(),
)
def test_assignment_never_overshoots(n, B, x, data):
    W = B * x + 1
    lam = data.draw(st.integers(1, n))
    p = derive_sr_params(n, B, W, lam)
    ledger = SrLedger(n, 10)
    prev = 1
    returned = data.draw(st.lists(st.integers(0, n - 1), unique=True, max_size=n))
    ledger.record(prev, [prev] * n, returned)
    t = prev + B
    out = sr_assign_round(p, ledger, t)
    assert set(out) <= {t, prev}
    redo = [i for i, j in enumerate(out) if j == prev]
    assert len(redo) == max(0, n - p.s - len(returned))
    assert not set(redo) & set(returned)
    eligible = [i for i in range(n) if i not in returned]
    assert redo == eligible[: len(redo)]
