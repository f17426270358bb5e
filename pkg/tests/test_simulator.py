import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqgrad.errors import ParameterError, SimulationInvariantError
from seqgrad.gc import GradientOracle
from seqgrad.simulator import SimConfig, WaitoutTracker, make_runner, run, scheme_T, waitout_rule
from seqgrad.straggler import (
    BurstyModel,
    DelayProfile,
    PerRoundModel,
    StragglerPattern,
    conforms,
    gen_periodic_bursty,
    gen_uniform,
    profile_from_pattern,
)


def worked_pattern(rounds=8):
    return StragglerPattern.from_sets(4, rounds, {2: [0, 1], 3: [1]})


# --- wait-out rule ----------------------------------------------------------


def test_waitout_accepts_conforming_candidate():
    prefix = np.zeros((3, 2), dtype=bool)
    acc, waited = waitout_rule(prefix, [True, False, False], PerRoundModel(1))
    assert acc.tolist() == [True, False, False] and not waited


def test_waitout_per_round_limit():
    acc, waited = waitout_rule(np.zeros((4, 0), dtype=bool), [1, 1, 1, 0], PerRoundModel(2))
    assert waited and not acc.any()


def test_waitout_burst_too_long():
    prefix = np.array([[True], [False]])
    acc, waited = waitout_rule(prefix, [True, False], BurstyModel(1, 2, 1))
    assert waited and not acc.any()


def test_tracker_matches_pure_rule():
    model = BurstyModel(2, 3, 2)
    pat = gen_uniform(4, 30, 0.3, seed=5)
    tracker = WaitoutTracker(4, 30, model)
    eff = np.zeros((4, 0), dtype=bool)
    for t in range(1, 31):
        a1, w1 = tracker.offer(pat.column(t))
        a2, w2 = waitout_rule(eff, pat.column(t), model)
        assert w1 == w2 and np.array_equal(a1, a2)
        eff = np.concatenate([eff, a2[:, None]], axis=1)


# --- pattern mode -----------------------------------------------------------


def test_worked_example_trace():
    rep = run(SimConfig("m-sgc", 4, J=5, B=2, W=3, lam=2, pattern=worked_pattern()))
    assert rep.completion == [4, 5, 6, 7, 8]
    assert rep.delays == [3] * 5
    assert rep.waitout_count == 0
    assert max(rep.residuals) < 1e-9
    # realized loads never exceed the provisioned load
    assert rep.loads.max() <= float(Fraction(3, 8)) + 1e-12


def test_small_full_lambda_example():
    pat = gen_periodic_bursty(4, 7, BurstyModel(1, 2, 4))
    sr = run(SimConfig("sr-sgc", 4, J=6, B=1, W=2, lam=4, pattern=pat))
    m = run(SimConfig("m-sgc", 4, J=6, B=1, W=2, lam=4, pattern=pat))
    assert sr.completion == [2, 2, 4, 4, 6, 6]
    assert m.completion == [2, 2, 4, 4, 6, 6]
    assert sr.load == Fraction(3, 4) and m.load == Fraction(1, 2)
    assert np.allclose(sr.loads[:6], 0.75)


def test_gc_waits_out_heavy_rounds():
    pat = StragglerPattern.from_sets(4, 3, {2: [0, 1]})
    rep = run(SimConfig("gc", 4, J=3, s=1, pattern=pat))
    assert rep.waited == [False, True, False]
    assert rep.completion == [1, 2, 3]
    assert rep.effective.stragglers(2) == []


def test_gc_rep_group_cover():
    pat = StragglerPattern.from_sets(4, 2, {1: [0, 2], 2: [0, 1]})
    rep = run(SimConfig("gc-rep", 4, J=2, s=1, pattern=pat))
    assert rep.waited == [False, True]
    assert max(rep.residuals) < 1e-12


def test_no_coding_waits_for_any_straggler():
    pat = StragglerPattern.from_sets(3, 3, {2: [1]})
    rep = run(SimConfig("none", 3, J=3, pattern=pat))
    assert rep.waited == [False, True, False]
    assert rep.load == Fraction(1, 3)


def test_sr_rep_runs_and_decodes():
    pat = gen_periodic_bursty(6, 12, BurstyModel(1, 2, 4))
    rep = run(SimConfig("sr-sgc-rep", 6, J=11, B=1, W=2, lam=4, pattern=pat))
    assert rep.max_delay <= 1 and max(rep.residuals) < 1e-9


def test_m_rep_runs_and_decodes():
    pat = gen_periodic_bursty(6, 14, BurstyModel(2, 3, 2))
    rep = run(SimConfig("m-sgc-rep", 6, J=11, B=2, W=3, lam=2, pattern=pat))
    assert rep.max_delay <= 3 and max(rep.residuals) < 1e-9


def test_disabling_waitout_exposes_deadline_miss():
    pat = StragglerPattern(np.ones((4, 6), dtype=bool))
    with pytest.raises(SimulationInvariantError):
        run(SimConfig("sr-sgc", 4, J=4, B=1, W=2, lam=2, pattern=pat, waitout=False))
    rep = run(SimConfig("sr-sgc", 4, J=4, B=1, W=2, lam=2, pattern=pat))
    assert rep.waitout_count > 0


def test_horizon_and_input_errors():
    with pytest.raises(ParameterError):
        run(SimConfig("m-sgc", 4, J=5, B=2, W=3, lam=2, pattern=worked_pattern(6)))
    with pytest.raises(ParameterError):
        run(SimConfig("gc", 4, J=2, pattern=worked_pattern()))  # missing s
    with pytest.raises(ParameterError):
        run(SimConfig("gc", 3, J=2, s=1, pattern=worked_pattern()))  # worker count mismatch
    with pytest.raises(ParameterError):
        run(SimConfig("wat", 4, J=2, pattern=worked_pattern()))


def test_scheme_T():
    assert scheme_T("gc") == 0
    assert scheme_T("sr-sgc", 2, 3) == 2
    assert scheme_T("m-sgc", 2, 3) == 3


# --- timed mode -------------------------------------------------------------


def test_timed_durations():
    times = np.array([
        [1.0, 1.0, 1.0],
        [1.5, 3.5, 1.2],
        [1.1, 1.4, 4.0],
    ])
    prof = DelayProfile(times)
    gc = run(SimConfig("gc", 3, J=3, s=1, profile=prof, mu=1.0))
    assert gc.durations == [2.0, 2.0, 2.0]
    assert gc.stragglers == [[], [1], [2]]
    none = run(SimConfig("none", 3, J=3, profile=prof))
    assert none.durations == [1.5, 3.5, 4.0]
    assert none.total_runtime == pytest.approx(9.0)


def test_timed_waitout_takes_column_max():
    times = np.array([[1.0], [3.0], [5.0]])
    rep = run(SimConfig("gc", 3, J=1, s=1, profile=DelayProfile(times)))
    assert rep.waited == [True] and rep.durations == [5.0]


def test_report_serializes():
    rep = run(SimConfig("m-sgc", 4, J=5, B=2, W=3, lam=2, pattern=worked_pattern()))
    doc = json.loads(json.dumps(rep.to_dict()))
    assert doc["load"] == "3/8" and doc["max_delay"] == 3


def test_runs_are_deterministic():
    pat = gen_uniform(5, 12, 0.3, seed=8)
    prof = profile_from_pattern(pat, seed=8)
    a = run(SimConfig("m-sgc", 5, J=9, B=2, W=3, lam=2, profile=prof, seed=3))
    b = run(SimConfig("m-sgc", 5, J=9, B=2, W=3, lam=2, profile=prof, seed=3))
    assert a.to_dict() == b.to_dict()


# --- properties -------------------------------------------------------------

schemes = st.sampled_from(["gc", "sr-sgc", "m-sgc", "none"])


@settings(max_examples=80, deadline=None)
@given(scheme=schemes, n=st.integers(2, 6), B=st.integers(1, 2), data=st.data())
def test_effective_pattern_conforms_and_deadlines_hold(scheme, n, B, data):
    W = B + 1 if scheme != "m-sgc" else B + data.draw(st.integers(1, 2))
    lam = data.draw(st.integers(1, n))
    s = data.draw(st.integers(0, n - 1))
    J = data.draw(st.integers(1, 10))
    T = scheme_T(scheme, B, W)
    seed = data.draw(st.integers(0, 10**5))
    pat = gen_uniform(n, J + T, data.draw(st.floats(0, 1)), seed)
    cfg = SimConfig(scheme, n, J=J, B=B, W=W, lam=lam, s=s, pattern=pat, seed=seed, dim=2)
    rep = run(cfg)
    model = make_runner(cfg, GradientOracle(2, seed)).default_model()
    assert conforms(rep.effective, model)
    assert rep.max_delay <= T
    assert max(rep.residuals) <= 1e-8
    # waited rounds have no effective stragglers, accepted rounds keep the candidate
    for t in range(1, J + T + 1):
        if rep.waited[t - 1]:
            assert rep.stragglers[t - 1] == []
        else:
            assert rep.stragglers[t - 1] == pat.stragglers(t)
