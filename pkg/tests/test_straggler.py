import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqgrad.errors import ParameterError
from seqgrad.straggler import (
    ArbitraryModel,
    BurstyModel,
    DelayProfile,
    EitherModel,
    GeParams,
    GroupCoverModel,
    PerRoundModel,
    StragglerPattern,
    WindowUnion,
    check_arbitrary,
    check_bursty,
    check_per_round,
    conforms,
    first_violation,
    gen_conforming,
    gen_ge,
    gen_periodic_arbitrary,
    gen_periodic_bursty,
    gen_uniform,
    pattern_from_profile,
    profile_from_pattern,
    read_pattern,
    read_profile,
    write_pattern,
    write_profile,
)


def worked_example_pattern(rounds=8):
    # workers 0 and 1 straggle in round 2, worker 1 also in round 3
    return StragglerPattern.from_sets(4, rounds, {2: [0, 1], 3: [1]})


def test_pattern_columns_are_one_indexed():
    p = worked_example_pattern()
    assert p.stragglers(2) == [0, 1]
    assert p.stragglers(3) == [1]
    assert p.stragglers(1) == []


def test_pattern_rejects_non_binary():
    with pytest.raises(ParameterError):
        StragglerPattern(np.array([[0, 2]]))


def test_profile_rejects_non_positive():
    with pytest.raises(ParameterError):
        DelayProfile(np.array([[1.0, 0.0]]))


def test_worked_example_conforms_to_bursty():
    p = worked_example_pattern()
    assert check_bursty(p, BurstyModel(2, 3, 2))
    assert not check_bursty(p, BurstyModel(1, 3, 2))  # worker 1 has a burst of 2
    assert not check_bursty(p, BurstyModel(2, 3, 1))  # two distinct stragglers in one window


def test_burst_span_counts_gaps():
    # straggle at rounds 1 and 3 inside one window of 3: span 3 > B=2
    p = StragglerPattern.from_sets(2, 3, {1: [0], 3: [0]})
    assert not conforms(p, BurstyModel(2, 3, 1))
    assert conforms(p, ArbitraryModel(2, 3, 1))


def test_arbitrary_counts_rounds():
    p = StragglerPattern.from_sets(3, 4, {1: [0], 2: [0], 4: [0]})
    assert check_arbitrary(p, ArbitraryModel(2, 3, 1))
    assert not check_arbitrary(p, ArbitraryModel(2, 4, 1))


def test_per_round():
    p = StragglerPattern.from_sets(4, 2, {1: [0, 1, 2]})
    assert check_per_round(p, PerRoundModel(3))
    assert not check_per_round(p, PerRoundModel(2))


def test_group_cover():
    ok = StragglerPattern.from_sets(6, 1, {1: [0, 1, 3, 4]})
    bad = StragglerPattern.from_sets(6, 1, {1: [0, 1, 2]})
    m = GroupCoverModel(3)
    assert conforms(ok, m) and not conforms(bad, m)


def test_short_horizon_checks_truncated_window():
    p = StragglerPattern.from_sets(3, 2, {1: [0], 2: [1]})
    assert not conforms(p, BurstyModel(1, 5, 1))
    assert conforms(p, BurstyModel(1, 5, 2))


def test_window_union_is_per_window():
    # round 1 breaks per-round s=1 but is fine for bursty; round 5 the reverse
    p = StragglerPattern.from_sets(3, 5, {1: [0, 1], 4: [2], 5: [2]})
    bursty, per_round = BurstyModel(1, 2, 2), PerRoundModel(1)
    assert not conforms(p, bursty) and not conforms(p, per_round)
    assert conforms(p, WindowUnion((bursty, per_round), 2))


def test_either_model_is_whole_pattern():
    p = StragglerPattern.from_sets(3, 5, {1: [0, 1], 4: [2], 5: [2]})
    assert not conforms(p, EitherModel((BurstyModel(1, 2, 2), PerRoundModel(1))))
    assert conforms(p, EitherModel((BurstyModel(2, 2, 2), PerRoundModel(1))))


def test_first_violation():
    p = StragglerPattern.from_sets(2, 6, {4: [0], 5: [0]})
    assert first_violation(p, BurstyModel(1, 2, 1)) == 4
    assert first_violation(p, BurstyModel(2, 2, 1)) is None


@pytest.mark.parametrize("B,W,lam", [(1, 2, 3), (2, 3, 2), (2, 5, 4), (3, 4, 1), (2, 2, 2)])
def test_periodic_bursty_conforms(B, W, lam):
    p = gen_periodic_bursty(5, 30, BurstyModel(B, W, lam))
    assert conforms(p, BurstyModel(B, W, lam))
    assert p.S.any()


def test_periodic_bursty_shape():
    p = gen_periodic_bursty(4, 6, BurstyModel(1, 2, 4))
    assert p.S[:, 0].all() and not p.S[:, 1].any() and p.S[:, 2].all()


@pytest.mark.parametrize("N,W,lam", [(1, 2, 3), (2, 4, 2), (3, 5, 5)])
def test_periodic_arbitrary_conforms(N, W, lam):
    p = gen_periodic_arbitrary(5, 25, ArbitraryModel(N, W, lam))
    assert conforms(p, ArbitraryModel(N, W, lam))


def test_ge_without_transitions_is_empty():
    assert not gen_ge(8, 20, GeParams(0.0, 0.0, 1)).S.any()


def test_ge_always_on_after_first_round():
    p = gen_ge(3, 5, GeParams(0.0, 1.0, 1))
    assert not p.S[:, 0].any() and p.S[:, 1:].all()


def test_ge_rejects_bad_probabilities():
    with pytest.raises(ParameterError):
        GeParams(1.5, 0.1)


def test_ge_stationary_fraction():
    p = gen_ge(400, 400, GeParams(0.5, 0.05, 3))
    frac = p.S[:, 50:].mean()
    assert abs(frac - 0.05 / 0.55) < 0.01


def test_csv_round_trip(tmp_path):
    p = gen_uniform(5, 7, 0.4, seed=2)
    write_pattern(p, tmp_path / "p.csv")
    assert read_pattern(tmp_path / "p.csv") == p
    write_pattern(p, tmp_path / "q.csv", header=False)
    assert read_pattern(tmp_path / "q.csv") == p
    prof = profile_from_pattern(p, seed=4)
    write_profile(prof, tmp_path / "t.csv")
    assert np.array_equal(read_profile(tmp_path / "t.csv").times, prof.times)


def test_pattern_from_profile_threshold():
    prof = DelayProfile(np.array([[1.0, 2.0], [2.0, 2.0], [2.5, 5.0]]))
    S = pattern_from_profile(prof, mu=1.0).S
    assert S.tolist() == [[False, False], [False, False], [True, True]]


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 8), R=st.integers(1, 12), seed=st.integers(0, 10**6), p=st.floats(0, 1))
def test_profile_reproduces_pattern(n, R, seed, p):
    pat = gen_uniform(n, R, p, seed)
    # rounds where everybody straggles have no fast reference; drop them
    keep = ~pat.S.all(axis=0)
    pat = StragglerPattern(pat.S[:, keep]) if keep.any() else StragglerPattern.empty(n, 1)
    prof = profile_from_pattern(pat, seed=seed)
    assert pattern_from_profile(prof, 1.0) == pat


models = st.one_of(
    st.builds(lambda B, extra, lam: BurstyModel(B, B + extra, lam),
              st.integers(1, 3), st.integers(0, 3), st.integers(0, 5)),
    st.builds(lambda N, extra, lam: ArbitraryModel(N, N + extra, lam),
              st.integers(0, 3), st.integers(1, 3), st.integers(0, 5)),
    st.builds(PerRoundModel, st.integers(0, 4)),
)


@settings(max_examples=60, deadline=None)
@given(model=models, n=st.integers(1, 6), R=st.integers(1, 15), p=st.floats(0, 1), seed=st.integers(0, 999))
def test_generated_conforming_patterns_conform(model, n, R, p, seed):
    assert conforms(gen_conforming(n, R, model, p, seed), model)


@settings(max_examples=60, deadline=None)
@given(model=models, n=st.integers(1, 5), R=st.integers(2, 10), seed=st.integers(0, 999))
def test_removing_stragglers_preserves_conformance(model, n, R, seed):
    pat = gen_conforming(n, R, model, 0.6, seed)
    rng = np.random.default_rng(seed)
    thinned = pat.S & (rng.random(pat.S.shape) < 0.5)
    assert conforms(thinned, model)
