"""Sequential gradient coding: GC baselines, SR-SGC, M-SGC, a round simulator
with straggler-model wait-outs, load lower bounds and a delay-profile tuner."""

from seqgrad.bounds import lb_arbitrary, lb_bursty, optimality_gap
from seqgrad.errors import (
    AdjustmentError,
    ConstructionError,
    DecodeError,
    FitError,
    InsufficientResultsError,
    ParameterError,
    SeqGradError,
    SimulationInvariantError,
)
from seqgrad.gc import GcCode, GcRepCode, GradientOracle, build_gc, build_gc_rep, gc_decode, gc_rep_decode
from seqgrad.m_sgc import MSgcParams, derive_m_params, m_assign_round, m_decode_job
from seqgrad.simulator import SimConfig, SimReport, run, waitout_rule
from seqgrad.sr_sgc import SrSgcParams, derive_sr_params, sr_assign_round, sr_rep_assign_round
from seqgrad.straggler import (
    ArbitraryModel,
    BurstyModel,
    DelayProfile,
    PerRoundModel,
    StragglerPattern,
    conforms,
)
from seqgrad.tuner import adjust_profile, estimate_runtime, fit_slope, grid_search

__version__ = "0.1.0"

__all__ = [
    "AdjustmentError", "ArbitraryModel", "BurstyModel", "ConstructionError", "DecodeError",
    "DelayProfile", "FitError", "GcCode", "GcRepCode", "GradientOracle", "InsufficientResultsError",
    "MSgcParams", "ParameterError", "PerRoundModel", "SeqGradError", "SimConfig", "SimReport",
    "SimulationInvariantError", "SrSgcParams", "StragglerPattern", "adjust_profile", "build_gc",
    "build_gc_rep", "conforms", "derive_m_params", "derive_sr_params", "estimate_runtime",
    "fit_slope", "gc_decode", "gc_rep_decode", "grid_search", "lb_arbitrary", "lb_bursty",
    "m_assign_round", "m_decode_job", "optimality_gap", "run", "sr_assign_round",
    "sr_rep_assign_round", "waitout_rule",
]
