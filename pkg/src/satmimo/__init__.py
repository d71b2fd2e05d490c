"""Distributed multi-satellite MIMO downlink precoding for multi-antenna
ground users: joint non-coherent WMMSE design under general convex power
constraints, and streamwise transmission with eigenmode-based
stream-satellite assignment, evaluated by Monte-Carlo spectral efficiency."""

from .errors import ConfigError, InfeasibleError, NumericsError, ValidationError
from .scenario import (LinkStatistics, ScenarioConfig, load_scenario,
                       path_gain, sample_geometry, slant_range)
from .channel import (ChannelRealization, EffectiveChannel, aggregate,
                      aggregate_all, effective_channels, sample_realization,
                      ula_response)
from .power import (PowerConstraintSet, make_constraint_set, per_antenna,
                    per_sat_total, residuals)
from .se_eval import SEReport, approx_se, approx_vs_exact_gap, exact_se_mc, mc_rng
from .assignment import brute_force_assignment, max_weight_assignment
from .ellipsoid import EllipsoidParams, solve_multipliers
from .joint_wmmse import (SolverParams, SolveTrace, WmmseState,
                          init_precoders, wmmse_state)
from .joint_wmmse import solve as solve_joint
from .streamwise import (StreamAssignment, StreamwisePrecoderSet, associate,
                         participation_factors, sat_selection_score,
                         solve_streamwise, to_joint_form)
from .baselines import (mmse_baseline, random_association, tdma_mrt_baseline,
                        zf_baseline)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "InfeasibleError", "NumericsError", "ValidationError",
    "LinkStatistics", "ScenarioConfig", "load_scenario", "path_gain",
    "sample_geometry", "slant_range",
    "ChannelRealization", "EffectiveChannel", "aggregate", "aggregate_all",
    "effective_channels", "sample_realization", "ula_response",
    "PowerConstraintSet", "make_constraint_set", "per_antenna",
    "per_sat_total", "residuals",
    "SEReport", "approx_se", "approx_vs_exact_gap", "exact_se_mc", "mc_rng",
    "brute_force_assignment", "max_weight_assignment",
    "EllipsoidParams", "solve_multipliers",
    "SolverParams", "SolveTrace", "WmmseState", "init_precoders",
    "wmmse_state", "solve_joint",
    "StreamAssignment", "StreamwisePrecoderSet", "associate",
    "participation_factors", "sat_selection_score", "solve_streamwise",
    "to_joint_form",
    "mmse_baseline", "random_association", "tdma_mrt_baseline", "zf_baseline",
]
