"""Compute-and-forward rate analysis for Gaussian multiple-access channels."""

__version__ = "0.1.0"

from ._accel import USE_NUMBA, backend_name
from .channel import (
    ChannelConfig,
    RateTuple,
    RegionCurve,
    capacity_region_2user,
    corner_points,
    log_plus,
    single_user_capacities,
    sum_capacity,
)
from .comp_rate import computation_rate_tuple, optimal_alpha
from .two_user import TwoSumChoice, classify, dominant_face_sweep, message_rates_two_sums
from .k_user import CoefficientMatrix, message_rates_k, p_star, sym_equalize_betas
from .dirty_mac import DirtyConfig, DirtyParams, message_rates_dirty, optimize_gamma, single_sum_rate

__all__ = [
    "USE_NUMBA",
    "backend_name",
    "ChannelConfig",
    "RateTuple",
    "RegionCurve",
    "capacity_region_2user",
    "corner_points",
    "log_plus",
    "single_user_capacities",
    "sum_capacity",
    "computation_rate_tuple",
    "optimal_alpha",
    "TwoSumChoice",
    "classify",
    "dominant_face_sweep",
    "message_rates_two_sums",
    "CoefficientMatrix",
    "message_rates_k",
    "p_star",
    "sym_equalize_betas",
    "DirtyConfig",
    "DirtyParams",
    "message_rates_dirty",
    "optimize_gamma",
    "single_sum_rate",
]
