"""Adaptive-sampling data market simulator."""
from .clipped_simplex import Distribution, kl_project, multiplicative_tilt, osmd_update
from .market import AccessLedger, MarketConfig, RunTrace, allocate_revenue, apply_updates, run_market
from .regret import RegretReport, UtilityTrace, compute_regret, oracle_value, theorem_bound
from .sampler import Batch, SamplerState, UtilityEstimate, estimate_utilities, sample_batch, step

__version__ = "0.1.0"
