"""Hierarchical Bayesian regression discontinuity for grouped data."""

__version__ = "0.1.0"

from .bandwidth import (
    BandwidthPlan,
    build_candidate_grid,
    fit_adaptive,
    fit_at_bandwidths,
    hyvarinen_score_binary,
    hyvarinen_score_continuous,
    select_global_bandwidth,
    select_local_bandwidths,
)
from .baseline import FreqEstimate, baseline_bandwidth, fit_pooled, fit_separate_wls
from .chain import ModelSpec
from .data import ChainState, Dataset, GroupData, Hyperparams, PosteriorDraws, validate
from .estimators import HierarchicalRDD, PooledRDD, SeparateRDD
from .gibbs_binary import BinaryGibbs, run_chain_binary
from .gibbs_continuous import ContinuousGibbs, run_chain_continuous
from .io import load_csv, write_summaries
from .simulation import DGPConfig, MetricsReport, compute_metrics, generate_dataset, run_replications

__all__ = [
    "BandwidthPlan", "BinaryGibbs", "ChainState", "ContinuousGibbs", "DGPConfig", "Dataset",
    "FreqEstimate", "GroupData", "HierarchicalRDD", "Hyperparams", "MetricsReport",
    "ModelSpec", "PooledRDD", "PosteriorDraws", "SeparateRDD", "baseline_bandwidth",
    "build_candidate_grid", "compute_metrics", "fit_adaptive", "fit_at_bandwidths",
    "fit_pooled", "fit_separate_wls", "generate_dataset", "hyvarinen_score_binary",
    "hyvarinen_score_continuous", "load_csv", "run_chain_binary", "run_chain_continuous",
    "run_replications", "select_global_bandwidth", "select_local_bandwidths", "validate",
    "write_summaries",
]
