"""Fairness-aware online batch selection for training under label bias."""

from .data import (BiasSpec, DatasetTable, Example, GenSpec,
                   generate_synthetic, group_statistics, inject_label_bias,
                   load_table, save_table, split_table)
from .estimator import FairSelectionClassifier
from .model import ModelSpec, OptimizerState
from .proxy import (NoisyOracleProxy, PeerContext, build_holdout_proxy,
                    load_file_proxy, peer_expectation, proxy_loss)
from .selection import ScoredCandidate, SelectorConfig, fair_score, \
    score_candidates, select_top
from .trainer import MetricsLog, TrainerConfig, run_training, sweep

__all__ = [
    "BiasSpec", "DatasetTable", "Example", "FairSelectionClassifier",
    "GenSpec", "MetricsLog", "ModelSpec", "NoisyOracleProxy",
    "OptimizerState", "PeerContext", "ScoredCandidate", "SelectorConfig",
    "TrainerConfig", "build_holdout_proxy", "fair_score",
    "generate_synthetic", "group_statistics", "inject_label_bias",
    "load_file_proxy", "load_table", "peer_expectation", "proxy_loss",
    "run_training", "save_table", "score_candidates", "select_top",
    "split_table", "sweep",
]

__version__ = "0.1.0"
