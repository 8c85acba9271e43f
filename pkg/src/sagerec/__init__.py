"""Slate-policy optimization with adaptive gradient bounds.

Submodules split by concern: ``policy`` (the toy autoregressive slate
policy), ``signals`` (ratios and advantage normalization), ``bounds``
(adaptive denominators and baseline coefficients), ``simenv`` (synthetic
interaction world), ``metrics`` (ranking and diversity evaluation),
``trainer`` (the optimization loop), ``config`` (experiment files) and
``cli`` (the operator surface).
"""

from __future__ import annotations

from .bounds import (
    BoundConfig,
    EntropyTracker,
    boundary_curve,
    effective_coefficient,
    entropy_penalty_scale,
    gbpo_coefficient,
    grpo_clip_coefficient,
    list_entropy,
    update_entropy_ema,
)
from .config import ConfigError, ExperimentConfig, MetricConfig, load_experiment_config
from .metrics import (
    RankedRecommendation,
    cold_recall,
    entropy_at_k,
    evaluate_rankings,
    ild,
    ndcg_at_k,
    recall_at_k,
)
from .policy import (
    FrozenPolicy,
    PolicyGradient,
    PolicyParams,
    Slate,
    init_policy,
    load_checkpoint,
    sample_slate,
    save_checkpoint,
    slate_log_prob,
    snapshot,
)
from .signals import (
    TrajectoryGroup,
    batch_normalize,
    decoupled_advantage,
    group_normalize,
    naive_advantage,
    sequence_ratio,
)
from .simenv import Catalog, UserModel, World, WorldConfig, build_world
from .trainer import (
    ExperimentReport,
    StepRecord,
    TrainConfig,
    TrainResult,
    collect_group,
    compute_gradient,
    evaluate_policy,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BoundConfig",
    "Catalog",
    "ConfigError",
    "EntropyTracker",
    "ExperimentConfig",
    "ExperimentReport",
    "FrozenPolicy",
    "MetricConfig",
    "PolicyGradient",
    "PolicyParams",
    "RankedRecommendation",
    "Slate",
    "StepRecord",
    "TrainConfig",
    "TrainResult",
    "TrajectoryGroup",
    "UserModel",
    "World",
    "WorldConfig",
    "batch_normalize",
    "boundary_curve",
    "build_world",
    "cold_recall",
    "collect_group",
    "compute_gradient",
    "decoupled_advantage",
    "effective_coefficient",
    "entropy_at_k",
    "entropy_penalty_scale",
    "evaluate_policy",
    "evaluate_rankings",
    "gbpo_coefficient",
    "group_normalize",
    "grpo_clip_coefficient",
    "ild",
    "init_policy",
    "list_entropy",
    "load_checkpoint",
    "load_experiment_config",
    "naive_advantage",
    "ndcg_at_k",
    "recall_at_k",
    "sample_slate",
    "save_checkpoint",
    "sequence_ratio",
    "slate_log_prob",
    "snapshot",
    "train",
    "update_entropy_ema",
]
