"""Python access to the vrag core: structured-response parsing, rewards,
retrieval, metrics, and the CLI pipeline."""

from vragkit._core import (
    VectorIndex,
    VragError,
    __version__,
    assemble_bundle,
    batch_reward,
    canonicalize_fcot,
    classify_sample,
    conflict_reward,
    cost_ratio,
    cross_judge_average,
    detect_conflict,
    extract_s1_pred,
    group_advantages,
    parse_fcot,
    parse_judge_reply,
    robustness_rate,
    run_cli,
    score_rollout,
    training_recipe,
    video_level_auc,
    weighted_robustness,
    write_synthetic_workspace,
)

__all__ = [
    "VectorIndex",
    "VragError",
    "__version__",
    "assemble_bundle",
    "batch_reward",
    "canonicalize_fcot",
    "classify_sample",
    "conflict_reward",
    "cost_ratio",
    "cross_judge_average",
    "detect_conflict",
    "extract_s1_pred",
    "group_advantages",
    "parse_fcot",
    "parse_judge_reply",
    "robustness_rate",
    "run_cli",
    "score_rollout",
    "training_recipe",
    "video_level_auc",
    "weighted_robustness",
    "write_synthetic_workspace",
]
