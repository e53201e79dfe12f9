"""Python access to the labseq C++ core."""

from ._labseq import (
    LabseqError,
    ModelParams,
    RunConfig,
    auc,
    auc_pairwise,
    bce_loss,
    bootstrap_auc_ci,
    confusion_at,
    embedding,
    forward_logit,
    gradient,
    init_params,
    largest_remainder_counts,
    load_checkpoint,
    nearest_neighbor_purity,
    predict_proba,
    roc_points,
    run_all,
    run_stage,
    stage_names,
    stage_seed,
    tsne,
)

__all__ = [name for name in dir() if not name.startswith("_")]
