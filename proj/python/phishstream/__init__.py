"""Streaming phishing detection on a continuous-time transaction graph."""

from ._core import (
    Dataset,
    GenConfig,
    ModelParams,
    PhishstreamError,
    TrainConfig,
    __version__,
    ablate,
    aggregate_storage,
    attention_head,
    auc,
    evaluate,
    load_checkpoint,
    multi_head_attention,
    save_checkpoint,
    softmax,
    tpr_fpr,
    train,
    write_synthetic,
    youden_threshold,
)

__all__ = [
    "Dataset",
    "GenConfig",
    "ModelParams",
    "PhishstreamError",
    "TrainConfig",
    "__version__",
    "ablate",
    "aggregate_storage",
    "attention_head",
    "auc",
    "evaluate",
    "load_checkpoint",
    "multi_head_attention",
    "save_checkpoint",
    "softmax",
    "tpr_fpr",
    "train",
    "write_synthetic",
    "youden_threshold",
]
