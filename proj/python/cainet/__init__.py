"""RGB-thermal semantic segmentation on a small C++ autodiff core."""

from ._core import (
    ClassCountError,
    ConfigError,
    DimensionError,
    LabelRangeError,
    Model,
    PrerequisiteError,
    attention_loss,
    aux_targets,
    enet_class_weights,
    evaluate,
    gradcheck,
    load_split,
    lovasz_softmax,
    metrics,
    synth_corpus,
    synth_scene,
    train,
)

__all__ = [
    "ClassCountError",
    "ConfigError",
    "DimensionError",
    "LabelRangeError",
    "Model",
    "PrerequisiteError",
    "attention_loss",
    "aux_targets",
    "enet_class_weights",
    "evaluate",
    "gradcheck",
    "load_split",
    "lovasz_softmax",
    "metrics",
    "synth_corpus",
    "synth_scene",
    "train",
]
