from .core import AdamState, adam_init, adam_step, relu, softmax_cross_entropy
from .model import (
    ArchSpec,
    BadMagic,
    CnnModel,
    ConvSpec,
    REDUCED_ARCH,
    ShapeMismatch,
    ShapeMismatchWithArch,
    Truncated,
    build_model,
    cast_model,
    forward,
    load_weights,
    loss_and_grads,
    predict,
    save_weights,
)
from .train import (
    EmptySplit,
    EmptyTrainSplit,
    EvalReport,
    TrainConfig,
    evaluate,
    history_csv,
    load_split,
    train,
)

__all__ = [
    "AdamState",
    "ArchSpec",
    "BadMagic",
    "CnnModel",
    "ConvSpec",
    "EmptySplit",
    "EmptyTrainSplit",
    "EvalReport",
    "REDUCED_ARCH",
    "ShapeMismatch",
    "ShapeMismatchWithArch",
    "TrainConfig",
    "Truncated",
    "adam_init",
    "adam_step",
    "build_model",
    "cast_model",
    "evaluate",
    "forward",
    "history_csv",
    "load_split",
    "load_weights",
    "loss_and_grads",
    "predict",
    "relu",
    "save_weights",
    "softmax_cross_entropy",
    "train",
]
