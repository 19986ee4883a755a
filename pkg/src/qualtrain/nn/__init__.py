"""Hand-derived convolutional classifier, label constructors, and SGD."""

from .labels import loss, onehot, onehot_batch, smooth_labels, smooth_labels_batch
from .network import (
    DEFAULT_ARCH,
    Architecture,
    ModelParams,
    backward,
    batch_loss,
    decay_penalty,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .optimizer import TrainingConfig, learning_rate, sgd_step, zero_velocity

__all__ = [
    "Architecture", "DEFAULT_ARCH", "ModelParams", "TrainingConfig",
    "backward", "batch_loss", "decay_penalty", "forward", "init_params",
    "learning_rate", "load_checkpoint", "loss", "onehot", "onehot_batch",
    "save_checkpoint", "sgd_step", "smooth_labels", "smooth_labels_batch",
    "zero_velocity",
]
