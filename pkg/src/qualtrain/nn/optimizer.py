"""SGD with a stepped exponential learning-rate schedule.

lr(epoch) = initial * decay^floor(epoch / decay_every); defaults follow
the 0.1 / x0.1-every-350-epochs schedule with weight decay 0.004 on the
two hidden fc layers.  Weight-decay gradients are produced by the
network's backward pass; the step itself is a plain (optionally momentum)
update.
"""

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigurationError
from .network import ModelParams


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 100
    epochs: int = 2000
    learning_rate: float = 0.1
    lr_decay: float = 0.1
    lr_decay_every: int = 350
    weight_decay: float = 0.004
    momentum: float = 0.0
    seed: int = 0
    loss: str = "squared"  # or "cross_entropy"

    def __post_init__(self):
        if min(self.batch_size, self.epochs, self.lr_decay_every) <= 0:
            raise ConfigurationError("batch_size, epochs, lr_decay_every must be positive")
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 < self.lr_decay < 1.0:
            raise ConfigurationError(f"lr_decay must lie in (0, 1), got {self.lr_decay}")
        if self.weight_decay < 0 or self.momentum < 0:
            raise ConfigurationError("weight_decay and momentum must be non-negative")
        if self.loss not in ("squared", "cross_entropy"):
            raise ConfigurationError(f"unknown loss {self.loss!r}")

    def hash(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


def learning_rate(config: TrainingConfig, epoch: int) -> float:
    return config.learning_rate * config.lr_decay ** (epoch // config.lr_decay_every)


def sgd_step(params: ModelParams, grads: dict[str, np.ndarray],
             config: TrainingConfig, epoch: int,
             velocity: dict[str, np.ndarray] | None = None) -> ModelParams:
    """In-place update: params <- params - lr(epoch) * step direction."""
    lr = learning_rate(config, epoch)
    for name in params.names:
        g = grads[name]
        if config.momentum > 0.0:
            v = velocity[name]
            v *= config.momentum
            v += g
            g = v
        params.tensors[name] -= (lr * g).astype(params[name].dtype, copy=False)
    return params


def zero_velocity(params: ModelParams) -> dict[str, np.ndarray]:
    return {n: np.zeros_like(params[n]) for n in params.names}
