"""Training strategies, the evaluation grid, and confidence traces.

The nine strategies pair a label scheme (classical 0-1 targets, or
quality-smoothed targets) with a training set (pristine, or a per-epoch
mixture distorted by one family or all three).  Training is resumable:
(strategy, config, seed) fully determines the checkpoint sequence, and a
resume must match the stored architecture/config hashes.
"""

import os
import re
from dataclasses import dataclass, field

import numpy as np

from . import dataset, distort
from .errors import CheckpointError, ConfigurationError
from .nn import (
    DEFAULT_ARCH,
    Architecture,
    ModelParams,
    TrainingConfig,
    backward,
    batch_loss,
    decay_penalty,
    forward,
    init_params,
    learning_rate,
    load_checkpoint,
    onehot_batch,
    save_checkpoint,
    sgd_step,
    smooth_labels_batch,
    zero_velocity,
)
from .rng import generator

REGULARIZATIONS = ("original", "iqa_ls")
TRAINING_SETS = ("pristine", "blur", "noise", "jpeg", "all3")

_SET_DISPLAY = {
    "pristine": "Pristine", "blur": "MIX_blur", "noise": "MIX_noise",
    "jpeg": "MIX_JPEG", "all3": "MIX_all3",
}
_REG_DISPLAY = {"original": "Original", "iqa_ls": "IQA-LS"}

# Table rows 1-9: (regularization, training set)
_STRATEGY_ROWS = (
    ("original", "pristine"),
    ("original", "blur"), ("iqa_ls", "blur"),
    ("original", "noise"), ("iqa_ls", "noise"),
    ("original", "jpeg"), ("iqa_ls", "jpeg"),
    ("original", "all3"), ("iqa_ls", "all3"),
)


@dataclass(frozen=True)
class Strategy:
    id: int
    regularization: str
    training_set: str

    @property
    def mixture_kinds(self) -> tuple[str, ...] | None:
        if self.training_set == "pristine":
            return None
        if self.training_set == "all3":
            return distort.KINDS
        return (self.training_set,)

    @property
    def display(self) -> tuple[str, str]:
        return _REG_DISPLAY[self.regularization], _SET_DISPLAY[self.training_set]


def strategy(sid: int) -> Strategy:
    if not 1 <= sid <= len(_STRATEGY_ROWS):
        valid = ", ".join(
            f"{i + 1}=({_REG_DISPLAY[r]}, {_SET_DISPLAY[s]})"
            for i, (r, s) in enumerate(_STRATEGY_ROWS))
        raise ConfigurationError(f"strategy must be one of: {valid}; got {sid}")
    reg, tset = _STRATEGY_ROWS[sid - 1]
    return Strategy(sid, reg, tset)


def all_strategies() -> list[Strategy]:
    return [strategy(i) for i in range(1, len(_STRATEGY_ROWS) + 1)]


@dataclass
class EvalReport:
    """Per-test-set accuracy plus per-image confidence records."""

    accuracies: dict[str, float]
    confidence: list[dict] = field(default_factory=list)
    predictions: dict[str, np.ndarray] = field(default_factory=dict)


class CachingDistorter:
    """Mixture distorter that caches the deterministic families.

    Blur and JPEG outputs depend only on (image, level), so the full
    distorted training set is built once per (kind, level) and reused
    across epochs; noise is regenerated from the per-sample seeds.
    """

    def __init__(self):
        self._cache: dict[tuple[str, int], np.ndarray] = {}

    def __call__(self, kind: str, level: int, images: np.ndarray,
                 indices: np.ndarray, seeds) -> np.ndarray:
        spec = distort.DistortionSpec(kind, level)
        if kind == "noise":
            return distort.apply_batch(spec, images[indices], seeds)
        key = (kind, level)
        if key not in self._cache:
            self._cache[key] = distort.apply_batch(spec, images)
        return self._cache[key][indices]


CHECKPOINT_PATTERN = re.compile(r"ckpt_epoch(\d+)\.ckpt$")


def checkpoint_path(run_dir: str, epoch: int) -> str:
    return os.path.join(run_dir, f"ckpt_epoch{epoch:05d}.ckpt")


def latest_checkpoint(run_dir: str) -> str | None:
    best = None
    best_epoch = -1
    if not os.path.isdir(run_dir):
        return None
    for name in os.listdir(run_dir):
        m = CHECKPOINT_PATTERN.match(name)
        if m and int(m.group(1)) > best_epoch:
            best_epoch = int(m.group(1))
            best = os.path.join(run_dir, name)
    return best


def _epoch_targets(strat: Strategy, labels: np.ndarray, quality: np.ndarray,
                   num_classes: int) -> np.ndarray:
    if strat.regularization == "iqa_ls":
        return smooth_labels_batch(labels, quality, num_classes)
    return onehot_batch(labels, num_classes)


def _append_log(path: str, epoch: int, mean_loss: float, lr: float) -> None:
    new = not os.path.exists(path)
    with open(path, "a", encoding="ascii") as fh:
        if new:
            fh.write("epoch\tmean_loss\tlearning_rate\n")
        fh.write(f"{epoch}\t{mean_loss:.6f}\t{lr:.8g}\n")


def _trim_log(path: str, keep_below_epoch: int) -> None:
    if not os.path.exists(path):
        return
    with open(path, encoding="ascii") as fh:
        lines = fh.readlines()
    kept = [line for i, line in enumerate(lines)
            if i == 0 or int(line.split("\t")[0]) < keep_below_epoch]
    with open(path, "w", encoding="ascii") as fh:
        fh.writelines(kept)


def train(strat: Strategy, config: TrainingConfig, train_images: np.ndarray,
          train_labels: np.ndarray, run_dir: str, *,
          arch: Architecture = DEFAULT_ARCH,
          mixture_ratios=dataset.DEFAULT_RATIOS,
          checkpoint_every: int = 50, resume: bool = False,
          progress=None) -> str:
    """Run (or resume) one strategy; returns the final checkpoint path."""
    os.makedirs(run_dir, exist_ok=True)
    config_hash = config.hash()
    log_path = os.path.join(run_dir, "training_log.tsv")

    start_epoch = 0
    velocity = None
    if resume:
        last = latest_checkpoint(run_dir)
        if last is not None:
            params, header, velocity = load_checkpoint(last)
            if header["arch_hash"] != arch.hash():
                raise CheckpointError(
                    f"resume refused: checkpoint architecture {header['arch_hash']} "
                    f"!= requested {arch.hash()}")
            if header["config_hash"] != config_hash:
                raise CheckpointError(
                    f"resume refused: checkpoint config {header['config_hash']} "
                    f"!= requested {config_hash}")
            start_epoch = header["epoch"] + 1
            _trim_log(log_path, start_epoch)
        else:
            params = init_params(arch, config.seed)
    else:
        params = init_params(arch, config.seed)
    if config.momentum > 0.0 and velocity is None:
        velocity = zero_velocity(params)

    plan = None
    distorter = None
    if strat.mixture_kinds is not None:
        plan = dataset.MixturePlan(tuple(mixture_ratios), config.seed, strat.mixture_kinds)
        distorter = CachingDistorter()

    n = len(train_images)
    final_path = checkpoint_path(run_dir, config.epochs - 1)
    for epoch in range(start_epoch, config.epochs):
        if plan is not None:
            mixed, quality, _, _ = dataset.mixture_arrays(
                train_images, plan, epoch, distorter)
        else:
            mixed, quality = train_images, np.ones(n)
        targets = _epoch_targets(strat, train_labels, quality, arch.num_classes)

        perm = generator("batch-shuffle", config.seed, epoch).permutation(n)
        lr = learning_rate(config, epoch)
        total = 0.0
        batches = 0
        for lo in range(0, n, config.batch_size):
            sel = perm[lo:lo + config.batch_size]
            xb = mixed[sel].astype(np.float32) / np.float32(255.0)
            qb = targets[sel].astype(np.float32)
            _, probs, cache = forward(params, xb)
            total += batch_loss(probs, qb, config.loss) + decay_penalty(
                params, config.weight_decay)
            grads = backward(cache, qb, config.weight_decay, config.loss)
            sgd_step(params, grads, config, epoch, velocity)
            batches += 1
        mean_loss = total / max(batches, 1)
        _append_log(log_path, epoch, mean_loss, lr)
        if progress is not None:
            progress(epoch, mean_loss, lr)

        if (epoch + 1) % checkpoint_every == 0 or epoch == config.epochs - 1:
            save_checkpoint(checkpoint_path(run_dir, epoch), params,
                            epoch, config.seed, config_hash, velocity)
    return final_path


def evaluate(params: ModelParams, test_sets: dict[str, tuple[np.ndarray, np.ndarray]],
             probe_count: int = 100, batch_size: int = 200) -> EvalReport:
    """Top-1 accuracy per test set plus true-class confidences for a probe
    subset (the first probe_count images of each set)."""
    accuracies = {}
    confidence = []
    predictions = {}
    for name, (images, labels) in test_sets.items():
        preds = np.empty(len(images), dtype=np.int64)
        probs_true = np.empty(len(images), dtype=np.float64)
        for lo in range(0, len(images), batch_size):
            xb = images[lo:lo + batch_size].astype(np.float32) / np.float32(255.0)
            _, probs, _ = forward(params, xb, keep_cache=False)
            preds[lo:lo + batch_size] = probs.argmax(axis=1)
            probs_true[lo:lo + batch_size] = probs[
                np.arange(len(xb)), labels[lo:lo + batch_size]]
        accuracies[name] = float((preds == labels).mean())
        predictions[name] = preds
        for i in range(min(probe_count, len(images))):
            confidence.append({
                "set": name, "index": int(i), "label": int(labels[i]),
                "prob_true": float(probs_true[i]),
            })
    return EvalReport(accuracies=accuracies, confidence=confidence,
                      predictions=predictions)


def confidence_trace(params: ModelParams, image: np.ndarray, label: int,
                     kind: str, levels=(1, 2, 3), seed: int = 0) -> list[tuple[int, float]]:
    """True-class softmax probability at pristine (level 0) and each level."""
    variants = [image]
    for level in levels:
        variants.append(distort.apply(distort.DistortionSpec(kind, level), image, seed))
    batch = np.stack(variants).astype(np.float32) / np.float32(255.0)
    _, probs, _ = forward(params, batch, keep_cache=False)
    return [(int(lv), float(probs[i, label])) for i, lv in enumerate((0, *levels))]
