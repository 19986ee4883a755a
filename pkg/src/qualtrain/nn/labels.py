"""Target label distributions and the distribution-distance loss.

Two constructors: the classical 0-1 distribution, and the quality-smoothed
distribution that puts the image's transformed quality score s on the true
class and spreads the remaining (1 - s) uniformly over the other classes.
At s = 1 both coincide.
"""

import numpy as np

from ..errors import LabelError, ScoreError

NUM_CLASSES = 10


def onehot(y: int, num_classes: int = NUM_CLASSES) -> np.ndarray:
    if not 0 <= y < num_classes:
        raise LabelError(f"label {y} outside [0, {num_classes})")
    out = np.zeros(num_classes)
    out[y] = 1.0
    return out


def smooth_labels(y: int, s: float, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """probs[y] = s, probs[k != y] = (1 - s) / (K - 1)."""
    if not 0 <= y < num_classes:
        raise LabelError(f"label {y} outside [0, {num_classes})")
    if not 0.0 < s <= 1.0:
        raise ScoreError(f"quality score {s} outside (0, 1]")
    out = np.full(num_classes, (1.0 - s) / (num_classes - 1))
    out[y] = s
    return out


def loss(p: np.ndarray, q: np.ndarray) -> float:
    """Squared Euclidean distance between two distributions."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return float(((p - q) ** 2).sum())


def onehot_batch(labels: np.ndarray, num_classes: int = NUM_CLASSES) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelError(f"labels outside [0, {num_classes})")
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def smooth_labels_batch(labels: np.ndarray, scores: np.ndarray,
                        num_classes: int = NUM_CLASSES) -> np.ndarray:
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelError(f"labels outside [0, {num_classes})")
    if scores.size and (scores.min() <= 0.0 or scores.max() > 1.0):
        raise ScoreError("quality scores outside (0, 1]")
    out = np.repeat(((1.0 - scores) / (num_classes - 1))[:, None], num_classes, axis=1)
    out[np.arange(len(labels)), labels] = scores
    return out
