"""Full-reference SSIM scoring and the score transform used for training targets.

SSIM is computed on luminance only (Rec. 601 weights, byte scale L = 255)
with the canonical 11x11 Gaussian window, sigma 1.5, valid-region window
placement: a 32x32 input yields a 22x22 score map whose mean is the raw
score.  The transform clamps the raw score into (0, 1] so it can serve as
the true-class probability mass of a label distribution.
"""

from dataclasses import dataclass

import numpy as np
import scipy.ndimage

from .errors import DimensionError

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
DYNAMIC_RANGE = 255.0
C1 = (0.01 * DYNAMIC_RANGE) ** 2
C2 = (0.03 * DYNAMIC_RANGE) ** 2
SCORE_FLOOR = 1e-3

REC601 = np.array([0.299, 0.587, 0.114])


def _window_1d() -> np.ndarray:
    half = (WINDOW_SIZE - 1) / 2.0
    x = np.arange(WINDOW_SIZE, dtype=np.float64) - half
    k = np.exp(-(x * x) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA))
    return k / k.sum()

_WIN = _window_1d()
_MARGIN = (WINDOW_SIZE - 1) // 2


@dataclass(frozen=True)
class QualityScore:
    raw: float
    transformed: float


def luminance(img: np.ndarray) -> np.ndarray:
    """uint8 (..., H, W, 3) -> float64 luminance on the byte scale."""
    return np.asarray(img, dtype=np.float64) @ REC601


def _filter_valid(stack: np.ndarray) -> np.ndarray:
    """Gaussian-weighted window means over (..., H, W), valid region only."""
    out = scipy.ndimage.convolve1d(stack, _WIN, axis=-1, mode="constant")
    out = scipy.ndimage.convolve1d(out, _WIN, axis=-2, mode="constant")
    return out[..., _MARGIN:-_MARGIN, _MARGIN:-_MARGIN]


def ssim_map(reference: np.ndarray, distorted: np.ndarray) -> np.ndarray:
    """Per-window SSIM over luminance; inputs uint8 (..., H, W, 3)."""
    reference = np.asarray(reference)
    distorted = np.asarray(distorted)
    if reference.shape != distorted.shape:
        raise DimensionError(
            f"ssim: image shapes differ, {reference.shape} vs {distorted.shape}")
    if reference.shape[-2] < WINDOW_SIZE or reference.shape[-3] < WINDOW_SIZE:
        raise DimensionError(
            f"ssim: images smaller than the {WINDOW_SIZE}x{WINDOW_SIZE} window")
    x = luminance(reference)
    y = luminance(distorted)
    mu_x = _filter_valid(x)
    mu_y = _filter_valid(y)
    var_x = _filter_valid(x * x) - mu_x * mu_x
    var_y = _filter_valid(y * y) - mu_y * mu_y
    cov = _filter_valid(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + C1) * (2.0 * cov + C2)
    den = (mu_x * mu_x + mu_y * mu_y + C1) * (var_x + var_y + C2)
    return num / den


def ssim_raw_batch(references: np.ndarray, distorteds: np.ndarray) -> np.ndarray:
    """Mean SSIM per image pair; inputs (N, H, W, 3) uint8, output (N,)."""
    return ssim_map(references, distorteds).mean(axis=(-2, -1))


def transform(raw: float) -> float:
    """Map a raw SSIM score into (0, 1]: identity with a floor clamp at 1e-3."""
    return float(min(max(raw, SCORE_FLOOR), 1.0))


def transform_batch(raws: np.ndarray) -> np.ndarray:
    return np.clip(raws, SCORE_FLOOR, 1.0)


def ssim(reference: np.ndarray, distorted: np.ndarray) -> QualityScore:
    """Score one distorted image against its pristine original."""
    raw = float(ssim_map(reference, distorted).mean())
    return QualityScore(raw=raw, transformed=transform(raw))
