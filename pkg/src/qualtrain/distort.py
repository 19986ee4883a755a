"""Seeded distortion generators: Gaussian blur, white Gaussian noise, JPEG.

Each distortion family comes in three fixed levels:

=======  ==========  ==========  ==========
family   level 1     level 2     level 3
=======  ==========  ==========  ==========
blur     sigma 0.7   sigma 1.0   sigma 1.2
noise    var 0.005   var 0.01    var 0.02
jpeg     Q 12        Q 8         Q 4
=======  ==========  ==========  ==========

Blur and JPEG are pure functions of the image; noise additionally depends
on an explicit seed.  All generators take and return uint8 (H, W, 3)
rasters (batch variants take (N, H, W, 3)).
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.ndimage

from . import jpegcodec
from .errors import ParameterError
from .imageops import round_to_bytes_255, to_bytes, to_unit
from .rng import generator

KINDS = ("blur", "noise", "jpeg")

BLUR_SIGMAS = (0.7, 1.0, 1.2)
NOISE_VARIANCES = (0.005, 0.01, 0.02)
JPEG_QUALITIES = (12, 8, 4)


@dataclass(frozen=True)
class DistortionSpec:
    """One distortion family at one of the three fixed levels."""

    kind: str
    level: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown distortion kind {self.kind!r}")
        if self.level not in (1, 2, 3):
            raise ParameterError(f"distortion level must be 1, 2 or 3, got {self.level}")

    @property
    def sigma(self) -> float | None:
        return BLUR_SIGMAS[self.level - 1] if self.kind == "blur" else None

    @property
    def variance(self) -> float | None:
        return NOISE_VARIANCES[self.level - 1] if self.kind == "noise" else None

    @property
    def quality(self) -> int | None:
        return JPEG_QUALITIES[self.level - 1] if self.kind == "jpeg" else None

    @property
    def name(self) -> str:
        return f"{self.kind}-{self.level}"


def all_specs() -> list[DistortionSpec]:
    return [DistortionSpec(kind, level) for kind in KINDS for level in (1, 2, 3)]


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps, truncated at radius ceil(3*sigma)."""
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur_batch(imgs: np.ndarray, sigma: float) -> np.ndarray:
    """Blur uint8 images (..., H, W, 3); separable, mirror-padded borders."""
    if sigma < 0:
        raise ParameterError(f"blur sigma must be >= 0, got {sigma}")
    imgs = np.asarray(imgs)
    if sigma == 0:
        return imgs.copy()
    k = gaussian_kernel_1d(sigma)
    out = imgs.astype(np.float64)
    # scipy's "reflect" duplicates the edge sample (numpy pad "symmetric")
    out = scipy.ndimage.convolve1d(out, k, axis=-3, mode="reflect")
    out = scipy.ndimage.convolve1d(out, k, axis=-2, mode="reflect")
    return round_to_bytes_255(out)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    return gaussian_blur_batch(img, sigma)


def add_gaussian_noise(img: np.ndarray, variance: float, seed: int) -> np.ndarray:
    """Add white Gaussian noise in the normalized [0, 1] domain, clamp, requantize."""
    if variance < 0:
        raise ParameterError(f"noise variance must be >= 0, got {variance}")
    img = np.asarray(img)
    if variance == 0:
        return img.copy()
    rng = generator("noise", seed)
    noisy = to_unit(img) + rng.standard_normal(img.shape) * math.sqrt(variance)
    return to_bytes(noisy)


def add_gaussian_noise_batch(imgs: np.ndarray, variance: float, seeds) -> np.ndarray:
    """Per-image seeded noise; identical to add_gaussian_noise per sample."""
    imgs = np.asarray(imgs)
    out = np.empty_like(imgs)
    for i, seed in enumerate(seeds):
        out[i] = add_gaussian_noise(imgs[i], variance, seed)
    return out


def jpeg_roundtrip(img: np.ndarray, quality: int) -> np.ndarray:
    """Baseline JPEG encode at the given quality factor, then decode."""
    return jpegcodec.decode(jpegcodec.encode(img, quality))


def jpeg_roundtrip_batch(imgs: np.ndarray, quality: int) -> np.ndarray:
    """Bulk JPEG degradation via the codec's lossless-entropy shortcut.

    Byte-identical to jpeg_roundtrip on every image (the bitstream stage
    preserves quantized coefficients exactly).
    """
    return jpegcodec.quantize_roundtrip(imgs, quality)


def apply(spec: DistortionSpec, img: np.ndarray, seed: int = 0) -> np.ndarray:
    """Apply one distortion; seed only affects the noise family."""
    if spec.kind == "blur":
        return gaussian_blur(img, spec.sigma)
    if spec.kind == "noise":
        return add_gaussian_noise(img, spec.variance, seed)
    return jpeg_roundtrip(img, spec.quality)


def apply_batch(spec: DistortionSpec, imgs: np.ndarray, seeds=None) -> np.ndarray:
    """Batched apply; seeds is required (one per image) for noise."""
    if spec.kind == "blur":
        return gaussian_blur_batch(imgs, spec.sigma)
    if spec.kind == "noise":
        if seeds is None:
            raise ParameterError("noise distortion requires per-image seeds")
        return add_gaussian_noise_batch(imgs, spec.variance, seeds)
    return jpeg_roundtrip_batch(imgs, spec.quality)
