"""Byte/unit image representation and conversions.

Images travel through the pipeline as uint8 arrays of shape (H, W, 3) in
RGB order.  The normalized view divides by 255; going back rounds half
away from zero, so byte -> unit -> byte is the identity.
"""

import hashlib

import numpy as np

from .errors import DimensionError

IMAGE_SIDE = 32
CHANNELS = 3


def require_image(arr: np.ndarray, name: str = "image") -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != CHANNELS:
        raise DimensionError(f"{name}: expected (H, W, 3) array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise DimensionError(f"{name}: expected uint8 pixels, got {arr.dtype}")
    return arr


def to_unit(img: np.ndarray) -> np.ndarray:
    """uint8 bytes -> float64 values in [0, 1]."""
    return np.asarray(img, dtype=np.float64) / 255.0


def to_bytes(img: np.ndarray) -> np.ndarray:
    """float values in [0, 1] -> uint8, rounding half away from zero."""
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def round_to_bytes_255(arr: np.ndarray) -> np.ndarray:
    """float values on the byte scale -> uint8, rounding half away from zero."""
    arr = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 255.0)
    return np.floor(arr + 0.5).astype(np.uint8)


def content_digest(img: np.ndarray) -> str:
    """Stable hex digest of an image's raw bytes (C order)."""
    return hashlib.sha256(np.ascontiguousarray(img).tobytes()).hexdigest()
