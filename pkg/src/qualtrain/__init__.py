"""Distortion-robust CIFAR-10 training with SSIM-weighted label smoothing."""

__version__ = "0.1.0"
