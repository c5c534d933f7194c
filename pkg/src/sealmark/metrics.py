"""PSNR and SSIM between 8-bit rasters."""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch
from .imagecore import GrayImage

PEAK = 255.0
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 8


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    x = a.as_float() if isinstance(a, GrayImage) else np.asarray(a, dtype=np.float64)
    y = b.as_float() if isinstance(b, GrayImage) else np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatch(f"image shapes differ: {x.shape} vs {y.shape}")
    return x, y


def mse(a, b) -> float:
    x, y = _pair(a, b)
    return float(np.mean((x - y) ** 2))


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical inputs."""
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(PEAK**2 / err)


def _window_sums(x: np.ndarray, w: int) -> np.ndarray:
    c = np.zeros((x.shape[0] + 1, x.shape[1] + 1))
    c[1:, 1:] = x.cumsum(axis=0).cumsum(axis=1)
    return c[w:, w:] - c[:-w, w:] - c[w:, :-w] + c[:-w, :-w]


def ssim_map(a, b, window: int = SSIM_WINDOW) -> np.ndarray:
    """SSIM of every ``window`` x ``window`` patch (stride 1, uniform weights).

    Variances and covariance use the unbiased 1/(N-1) normalisation.
    """
    x, y = _pair(a, b)
    if min(x.shape) < window:
        raise DimensionMismatch(f"images smaller than the {window}x{window} window")
    # centre on the global mean first to keep the cumulative sums well conditioned
    shift = 0.5 * (x.mean() + y.mean())
    x = x - shift
    y = y - shift
    n = window * window
    sx = _window_sums(x, window)
    sy = _window_sums(y, window)
    sxx = _window_sums(x * x, window)
    syy = _window_sums(y * y, window)
    sxy = _window_sums(x * y, window)
    mx, my = sx / n, sy / n
    vx = (sxx - n * mx * mx) / (n - 1)
    vy = (syy - n * my * my) / (n - 1)
    cxy = (sxy - n * mx * my) / (n - 1)
    mx += shift
    my += shift
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))


def ssim(a, b, window: int = SSIM_WINDOW) -> float:
    return float(np.mean(ssim_map(a, b, window)))
