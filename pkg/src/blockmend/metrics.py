"""Quality metrics and run statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage

from .errors import DimensionMismatchError
from .image import ImageBuffer

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255.0


@dataclass
class ConcealmentReport:
    """Per-image concealment statistics.

    psnr/ssim stay None until a reference frame is available (the
    benchmark harness fills them); sum(layer_counts) plus deferred_fills
    equals the number of reconstructed patches.
    """

    layer_counts: dict[str, int]
    patch_times: list[float]
    total_time: float
    deferred_fills: int = 0
    decisions: list = field(default_factory=list)
    psnr: float | None = None
    ssim: float | None = None

    @property
    def patches(self) -> int:
        return sum(self.layer_counts.values()) + self.deferred_fills

    def mean_patch_time(self) -> float:
        return sum(self.patch_times) / len(self.patch_times) if self.patch_times else 0.0


def _pixels(img) -> np.ndarray:
    return img.pixels if isinstance(img, ImageBuffer) else np.asarray(img, dtype=np.float64)


def psnr(ref, test) -> float:
    """10 log10(255^2 / MSE) over all pixels; identical frames give +inf."""
    a = _pixels(ref)
    b = _pixels(test)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def psnr_masked(ref, test, select: np.ndarray) -> float:
    """PSNR restricted to the selected pixels (e.g. the originally lost set)."""
    a = _pixels(ref)
    b = _pixels(test)
    if a.shape != b.shape or a.shape != select.shape:
        raise DimensionMismatchError("psnr_masked needs three same-shape arrays")
    if not select.any():
        return math.inf
    diff = a[select] - b[select]
    mse = float(np.mean(diff**2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def _gaussian_kernel_1d() -> np.ndarray:
    half = (SSIM_WINDOW - 1) // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x**2) / (2.0 * SSIM_SIGMA**2))
    return g / g.sum()


def _windowed_mean(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # separable correlation; constant padding is cropped away below
    out = scipy.ndimage.correlate1d(img, kernel, axis=0, mode="constant")
    return scipy.ndimage.correlate1d(out, kernel, axis=1, mode="constant")


def ssim(ref, test) -> float:
    """Mean SSIM, 11x11 Gaussian window (sigma 1.5), windows fully inside."""
    a = _pixels(ref)
    b = _pixels(test)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"image too small for SSIM (min side {SSIM_WINDOW})")
    kernel = _gaussian_kernel_1d()
    pad = (SSIM_WINDOW - 1) // 2
    crop = (slice(pad, a.shape[0] - pad), slice(pad, a.shape[1] - pad))

    mu_a = _windowed_mean(a, kernel)[crop]
    mu_b = _windowed_mean(b, kernel)[crop]
    e_aa = _windowed_mean(a * a, kernel)[crop]
    e_bb = _windowed_mean(b * b, kernel)[crop]
    e_ab = _windowed_mean(a * b, kernel)[crop]
    var_a = e_aa - mu_a**2
    var_b = e_bb - mu_b**2
    cov = e_ab - mu_a * mu_b

    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    return float(s.mean())


def usage_fractions(report: ConcealmentReport) -> dict[str, float]:
    """Layer counts normalized to fractions (sums to 1)."""
    total = sum(report.layer_counts.values())
    if total == 0:
        raise ValueError("empty report: no patches were reconstructed by any layer")
    return {layer: count / total for layer, count in report.layer_counts.items()}
