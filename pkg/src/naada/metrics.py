"""PSNR / SSIM and corpus-level aggregation.

PSNR uses MAX = 1.0 on the unit domain: 10 * log10(1 / MSE), with
identical images returning the documented 100 dB sentinel. SSIM is the
canonical windowed form: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
K2 = 0.03, L = 1.0, averaged over the valid (un-padded) region.
Aggregation reports mean +/- 1.96 * sd / sqrt(n) with the sample
standard deviation (n - 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PSNR_SENTINEL = 100.0


def psnr(a: np.ndarray, b: np.ndarray, max_val: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; capped at the identity sentinel."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"psnr: shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_SENTINEL
    return min(10.0 * np.log10(max_val * max_val / mse), PSNR_SENTINEL)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable 'valid'-mode correlation with a 1-D kernel on both axes."""
    k = kernel.size
    img = np.lib.stride_tricks.sliding_window_view(img, k, axis=1) @ kernel
    return np.lib.stride_tricks.sliding_window_view(img, k, axis=0) @ kernel


def ssim(a: np.ndarray, b: np.ndarray, window: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03, data_range: float = 1.0) -> float:
    """Mean local structural similarity over a Gaussian-weighted window."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"ssim: shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape) < window:
        raise ValueError(f"ssim: image smaller than the {window}x{window} window")
    kern = _gaussian_kernel(window, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2

    mu_a = _filter_valid(a, kern)
    mu_b = _filter_valid(b, kern)
    var_a = _filter_valid(a * a, kern) - mu_a * mu_a
    var_b = _filter_valid(b * b, kern) - mu_b * mu_b
    cov = _filter_valid(a * b, kern) - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def aggregate(values) -> tuple[float, float]:
    """(mean, 95% CI half-width) of a sample; needs n >= 2."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise ValueError("aggregate: need at least two values")
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    half_width = 1.96 * sd / np.sqrt(values.size)
    return mean, float(half_width)


def format_entry(mean: float, half_width: float) -> str:
    """Render one aggregate cell, e.g. '31.86 ± 0.37'."""
    return f"{mean:.2f} ± {half_width:.2f}"


@dataclass
class MetricReport:
    """Per-method metric summary over a corpus."""

    label: str
    names: list
    psnr_values: list
    ssim_values: list

    @property
    def n(self):
        return len(self.psnr_values)

    def psnr_aggregate(self):
        return aggregate(self.psnr_values)

    def ssim_aggregate(self):
        return aggregate(self.ssim_values)

    def per_image_rows(self):
        yield "name,psnr_db,ssim"
        for name, p, s in zip(self.names, self.psnr_values, self.ssim_values):
            yield f"{name},{p:.6f},{s:.6f}"

    def aggregate_row(self):
        pm, ph = self.psnr_aggregate()
        sm, sh = self.ssim_aggregate()
        return (
            f"{self.label},{self.n},{pm:.6f},{ph:.6f},{sm:.6f},{sh:.6f},"
            f"\"{format_entry(pm, ph)}\",\"{format_entry(sm, sh)}\""
        )

    @staticmethod
    def aggregate_header():
        return "method,n,psnr_mean,psnr_ci95,ssim_mean,ssim_ci95,psnr_table,ssim_table"
