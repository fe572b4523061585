"""
Reconstruction metrics: MSE, PSNR and SSIM.

All fields are min-max normalized before modeling, so the dynamic range is 1.
"""

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.ndimage

from utils.errors import ConfigError, DimensionError
from utils.spectral import band_spectrum, fft2_array, radial_frequency

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricTriple:
    mse: float
    psnr: float
    ssim: float

    @property
    def mse_pct(self) -> float:
        """MSE in percent of the unit range, as reported in result tables."""
        return 100.0 * self.mse


def _pair(a, b, name: str):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"{name}: shape mismatch {list(a.shape)} vs {list(b.shape)}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b, "mse")
    return float(np.mean((a - b) ** 2))


def psnr(a, b, data_range: float = 1.0) -> float:
    """10·log10(range²/MSE); identical inputs give the 99 dB cap."""
    if data_range <= 0:
        raise ConfigError(f"PSNR range must be positive, got {data_range}")
    err = mse(a, b)
    if err == 0.0:
        return PSNR_CAP
    return float(10.0 * np.log10(data_range ** 2 / err))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    y, x = np.ogrid[-half:half + 1, -half:half + 1]
    window = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    return window / window.sum()


def ssim(a, b, data_range: float = 1.0) -> float:
    """
    Mean structural similarity with an 11×11 Gaussian window (σ = 1.5).

    Args:
        a: First grid (at least 11×11)
        b: Second grid, same shape
        data_range: Dynamic range of the data

    Returns:
        Mean of the local SSIM map, in [-1, 1]
    """
    a, b = _pair(a, b, "ssim")
    if a.ndim != 2 or min(a.shape) < SSIM_WINDOW:
        raise ConfigError(f"ssim needs grids of at least {SSIM_WINDOW}×{SSIM_WINDOW}, got {list(a.shape)}")
    window = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def smooth(x):
        return scipy.ndimage.convolve(x, window, mode="reflect")

    mu_a = smooth(a)
    mu_b = smooth(b)
    mu_ab = mu_a * mu_b
    var_a = smooth(a * a) - mu_a * mu_a
    var_b = smooth(b * b) - mu_b * mu_b
    cov = smooth(a * b) - mu_ab

    ssim_map = ((2.0 * mu_ab + c1) * (2.0 * cov + c2)) / \
        ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
    return float(np.mean(ssim_map))


def evaluate_pair(pred, target) -> MetricTriple:
    return MetricTriple(mse(pred, target), psnr(pred, target), ssim(pred, target))


def mean_triple(triples: Iterable[MetricTriple]) -> MetricTriple:
    triples = list(triples)
    if not triples:
        raise ConfigError("cannot average an empty list of metrics")
    return MetricTriple(
        float(np.mean([t.mse for t in triples])),
        float(np.mean([t.psnr for t in triples])),
        float(np.mean([t.ssim for t in triples])),
    )


def high_band_psnr(pred, target, r_split: float = 0.5) -> float:
    """
    PSNR of the reconstruction error restricted to radial frequencies above r_split.

    The error energy per pixel above the split plays the role of the MSE.
    """
    pred, target = _pair(pred, target, "high_band_psnr")
    h, w = pred.shape
    power = np.abs(fft2_array(pred - target)) ** 2 / (h * w)
    err = float(np.sum(power[radial_frequency(h, w) > r_split])) / (h * w)
    if err == 0.0:
        return PSNR_CAP
    return float(10.0 * np.log10(1.0 / err))


def band_errors(pred, target, n_bands: int = 8):
    """Band spectra of target, reconstruction and their difference."""
    pred, target = _pair(pred, target, "band_errors")
    return band_spectrum(target, n_bands), band_spectrum(pred, n_bands), band_spectrum(pred - target, n_bands)
