"""Image and k-space quality metrics: PSNR, SSIM, HFEN, KARE/KRRE maps.

All image metrics operate on magnitude images, so complex reconstructions
can be passed directly. The k-space error maps compare full spectra in
natural DFT order.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.ndimage import convolve as nd_convolve

__all__ = [
    "MetricTriple", "psnr", "ssim", "hfen",
    "kare_map", "krre_map", "high_band_mean", "metric_triple",
]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

HFEN_SUPPORT = 15
HFEN_SIGMA = 1.5


@dataclass(frozen=True)
class MetricTriple:
    psnr: float
    ssim: float
    hfen: float


def _magnitude_pair(reference, recon):
    ref = np.abs(np.asarray(reference))
    rec = np.abs(np.asarray(recon))
    if ref.shape != rec.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {rec.shape}")
    return ref, rec


def psnr(reference, recon):
    """Peak signal-to-noise ratio in dB; inf for identical inputs.

    Peak is the maximum magnitude of the reference; MSE is the mean squared
    difference of the magnitude images.
    """
    ref, rec = _magnitude_pair(reference, recon)
    mse = float(np.mean((ref - rec) ** 2))
    if mse == 0.0:
        return math.inf
    peak = float(ref.max())
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size, sigma):
    half = size // 2
    u = np.arange(-half, half + 1)
    w = np.exp(-(u[:, None] ** 2 + u[None, :] ** 2) / (2.0 * sigma ** 2))
    return w / w.sum()


def ssim(reference, recon):
    """Mean SSIM over magnitude images.

    11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range
    taken from the reference maximum; note this makes the measure mildly
    asymmetric in its arguments.
    """
    ref, rec = _magnitude_pair(reference, recon)
    if ref.shape[0] < SSIM_WINDOW or ref.shape[1] < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM")
    data_range = float(ref.max())
    if data_range == 0.0:
        data_range = 1.0
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    def filt(a):
        return fftconvolve(a, w, mode="valid")

    mu1 = filt(ref)
    mu2 = filt(rec)
    mu1_sq, mu2_sq, mu12 = mu1 * mu1, mu2 * mu2, mu1 * mu2
    s1 = filt(ref * ref) - mu1_sq
    s2 = filt(rec * rec) - mu2_sq
    s12 = filt(ref * rec) - mu12
    ssim_map = ((2 * mu12 + c1) * (2 * s12 + c2)) / ((mu1_sq + mu2_sq + c1) * (s1 + s2 + c2))
    return float(ssim_map.mean())


def _log_kernel():
    half = HFEN_SUPPORT // 2
    u = np.arange(-half, half + 1)
    r2 = u[:, None] ** 2 + u[None, :] ** 2
    s2 = HFEN_SIGMA ** 2
    g = np.exp(-r2 / (2.0 * s2))
    g /= g.sum()
    log = (r2 - 2.0 * s2) / (s2 * s2) * g
    return log - log.mean()  # zero-mean: constant offsets are invisible


def hfen(reference, recon):
    """High-frequency error norm: L2 distance of LoG-filtered magnitudes.

    Uses a 15x15 Laplacian-of-Gaussian kernel (sigma 1.5) applied by
    circular convolution; reported absolute, not normalized.
    """
    ref, rec = _magnitude_pair(reference, recon)
    k = _log_kernel()
    diff = nd_convolve(rec - ref, k, mode="wrap")
    return float(np.linalg.norm(diff))


def metric_triple(reference, recon):
    return MetricTriple(psnr=psnr(reference, recon),
                        ssim=ssim(reference, recon),
                        hfen=hfen(reference, recon))


def kare_map(y_full, y_recon):
    """Element-wise absolute k-space reconstruction error |Y_r - Y_f|."""
    yf = np.asarray(y_full)
    yr = np.asarray(y_recon)
    if yf.shape != yr.shape:
        raise ValueError(f"shape mismatch: {yf.shape} vs {yr.shape}")
    return np.abs(yr - yf)


def krre_map(y_full, y_recon):
    """Element-wise relative k-space error |Y_r - Y_f| / |Y_f|.

    Denominators below 1e-12 * max|Y_f| are floored there; an all-zero
    reference spectrum is rejected.
    """
    yf = np.asarray(y_full)
    yr = np.asarray(y_recon)
    if yf.shape != yr.shape:
        raise ValueError(f"shape mismatch: {yf.shape} vs {yr.shape}")
    mag = np.abs(yf)
    peak = float(mag.max())
    if peak == 0.0:
        raise ValueError("reference spectrum is identically zero")
    return np.abs(yr - yf) / np.maximum(mag, 1e-12 * peak)


def high_band_mean(error_map, radius_fraction=0.25):
    """Mean of a k-space error map over the centered annulus r > frac * n.

    The map is given in natural DFT order; the annulus is evaluated on the
    centered grid.
    """
    m = np.asarray(error_map)
    n = m.shape[0]
    centered = np.fft.fftshift(m)
    c = np.arange(n) - n // 2
    r = np.hypot(c[:, None], c[None, :])
    sel = r > radius_fraction * n
    return float(centered[sel].mean())
