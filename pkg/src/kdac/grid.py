"""Core grid conventions: unitary 2-D FFT pair and basic image utilities.

All images and spectra are square (n, n) complex128 arrays. Spectra are kept
in natural DFT order (DC at index [0, 0]); centered order appears only at
visualization boundaries via :func:`center_shift`.

The transform pair is unitary (scaled by 1/n in each direction), so the
adjoint of the undersampled Fourier operator is plain zero-filled inversion
with no extra scaling.
"""

import numpy as np

__all__ = ["fft2", "ifft2", "center_shift", "normalize_max", "as_grid"]


def as_grid(data, name="grid"):
    """Validate and return a square complex128 grid with even side length."""
    a = np.asarray(data, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square 2-D array, got shape {a.shape}")
    n = a.shape[0]
    if n < 4 or n % 2 != 0:
        raise ValueError(f"{name} side length must be an even integer >= 4, got {n}")
    return a


def fft2(img):
    """Unitary 2-D DFT of an image grid; DC lands at index [0, 0]."""
    img = as_grid(img, "image")
    return np.fft.fft2(img, norm="ortho")


def ifft2(spec):
    """Unitary inverse 2-D DFT; exact inverse of :func:`fft2`."""
    spec = as_grid(spec, "spectrum")
    return np.fft.ifft2(spec, norm="ortho")


def center_shift(spec):
    """Circularly shift a spectrum by (n/2, n/2).

    Moves DC to the grid center for display. Involutive for even n, so the
    same call converts back.
    """
    spec = as_grid(spec, "spectrum")
    n = spec.shape[0]
    return np.roll(spec, (n // 2, n // 2), axis=(0, 1))


def normalize_max(img):
    """Scale an image so its maximum magnitude is 1; all-zero input passes through."""
    img = as_grid(img, "image")
    peak = np.abs(img).max()
    if peak == 0.0:
        return img.copy()
    return img / peak
