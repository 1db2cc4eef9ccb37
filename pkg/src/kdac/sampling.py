"""Undersampling masks, compressed acquisition, and k-space noise.

Mask generation is fully deterministic: the only randomness source is a
splitmix64 counter stream seeded by the caller, with rejection-free
inverse-CDF draws, so a (kind, n, ratio, seed) tuple always regenerates the
exact same bit pattern.

Masks are stored in natural DFT order (DC at [0, 0]); generation happens on
the centered grid and is shifted at the end.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from kdac.grid import as_grid, fft2, ifft2

__all__ = [
    "SamplingMask", "Measurement",
    "generate_mask", "undersample", "zero_fill", "add_noise",
    "MASK_KINDS",
]

MASK_KINDS = ("cartesian", "random2d", "radial")

# Variable-density exponent for the (1 - r/r_max)^p acceptance profile.
DENSITY_EXPONENT = 6

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(seed, count):
    """First `count` outputs of splitmix64 seeded with `seed`, vectorized."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def _uniforms(seed, count):
    """Deterministic uniforms strictly inside (0, 1)."""
    return ((_splitmix64(seed, count) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def _normals(seed, count):
    """Standard normal draws via the inverse CDF (no rejection)."""
    return ndtri(_uniforms(seed, count))


@dataclass(frozen=True)
class SamplingMask:
    """Binary undersampling pattern in natural DFT order plus its provenance."""

    kind: str
    bits: np.ndarray
    target_ratio: float
    seed: int

    @property
    def n(self):
        return self.bits.shape[0]

    @property
    def achieved_ratio(self):
        return float(self.bits.sum()) / self.bits.size


@dataclass(frozen=True)
class Measurement:
    """Zero-filled partial k-space: spec is exactly zero off the mask support."""

    spec: np.ndarray
    mask: SamplingMask


def _centered_radii(n):
    c = np.arange(n) - n // 2
    return np.hypot(c[:, None], c[None, :])


def _random2d_bits(n, ratio, seed):
    r = _centered_radii(n)
    p = (1.0 - r / r.max()) ** DENSITY_EXPONENT
    u = _uniforms(seed, n * n).reshape(n, n)
    with np.errstate(divide="ignore"):
        scores = np.where(p > 0, u / np.maximum(p, 1e-300), np.inf)
    scores[n // 2, n // 2] = -1.0  # DC always sampled
    k = max(1, int(ratio * n * n))
    keep = np.argpartition(scores.ravel(), k - 1)[:k]
    bits = np.zeros(n * n, dtype=bool)
    bits[keep] = True
    return np.fft.ifftshift(bits.reshape(n, n))


def _cartesian_bits(n, ratio, seed):
    dr = np.abs(np.arange(n) - n // 2).astype(float)
    p = (1.0 - dr / dr.max()) ** DENSITY_EXPONENT
    u = _uniforms(seed, n)
    with np.errstate(divide="ignore"):
        scores = np.where(p > 0, u / np.maximum(p, 1e-300), np.inf)
    # lowest-|frequency| phase encodes are always present
    n_forced = math.ceil(0.04 * n)
    order = np.lexsort((np.arange(n), dr))
    scores[order[:n_forced]] = -1.0
    k = max(n_forced, int(round(ratio * n)))
    rows = np.argpartition(scores, k - 1)[:k]
    bits = np.zeros((n, n), dtype=bool)
    bits[rows, :] = True
    return np.fft.ifftshift(bits, axes=0)


def _radial_bits_for_spokes(n, n_spokes):
    bits = np.zeros((n, n), dtype=bool)
    c = n // 2
    t = np.arange(-c, n - c)
    for k in range(n_spokes):
        theta = math.pi * k / n_spokes
        dx, dy = math.cos(theta), math.sin(theta)
        if abs(dx) >= abs(dy):
            xs = t
            ys = np.rint(t * (dy / dx)).astype(int)
        else:
            ys = t
            xs = np.rint(t * (dx / dy)).astype(int)
        ok = (xs >= -c) & (xs < n - c) & (ys >= -c) & (ys < n - c)
        bits[c + ys[ok], c + xs[ok]] = True
    bits[c, c] = True
    return bits


def _radial_bits(n, ratio):
    # achieved ratio grows monotonically with the spoke count; bisect it
    lo, hi = 1, 1
    target = ratio * n * n
    while _radial_bits_for_spokes(n, hi).sum() < target and hi < 8 * n:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _radial_bits_for_spokes(n, mid).sum() < target:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda s: abs(_radial_bits_for_spokes(n, s).sum() - target))
    return np.fft.ifftshift(_radial_bits_for_spokes(n, best))


def generate_mask(kind, target_ratio, n, seed):
    """Build a deterministic variable-density undersampling mask."""
    if kind not in MASK_KINDS:
        raise ValueError(f"unknown mask kind {kind!r}; expected one of {MASK_KINDS}")
    if not 0.0 < target_ratio <= 1.0:
        raise ValueError(f"target_ratio must be in (0, 1], got {target_ratio}")
    if n % 2 != 0 or n < 4:
        raise ValueError(f"n must be an even integer >= 4, got {n}")
    if target_ratio == 1.0:
        bits = np.ones((n, n), dtype=bool)
    elif kind == "random2d":
        bits = _random2d_bits(n, target_ratio, seed)
    elif kind == "cartesian":
        bits = _cartesian_bits(n, target_ratio, seed)
    else:
        bits = _radial_bits(n, target_ratio)
    bits.setflags(write=False)
    return SamplingMask(kind=kind, bits=bits, target_ratio=float(target_ratio), seed=int(seed))


def undersample(x, mask):
    """Simulate compressed acquisition: mask the fully-sampled k-space of x."""
    x = as_grid(x, "image")
    if x.shape != mask.bits.shape:
        raise ValueError(f"image shape {x.shape} does not match mask shape {mask.bits.shape}")
    spec = np.where(mask.bits, fft2(x), 0.0 + 0.0j)
    return Measurement(spec=spec, mask=mask)


def zero_fill(meas):
    """Adjoint of the sampling operator: inverse FFT of the zero-filled k-space."""
    return ifft2(meas.spec)


def add_noise(meas, sigma, seed):
    """Add i.i.d. complex Gaussian noise at the sampled k-space positions.

    Real and imaginary parts each receive independent N(0, sigma^2) draws;
    unsampled positions stay exactly zero.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return Measurement(spec=meas.spec.copy(), mask=meas.mask)
    idx = np.flatnonzero(meas.mask.bits)
    draws = _normals(seed, 2 * idx.size) * sigma
    spec = meas.spec.copy()
    flat = spec.ravel()
    flat[idx] += draws[: idx.size] + 1j * draws[idx.size:]
    return Measurement(spec=spec, mask=meas.mask)
