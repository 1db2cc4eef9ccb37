"""Deterministic test phantom and file formats (binary grids, PNG export).

The phantom is piecewise constant with deliberately rich low-contrast,
high-frequency content: a large ellipse, nested rectangles, a fine stripe
comb at 0.05 contrast, and a row of small low-contrast disks. Geometry is
defined by the versioned constant table below in integer 1/64ths of the
side length and rasterized with exact integer comparisons, so output is
bit-identical across platforms.

GridFile binary layout (little-endian):
    magic "KDC1" | kind byte | u32 n | payload
payload is n^2 float32 (re, im) pairs row-major for images/spectra
(kind 0 / 1) and n^2 bytes of 0/1 for masks (kind 2).
"""

import os
import struct

import numpy as np
from PIL import Image

__all__ = [
    "make_phantom", "write_grid", "read_grid", "export_png",
    "GridFormatError", "KIND_IMAGE", "KIND_SPECTRUM", "KIND_MASK",
    "PHANTOM_VERSION", "PHANTOM_SHAPES",
]

KIND_IMAGE = 0
KIND_SPECTRUM = 1
KIND_MASK = 2

MAGIC = b"KDC1"
_HEADER = struct.Struct("<4sBI")

PHANTOM_VERSION = 1

# Geometry in 64ths of the side length: (kind, params..., intensity).
# ellipse: (cx, cy, a, b); rect: (r0, r1, c0, c1); all half-open pixel ranges
# after scaling by n // 64 units.
PHANTOM_SHAPES = (
    ("ellipse", (32, 32, 28, 24), 0.9),
    ("rect", (20, 44, 12, 24), 0.7),
    ("rect", (22, 42, 14, 22), 0.5),
    ("rect", (24, 40, 16, 20), 0.3),
    ("rect", (20, 44, 40, 52), 0.5),          # plateau under the stripe comb
    ("stripes", (20, 44, 40, 52, 4), 0.55),   # every 4th column within plateau
    ("disks", (50, 18, 4, 1), (0.92, 0.94, 0.98, 1.06, 0.92, 0.94, 0.98, 1.06)),
)


def make_phantom(n):
    """Deterministic piecewise-constant phantom, real-valued in [0, 1]."""
    if n < 64:
        raise ValueError(f"phantom needs n >= 64, got {n}")
    rows = np.arange(n)[:, None]
    cols = np.arange(n)[None, :]
    img = np.zeros((n, n))
    for kind, params, value in PHANTOM_SHAPES:
        if kind == "ellipse":
            cx, cy, a, b = (p * n // 64 for p in params)
            # b^2 (col-cx)^2 + a^2 (row-cy)^2 <= a^2 b^2, all integers
            inside = (b * b) * (cols - cx) ** 2 + (a * a) * (rows - cy) ** 2 <= (a * a) * (b * b)
            img[inside] = value
        elif kind == "rect":
            r0, r1, c0, c1 = (p * n // 64 for p in params)
            img[r0:r1, c0:c1] = value
        elif kind == "stripes":
            r0, r1, c0, c1, period = params
            r0, r1, c0, c1 = (p * n // 64 for p in (r0, r1, c0, c1))
            region = np.zeros((n, n), dtype=bool)
            region[r0:r1, c0:c1] = True
            region &= (np.broadcast_to(cols, (n, n)) - c0) % period == 0
            img[region] = value
        elif kind == "disks":
            cy64, x0_64, spacing64, radius64 = params
            cy = cy64 * n // 64
            radius = max(radius64 * n // 64, 1)
            for k, v in enumerate(value):
                cx = (x0_64 + k * spacing64) * n // 64
                inside = (cols - cx) ** 2 + (rows - cy) ** 2 <= radius * radius
                img[inside] = v
    np.clip(img, 0.0, 1.0, out=img)
    return img.astype(np.complex128)


class GridFormatError(ValueError):
    """Raised on a malformed or truncated grid file."""


def write_grid(path, grid, kind):
    """Write a grid to the binary KDC1 format atomically (temp + rename)."""
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
        raise ValueError(f"grid must be square 2-D, got shape {grid.shape}")
    n = grid.shape[0]
    if kind == KIND_MASK:
        payload = np.ascontiguousarray(grid.astype(bool).astype(np.uint8)).tobytes()
    elif kind in (KIND_IMAGE, KIND_SPECTRUM):
        payload = np.ascontiguousarray(grid.astype("<c8")).tobytes()
    else:
        raise ValueError(f"unknown grid kind {kind}")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, kind, n))
        fh.write(payload)
    os.replace(tmp, path)


def read_grid(path):
    """Read a KDC1 grid file; returns (grid, kind).

    Images and spectra come back as complex128 (stored as float32 pairs);
    masks as a boolean array.
    """
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise GridFormatError(f"{path}: truncated header")
        magic, kind, n = _HEADER.unpack(header)
        if magic != MAGIC:
            raise GridFormatError(f"{path}: bad magic {magic!r}")
        if kind == KIND_MASK:
            expected = n * n
        elif kind in (KIND_IMAGE, KIND_SPECTRUM):
            expected = 8 * n * n
        else:
            raise GridFormatError(f"{path}: unknown kind byte {kind}")
        payload = fh.read(expected + 1)
        if len(payload) != expected:
            raise GridFormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    if kind == KIND_MASK:
        return np.frombuffer(payload, dtype=np.uint8).reshape(n, n).astype(bool), kind
    data = np.frombuffer(payload, dtype="<c8").reshape(n, n).astype(np.complex128)
    return data, kind


def export_png(grid, path, mode="magnitude", window=None):
    """Export a grid as a 16-bit grayscale PNG.

    Modes:
      magnitude      linear map of |grid| from [0, max] to [0, 65535]
      error          clamp |grid| to (window_lo, window_hi) then map linearly
      spectrum       centered order, log1p of the magnitude, then linear map
    Masks can be passed directly in magnitude mode (black/white, centered).
    """
    a = np.asarray(grid)
    if a.dtype == bool:
        a = np.fft.fftshift(a).astype(float)
    else:
        a = np.abs(a)
    if mode == "magnitude":
        peak = a.max()
        scaled = a / peak if peak > 0 else a
    elif mode == "error":
        if window is None or window[1] <= window[0]:
            raise ValueError("error mode needs a (lo, hi) window with hi > lo")
        lo, hi = window
        scaled = (np.clip(a, lo, hi) - lo) / (hi - lo)
    elif mode == "spectrum":
        a = np.log1p(np.fft.fftshift(a))
        peak = a.max()
        scaled = a / peak if peak > 0 else a
    else:
        raise ValueError(f"unknown export mode {mode!r}")
    pix = np.round(scaled * 65535.0).astype(np.uint16)
    tmp = f"{path}.tmp"
    Image.fromarray(pix).save(tmp, format="PNG")
    os.replace(tmp, path)
