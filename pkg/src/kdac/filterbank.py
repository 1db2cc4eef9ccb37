"""Lossless frequency-subspace filter banks.

Two decompositions are provided:

* HoriVert: four two-tap difference/average filters splitting k-space into
  vertical/horizontal high and low frequency views. The taps are anchored at
  circular indices {n-1, 0} so that each high/low pair sums to the Kronecker
  delta, which makes both the plain-sum and the Tikhonov integration exact.
* Gaussian: a 5x5 unit-sigma low-pass kernel and its spectral complement.

Every partition group of responses sums to the all-ones grid, so the
decomposition loses nothing.
"""

from dataclasses import dataclass

import numpy as np

from kdac.grid import as_grid

__all__ = [
    "FilterBank", "build_horivert", "build_gaussian",
    "apply_response", "verify_completeness", "trivial_bank",
]

GAUSSIAN_SUPPORT = 5  # spatial taps per axis
GAUSSIAN_SIGMA = 1.0


@dataclass(frozen=True)
class FilterBank:
    """Ordered frequency responses with declared complete partition groups.

    `partition_groups` holds 0-based index tuples; the responses of each
    group sum to the all-ones grid within 1e-12.
    """

    responses: tuple
    labels: tuple
    partition_groups: tuple

    def __post_init__(self):
        if not self.responses:
            raise ValueError("filter bank needs at least one response")
        shape = self.responses[0].shape
        for r in self.responses:
            if r.shape != shape:
                raise ValueError("all responses must share one grid size")
        if len(self.labels) != len(self.responses):
            raise ValueError("one label per response required")

    @property
    def n(self):
        return self.responses[0].shape[0]

    def __len__(self):
        return len(self.responses)

    def is_highpass(self, i):
        """A response that suppresses DC targets a high-frequency subspace."""
        return abs(self.responses[i][0, 0]) < 0.5


def build_horivert(n):
    """Four-filter horizontal/vertical high/low decomposition.

    Along the filtered axis the responses are 0.5 -/+ 0.5*exp(+2i*pi*k/n)
    (high/low), constant along the other axis. High+low = 1 exactly.
    """
    if n % 2 != 0 or n < 4:
        raise ValueError(f"n must be an even integer >= 4, got {n}")
    k = np.arange(n)
    phase = np.exp(2j * np.pi * k / n)
    high = 0.5 - 0.5 * phase
    low = 0.5 + 0.5 * phase
    ones = np.ones(n)
    h1 = np.outer(ones, high)   # varies along columns: vertical-edge content
    h3 = np.outer(ones, low)
    h2 = np.outer(high, ones)   # varies along rows: horizontal-edge content
    h4 = np.outer(low, ones)
    return FilterBank(
        responses=(h1, h2, h3, h4),
        labels=("vert_high", "horiz_high", "vert_low", "horiz_low"),
        partition_groups=((0, 2), (1, 3)),
    )


def build_gaussian(n):
    """Gaussian low-pass (5x5 taps, sigma 1) and its spectral complement."""
    if n % 2 != 0 or n < 6:
        raise ValueError(f"n must be an even integer >= 6, got {n}")
    half = GAUSSIAN_SUPPORT // 2
    u = np.arange(-half, half + 1)
    g = np.exp(-(u[:, None] ** 2 + u[None, :] ** 2) / (2.0 * GAUSSIAN_SIGMA ** 2))
    g /= g.sum()
    emb = np.zeros((n, n))
    for du in u:
        for dv in u:
            emb[du % n, dv % n] = g[du + half, dv + half]
    lp = np.fft.fft2(emb).real  # even-symmetric kernel: response is real
    lp /= lp[0, 0]  # pin DC to exactly 1 so the complement kills DC exactly
    hp = 1.0 - lp
    return FilterBank(
        responses=(lp.astype(np.complex128), hp.astype(np.complex128)),
        labels=("gauss_low", "gauss_high"),
        partition_groups=((0, 1),),
    )


def trivial_bank(n):
    """Single all-ones filter; the framework degenerates to the base solver."""
    return FilterBank(
        responses=(np.ones((n, n), dtype=np.complex128),),
        labels=("identity",),
        partition_groups=((0,),),
    )


def apply_response(spec, response):
    """Element-wise product of a spectrum with one frequency response."""
    spec = as_grid(spec, "spectrum")
    if spec.shape != response.shape:
        raise ValueError(f"spectrum shape {spec.shape} does not match response shape {response.shape}")
    return spec * response


def verify_completeness(bank):
    """Worst deviation of any partition group's response sum from all-ones."""
    worst = 0.0
    for group in bank.partition_groups:
        total = sum(bank.responses[i] for i in group)
        worst = max(worst, float(np.abs(total - 1.0).max()))
    return worst
