"""Divide-and-conquer compressed-sensing MRI reconstruction.

Undersampled k-space is split into overlapping frequency "subspaces" by a
lossless filter bank, each subspace is reconstructed independently with a
standard CS solver, and the results are fused by a Tikhonov least-squares
combination with adaptively re-weighted fusion coefficients.
"""

from kdac.grid import fft2, ifft2, center_shift, normalize_max
from kdac.sampling import SamplingMask, Measurement, generate_mask, undersample, zero_fill, add_noise
from kdac.filterbank import FilterBank, build_horivert, build_gaussian, apply_response, verify_completeness
from kdac.solvers import SolverConfig, SolveTrace, zero_fill_solver, fista_l1, fcsa
from kdac.dac import dac_reconstruct, ReconReport

__all__ = [
    "fft2", "ifft2", "center_shift", "normalize_max",
    "SamplingMask", "Measurement", "generate_mask", "undersample", "zero_fill", "add_noise",
    "FilterBank", "build_horivert", "build_gaussian", "apply_response", "verify_completeness",
    "SolverConfig", "SolveTrace", "zero_fill_solver", "fista_l1", "fcsa",
    "dac_reconstruct", "ReconReport",
]

__version__ = "0.1.0"
