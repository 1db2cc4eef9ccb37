"""Base CS-MRI inversion solvers and their proximal building blocks.

All solvers share the data-fidelity term (mu/2)*||M . F x - y||^2 under the
unitary FFT convention, so the gradient Lipschitz constant is exactly mu and
step = 1/mu is a safe default (0.5 at the default mu = 2).

Complex images are handled by applying TV and wavelet proximal operators to
the real and imaginary channels independently.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from kdac.grid import as_grid, fft2, ifft2
from kdac.sampling import Measurement, zero_fill

__all__ = [
    "SolverConfig", "SolveTrace", "SolverDivergence",
    "zero_fill_solver", "soft_threshold",
    "haar_forward", "haar_inverse",
    "tv_prox", "tv_value", "data_grad",
    "fista_l1", "fcsa",
]

DIVERGENCE_LIMIT = 1e12


class SolverDivergence(RuntimeError):
    """Objective blew past the divergence guard; the step size is too large."""


@dataclass
class SolverConfig:
    mu: float = 2.0
    alpha: float = 0.002
    beta: float = 0.002
    outer_iters: int = 200
    tv_inner_iters: int = 10
    wavelet_levels: int = 4
    step: float = 0.5
    tol: float = 1e-5
    tv_combine_weight: float = 0.5  # FCSA averaging weight on the TV branch

    def validate(self):
        if self.mu <= 0:
            raise ValueError("mu must be > 0")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.outer_iters < 1 or self.tv_inner_iters < 1 or self.wavelet_levels < 1:
            raise ValueError("iteration counts and wavelet levels must be positive")
        if not 0 < self.step <= 1:
            raise ValueError("step must be in (0, 1]")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if not 0 < self.tv_combine_weight < 1:
            raise ValueError("tv_combine_weight must be in (0, 1)")


@dataclass
class SolveTrace:
    objectives: list = field(default_factory=list)
    final_rel_change: float = math.inf
    iterations: int = 0


def zero_fill_solver(meas, cfg=None):
    """Baseline reconstruction: adjoint applied to the measured k-space."""
    return zero_fill(meas)


def soft_threshold(v, tau):
    """Complex soft thresholding: shrink magnitudes by tau, kill the dead zone."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    mag = np.abs(v)
    scale = np.maximum(1.0 - tau / np.maximum(mag, 1e-300), 0.0)
    return v * scale


def _check_levels(n, levels):
    if n % (1 << levels) != 0:
        raise ValueError(f"side length {n} is not divisible by 2^{levels}")


def haar_forward(img, levels):
    """Multilevel orthonormal 2-D Haar transform (complex input allowed)."""
    img = np.asarray(img, dtype=np.complex128)
    _check_levels(img.shape[0], levels)
    out = img.copy()
    s = 1.0 / math.sqrt(2.0)
    m = img.shape[0]
    for _ in range(levels):
        a = out[:m, :m]
        lo = (a[0::2, :] + a[1::2, :]) * s
        hi = (a[0::2, :] - a[1::2, :]) * s
        a = np.vstack([lo, hi])
        lo = (a[:, 0::2] + a[:, 1::2]) * s
        hi = (a[:, 0::2] - a[:, 1::2]) * s
        out[:m, :m] = np.hstack([lo, hi])
        m //= 2
    return out


def haar_inverse(coeffs, levels):
    """Exact inverse of :func:`haar_forward`."""
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    _check_levels(coeffs.shape[0], levels)
    out = coeffs.copy()
    s = 1.0 / math.sqrt(2.0)
    n = coeffs.shape[0]
    m = n >> (levels - 1)
    while m <= n:
        a = out[:m, :m]
        h = m // 2
        col = np.empty_like(a)
        col[:, 0::2] = (a[:, :h] + a[:, h:]) * s
        col[:, 1::2] = (a[:, :h] - a[:, h:]) * s
        row = np.empty_like(a)
        row[0::2, :] = (col[:h, :] + col[h:, :]) * s
        row[1::2, :] = (col[:h, :] - col[h:, :]) * s
        out[:m, :m] = row
        m *= 2
    return out


def _grad(u):
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:-1, :] = u[1:, :] - u[:-1, :]
    gy[:, :-1] = u[:, 1:] - u[:, :-1]
    return gx, gy


def _div(px, py):
    d = np.zeros_like(px)
    d[0, :] += px[0, :]
    d[1:-1, :] += px[1:-1, :] - px[:-2, :]
    d[-1, :] -= px[-2, :]
    d[:, 0] += py[:, 0]
    d[:, 1:-1] += py[:, 1:-1] - py[:, :-2]
    d[:, -1] -= py[:, -2]
    return d


def _tv_chambolle(f, weight, iters):
    """Chambolle dual projection for argmin_u 0.5||u-f||^2 + weight*TV(u)."""
    px = np.zeros_like(f)
    py = np.zeros_like(f)
    tau = 0.25
    for _ in range(iters):
        d = _div(px, py) - f / weight
        gx, gy = _grad(d)
        norm = np.hypot(gx, gy)
        px = (px + tau * gx) / (1.0 + tau * norm)
        py = (py + tau * gy) / (1.0 + tau * norm)
    return f - weight * _div(px, py)


def tv_prox(img, weight, inner_iters=10):
    """Isotropic TV proximal operator, real and imaginary channels separately."""
    if weight < 0:
        raise ValueError("weight must be >= 0")
    img = np.asarray(img, dtype=np.complex128)
    if weight == 0:
        return img.copy()
    re = _tv_chambolle(np.ascontiguousarray(img.real), weight, inner_iters)
    im = _tv_chambolle(np.ascontiguousarray(img.imag), weight, inner_iters)
    return re + 1j * im


def tv_value(img):
    """Isotropic TV with forward differences, summed over both channels."""
    img = np.asarray(img, dtype=np.complex128)
    total = 0.0
    for chan in (img.real, img.imag):
        gx, gy = _grad(np.ascontiguousarray(chan))
        total += np.hypot(gx, gy).sum()
    return total


def data_grad(x, meas, mu):
    """Gradient of (mu/2)||M . F x - y||^2 at x."""
    resid = np.where(meas.mask.bits, fft2(x), 0.0) - meas.spec
    return mu * ifft2(resid)


def _data_fidelity(x, meas, mu):
    resid = np.where(meas.mask.bits, fft2(x), 0.0) - meas.spec
    return 0.5 * mu * float(np.vdot(resid, resid).real)


def _run_fista(meas, cfg, prox, objective):
    """Shared FISTA loop: gradient step, prox, momentum, best-iterate return."""
    cfg.validate()
    x = zero_fill(meas)
    z = x
    t = 1.0
    best_x, best_obj = x, objective(x)
    trace = SolveTrace(objectives=[best_obj])
    rel = math.inf
    for it in range(cfg.outer_iters):
        xg = z - cfg.step * data_grad(z, meas, cfg.mu)
        x_new = prox(xg)
        obj = objective(x_new)
        if not math.isfinite(obj) or obj > DIVERGENCE_LIMIT:
            raise SolverDivergence(
                f"objective {obj:.3e} exceeded {DIVERGENCE_LIMIT:.0e} at iteration {it}; reduce step"
            )
        trace.objectives.append(obj)
        if obj <= best_obj:
            best_obj, best_x = obj, x_new
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        denom = np.linalg.norm(x_new)
        rel = np.linalg.norm(x_new - x) / max(denom, 1e-300)
        x, t = x_new, t_new
        trace.iterations = it + 1
        if rel <= cfg.tol:
            break
    trace.final_rel_change = float(rel)
    return best_x, trace


def fista_l1(meas, cfg):
    """FISTA on (mu/2)||F_u x - y||^2 + beta*||Phi x||_1 with Haar Phi."""
    cfg.validate()
    lv = cfg.wavelet_levels
    tau = cfg.step * cfg.beta

    def prox(xg):
        if cfg.beta == 0:
            return xg
        return haar_inverse(soft_threshold(haar_forward(xg, lv), tau), lv)

    def objective(x):
        val = _data_fidelity(x, meas, cfg.mu)
        if cfg.beta > 0:
            val += cfg.beta * float(np.abs(haar_forward(x, lv)).sum())
        return val

    return _run_fista(meas, cfg, prox, objective)


def fcsa(meas, cfg):
    """Splitting solver: gradient step, then TV and wavelet proximal
    subproblems solved independently from the gradient point and averaged.

    When one regularizer is switched off its branch is dropped and the other
    receives full weight, so alpha = 0 reduces exactly to :func:`fista_l1`.
    """
    cfg.validate()
    lv = cfg.wavelet_levels
    w = cfg.tv_combine_weight

    def wavelet_prox(xg, tau):
        return haar_inverse(soft_threshold(haar_forward(xg, lv), tau), lv)

    def prox(xg):
        if cfg.alpha > 0 and cfg.beta > 0:
            x_tv = tv_prox(xg, cfg.step * cfg.alpha / w, cfg.tv_inner_iters)
            x_wl = wavelet_prox(xg, cfg.step * cfg.beta / (1.0 - w))
            return w * x_tv + (1.0 - w) * x_wl
        if cfg.alpha > 0:
            return tv_prox(xg, cfg.step * cfg.alpha, cfg.tv_inner_iters)
        if cfg.beta > 0:
            return wavelet_prox(xg, cfg.step * cfg.beta)
        return xg

    def objective(x):
        val = _data_fidelity(x, meas, cfg.mu)
        if cfg.alpha > 0:
            val += cfg.alpha * tv_value(x)
        if cfg.beta > 0:
            val += cfg.beta * float(np.abs(haar_forward(x, lv)).sum())
        return val

    return _run_fista(meas, cfg, prox, objective)
