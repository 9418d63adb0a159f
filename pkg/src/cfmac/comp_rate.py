"""General compute-and-forward computation rates with per-user lattice scaling.

For a decoded integer sum with coefficients ``a`` and scaling ``beta`` the
receiver scales its output by ``alpha``; the effective noise power is

    N(alpha) = P * ||alpha h - a_tilde||^2 + alpha^2,   a_tilde_k = beta_k a_k,

and user ``k`` may carry up to ``[0.5 log2(beta_k^2 P / N)]^+`` bits.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .channel import UNCONSTRAINED, ChannelConfig, RateTuple

#: default bound on |a_k| for coefficient searches
DEFAULT_MAX_COEFF = 5


def as_coefficients(a, K: int | None = None, max_coeff: int | None = None) -> np.ndarray:
    """Validate an integer coefficient vector; returned as float for arithmetic."""
    arr = np.atleast_1d(np.asarray(a))
    if arr.ndim != 1:
        raise ValueError("coefficients must be a vector")
    if not np.all(np.isfinite(arr.astype(float))) or np.any(arr.astype(float) != np.round(arr.astype(float))):
        raise ValueError(f"coefficients must be integers, got {a!r}")
    arr = np.round(arr.astype(float))
    if K is not None and arr.size != K:
        raise ValueError(f"expected {K} coefficients, got {arr.size}")
    if not np.any(arr != 0):
        raise ValueError("at least one coefficient must be nonzero")
    if max_coeff is not None and np.max(np.abs(arr)) > max_coeff:
        raise ValueError(f"coefficient magnitude exceeds {max_coeff}")
    return arr


def as_scaling(beta, K: int) -> np.ndarray:
    if beta is None:
        return np.ones(K)
    arr = np.atleast_1d(np.asarray(beta, dtype=float))
    if arr.shape != (K,):
        raise ValueError(f"expected {K} scaling factors, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr == 0):
        raise ValueError("scaling factors must be finite and nonzero")
    return arr


def _prep(cfg: ChannelConfig, a, beta):
    a = as_coefficients(a, cfg.K)
    beta = as_scaling(beta, cfg.K)
    return a, beta, a * beta


def equivalent_noise_power(cfg: ChannelConfig, a, beta, alpha: float) -> float:
    a, beta, at = _prep(cfg, a, beta)
    e = alpha * cfg.h - at
    return float(cfg.P * (e @ e) + alpha * alpha)


def optimal_alpha(cfg: ChannelConfig, a, beta=None) -> float:
    """MMSE receiver scaling minimizing the effective noise."""
    a, beta, at = _prep(cfg, a, beta)
    h = cfg.h
    return float(cfg.P * (h @ at) / (1.0 + cfg.P * (h @ h)))


def min_noise_factor(cfg: ChannelConfig, a, beta=None) -> float:
    """``||a~||^2 - P (h.a~)^2 / (1 + P ||h||^2)``, i.e. ``N(alpha*) / P``.

    Always positive for a nonzero ``a~`` (Cauchy-Schwarz).
    """
    a, beta, at = _prep(cfg, a, beta)
    h = cfg.h
    return float(at @ at - cfg.P * (h @ at) ** 2 / (1.0 + cfg.P * (h @ h)))


def raw_computation_rates(cfg: ChannelConfig, a, beta=None) -> np.ndarray:
    """Pre-clamp per-user values ``0.5 log2(beta_k^2 / min_noise_factor)``."""
    beta = as_scaling(beta, cfg.K)
    q = min_noise_factor(cfg, a, beta)
    return 0.5 * np.log2(beta**2 / q)


def computation_rate_tuple(cfg: ChannelConfig, a, beta=None) -> RateTuple:
    """Computation rates for decoding ``sum_k a_k t_k``.

    Users with ``a_k = 0`` do not take part in the sum and are reported as
    unconstrained (rate ``+inf``).
    """
    a = as_coefficients(a, cfg.K)
    raw = raw_computation_rates(cfg, a, beta)
    rates = np.where(a != 0, np.maximum(raw, 0.0), np.inf)
    binding = ["sum" if ak != 0 else UNCONSTRAINED for ak in a]
    return RateTuple(rates, binding)


def alpha_grid(center: float, half_width: float = 1.0, step: float = 1e-4) -> np.ndarray:
    """Uniform grid over ``[center - half_width, center + half_width]`` containing ``center``."""
    if not step > 0:
        raise ValueError("grid step must be positive")
    n = int(round(half_width / step))
    return center + step * np.arange(-n, n + 1)


def oracle_rate_grid(cfg: ChannelConfig, a, beta, grid) -> RateTuple:
    """Brute-force counterpart of :func:`computation_rate_tuple`.

    Minimizes ``N(alpha)`` over the supplied grid of ``alpha`` values by
    direct evaluation, with no use of the closed-form minimizer.
    """
    a = as_coefficients(a, cfg.K)
    beta = as_scaling(beta, cfg.K)
    grid = np.ascontiguousarray(np.asarray(grid, dtype=float).ravel())
    if grid.size == 0:
        raise ValueError("alpha grid is empty")
    K = cfg.K
    n_min, _ = kernels.quad_grid_min_1d(
        1.0, np.full(K, cfg.P), np.ascontiguousarray(cfg.h), np.ascontiguousarray(a * beta), grid
    )
    rates = np.array(
        [max(0.0, 0.5 * math.log2(beta[k] ** 2 * cfg.P / n_min)) if a[k] != 0 else math.inf for k in range(K)]
    )
    binding = ["sum" if ak != 0 else UNCONSTRAINED for ak in a]
    return RateTuple(rates, binding)
