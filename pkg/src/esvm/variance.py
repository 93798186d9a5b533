"""Sample autocovariances, empirical variance and the lag-window spectral variance."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LagWindow",
    "make_lag_window",
    "trapezoid_kernel",
    "sample_mean",
    "sample_autocovariance",
    "autocovariances",
    "spectral_variance",
    "empirical_variance",
    "default_truncation",
    "langevin_contraction",
    "quadratic_form_matrix",
    "DEFAULT_CONTRACTION",
]

# mixing rate assumed when nothing is known about the sampler
DEFAULT_CONTRACTION = 0.95


def trapezoid_kernel(y):
    """1 on [-1/2, 1/2], linear down to 0 at +-1, 0 beyond."""
    a = np.abs(np.asarray(y, dtype=float))
    return np.clip(2.0 * (1.0 - a), 0.0, 1.0)


@dataclass(frozen=True)
class LagWindow:
    """Weights ``w(l / b)`` for lags ``0 <= l < b``; symmetric in l."""

    truncation: int
    weights: np.ndarray

    def __call__(self, lag) -> np.ndarray:
        lag = np.abs(np.asarray(lag))
        return np.where(lag < self.truncation, self.weights[np.minimum(lag, self.truncation - 1)], 0.0)


def make_lag_window(truncation: int) -> LagWindow:
    b = int(truncation)
    if b < 2:
        raise ValueError(f"truncation must be at least 2, got {truncation}")
    weights = trapezoid_kernel(np.arange(b) / b)
    weights.setflags(write=False)
    return LagWindow(b, weights)


def _as_series(h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.ndim != 1:
        raise ValueError("expected a 1-d series")
    if h.size == 0:
        raise ValueError("series is empty")
    return h


def sample_mean(h) -> float:
    h = _as_series(h)
    return math.fsum(h) / h.size


def sample_autocovariance(h, lag: int) -> float:
    """(1/n) sum_{k < n - l} (h_k - mean)(h_{k+l} - mean); negative lags mirror."""
    h = _as_series(h)
    n = h.size
    lag = abs(int(lag))
    if lag >= n:
        raise ValueError(f"lag {lag} must be below the series length {n}")
    c = h - sample_mean(h)
    return float(c[: n - lag] @ c[lag:]) / n


def autocovariances(h, max_lag: int) -> np.ndarray:
    """Autocovariances at lags ``0 .. max_lag - 1``."""
    h = _as_series(h)
    n = h.size
    if not 1 <= max_lag <= n:
        raise ValueError(f"max_lag must lie in [1, {n}]")
    c = h - sample_mean(h)
    return np.array([c[: n - l] @ c[l:] for l in range(max_lag)]) / n


def spectral_variance(h, window: LagWindow) -> float:
    """sum_{|l| < b} w(l) rho(l), accumulated in ascending lag order."""
    h = _as_series(h)
    if window.truncation >= h.size:
        raise ValueError(f"truncation {window.truncation} must be below the series length {h.size}")
    rho = autocovariances(h, window.truncation)
    w = window.weights
    return float(w[0] * rho[0] + 2.0 * (w[1:] @ rho[1:]))


def empirical_variance(h) -> float:
    """Unbiased variance (divisor n - 1), two-pass."""
    h = _as_series(h)
    if h.size < 2:
        raise ValueError("need at least two values")
    c = h - sample_mean(h)
    return math.fsum(c * c) / (h.size - 1)


def default_truncation(n: int, contraction: float = DEFAULT_CONTRACTION) -> int:
    """b = 2 ceil(log n / log(1/contraction)), clamped to [2, n - 1]."""
    if not 0.0 < contraction < 1.0:
        raise ValueError(f"contraction must lie in (0, 1), got {contraction}")
    if n < 2:
        raise ValueError("n must be at least 2")
    ratio = math.log(n) / -math.log(contraction)
    # absorb rounding in the ratio so that exact integers are not bumped up
    b = 2 * math.ceil(ratio - 1e-9 * max(1.0, ratio))
    if b > n - 1:
        warnings.warn(f"truncation {b} clamped to n - 1 = {n - 1}", stacklevel=2)
        b = n - 1
    return max(b, 2)


def langevin_contraction(step_size: float, strong_convexity: float, smoothness: float | None = None) -> float:
    """Per-step contraction sqrt(1 - kappa * step) of a Langevin sampler.

    kappa = 2 m L / (m + L) when the gradient Lipschitz constant L is given
    (exact-gradient ULA), otherwise kappa = m (stochastic-gradient bound).
    """
    m = strong_convexity
    if not m > 0:
        raise ValueError("strong_convexity must be positive")
    kappa = m if smoothness is None else 2.0 * m * smoothness / (m + smoothness)
    if not 0 < step_size * kappa < 1:
        raise ValueError(f"step size {step_size} too large for kappa = {kappa}")
    return math.sqrt(1.0 - kappa * step_size)


def quadratic_form_matrix(n: int, window: LagWindow) -> np.ndarray:
    """Dense A = n^{-1} (I - E/n) W (I - E/n) with Toeplitz W_{jk} = w(j - k).

    Satisfies ``h @ A @ h == spectral_variance(h, window)``.  O(n^2) memory;
    intended as a reference for testing.
    """
    lags = np.subtract.outer(np.arange(n), np.arange(n))
    W = window(lags)
    C = np.eye(n) - np.full((n, n), 1.0 / n)
    return C @ W @ C / n
