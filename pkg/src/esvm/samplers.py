"""Langevin samplers: ULA, SGLD, SGLD-FP and SAGA-LD.

Each run records, for every kept step k, the state theta_k and the gradient
estimate evaluated at theta_k that moved the chain to theta_{k+1}.  Stein
control variates are later evaluated from these stored estimates.

Randomness comes from two generators spawned from ``seed``: one for the
Gaussian noise and one for minibatch selection.  Runs that differ only in
how they estimate the gradient therefore see the same noise sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError, DivergenceError
from .targets import TargetModel

__all__ = [
    "SamplerConfig",
    "Trajectory",
    "make_streams",
    "sample_minibatch",
    "sample_minibatches",
    "FullGradient",
    "MinibatchGradient",
    "FixedPointGradient",
    "SagaGradient",
    "find_mode",
    "run_ula",
    "run_sgld",
    "run_sgld_fp",
    "run_saga_ld",
    "run_sampler",
    "SAMPLERS",
]

# cap on the int64 scratch array used for vectorised minibatch draws
_PERM_BUDGET = 1 << 21


@dataclass
class SamplerConfig:
    step_size: float
    n_steps: int
    n_burn: int = 0
    batch_size: int | None = None
    seed: int = 0
    initial_point: np.ndarray | None = None

    def __post_init__(self):
        if not (self.step_size > 0 and math.isfinite(self.step_size)):
            raise ConfigError(f"step_size must be positive, got {self.step_size}")
        if self.n_steps < 1:
            raise ConfigError("n_steps must be positive")
        if self.n_burn < 0:
            raise ConfigError("n_burn must be non-negative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def start(self, dim: int) -> np.ndarray:
        if self.initial_point is None:
            return np.zeros(dim)
        theta = np.array(self.initial_point, dtype=float).reshape(-1)
        if theta.shape != (dim,):
            raise ConfigError(f"initial_point has length {theta.size}, model dim is {dim}")
        return theta


@dataclass
class Trajectory:
    """Post-burn-in samples with the gradient estimates that produced each move.

    ``batches`` has one row per kept step (shape ``(n, M)``, 0-based
    component indices); it has zero columns for exact-gradient samplers.
    """

    samples: np.ndarray
    grad_estimates: np.ndarray
    batches: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.int64))
    sampler: str = "ula"

    def __post_init__(self):
        if self.samples.shape != self.grad_estimates.shape:
            raise ValueError("samples and grad_estimates must have the same shape")
        if self.batches.shape[0] != self.samples.shape[0]:
            self.batches = np.zeros((self.samples.shape[0], 0), dtype=np.int64)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def make_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (noise, batch) generators derived from one seed."""
    noise_ss, batch_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(noise_ss), np.random.default_rng(batch_ss)


def _check_batch_size(K, M):
    if M < 1:
        raise ValueError("batch size must be at least 1")
    if M > K:
        raise ValueError(f"batch size {M} exceeds number of components {K}")


def sample_minibatches(rng: np.random.Generator, K: int, M: int, n: int) -> np.ndarray:
    """``n`` independent uniform M-subsets of ``range(K)``, each sorted.

    Partial Fisher-Yates shuffle, vectorised over draws.
    """
    _check_batch_size(K, M)
    out = np.empty((n, M), dtype=np.int64)
    chunk = max(1, _PERM_BUDGET // K)
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        perm = np.tile(np.arange(K, dtype=np.int64), (m, 1))
        rows = np.arange(m)
        for j in range(M):
            r = rng.integers(j, K, size=m)
            head = perm[rows, j].copy()
            perm[rows, j] = perm[rows, r]
            perm[rows, r] = head
        out[start:start + m] = np.sort(perm[:, :M], axis=1)
    return out


def sample_minibatch(rng: np.random.Generator, K: int, M: int) -> np.ndarray:
    return sample_minibatches(rng, K, M, 1)[0]


class FullGradient:
    def __init__(self, model: TargetModel):
        self.model = model

    def __call__(self, theta, batch=None):
        return self.model._full_gradient(theta)


class MinibatchGradient:
    """G(theta, S) = grad U_0 + (K/M) sum_{i in S} grad U_i."""

    def __init__(self, model: TargetModel, batch_size: int):
        _check_batch_size(model.n_components, batch_size)
        self.model = model
        self.scale = model.n_components / batch_size

    def __call__(self, theta, batch):
        m = self.model
        return m.base_gradient(theta) + self.scale * m.component_gradients(theta, batch).sum(axis=0)


class FixedPointGradient:
    """Control-variate gradient anchored at a fixed point ``anchor``."""

    def __init__(self, model: TargetModel, batch_size: int, anchor):
        _check_batch_size(model.n_components, batch_size)
        self.model = model
        self.scale = model.n_components / batch_size
        self.anchor = np.asarray(anchor, dtype=float)
        self.table = model.component_gradients(self.anchor)
        self.total = self.table.sum(axis=0)

    def __call__(self, theta, batch):
        m = self.model
        diff = m.component_gradients(theta, batch) - self.table[batch]
        return m.base_gradient(theta) + self.scale * diff.sum(axis=0) + self.total


class SagaGradient:
    """SAGA estimator with a per-component reference table.

    Calling the estimator returns G^k(theta, S) for the current table and
    then refreshes the entries in ``S`` with gradients at ``theta``.
    ``total`` is kept incrementally.
    """

    def __init__(self, model: TargetModel, batch_size: int, theta0):
        _check_batch_size(model.n_components, batch_size)
        self.model = model
        self.scale = model.n_components / batch_size
        self.table = model.component_gradients(np.asarray(theta0, dtype=float))
        self.total = self.table.sum(axis=0)

    def estimate(self, theta, batch):
        """The estimate without touching the table."""
        m = self.model
        diff = m.component_gradients(theta, batch) - self.table[batch]
        return m.base_gradient(theta) + self.scale * diff.sum(axis=0) + self.total

    def __call__(self, theta, batch):
        m = self.model
        fresh = m.component_gradients(theta, batch)
        diff = fresh - self.table[batch]
        dsum = diff.sum(axis=0)
        g = m.base_gradient(theta) + self.scale * dsum + self.total
        self.total = self.total + dsum
        self.table[batch] = fresh
        return g


def find_mode(model: TargetModel, theta0, rtol: float = 1e-6, max_iter: int = 100_000) -> np.ndarray:
    """Gradient descent with Armijo backtracking.

    Stops once |grad U| <= rtol * (1 + |grad U(theta0)|).
    """
    theta = np.array(theta0, dtype=float)
    g = model._full_gradient(theta)
    target = rtol * (1.0 + np.linalg.norm(g))
    u = model.potential(theta)
    step = 1.0
    for _ in range(max_iter):
        gnorm2 = float(g @ g)
        if math.sqrt(gnorm2) <= target:
            return theta
        while True:
            cand = theta - step * g
            uc = model.potential(cand) if np.all(np.isfinite(cand)) else np.inf
            if uc <= u - 0.5 * step * gnorm2:
                break
            step *= 0.5
            if step < 1e-300:
                raise ConvergenceError("line search failed while locating the mode")
        theta, u = cand, uc
        g = model._full_gradient(theta)
        step *= 2.0
    raise ConvergenceError(
        f"mode search stopped after {max_iter} iterations with |grad U| = {np.linalg.norm(g):.3e}"
    )


def _simulate(model, config: SamplerConfig, grad_fn, tag, stochastic, chunk=4096):
    d = model.dim
    gamma = config.step_size
    noise_scale = math.sqrt(2.0 * gamma)
    noise_rng, batch_rng = make_streams(config.seed)
    K = model.n_components
    M = config.batch_size if stochastic else 0

    n_burn, n_keep = config.n_burn, config.n_steps
    total = n_burn + n_keep
    samples = np.empty((n_keep, d))
    grads = np.empty((n_keep, d))
    batches = np.empty((n_keep, M), dtype=np.int64)

    theta = config.start(d)
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, total, chunk):
            m = min(chunk, total - start)
            noise = noise_scale * noise_rng.standard_normal((m, d))
            draws = sample_minibatches(batch_rng, K, M, m) if stochastic else None
            for i in range(m):
                k = start + i
                batch = draws[i] if stochastic else None
                g = grad_fn(theta, batch)
                j = k - n_burn
                if j >= 0:
                    samples[j] = theta
                    grads[j] = g
                    if stochastic:
                        batches[j] = batch
                theta = theta - gamma * g + noise[i]
            if not np.all(np.isfinite(theta)):
                _raise_divergence(samples, grads, n_burn, start, m)
    if not (np.all(np.isfinite(samples)) and np.all(np.isfinite(grads))):
        _raise_divergence(samples, grads, n_burn, 0, total)
    return Trajectory(samples, grads, batches, tag)


def _raise_divergence(samples, grads, n_burn, start, m):
    lo = max(start - n_burn, 0)
    hi = max(start + m - n_burn, 0)
    bad = ~(np.isfinite(samples[lo:hi]).all(axis=1) & np.isfinite(grads[lo:hi]).all(axis=1))
    if bad.any():
        step = n_burn + lo + int(np.argmax(bad))
    else:
        step = start + m
    raise DivergenceError(step)


def _stochastic_checks(model, config):
    if model.n_components < 1:
        raise ConfigError("stochastic-gradient samplers need a model with components")
    if config.batch_size is None:
        raise ConfigError("batch_size is required for stochastic-gradient samplers")
    if config.batch_size > model.n_components:
        raise ConfigError(
            f"batch_size {config.batch_size} exceeds number of components {model.n_components}"
        )


def run_ula(model: TargetModel, config: SamplerConfig) -> Trajectory:
    """theta' = theta - gamma grad U(theta) + sqrt(2 gamma) xi."""
    return _simulate(model, config, FullGradient(model), "ula", stochastic=False)


def run_sgld(model: TargetModel, config: SamplerConfig) -> Trajectory:
    _stochastic_checks(model, config)
    grad_fn = MinibatchGradient(model, config.batch_size)
    return _simulate(model, config, grad_fn, "sgld", stochastic=True)


def run_sgld_fp(model: TargetModel, config: SamplerConfig, anchor=None) -> Trajectory:
    """SGLD with the fixed-point gradient; ``anchor`` defaults to the mode of U."""
    _stochastic_checks(model, config)
    if anchor is None:
        anchor = find_mode(model, config.start(model.dim))
    grad_fn = FixedPointGradient(model, config.batch_size, anchor)
    return _simulate(model, config, grad_fn, "sgld_fp", stochastic=True)


def run_saga_ld(model: TargetModel, config: SamplerConfig) -> Trajectory:
    _stochastic_checks(model, config)
    grad_fn = SagaGradient(model, config.batch_size, config.start(model.dim))
    return _simulate(model, config, grad_fn, "saga_ld", stochastic=True)


SAMPLERS = {
    "ula": run_ula,
    "sgld": run_sgld,
    "sgld_fp": run_sgld_fp,
    "saga_ld": run_saga_ld,
}


def run_sampler(kind: str, model: TargetModel, config: SamplerConfig, **kwargs) -> Trajectory:
    try:
        fn = SAMPLERS[kind]
    except KeyError:
        raise ConfigError(f"unknown sampler {kind!r}; choose from {sorted(SAMPLERS)}") from None
    return fn(model, config, **kwargs)
