"""Differentiable target potentials U = U_0 + sum_i U_i.

Every model exposes the prior/base term and the per-observation terms
separately so that samplers can form minibatch gradient estimates.
Additive constants are dropped throughout; only gradients and potential
differences are meaningful.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

__all__ = [
    "TargetModel",
    "QuadraticModel",
    "ToyTarget",
    "GMMPosterior",
    "LogisticPosterior",
    "LabeledDataset",
    "standard_gaussian",
    "make_toy_target",
    "make_gmm_posterior",
    "make_logistic_posterior",
    "load_dataset_csv",
    "synthetic_logistic_dataset",
    "zellner_transform",
]


class TargetModel:
    """Base class; subclasses implement the four ``_``-free evaluators.

    Component indices are 0-based: ``0 <= i < n_components``.  The base
    term (prior) is kept separate and is not indexed.
    """

    dim: int
    n_components: int = 0

    def base_potential(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    def base_gradient(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def component_potentials(self, theta, idx=None) -> np.ndarray:
        return np.zeros(0)

    def component_gradients(self, theta, idx=None) -> np.ndarray:
        """Array of shape ``(len(idx), dim)``; all components if ``idx`` is None."""
        return np.zeros((0, self.dim))

    # checked public API

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"expected a point of shape ({self.dim},), got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("point has non-finite entries")
        return theta

    def potential(self, theta) -> float:
        theta = self._check(theta)
        value = self.base_potential(theta)
        if self.n_components:
            value += float(np.sum(self.component_potentials(theta)))
        return float(value)

    def full_gradient(self, theta) -> np.ndarray:
        theta = self._check(theta)
        return self._full_gradient(theta)

    def _full_gradient(self, theta):
        g = self.base_gradient(theta)
        if self.n_components:
            g = g + self.component_gradients(theta).sum(axis=0)
        return g

    def stochastic_gradient(self, theta, batch) -> np.ndarray:
        """Unbiased estimate ``grad U_0 + (K/M) sum_{i in batch} grad U_i``."""
        theta = self._check(theta)
        batch = self.check_batch(batch)
        scale = self.n_components / batch.size
        return self.base_gradient(theta) + scale * self.component_gradients(theta, batch).sum(axis=0)

    def check_batch(self, batch) -> np.ndarray:
        batch = np.asarray(batch)
        if batch.ndim != 1 or batch.size == 0:
            raise ValueError("batch must be a non-empty 1-d index set")
        if not np.issubdtype(batch.dtype, np.integer):
            raise ValueError("batch indices must be integers")
        if batch.min() < 0 or batch.max() >= self.n_components:
            raise ValueError(f"batch index out of range [0, {self.n_components})")
        if np.unique(batch).size != batch.size:
            raise ValueError("batch indices must be distinct")
        return batch


class QuadraticModel(TargetModel):
    """U_0 = (theta - m)' P (theta - m) / 2 and U_i = w_i |theta - c_i|^2 / 2.

    ``precision`` may be a full matrix or a vector holding its diagonal.
    """

    def __init__(self, precision, mean=None, centers=None, weights=None):
        precision = np.asarray(precision, dtype=float)
        if precision.ndim == 1:
            precision = np.diag(precision)
        self.precision = precision
        self.dim = precision.shape[0]
        self.mean = np.zeros(self.dim) if mean is None else np.asarray(mean, dtype=float)
        if centers is None:
            self.centers = np.zeros((0, self.dim))
        else:
            self.centers = np.asarray(centers, dtype=float).reshape(-1, self.dim)
        self.n_components = self.centers.shape[0]
        if weights is None:
            weights = np.ones(self.n_components)
        self.weights = np.asarray(weights, dtype=float)

    def base_potential(self, theta):
        r = theta - self.mean
        return 0.5 * float(r @ self.precision @ r)

    def base_gradient(self, theta):
        return self.precision @ (theta - self.mean)

    def component_potentials(self, theta, idx=None):
        c, w = (self.centers, self.weights) if idx is None else (self.centers[idx], self.weights[idx])
        return 0.5 * w * np.sum((theta - c) ** 2, axis=1)

    def component_gradients(self, theta, idx=None):
        c, w = (self.centers, self.weights) if idx is None else (self.centers[idx], self.weights[idx])
        return w[:, None] * (theta - c)


def standard_gaussian(dim: int) -> QuadraticModel:
    return QuadraticModel(np.ones(dim))


class ToyTarget(TargetModel):
    """Two-lobed ring in the plane.

    U(x) = (|x| - mu)^2 / (2 M^2) - log(exp(-(x1 - mu)^2 / 2 sigma^2) + exp(-(x1 + mu)^2 / 2 sigma^2))

    The gradient of ``|x|`` is taken to be zero at the origin.
    """

    dim = 2
    n_components = 0

    def __init__(self, mu: float = 3.0, sigma: float = 3.0, scale: float = 1.0):
        self.mu = mu
        self.sigma = sigma
        self.scale = scale

    def base_potential(self, theta):
        r = np.hypot(theta[0], theta[1])
        s2 = 2.0 * self.sigma**2
        lobes = np.logaddexp(-((theta[0] - self.mu) ** 2) / s2, -((theta[0] + self.mu) ** 2) / s2)
        return float((r - self.mu) ** 2 / (2.0 * self.scale**2) - lobes)

    def base_gradient(self, theta):
        x1, x2 = theta
        r = np.hypot(x1, x2)
        g = np.zeros(2)
        if r > 0.0:
            g += (r - self.mu) / (self.scale**2 * r) * theta
        s2 = self.sigma**2
        g[0] += (x1 - self.mu * np.tanh(self.mu * x1 / s2)) / s2
        return g

    def batch_potential(self, points: np.ndarray) -> np.ndarray:
        """Vectorised potential over rows of ``points``."""
        r = np.hypot(points[:, 0], points[:, 1])
        s2 = 2.0 * self.sigma**2
        x1 = points[:, 0]
        lobes = np.logaddexp(-((x1 - self.mu) ** 2) / s2, -((x1 + self.mu) ** 2) / s2)
        return (r - self.mu) ** 2 / (2.0 * self.scale**2) - lobes


def make_toy_target() -> ToyTarget:
    return ToyTarget(mu=3.0, sigma=3.0, scale=1.0)


def _logcosh(z):
    a = np.abs(z)
    return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)


class GMMPosterior(TargetModel):
    """Posterior over the location ``mu`` of a symmetric two-component mixture.

    Observations follow 0.5 N(-mu, 1) + 0.5 N(mu, 1), prior mu ~ N(0, prior_variance).
    Per-observation term, constants dropped: U_i(mu) = mu^2 / 2 - log cosh(mu x_i).
    """

    dim = 1

    def __init__(self, observations, prior_variance: float = 100.0):
        x = np.asarray(observations, dtype=float).ravel()
        if x.size == 0:
            raise ValueError("observations must be non-empty")
        if not np.all(np.isfinite(x)):
            raise ValueError("observations must be finite")
        if not prior_variance > 0:
            raise ValueError("prior_variance must be positive")
        self.observations = x
        self.prior_variance = float(prior_variance)
        self.n_components = x.size

    def base_potential(self, theta):
        return float(theta[0] ** 2 / (2.0 * self.prior_variance))

    def base_gradient(self, theta):
        return theta / self.prior_variance

    def component_potentials(self, theta, idx=None):
        x = self.observations if idx is None else self.observations[idx]
        mu = theta[0]
        return 0.5 * mu * mu - _logcosh(mu * x)

    def component_gradients(self, theta, idx=None):
        x = self.observations if idx is None else self.observations[idx]
        mu = theta[0]
        return (mu - x * np.tanh(mu * x))[:, None]


def make_gmm_posterior(observations, prior_variance: float = 100.0) -> GMMPosterior:
    return GMMPosterior(observations, prior_variance)


@dataclass(frozen=True)
class LabeledDataset:
    """Design matrix (K x d) with labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float).ravel()
        if X.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} feature rows but {y.size} labels")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset has non-finite entries")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def zellner_transform(features: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root of the Gram matrix ``X'X``."""
    gram = features.T @ features
    evals, evecs = np.linalg.eigh(gram)
    top = evals.max()
    if top <= 0 or evals.min() < 1e-10 * top:
        cond = np.inf if evals.min() <= 0 else top / evals.min()
        raise np.linalg.LinAlgError(f"X'X is singular (condition estimate {cond:.3g})")
    return (evecs / np.sqrt(evals)) @ evecs.T


class LogisticPosterior(TargetModel):
    """Bayesian logistic regression in Zellner-normalised coordinates.

    Covariates are mapped to x~ = (X'X)^{-1/2} x, so the g-prior becomes
    N(0, g I).  U_0 = |t|^2 / (2g), U_i = log(1 + exp(-y_i <t, x~_i>)).
    """

    def __init__(self, data: LabeledDataset, g: float):
        if not g > 0:
            raise ValueError("g must be positive")
        self.g = float(g)
        self.transform = zellner_transform(data.features)
        self.features = data.features @ self.transform
        self.labels = data.labels
        # rows y_i x~_i, so the score is a single matvec
        self._signed = self.features * self.labels[:, None]
        self.dim = data.dim
        self.n_components = data.size

    def base_potential(self, theta):
        return float(theta @ theta) / (2.0 * self.g)

    def base_gradient(self, theta):
        return theta / self.g

    def component_potentials(self, theta, idx=None):
        z = self._signed if idx is None else self._signed[idx]
        return np.logaddexp(0.0, -(z @ theta))

    def component_gradients(self, theta, idx=None):
        z = self._signed if idx is None else self._signed[idx]
        return -expit(-(z @ theta))[:, None] * z


def make_logistic_posterior(data: LabeledDataset, g: float) -> LogisticPosterior:
    return LogisticPosterior(data, g)


def _parse_row(row, lineno):
    try:
        return [float(v) for v in row]
    except ValueError as exc:
        raise ValueError(f"line {lineno}: non-numeric field ({exc})") from None


def load_dataset_csv(path) -> LabeledDataset:
    """Read ``label, x_1, ..., x_d`` rows; a non-numeric first row is a header.

    Labels in {0, 1} are mapped to {-1, +1}.
    """
    rows = []
    with open(Path(path), newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not v.strip() for v in row):
                continue
            if lineno == 1:
                try:
                    [float(v) for v in row]
                except ValueError:
                    continue
            values = _parse_row(row, lineno)
            if rows and len(values) != len(rows[0][1]):
                raise ValueError(
                    f"line {lineno}: expected {len(rows[0][1])} columns, got {len(values)}"
                )
            rows.append((lineno, values))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if len(rows[0][1]) < 2:
        raise ValueError("rows need a label and at least one feature")
    table = np.array([v for _, v in rows])
    labels = table[:, 0]
    if np.all(np.isin(labels, (0.0, 1.0))):
        labels = 2.0 * labels - 1.0
    elif not np.all(np.isin(labels, (-1.0, 1.0))):
        bad = next((ln for ln, v in rows if v[0] not in (-1.0, 0.0, 1.0)), None)
        if bad is None:
            raise ValueError("labels mix the {0, 1} and {-1, +1} conventions")
        raise ValueError(f"line {bad}: label must be in {{-1, +1}} or {{0, 1}}")
    return LabeledDataset(table[:, 1:], labels)


def synthetic_logistic_dataset(n: int, dim: int, rng: np.random.Generator, coef=None) -> LabeledDataset:
    """Correlated Gaussian covariates with an intercept column and logistic labels."""
    if coef is None:
        coef = rng.normal(scale=1.0 / np.sqrt(dim), size=dim)
    mix = np.eye(dim - 1) + 0.3 * rng.normal(size=(dim - 1, dim - 1)) / np.sqrt(dim)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, dim - 1)) @ mix])
    p = expit(X @ coef)
    y = np.where(rng.random(n) < p, 1.0, -1.0)
    return LabeledDataset(X, y)
