"""Stein control variates g_phi = -<phi, grad U> + div phi.

A basis is a finite family of vector fields phi_j with analytic
divergences.  Evaluating it along a trajectory uses the gradient estimate
recorded by the sampler at each step, so stochastic-gradient runs get the
stochastic counterpart for free.
"""
from __future__ import annotations

import itertools

import numpy as np

from .samplers import Trajectory

__all__ = [
    "FieldBasis",
    "ConstantFields",
    "PolynomialFields1D",
    "RBFGridFields",
    "make_basis",
    "stein_value",
    "evaluate_basis",
    "adjusted_series",
    "BASIS_KINDS",
]


class FieldBasis:
    """Family of ``size`` vector fields on R^dim.

    Subclasses implement ``fields(points) -> (n, p, d)`` and
    ``divergences(points) -> (n, p)``.  The generic class wraps two such
    callables directly.
    """

    def __init__(self, dim: int, size: int, fields=None, divergences=None):
        self.dim = int(dim)
        self.size = int(size)
        self._fields = fields
        self._divergences = divergences

    def fields(self, points: np.ndarray) -> np.ndarray:
        if self._fields is None:
            return np.zeros((points.shape[0], self.size, self.dim))
        return self._fields(points)

    def divergences(self, points: np.ndarray) -> np.ndarray:
        if self._divergences is None:
            return np.zeros((points.shape[0], self.size))
        return self._divergences(points)

    def stein(self, points: np.ndarray, grads: np.ndarray) -> np.ndarray:
        """Matrix (n, p) of -<phi_j(x_k), G_k> + div phi_j(x_k)."""
        return self.divergences(points) - np.einsum("npd,nd->np", self.fields(points), grads)


class ConstantFields(FieldBasis):
    """Coordinate directions e_1..e_d; g_j = -(grad U)_j."""

    def __init__(self, dim: int):
        super().__init__(dim, dim)

    def fields(self, points):
        return np.broadcast_to(np.eye(self.dim), (points.shape[0], self.dim, self.dim))

    def stein(self, points, grads):
        return -np.asarray(grads, dtype=float).copy()


class PolynomialFields1D(FieldBasis):
    """Monomials x^0..x^q on the real line."""

    def __init__(self, degree: int):
        if degree < 0:
            raise ValueError("degree must be non-negative")
        super().__init__(1, degree + 1)
        self.degree = degree

    def fields(self, points):
        x = points[:, 0]
        return (x[:, None] ** np.arange(self.size))[:, :, None]

    def divergences(self, points):
        x = points[:, 0]
        j = np.arange(self.size)
        # j x^{j-1}, with the j = 0 term identically zero
        return j * x[:, None] ** np.maximum(j - 1, 0)


class RBFGridFields(FieldBasis):
    """Gaussian bumps on a regular grid, each paired with every coordinate direction.

    psi_k(x) = exp(-|x - c_k|^2 / (2 sigma^2)); field index j = k * d + i
    is psi_k e_i, with divergence d psi_k / d x_i.
    """

    def __init__(self, dim: int, low: float, high: float, points_per_axis: int, sigma: float):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        if points_per_axis < 1:
            raise ValueError("points_per_axis must be at least 1")
        axis = np.linspace(low, high, points_per_axis)
        self.centers = np.array(list(itertools.product(axis, repeat=dim)))
        self.sigma = float(sigma)
        super().__init__(dim, self.centers.shape[0] * dim)

    def _bumps(self, points):
        diff = points[:, None, :] - self.centers[None, :, :]
        psi = np.exp(-np.sum(diff * diff, axis=2) / (2.0 * self.sigma**2))
        return diff, psi

    def fields(self, points):
        _, psi = self._bumps(points)
        n, m = psi.shape
        out = np.zeros((n, m, self.dim, self.dim))
        idx = np.arange(self.dim)
        out[:, :, idx, idx] = psi[:, :, None]
        return out.reshape(n, m * self.dim, self.dim)

    def divergences(self, points):
        diff, psi = self._bumps(points)
        grad_psi = -diff * psi[:, :, None] / self.sigma**2
        return grad_psi.reshape(points.shape[0], -1)

    def stein(self, points, grads):
        diff, psi = self._bumps(points)
        # -psi_k G_i + d_i psi_k = -psi_k (G_i + (x_i - c_ki) / sigma^2)
        vals = -psi[:, :, None] * (grads[:, None, :] + diff / self.sigma**2)
        return vals.reshape(points.shape[0], -1)


BASIS_KINDS = ("constant_fields", "polynomial_1d", "rbf_grid")


def make_basis(kind: str, **params) -> FieldBasis:
    """Build a basis by name.

    constant_fields: ``dim``.  polynomial_1d: ``degree``.
    rbf_grid: ``dim`` (default 2), ``low``, ``high``, ``points_per_axis``, ``sigma``.
    """
    if kind == "constant_fields":
        return ConstantFields(params["dim"])
    if kind == "polynomial_1d":
        return PolynomialFields1D(params.get("degree", 2))
    if kind == "rbf_grid":
        return RBFGridFields(
            params.get("dim", 2),
            params.get("low", -3.0),
            params.get("high", 3.0),
            params.get("points_per_axis", 5),
            params.get("sigma", 2.0),
        )
    raise ValueError(f"unsupported basis kind {kind!r}; choose from {BASIS_KINDS}")


def stein_value(basis: FieldBasis, j: int, theta, grad) -> float:
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if theta.shape != (basis.dim,) or grad.shape != (basis.dim,):
        raise ValueError(f"theta and grad must have shape ({basis.dim},)")
    return float(basis.stein(theta[None, :], grad[None, :])[0, j])


def evaluate_basis(traj: Trajectory, basis: FieldBasis) -> np.ndarray:
    """Basis matrix Psi (n x p) along a trajectory, from the stored gradients."""
    if traj.dim != basis.dim:
        raise ValueError(f"trajectory dim {traj.dim} does not match basis dim {basis.dim}")
    if basis.size == 0:
        return np.zeros((traj.n, 0))
    return basis.stein(traj.samples, traj.grad_estimates)


def adjusted_series(f_values, psi, beta) -> np.ndarray:
    """h = f - Psi beta."""
    f_values = np.asarray(f_values, dtype=float)
    psi = np.asarray(psi, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if psi.ndim != 2 or psi.shape != (f_values.size, beta.size):
        raise ValueError(f"shape mismatch: f {f_values.shape}, Psi {psi.shape}, beta {beta.shape}")
    if beta.size == 0:
        return f_values.copy()
    return f_values - psi @ beta
