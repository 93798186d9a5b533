"""Choosing control-variate coefficients by variance minimisation.

For a linear family g_beta = Psi beta both the empirical variance (EVM) and
the spectral variance (ESVM) of f - g_beta are quadratic in beta:

    Obj(beta) = beta' Q beta - 2 b' beta + c

with Q, b, c given by a symmetric bilinear form on centred series.  The
minimiser is found from the ridge-regularised normal equations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .control_variates import FieldBasis, evaluate_basis
from .errors import SingularSystemError
from .samplers import Trajectory
from .variance import LagWindow, default_truncation, empirical_variance, make_lag_window, spectral_variance

__all__ = [
    "METHODS",
    "QuadraticObjective",
    "FitResult",
    "objective",
    "windowed_apply",
    "assemble_quadratic",
    "solve_coefficients",
    "fit_control_variate",
]

METHODS = ("evm", "esvm")

_RIDGE_FLOOR = 1e-6
_MAX_ESCALATIONS = 4
# relative size of a negative eigenvalue beyond round-off
_INDEFINITE_TOL = 1e-10


@dataclass
class QuadraticObjective:
    Q: np.ndarray
    b: np.ndarray
    c: float
    method: str
    ridge: float | None = None

    @property
    def size(self) -> int:
        return self.b.size

    def __call__(self, beta) -> float:
        beta = np.asarray(beta, dtype=float)
        return float(beta @ self.Q @ beta - 2.0 * self.b @ beta + self.c)


@dataclass
class FitResult:
    beta: np.ndarray
    objective_before: float
    objective_after: float
    method: str
    ridge: float
    dropped: int = 0

    def to_text(self) -> str:
        lines = [
            f"method = {self.method}",
            f"lambda = {float(self.ridge)!r}",
            f"objective_before = {float(self.objective_before)!r}",
            f"objective_after = {float(self.objective_after)!r}",
            f"dropped_directions = {self.dropped}",
        ]
        lines += [f"beta_{j} = {float(v)!r}" for j, v in enumerate(self.beta)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FitResult":
        kv = {}
        for line in text.splitlines():
            if line.strip():
                key, _, value = line.partition("=")
                kv[key.strip()] = value.strip()
        p = sum(1 for k in kv if k.startswith("beta_"))
        return cls(
            beta=np.array([float(kv[f"beta_{j}"]) for j in range(p)]),
            objective_before=float(kv["objective_before"]),
            objective_after=float(kv["objective_after"]),
            method=kv["method"],
            ridge=float(kv["lambda"]),
            dropped=int(kv.get("dropped_directions", 0)),
        )


def _check_method(method):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def objective(h, method: str, window: LagWindow | None = None) -> float:
    """D_n(h) for ``evm``, V_n(h) for ``esvm``."""
    _check_method(method)
    if method == "evm":
        return empirical_variance(h)
    if window is None:
        raise ValueError("esvm needs a lag window")
    return spectral_variance(h, window)


def windowed_apply(x: np.ndarray, window: LagWindow) -> np.ndarray:
    """W x for the symmetric Toeplitz matrix W_{jk} = w(j - k); x may be 2-d (columns)."""
    w = window.weights
    out = w[0] * x
    for lag in range(1, window.truncation):
        out[:-lag] += w[lag] * x[lag:]
        out[lag:] += w[lag] * x[:-lag]
    return out


def assemble_quadratic(f_values, psi, method: str, window: LagWindow | None = None,
                       ridge: float | None = None) -> QuadraticObjective:
    _check_method(method)
    f = np.asarray(f_values, dtype=float)
    psi = np.asarray(psi, dtype=float)
    n = f.size
    if psi.ndim != 2 or psi.shape[0] != n:
        raise ValueError(f"basis matrix shape {psi.shape} does not match series length {n}")
    if n < 2:
        raise ValueError("need at least two observations")
    fc = f - f.mean()
    pc = psi - psi.mean(axis=0)
    if method == "evm":
        wf, wp, scale = fc, pc, 1.0 / (n - 1)
    else:
        if window is None:
            raise ValueError("esvm needs a lag window")
        if window.truncation >= n:
            raise ValueError(f"truncation {window.truncation} must be below the series length {n}")
        wf, wp, scale = windowed_apply(fc, window), windowed_apply(pc, window), 1.0 / n
    Q = scale * (pc.T @ wp)
    Q = 0.5 * (Q + Q.T)
    b = scale * (pc.T @ wf)
    c = scale * float(fc @ wf)
    return QuadraticObjective(Q, b, c, method, ridge)


def solve_coefficients(q: QuadraticObjective) -> FitResult:
    """Minimise Obj(beta) + lambda |beta|^2.

    ``q.ridge`` of None selects lambda = 1e-6 trace(Q) / p.  The normal
    equations (Q + lambda I) beta = b are solved by Cholesky; on failure
    lambda is raised tenfold, at most four times.

    A Q with a clearly negative eigenvalue is genuinely indefinite
    (flat-top lag windows are not positive semidefinite) and the objective
    has no minimiser.  Its most negative eigenvalue is then taken as the
    noise level of the estimated curvature: beta is restricted to the
    eigendirections whose eigenvalue exceeds that level, and ``dropped``
    counts the directions left out.
    """
    p = q.size
    if p == 0:
        return FitResult(np.zeros(0), q.c, q.c, q.method, 0.0)
    if not np.allclose(q.Q, q.Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(q.Q).max())):
        raise ValueError("Q must be symmetric")
    floor = _RIDGE_FLOOR * max(np.trace(q.Q), 0.0) / p
    if floor == 0.0:
        floor = _RIDGE_FLOOR
    lam0 = floor if q.ridge is None else float(q.ridge)
    if lam0 < 0:
        raise ValueError("ridge must be non-negative")
    tiny = np.finfo(float).tiny
    eye = np.eye(p)
    evals = np.linalg.eigvalsh(q.Q)
    noise = -evals[0]
    if noise > _INDEFINITE_TOL * max(abs(evals[-1]), tiny):
        return _project(q, lam0, noise)
    lam = lam0
    for _ in range(_MAX_ESCALATIONS + 1):
        try:
            factor = linalg.cho_factor(q.Q + lam * eye, lower=True, check_finite=True)
        except linalg.LinAlgError:
            lam = 10.0 * lam if lam > 0 else floor
            continue
        beta = linalg.cho_solve(factor, q.b)
        return FitResult(beta, q.c, q(beta), q.method, lam)
    return _project(q, lam0, max(lam0, floor))


def _project(q: QuadraticObjective, lam0: float, cut: float) -> FitResult:
    """Minimise over the eigendirections of Q with curvature above ``cut``."""
    evals, evecs = np.linalg.eigh(q.Q)
    keep = evals > cut
    if not keep.any():
        raise SingularSystemError(
            f"Q has no direction with curvature above {cut:.3e}; "
            f"smallest eigenvalue {evals[0]:.3e}, largest {evals[-1]:.3e}"
        )
    u = evecs[:, keep]
    beta = u @ ((u.T @ q.b) / (evals[keep] + lam0))
    return FitResult(beta, q.c, q(beta), q.method, lam0, dropped=int((~keep).sum()))


def fit_control_variate(traj: Trajectory, f, basis: FieldBasis, method: str,
                        window: LagWindow | None = None, ridge: float | None = None,
                        psi: np.ndarray | None = None) -> FitResult:
    """Evaluate the basis, assemble the objective and solve for beta.

    ``f`` is either a callable on the (n, d) sample matrix or precomputed
    values.  For ``esvm`` without a window the default truncation for the
    trajectory length is used.  A precomputed ``psi`` skips basis evaluation.
    """
    if traj.n == 0:
        raise ValueError("trajectory is empty")
    f_values = f(traj.samples) if callable(f) else np.asarray(f, dtype=float)
    if psi is None:
        psi = evaluate_basis(traj, basis)
    if method == "esvm" and window is None:
        window = make_lag_window(default_truncation(traj.n))
    q = assemble_quadratic(f_values, psi, method, window, ridge)
    return solve_coefficients(q)
