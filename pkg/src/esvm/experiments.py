"""End-to-end pipeline: learn CV coefficients on one run, estimate on another.

The learning trajectory uses ``seed``; the evaluation trajectory uses
``seed ^ EVAL_SEED_SALT``.  Replicate ``r`` of a study starts from
``seed + r``.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .config import ExperimentConfig
from .control_variates import FieldBasis, adjusted_series, evaluate_basis, make_basis
from .errors import ConfigError, ESVMError
from .fit import FitResult, assemble_quadratic, solve_coefficients
from .io import write_rows
from .samplers import SamplerConfig, Trajectory, find_mode, run_sampler
from .targets import (
    LabeledDataset,
    TargetModel,
    load_dataset_csv,
    make_gmm_posterior,
    make_logistic_posterior,
    make_toy_target,
    synthetic_logistic_dataset,
)
from .variance import (
    LagWindow,
    autocovariances,
    default_truncation,
    langevin_contraction,
    make_lag_window,
    sample_mean,
    spectral_variance,
)

__all__ = [
    "EVAL_SEED_SALT",
    "Experiment",
    "PipelineResult",
    "ReplicateSummary",
    "ReplicateStudy",
    "AcfSeries",
    "build_experiment",
    "evaluation_seed",
    "gmm_observations",
    "mean_predictive_functional",
    "run_pipeline",
    "run_replicates",
    "summarize_replicates",
    "acf_series",
    "emit_acf_report",
]

EVAL_SEED_SALT = 0x9E3779B97F4A7C15
_U64 = (1 << 64) - 1
STUDY_METHODS = ("none", "evm", "esvm")


def evaluation_seed(seed: int) -> int:
    return (seed ^ EVAL_SEED_SALT) & _U64


def gmm_observations(n: int, rng: np.random.Generator, mu: float = 1.0, sigma: float = 1.0) -> np.ndarray:
    """Draws from 0.5 N(-mu, sigma^2) + 0.5 N(mu, sigma^2)."""
    signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return signs * mu + sigma * rng.normal(size=n)


def mean_predictive_functional(test_set: LabeledDataset, transform: np.ndarray | None = None):
    """f(t) = mean_i sigmoid(y'_i <t, x~'_i>) over the test set.

    ``transform`` is the Zellner normalisation of the training design; test
    covariates go through the same map.  The returned callable accepts one
    point or a matrix of points (one per row).
    """
    x = test_set.features if transform is None else test_set.features @ transform
    z = test_set.labels[:, None] * x

    def f(theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != z.shape[1]:
            raise ValueError(f"points have dim {theta.shape[-1]}, test set has dim {z.shape[1]}")
        return expit(theta @ z.T).mean(axis=-1)

    return f


@dataclass
class Experiment:
    """Model, functional and basis shared by every run of one configuration."""

    config: ExperimentConfig
    model: TargetModel
    functional: object
    basis: FieldBasis
    anchor: np.ndarray | None = None

    def sampler_config(self, n_steps: int, seed: int) -> SamplerConfig:
        c = self.config
        return SamplerConfig(c.step_size, n_steps, c.n_burn, c.batch_size, seed)

    def sample(self, n_steps: int, seed: int) -> Trajectory:
        kwargs = {"anchor": self.anchor} if self.config.sampler == "sgld_fp" else {}
        return run_sampler(self.config.sampler, self.model, self.sampler_config(n_steps, seed), **kwargs)

    def contraction(self) -> float:
        c = self.config
        if c.strong_convexity is None:
            return c.delta
        smooth = c.smoothness if c.sampler == "ula" else None
        return langevin_contraction(c.step_size, c.strong_convexity, smooth)

    def window(self, n: int) -> LagWindow:
        c = self.config
        return make_lag_window(c.bn if c.bn is not None else default_truncation(n, self.contraction()))


def _logistic_data(config: ExperimentConfig):
    rng = np.random.default_rng(config.data_seed)
    if config.data_path is None:
        full = synthetic_logistic_dataset(config.synthetic_size + config.n_test_points, config.synthetic_dim, rng)
        cut = config.synthetic_size
        return (LabeledDataset(full.features[:cut], full.labels[:cut]),
                LabeledDataset(full.features[cut:], full.labels[cut:]))
    data = load_dataset_csv(config.data_path)
    if config.test_path is not None:
        return data, load_dataset_csv(config.test_path)
    if config.n_test_points >= data.size:
        raise ConfigError("n_test_points: must be smaller than the dataset")
    perm = rng.permutation(data.size)
    test, train = perm[:config.n_test_points], perm[config.n_test_points:]
    return (LabeledDataset(data.features[train], data.labels[train]),
            LabeledDataset(data.features[test], data.labels[test]))


def _build_model(config: ExperimentConfig):
    if config.target == "toy":
        return make_toy_target(), None
    if config.target == "gmm":
        obs = gmm_observations(config.n_obs, np.random.default_rng(config.data_seed))
        return make_gmm_posterior(obs, config.prior_variance), None
    train, test = _logistic_data(config)
    return make_logistic_posterior(train, config.g), test


def _build_functional(config: ExperimentConfig, model, test_set):
    kind = config.functional
    if kind == "coordinate_sum":
        return lambda x: x.sum(axis=1)
    if kind == "posterior_mean":
        if not 0 <= config.coordinate < model.dim:
            raise ConfigError(f"coordinate: must lie in [0, {model.dim})")
        j = config.coordinate
        return lambda x: x[:, j].copy()
    if kind == "constant":
        c = config.constant
        return lambda x: np.full(x.shape[0], c)
    return mean_predictive_functional(test_set, model.transform)


def _build_basis(config: ExperimentConfig, dim: int) -> FieldBasis:
    if config.basis == "none":
        return FieldBasis(dim, 0)
    if config.basis == "polynomial_1d":
        if dim != 1:
            raise ConfigError("basis: polynomial_1d needs a one-dimensional target")
        return make_basis("polynomial_1d", degree=config.degree)
    if config.basis == "constant_fields":
        return make_basis("constant_fields", dim=dim)
    return make_basis("rbf_grid", dim=dim, low=config.grid_low, high=config.grid_high,
                      points_per_axis=config.grid_points, sigma=config.sigma_psi)


def build_experiment(config: ExperimentConfig) -> Experiment:
    config.validate()
    model, test_set = _build_model(config)
    functional = _build_functional(config, model, test_set)
    basis = _build_basis(config, model.dim)
    anchor = None
    if config.sampler == "sgld_fp":
        anchor = find_mode(model, np.zeros(model.dim))
    return Experiment(config, model, functional, basis, anchor)


@dataclass
class PipelineResult:
    estimate: float
    fit: FitResult | None
    spectral_variance_raw: float
    spectral_variance_adjusted: float
    n_eval: int
    method: str


def _fit(exp: Experiment, f_values, psi, method, n) -> FitResult:
    window = exp.window(n) if method == "esvm" else None
    return solve_coefficients(assemble_quadratic(f_values, psi, method, window, exp.config.ridge))


def run_pipeline(config: ExperimentConfig, experiment: Experiment | None = None) -> PipelineResult:
    """Fit on the learning run (if a method is set), report the mean of f - g on the evaluation run."""
    exp = experiment or build_experiment(config)
    c = exp.config
    fit = None
    beta = np.zeros(0)
    if c.method != "none":
        learn = exp.sample(c.n_train, c.seed)
        fit = _fit(exp, exp.functional(learn.samples), evaluate_basis(learn, exp.basis), c.method, learn.n)
        beta = fit.beta
    ev = exp.sample(c.n_test, evaluation_seed(c.seed))
    f_eval = exp.functional(ev.samples)
    if beta.size:
        h = adjusted_series(f_eval, evaluate_basis(ev, exp.basis), beta)
    else:
        h = f_eval
    window = exp.window(ev.n)
    return PipelineResult(
        estimate=sample_mean(h),
        fit=fit,
        spectral_variance_raw=spectral_variance(f_eval, window),
        spectral_variance_adjusted=spectral_variance(h, window),
        n_eval=ev.n,
        method=c.method,
    )


def _replicate_series(exp: Experiment, seed: int):
    """Evaluation-run series f - g for each study method, with the fits."""
    c = exp.config
    learn = exp.sample(c.n_train, seed)
    f_learn = exp.functional(learn.samples)
    psi_learn = evaluate_basis(learn, exp.basis)
    fits = {m: _fit(exp, f_learn, psi_learn, m, learn.n) for m in ("evm", "esvm")}
    ev = exp.sample(c.n_test, evaluation_seed(seed))
    f_eval = exp.functional(ev.samples)
    psi_eval = evaluate_basis(ev, exp.basis)
    series = {"none": f_eval}
    for m, fit in fits.items():
        series[m] = adjusted_series(f_eval, psi_eval, fit.beta)
    return series, fits


def _replicate_estimates(exp: Experiment, seed: int) -> dict:
    series, _ = _replicate_series(exp, seed)
    return {m: sample_mean(h) for m, h in series.items()}


@dataclass
class ReplicateSummary:
    estimates: np.ndarray
    mean: float
    var: float
    min: float
    q1: float
    median: float
    q3: float
    max: float

    def row(self) -> list:
        return [self.mean, self.var, self.min, self.q1, self.median, self.q3, self.max]


def summarize_replicates(estimates) -> ReplicateSummary:
    x = np.asarray(estimates, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two estimates")
    q = np.quantile(x, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return ReplicateSummary(x, sample_mean(x), float(np.var(x, ddof=1)), *map(float, q))


@dataclass
class ReplicateStudy:
    estimates: dict
    summaries: dict

    def write(self, out_dir) -> tuple:
        from pathlib import Path

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        summary = write_rows(
            out_dir / "summary.csv",
            ["method", "mean", "var", "min", "q1", "median", "q3", "max"],
            [[m, *map(repr, s.row())] for m, s in self.summaries.items()],
        )
        long = write_rows(
            out_dir / "replicates.csv",
            ["method", "replicate", "estimate"],
            [[m, r, repr(float(v))] for m, est in self.estimates.items() for r, v in enumerate(est)],
        )
        return summary, long


def _replicate_task(args):
    config, seed = args
    return _replicate_estimates(build_experiment(config), seed)


def run_replicates(config: ExperimentConfig, R: int | None = None, workers: int = 1,
                   experiment: Experiment | None = None, progress=None) -> ReplicateStudy:
    """R independent learn/evaluate runs; each fits its own EVM and ESVM coefficients."""
    R = config.replicates if R is None else R
    if R < 2:
        raise ValueError("need at least two replicates")
    seeds = [(config.seed + r) & _U64 for r in range(R)]
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for r, res in enumerate(pool.map(_replicate_task, [(config, s) for s in seeds])):
                results.append(res)
    else:
        exp = experiment or build_experiment(config)
        for r, s in enumerate(seeds):
            try:
                results.append(_replicate_estimates(exp, s))
            except ESVMError as exc:
                raise type(exc)(f"replicate {r}: {exc}") from exc
            if progress is not None:
                progress(r)
    estimates = {m: np.array([res[m] for res in results]) for m in STUDY_METHODS}
    summaries = {m: summarize_replicates(v) for m, v in estimates.items()}
    return ReplicateStudy(estimates, summaries)


@dataclass
class AcfSeries:
    raw: np.ndarray
    evm: np.ndarray
    esvm: np.ndarray
    window: LagWindow
    fits: dict


def acf_series(config: ExperimentConfig, experiment: Experiment | None = None) -> AcfSeries:
    exp = experiment or build_experiment(config)
    series, fits = _replicate_series(exp, config.seed)
    return AcfSeries(series["none"], series["evm"], series["esvm"], exp.window(series["none"].size), fits)


def emit_acf_report(h_raw, h_evm, h_esvm, window: LagWindow, path):
    """CSV with columns lag, rho_raw, rho_evm, rho_esvm for lags 0..b-1."""
    h_raw, h_evm, h_esvm = (np.asarray(h, dtype=float) for h in (h_raw, h_evm, h_esvm))
    if not h_raw.size == h_evm.size == h_esvm.size:
        raise ValueError("series must have equal length")
    cols = [autocovariances(h, window.truncation) for h in (h_raw, h_evm, h_esvm)]
    rows = [[lag, *(repr(float(col[lag])) for col in cols)] for lag in range(window.truncation)]
    return write_rows(path, ["lag", "rho_raw", "rho_evm", "rho_esvm"], rows)
