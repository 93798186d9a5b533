"""Experiment configuration, presets and the ``key = value`` text format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

__all__ = ["ExperimentConfig", "PRESETS", "load_config_text", "parse_config_text", "apply_overrides"]

TARGETS = ("toy", "gmm", "logistic")
SAMPLER_KINDS = ("ula", "sgld", "sgld_fp", "saga_ld")
BASES = ("none", "constant_fields", "polynomial_1d", "rbf_grid")
METHOD_CHOICES = ("none", "evm", "esvm")
FUNCTIONALS = ("coordinate_sum", "posterior_mean", "mean_predictive", "constant")


@dataclass
class ExperimentConfig:
    # target
    target: str = "toy"
    data_path: str | None = None
    test_path: str | None = None
    g: float | None = None
    n_obs: int = 100
    prior_variance: float = 100.0
    data_seed: int = 0
    synthetic_size: int = 2000
    synthetic_dim: int = 15
    n_test_points: int = 100
    # sampler
    sampler: str = "ula"
    step_size: float = 0.1
    batch_size: int | None = None
    n_burn: int = 1000
    n_train: int = 10_000
    n_test: int = 10_000
    seed: int = 0
    # control variates
    basis: str = "rbf_grid"
    degree: int = 2
    grid_low: float = -3.0
    grid_high: float = 3.0
    grid_points: int = 5
    sigma_psi: float = 2.0
    method: str = "esvm"
    bn: int | None = None
    delta: float = 0.95
    strong_convexity: float | None = None
    smoothness: float | None = None
    ridge: float | None = None
    # functional and replication
    functional: str = "coordinate_sum"
    coordinate: int = 0
    constant: float = 0.0
    replicates: int = 100

    def validate(self) -> "ExperimentConfig":
        def bad(name, why):
            raise ConfigError(f"{name}: {why} (got {getattr(self, name)!r})")

        for name, choices in (("target", TARGETS), ("sampler", SAMPLER_KINDS), ("basis", BASES),
                              ("method", METHOD_CHOICES), ("functional", FUNCTIONALS)):
            if getattr(self, name) not in choices:
                bad(name, f"must be one of {choices}")
        if not self.step_size > 0:
            bad("step_size", "must be positive")
        if self.n_train < 2:
            bad("n_train", "must be at least 2")
        if self.n_test < 2:
            bad("n_test", "must be at least 2")
        if self.n_burn < 0:
            bad("n_burn", "must be non-negative")
        if not 0 <= self.seed < 2**64:
            bad("seed", "must be a 64-bit unsigned integer")
        if self.replicates < 2:
            bad("replicates", "must be at least 2")
        if self.sampler == "ula":
            if self.batch_size is not None:
                bad("batch_size", "ULA uses the full gradient; leave batch_size unset")
        elif self.batch_size is None or self.batch_size < 1:
            bad("batch_size", f"sampler {self.sampler} needs a positive batch size")
        if self.target == "toy" and self.sampler != "ula":
            bad("sampler", "the toy target has no components; use ula")
        if self.target == "logistic" and (self.g is None or not self.g > 0):
            bad("g", "the logistic target needs a positive Zellner g")
        if self.bn is not None and not 2 <= self.bn < min(self.n_train, self.n_test):
            bad("bn", "truncation must satisfy 2 <= bn < min(n_train, n_test)")
        if self.bn is None and not 0 < self.delta < 1:
            bad("delta", "contraction must lie in (0, 1)")
        if self.strong_convexity is not None:
            if not self.strong_convexity > 0:
                bad("strong_convexity", "must be positive")
            if not self.step_size * self.strong_convexity < 1:
                bad("strong_convexity", "step_size * strong_convexity must be below 1")
        if self.smoothness is not None and not self.smoothness > 0:
            bad("smoothness", "must be positive")
        if self.basis == "rbf_grid" and not self.sigma_psi > 0:
            bad("sigma_psi", "must be positive")
        if self.functional == "mean_predictive" and self.target != "logistic":
            bad("functional", "mean_predictive needs the logistic target")
        return self

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


PRESETS = {
    "toy": dict(
        target="toy", sampler="ula", step_size=0.1, batch_size=None,
        n_burn=1_000, n_train=10_000, n_test=10_000,
        basis="rbf_grid", grid_low=-3.0, grid_high=3.0, grid_points=5, sigma_psi=2.0,
        functional="coordinate_sum", replicates=100,
    ),
    "gmm": dict(
        target="gmm", n_obs=100, prior_variance=100.0, sampler="sgld", step_size=0.01, batch_size=10,
        n_burn=10_000, n_train=100_000, n_test=100_000,
        basis="polynomial_1d", degree=2, functional="posterior_mean", replicates=100,
        # curvature of U at the posterior modes for the data_seed=0 draw; sets
        # delta = sqrt(1 - step_size * m) and hence bn = 48 for n = 1e5
        strong_convexity=63.0,
    ),
    "logreg": dict(
        target="logistic", g=2000.0, sampler="sgld_fp", step_size=0.1, batch_size=15,
        n_burn=10_000, n_train=10_000, n_test=100_000,
        basis="constant_fields", functional="mean_predictive", replicates=100,
    ),
}


def _parse_int(s: str) -> int:
    try:
        return int(s, 0)
    except ValueError:
        value = float(s)
        if not value.is_integer():
            raise
        return int(value)


def _converters():
    out = {}
    for f in dataclasses.fields(ExperimentConfig):
        kind = f.type if isinstance(f.type, str) else f.type.__name__
        optional = "None" in kind
        base = kind.replace("| None", "").strip()
        conv = {"int": _parse_int, "float": float, "str": str}[base]
        out[f.name] = (conv, optional)
    return out


_CONVERTERS = _converters()


def _coerce(key: str, raw: str):
    if key not in _CONVERTERS:
        raise ConfigError(f"unknown config key {key!r}")
    conv, optional = _CONVERTERS[key]
    raw = raw.strip()
    if optional and raw.lower() in ("none", "null", ""):
        return None
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        values[key.strip()] = _coerce(key.strip(), raw)
    return values


def apply_overrides(config: ExperimentConfig, assignments) -> ExperimentConfig:
    changes = {}
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        changes[key.strip()] = _coerce(key.strip(), raw)
    return config.replace(**changes)


def load_config_text(path=None, preset: str | None = None, overrides=()) -> ExperimentConfig:
    """Defaults, then preset, then config file, then ``key=value`` overrides."""
    config = ExperimentConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        config = config.replace(**PRESETS[preset])
    if path is not None:
        config = config.replace(**parse_config_text(Path(path).read_text(encoding="utf-8")))
    return apply_overrides(config, overrides).validate()
