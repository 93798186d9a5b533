"""Control variates for MCMC chosen by minimising the spectral variance."""
from .config import PRESETS, ExperimentConfig, load_config_text
from .control_variates import (
    ConstantFields,
    FieldBasis,
    PolynomialFields1D,
    RBFGridFields,
    adjusted_series,
    evaluate_basis,
    make_basis,
    stein_value,
)
from .errors import ConfigError, ConvergenceError, DivergenceError, ESVMError, SingularSystemError
from .experiments import (
    emit_acf_report,
    mean_predictive_functional,
    run_pipeline,
    run_replicates,
    summarize_replicates,
)
from .fit import FitResult, QuadraticObjective, assemble_quadratic, fit_control_variate, solve_coefficients
from .samplers import SamplerConfig, Trajectory, run_saga_ld, run_sgld, run_sgld_fp, run_ula, sample_minibatch
from .targets import (
    LabeledDataset,
    TargetModel,
    load_dataset_csv,
    make_gmm_posterior,
    make_logistic_posterior,
    make_toy_target,
    standard_gaussian,
)
from .variance import (
    LagWindow,
    default_truncation,
    empirical_variance,
    make_lag_window,
    sample_autocovariance,
    sample_mean,
    spectral_variance,
)

__version__ = "0.1.0"
