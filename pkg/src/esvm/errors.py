class ESVMError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ESVMError, ValueError):
    """Invalid experiment or sampler configuration."""


class DivergenceError(ESVMError, FloatingPointError):
    """A sampler produced a non-finite state."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(
            message
            or f"non-finite state at step {step}; try a smaller step size"
        )


class SingularSystemError(ESVMError, ValueError):
    """A linear system stayed singular after regularisation."""


class ConvergenceError(ESVMError, RuntimeError):
    """An iterative solve stopped before reaching its tolerance."""
