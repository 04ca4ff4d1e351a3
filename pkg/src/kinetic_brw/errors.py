"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid model, law, or experiment configuration."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class NoMinimizerError(RuntimeError):
    """The spectral rate has no interior minimizer for this weight model."""


class CapExceededError(RuntimeError):
    """A replicate's population crossed the configured particle cap."""

    def __init__(self, time: float, cap: int):
        super().__init__(f"population exceeded cap {cap} at t={time:.6g}")
        self.time = time
        self.cap = cap
