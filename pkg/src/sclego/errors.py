"""Exception hierarchy shared by every module."""


class SclegoError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SclegoError, ValueError):
    """Input data failed validation."""


class ConfigError(SclegoError, ValueError):
    """A configuration value is missing or inconsistent."""


class SimulationError(SclegoError, RuntimeError):
    """The simulator produced a non-finite state."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step
