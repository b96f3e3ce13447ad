class InputError(ValueError):
    """Bad arguments: dimension mismatch, violated precondition, bad index."""


class ConfigError(InputError):
    """Scenario file could not be parsed or validated."""


class AnalysisError(RuntimeError):
    """The analysis itself cannot proceed with the chosen settings."""
