class GtaLabError(Exception):
    """Root of every error raised by gtalab."""


class ConfigError(GtaLabError, ValueError):
    """Invalid or mismatched configuration (model, training, manifest)."""


class DimensionError(GtaLabError, ValueError):
    """Tensor shapes that cannot be combined."""


class ContractError(GtaLabError, ValueError):
    """A precondition of an operation does not hold."""


class NumericalError(GtaLabError, ArithmeticError):
    """NaN or Inf observed where finite values are required."""


class NonFiniteLossError(NumericalError):
    """Training loss became NaN/Inf; raised by the trainer watchdog."""

    def __init__(self, msg: str, step: int, dump_path: str | None = None):
        super().__init__(msg)
        self.step = step
        self.dump_path = dump_path


class DataIngestionError(GtaLabError, ValueError):
    """Malformed dataset directory; the message names the offending file."""


class CorruptCheckpointError(GtaLabError, ValueError):
    """Checkpoint bytes do not match the GTAC layout."""


class CheckpointIncompatibleError(ConfigError):
    """Parameter maps or configs that cannot be paired."""
