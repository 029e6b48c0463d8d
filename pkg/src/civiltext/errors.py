"""Exception types shared across the toolkit.

Each class maps to one CLI exit code (see cli.EXIT_CODES).
"""


class CiviltextError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(CiviltextError):
    """Input file does not have the expected columns / structure."""


class ValidationError(CiviltextError):
    """Well-formed input that violates a documented invariant."""


class ConfigurationError(CiviltextError):
    """Bad or missing configuration (specs, tokenizers, credentials)."""


class CheckpointError(CiviltextError):
    """Checkpoint missing, unreadable, or incompatible with its spec."""


class BackendError(CiviltextError):
    """Rewriter backend failed after exhausting retries."""


class TrainingDiverged(CiviltextError):
    """Loss became non-finite during training."""

    def __init__(self, message, step=None, batch_ids=None, loss_history=None):
        super().__init__(message)
        self.step = step
        self.batch_ids = list(batch_ids) if batch_ids is not None else []
        self.loss_history = list(loss_history) if loss_history is not None else []
