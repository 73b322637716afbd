"""Exception types raised by mcrepeat.

Every error carries a short ``code`` so command-line callers can print a
machine-parsable line.
"""


class McRepeatError(ValueError):
    code = "error"


class SchemaError(McRepeatError):
    code = "schema"


class InsufficientSamplesError(McRepeatError):
    code = "insufficient_samples"


class MissingLabelsError(McRepeatError):
    code = "missing_labels"


class UndefinedMetricError(McRepeatError):
    code = "undefined_metric"


class TrainingDivergedError(McRepeatError):
    code = "diverged"

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"loss became non-finite at epoch {epoch}")
