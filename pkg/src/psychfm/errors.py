"""Exception types shared across the package."""


class PsychFMError(Exception):
    """Base class for all package errors."""


class ValidationError(PsychFMError, ValueError):
    """An input violates a declared invariant or precondition."""


class SchemaError(ValidationError):
    """A CSV file is missing a required column or has a bad header."""


class RowParseError(ValidationError):
    """A data row could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ModelFormatError(PsychFMError, ValueError):
    """A serialized model file has a bad header or is truncated."""


class TrainingDivergedError(PsychFMError, RuntimeError):
    """Non-finite loss encountered during training; carries the epoch."""

    def __init__(self, epoch):
        super().__init__(
            f"non-finite training loss at epoch {epoch}; "
            "the learning rate is probably too high"
        )
        self.epoch = epoch
