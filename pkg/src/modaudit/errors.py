"""Shared exception types for the pipeline."""


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class InputError(PipelineError):
    """Bad input data or a violated precondition."""


class ExternalToolError(PipelineError):
    """An external command failed; carries whatever the tool printed."""

    def __init__(self, message: str, output: str = ""):
        super().__init__(message)
        self.output = output


class TransportError(PipelineError):
    """Classifier endpoint unreachable or returned a broken HTTP response."""


class VerdictParseError(PipelineError):
    """Classifier reply did not follow the Decision/Reason output contract."""


class PoolsExhausted(PipelineError):
    """Every sampling stratum has been fully drawn."""


class DuplicateAnnotation(PipelineError):
    """The same annotator already submitted a record for this target."""


class MissingStageError(PipelineError):
    """A pipeline stage was invoked before the stage it depends on."""

    def __init__(self, stage: str, needed: str):
        super().__init__(
            f"stage '{stage}' needs outputs that are missing; run '{needed}' first"
        )
        self.stage = stage
        self.needed = needed
