"""Exception types shared across the toolkit."""


class PipelineError(Exception):
    """Base class for all toolkit errors."""


class IngestionError(PipelineError):
    """Annotation file could not be read or parsed."""


class ManifestError(PipelineError):
    """Manifest file is malformed or violates an invariant."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyRegionError(PipelineError):
    """An operation that needs a non-empty mask received an empty one."""


class BackendUnavailableError(PipelineError):
    """A remote backend did not respond within its retry budget."""

    def __init__(self, service: str, detail: str = ""):
        super().__init__(f"backend '{service}' unavailable" + (f": {detail}" if detail else ""))
        self.service = service


class BackendProtocolError(PipelineError):
    """A remote backend returned a response violating its contract."""

    def __init__(self, service: str, detail: str):
        super().__init__(f"backend '{service}' protocol violation: {detail}")
        self.service = service


class InstructionGenerationError(PipelineError):
    """A model stage of instruction generation produced unusable output."""

    def __init__(self, stage: str, detail: str = ""):
        super().__init__(f"instruction generation failed at '{stage}'" + (f": {detail}" if detail else ""))
        self.stage = stage


class StageOrderError(PipelineError):
    """A pipeline stage was invoked out of order."""


class ConfigDigestError(PipelineError):
    """Input manifest was produced under a different configuration."""


class CalibrationError(PipelineError):
    """Annotation store or threshold sweep misuse."""
