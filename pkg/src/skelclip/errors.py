"""Exception types shared across the package."""


class SkelclipError(Exception):
    """Base class for all library errors."""


class ParseError(SkelclipError, ValueError):
    """Malformed text input (skeleton files, manifests, configs).

    Carries the 1-based line number when one is known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TensorFormatError(SkelclipError, ValueError):
    """Corrupt or unsupported binary tensor file."""


class TrainingDivergedError(SkelclipError, RuntimeError):
    """Non-finite loss encountered during SGD."""


class StageError(SkelclipError, RuntimeError):
    """Pipeline stage failure, tagged with the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
