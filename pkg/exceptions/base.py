"""Base exceptions and error hierarchy for the duplex dialogue engine."""

from typing import Dict, Any, Optional


class AVDuplexError(Exception):
    """Base exception for all engine errors.

    Attributes:
        message: Human-readable error message
        exit_code: Process exit code the CLI reports for this error
        error_code: Machine-readable error code
        details: Additional error details
    """

    def __init__(
        self,
        message: str,
        exit_code: int = 1,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        """Initialize base exception.

        Args:
            message: Error message
            exit_code: CLI exit code
            error_code: Machine-readable error code
            details: Additional error details
        """
        self.message = message
        self.exit_code = exit_code
        self.error_code = error_code or self.__class__.__name__
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to dictionary for diagnostics."""
        return {
            "error": self.error_code,
            "message": self.message,
            "details": self.details,
        }


# Configuration exceptions (exit code 2)

class ConfigurationError(AVDuplexError):
    """Configuration error."""

    def __init__(self, message: str, details: Optional[Dict] = None):
        super().__init__(
            message=f"Configuration error: {message}",
            exit_code=2,
            error_code="CONFIGURATION_ERROR",
            details=details,
        )


class UnknownTaskError(AVDuplexError):
    """Task name outside the supported training tasks."""

    def __init__(self, task: str):
        super().__init__(
            message=f"Unknown task '{task}'",
            exit_code=2,
            error_code="UNKNOWN_TASK",
            details={"task": task},
        )


# Data exceptions (exit code 3)

class DataError(AVDuplexError):
    """Malformed or inconsistent input data."""

    def __init__(self, message: str, error_code: str = "DATA_ERROR", details: Optional[Dict] = None):
        super().__init__(
            message=message,
            exit_code=3,
            error_code=error_code,
            details=details,
        )


class FrameDomainError(DataError):
    """Timestamp outside the frame clock's domain."""

    def __init__(self, t: float):
        super().__init__(
            message=f"Timestamp {t} s is negative",
            error_code="FRAME_DOMAIN_ERROR",
            details={"t": t},
        )


class AlignmentError(DataError):
    """Word timings or turn events violate ordering rules."""

    def __init__(self, message: str, details: Optional[Dict] = None):
        super().__init__(message=message, error_code="ALIGNMENT_ERROR", details=details)


class HorizonMismatchError(DataError):
    """Frame-aligned streams disagree on their horizon."""

    def __init__(self, expected: int, actual: int, stream: str):
        super().__init__(
            message=f"Stream '{stream}' has {actual} frames, expected {expected}",
            error_code="HORIZON_MISMATCH",
            details={"expected": expected, "actual": actual, "stream": stream},
        )


class GridMismatchError(DataError):
    """Audio and visual grids are not frame-aligned."""

    def __init__(self, audio_frames: int, visual_frames: int):
        super().__init__(
            message=f"Audio grid has {audio_frames} frames but visual grid has {visual_frames}",
            error_code="GRID_MISMATCH",
            details={"audio_frames": audio_frames, "visual_frames": visual_frames},
        )


class VocabularyError(DataError):
    """Token or word outside the vocabulary."""

    def __init__(self, message: str, details: Optional[Dict] = None):
        super().__init__(message=message, error_code="VOCABULARY_ERROR", details=details)


class CorpusError(DataError):
    """Corpus generation or storage failed."""

    def __init__(self, message: str, details: Optional[Dict] = None):
        super().__init__(message=message, error_code="CORPUS_ERROR", details=details)


class CheckpointError(DataError):
    """Checkpoint file is missing, corrupt or incompatible."""

    def __init__(self, message: str, details: Optional[Dict] = None):
        super().__init__(message=message, error_code="CHECKPOINT_ERROR", details=details)


class TraceError(DataError):
    """Session trace violates its ordering contract or cannot be parsed."""

    def __init__(self, message: str, details: Optional[Dict] = None):
        super().__init__(message=message, error_code="TRACE_ERROR", details=details)


# Numeric exceptions (exit code 4)

class NumericError(AVDuplexError):
    """Numeric failure during training or inference."""

    def __init__(self, message: str, error_code: str = "NUMERIC_ERROR", details: Optional[Dict] = None):
        super().__init__(
            message=message,
            exit_code=4,
            error_code=error_code,
            details=details,
        )


class NonFiniteLossError(NumericError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, step: int, task: str, loss: float):
        super().__init__(
            message=f"Non-finite loss {loss} at step {step} (task {task})",
            error_code="NON_FINITE_LOSS",
            details={"step": step, "task": task, "loss": loss},
        )


class ContextOverflowError(NumericError):
    """Sequence longer than the model's positional table."""

    def __init__(self, frames: int, max_context: int):
        super().__init__(
            message=f"Sequence of {frames} frames exceeds max_context {max_context}",
            error_code="CONTEXT_OVERFLOW",
            details={"frames": frames, "max_context": max_context},
        )


# Runtime exceptions

class BackboneUnavailableError(AVDuplexError):
    """Response backbone is declared but has no desk-scale implementation."""

    def __init__(self, backbone: str):
        super().__init__(
            message=f"Backbone '{backbone}' is interface-only and cannot generate responses",
            exit_code=2,
            error_code="BACKBONE_UNAVAILABLE",
            details={"backbone": backbone},
        )


class SessionError(AVDuplexError):
    """Error while running a duplex session."""

    def __init__(self, message: str, details: Optional[Dict] = None):
        super().__init__(
            message=message,
            exit_code=1,
            error_code="SESSION_FAILED",
            details=details or {},
        )
