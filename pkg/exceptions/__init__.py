"""Custom exceptions for the duplex dialogue engine."""

from exceptions.base import (
    AVDuplexError,
    ConfigurationError,
    UnknownTaskError,
    DataError,
    FrameDomainError,
    AlignmentError,
    HorizonMismatchError,
    GridMismatchError,
    VocabularyError,
    CorpusError,
    CheckpointError,
    TraceError,
    NumericError,
    NonFiniteLossError,
    ContextOverflowError,
    BackboneUnavailableError,
    SessionError,
)

__all__ = [
    "AVDuplexError",
    "ConfigurationError",
    "UnknownTaskError",
    "DataError",
    "FrameDomainError",
    "AlignmentError",
    "HorizonMismatchError",
    "GridMismatchError",
    "VocabularyError",
    "CorpusError",
    "CheckpointError",
    "TraceError",
    "NumericError",
    "NonFiniteLossError",
    "ContextOverflowError",
    "BackboneUnavailableError",
    "SessionError",
]
