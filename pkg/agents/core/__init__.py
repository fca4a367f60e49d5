"""Core session components."""

from agents.core.interfaces import (
    BackboneInterface,
    DialogueMode,
    LatencyBudget,
    SessionInputs,
    SessionMode,
    SessionTrace,
    StreamingModel,
    TraceEvent,
    TraceEventKind,
)
from agents.core.replay import parse_transcript, render_trace
from agents.core.runner import RunnerConfig, SessionRunner, algorithmic_latency, run_session, session_inputs
from agents.core.session_service import InMemoryTraceStore, JsonlTraceStore
from agents.core.streamers import ScriptedStreamer, TransformerStreamer

__all__ = [
    "BackboneInterface",
    "DialogueMode",
    "InMemoryTraceStore",
    "JsonlTraceStore",
    "LatencyBudget",
    "RunnerConfig",
    "ScriptedStreamer",
    "SessionInputs",
    "SessionMode",
    "SessionRunner",
    "SessionTrace",
    "StreamingModel",
    "TraceEvent",
    "TraceEventKind",
    "TransformerStreamer",
    "algorithmic_latency",
    "parse_transcript",
    "render_trace",
    "run_session",
    "session_inputs",
]
