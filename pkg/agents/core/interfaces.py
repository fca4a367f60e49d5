"""Session types and protocols for the duplex orchestrator."""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Protocol

import numpy as np

from exceptions import TraceError


class DialogueMode(str, Enum):
    """Floor state of the agent."""

    LISTENING = "listening"
    SPEAKING = "speaking"


class SessionMode(str, Enum):
    """DUAL routes text to a backbone; UNIFIED reads responses from the model's own head."""

    DUAL = "dual"
    UNIFIED = "unified"


class TraceEventKind(str, Enum):
    USER_TOKEN = "user_token"
    TURN_TOKEN = "turn_token"
    STATE_CHANGE = "state_change"
    AGENT_TOKEN = "agent_token"
    BACKCHANNEL = "backchannel"
    YIELD = "yield"


@dataclass(frozen=True)
class TraceEvent:
    """One session event.

    Attributes:
        frame: Frame index at which the event happened
        kind: Event kind
        payload: Kind-specific data (token piece, mode, acknowledgement)
    """

    frame: int
    kind: TraceEventKind
    payload: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"frame": self.frame, "kind": self.kind.value, "payload": self.payload}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TraceEvent":
        try:
            return cls(int(data["frame"]), TraceEventKind(data["kind"]), dict(data.get("payload", {})))
        except (KeyError, ValueError) as e:
            raise TraceError(f"malformed trace event {data!r}: {e}")


@dataclass
class SessionTrace:
    """Time-ordered record of a session.

    Attributes:
        session_id: Identifier of the session
        events: Events with non-decreasing frames
        meta: Session provenance (mode, backbone, seed, frames)
    """

    session_id: str = ""
    events: List[TraceEvent] = field(default_factory=list)
    meta: Dict[str, Any] = field(default_factory=dict)

    def append(self, frame: int, kind: TraceEventKind, **payload: Any) -> TraceEvent:
        if self.events and frame < self.events[-1].frame:
            raise TraceError(
                f"event at frame {frame} after frame {self.events[-1].frame}",
                details={"session_id": self.session_id},
            )
        event = TraceEvent(frame, kind, payload)
        self.events.append(event)
        return event

    def __len__(self) -> int:
        return len(self.events)

    def of_kind(self, kind: TraceEventKind) -> List[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    def sot_frames(self) -> List[int]:
        """Frames of every start-of-turn, explicit or implicit."""
        return [e.frame for e in self.events if e.kind == TraceEventKind.TURN_TOKEN and e.payload.get("token") == "SOT"]

    def agent_responses(self) -> List[List[str]]:
        """Agent token pieces grouped per SPEAKING period."""
        responses: List[List[str]] = []
        for e in self.events:
            if e.kind == TraceEventKind.STATE_CHANGE and e.payload.get("mode") == DialogueMode.SPEAKING.value:
                responses.append([])
            elif e.kind == TraceEventKind.AGENT_TOKEN and responses:
                responses[-1].append(e.payload["token"])
        return responses

    def user_pieces(self) -> List[str]:
        return [e.payload["token"] for e in self.of_kind(TraceEventKind.USER_TOKEN)]

    def to_jsonl(self) -> str:
        lines = [json.dumps({"session_id": self.session_id, "meta": self.meta}, sort_keys=True)]
        lines += [json.dumps(e.to_dict(), sort_keys=True) for e in self.events]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "SessionTrace":
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise TraceError("empty trace file")
        try:
            head = json.loads(lines[0])
            trace = cls(session_id=head.get("session_id", ""), meta=head.get("meta", {}))
            for line in lines[1:]:
                event = TraceEvent.from_dict(json.loads(line))
                trace.append(event.frame, event.kind, **event.payload)
        except json.JSONDecodeError as e:
            raise TraceError(f"trace file is not valid JSON lines: {e}")
        return trace


@dataclass(frozen=True)
class LatencyBudget:
    """Algorithmic latency of the streaming front-end."""

    chunk_ms: float = 40.0
    visual_lookahead_frames: int = 2
    frame_ms: float = 40.0

    @property
    def total_ms(self) -> float:
        return self.chunk_ms + self.visual_lookahead_frames * self.frame_ms


class BackboneInterface(Protocol):
    """Response generator driven by the orchestrator in DUAL mode.

    `ingest_user_token` receives each non-EMP user piece while LISTENING;
    `on_turn` returns the response pieces, consumed one per frame and
    abandoned if the user takes the floor back.
    """

    name: str

    def ingest_user_token(self, token: str) -> None:
        ...

    def on_turn(self) -> Iterator[str]:
        ...

    def reset(self) -> None:
        ...


class StreamingModel(Protocol):
    """Frame-synchronous model as seen by the orchestrator."""

    head_names: tuple

    def reset(self) -> None:
        ...

    def step(
        self,
        audio_n: np.ndarray,
        visual_n: np.ndarray,
        present_n: bool,
        prev_text: int,
        prev_turn: int,
    ) -> Dict[str, np.ndarray]:
        """Logits per head for the next frame."""
        ...


@dataclass
class SessionInputs:
    """Frame-aligned grids of one session."""

    audio: np.ndarray
    visual: np.ndarray
    present: np.ndarray
    session_id: str = "session"
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def frames(self) -> int:
        return len(self.audio)

    def frame(self, n: int) -> tuple:
        return self.audio[n], self.visual[n], bool(self.present[n])

