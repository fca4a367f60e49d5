"""Transcript view of session traces.

Each line groups consecutive events of one party and reads::

    <seconds>s  <LABEL>  <summary> | <frame>:<code>:<value> ...

The part before ``|`` is for people (start time, who, joined words or a
short description); the part after it lists every event of the line so that
`parse_transcript` can rebuild the trace.
"""

from typing import List, Optional, Tuple

from agents.core.interfaces import DialogueMode, SessionTrace, TraceEvent, TraceEventKind
from exceptions import TraceError
from streams.grid import FrameGrid
from streams.vocab import join_pieces

CODES = {
    TraceEventKind.USER_TOKEN: "U",
    TraceEventKind.TURN_TOKEN: "T",
    TraceEventKind.STATE_CHANGE: "S",
    TraceEventKind.AGENT_TOKEN: "A",
    TraceEventKind.BACKCHANNEL: "B",
    TraceEventKind.YIELD: "Y",
}
KINDS = {code: kind for kind, code in CODES.items()}
IMPLICIT_MARK = "*"


def _label(event: TraceEvent) -> str:
    kind = event.kind
    if kind == TraceEventKind.USER_TOKEN:
        return "USER"
    if kind == TraceEventKind.AGENT_TOKEN:
        return "AGENT"
    if kind == TraceEventKind.TURN_TOKEN:
        return "AGENT" if event.payload.get("token") == "SOT" else "BACKCH"
    if kind == TraceEventKind.BACKCHANNEL:
        return "BACKCH"
    if kind == TraceEventKind.STATE_CHANGE and event.payload.get("mode") == DialogueMode.SPEAKING.value:
        return "AGENT"
    return "FLOOR"


def _value(event: TraceEvent) -> str:
    p = event.payload
    if event.kind in (TraceEventKind.USER_TOKEN, TraceEventKind.AGENT_TOKEN):
        return p["token"]
    if event.kind == TraceEventKind.TURN_TOKEN:
        return p["token"] + (IMPLICIT_MARK if p.get("implicit") else "")
    if event.kind == TraceEventKind.STATE_CHANGE:
        return p["mode"] + (f"/{p['reason']}" if p.get("reason") else "")
    if event.kind == TraceEventKind.BACKCHANNEL:
        return p.get("ack", "")
    return "-"


def _summary(label: str, events: List[TraceEvent]) -> str:
    if label in ("USER", "AGENT"):
        kind = TraceEventKind.USER_TOKEN if label == "USER" else TraceEventKind.AGENT_TOKEN
        words = join_pieces([e.payload["token"] for e in events if e.kind == kind])
        text = " ".join(words)
        if label == "AGENT" and any(e.kind == TraceEventKind.STATE_CHANGE for e in events) and not text:
            text = "(takes the floor)"
        return text
    if label == "BACKCH":
        acks = [e.payload.get("ack", "") for e in events if e.kind == TraceEventKind.BACKCHANNEL]
        return " ".join(a for a in acks if a) or "(backchannel)"
    parts = []
    for e in events:
        if e.kind == TraceEventKind.YIELD:
            parts.append("yields the floor")
        elif e.kind == TraceEventKind.STATE_CHANGE:
            parts.append(f"-> {e.payload['mode'].upper()}")
    return ", ".join(parts)


def render_trace(trace: SessionTrace, grid: Optional[FrameGrid] = None) -> str:
    """Alternating transcript with timestamps, states and yields; empty trace gives ''."""
    grid = grid or FrameGrid()
    groups: List[Tuple[str, List[TraceEvent]]] = []
    for event in trace.events:
        label = _label(event)
        if groups and groups[-1][0] == label:
            groups[-1][1].append(event)
        else:
            groups.append((label, [event]))

    lines = []
    for label, events in groups:
        start = grid.to_seconds(events[0].frame)
        tail = " ".join(f"{e.frame}:{CODES[e.kind]}:{_value(e)}" for e in events)
        lines.append(f"{start:9.3f}s  {label:<6}  {_summary(label, events)} | {tail}")
    return "\n".join(lines) + ("\n" if lines else "")


def _event_from(token: str) -> TraceEvent:
    try:
        frame, code, value = token.split(":", 2)
        kind = KINDS[code]
        frame = int(frame)
    except (ValueError, KeyError):
        raise TraceError(f"malformed transcript event {token!r}")
    if kind in (TraceEventKind.USER_TOKEN, TraceEventKind.AGENT_TOKEN):
        payload = {"token": value}
    elif kind == TraceEventKind.TURN_TOKEN:
        payload = {"token": value.rstrip(IMPLICIT_MARK)}
        if value.endswith(IMPLICIT_MARK):
            payload["implicit"] = True
    elif kind == TraceEventKind.STATE_CHANGE:
        mode, _, reason = value.partition("/")
        payload = {"mode": mode, **({"reason": reason} if reason else {})}
    elif kind == TraceEventKind.BACKCHANNEL:
        payload = {"ack": value}
    else:
        payload = {}
    return TraceEvent(frame, kind, payload)


def parse_transcript(text: str, session_id: str = "") -> SessionTrace:
    """Rebuild a trace from `render_trace` output.

    Raises:
        TraceError: If a line has no event list or an event is malformed
    """
    trace = SessionTrace(session_id=session_id)
    for line in text.splitlines():
        if not line.strip():
            continue
        head, sep, tail = line.rpartition(" | ")
        if not sep:
            raise TraceError(f"transcript line has no event list: {line!r}")
        for token in tail.split():
            event = _event_from(token)
            trace.append(event.frame, event.kind, **event.payload)
    return trace
