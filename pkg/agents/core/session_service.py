"""Trace storage for finished sessions.

Both stores share one async interface so the session manager can write
traces while other sessions are still running.
"""

import asyncio
import logging
from pathlib import Path
from typing import Dict, List, Optional

from agents.core.interfaces import SessionTrace
from agents.helpers import SESSION_ID_SEPARATOR
from exceptions import TraceError

logger = logging.getLogger(__name__)


class InMemoryTraceStore:
    """In-memory trace storage for tests and single-process runs.

    Traces are lost when the process exits; use JsonlTraceStore to keep them.
    """

    def __init__(self):
        self._traces: Dict[str, SessionTrace] = {}

    async def initialize(self) -> None:
        """No initialization needed for in-memory."""
        pass

    async def shutdown(self) -> None:
        self._traces.clear()

    async def get_trace(self, session_id: str) -> Optional[SessionTrace]:
        """Get a trace, or None if no session with that id was saved."""
        return self._traces.get(session_id)

    async def save_trace(self, trace: SessionTrace) -> None:
        self._traces[trace.session_id] = trace

    async def delete_trace(self, session_id: str) -> None:
        self._traces.pop(session_id, None)

    async def list_traces(self) -> List[str]:
        return sorted(self._traces)


class JsonlTraceStore:
    """One JSON-lines file per session under `root`.

    Scoped ids (``namespace:session``) map to ``root/namespace/session.trace.jsonl``.
    """

    SUFFIX = ".trace.jsonl"

    def __init__(self, root: Path):
        self.root = Path(root)
        self._lock = asyncio.Lock()

    async def initialize(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        logger.info(f"Trace store at {self.root}")

    async def shutdown(self) -> None:
        pass

    def _path(self, session_id: str) -> Path:
        parts = [p for p in session_id.split(SESSION_ID_SEPARATOR) if p]
        if not parts or any(p in (".", "..") or "/" in p for p in parts):
            raise TraceError(f"invalid session id {session_id!r}")
        return self.root.joinpath(*parts[:-1], parts[-1] + self.SUFFIX)

    async def get_trace(self, session_id: str) -> Optional[SessionTrace]:
        path = self._path(session_id)
        if not path.exists():
            logger.debug(f"Trace {session_id} not found")
            return None
        text = await asyncio.to_thread(path.read_text, encoding="utf-8")
        return SessionTrace.from_jsonl(text)

    async def save_trace(self, trace: SessionTrace) -> None:
        path = self._path(trace.session_id)
        async with self._lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            await asyncio.to_thread(path.write_text, trace.to_jsonl(), encoding="utf-8")
        logger.debug(f"Saved trace {trace.session_id}: {len(trace)} events")

    async def delete_trace(self, session_id: str) -> None:
        path = self._path(session_id)
        if path.exists():
            path.unlink()
            logger.info(f"Deleted trace {session_id}")

    async def list_traces(self) -> List[str]:
        ids = []
        for path in sorted(self.root.rglob("*" + self.SUFFIX)):
            rel = path.relative_to(self.root)
            parts = list(rel.parts[:-1]) + [rel.name[: -len(self.SUFFIX)]]
            ids.append(SESSION_ID_SEPARATOR.join(parts))
        return ids
