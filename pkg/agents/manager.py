"""
Session Manager - runs many duplex sessions over shared model parameters.

Each session gets its own streamer (decode cache), backbone and runner; the
transformer parameters are shared read-only. Sessions run in worker threads
under a concurrency limit and their traces go to a trace store.
"""
import asyncio
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from agents.core.interfaces import BackboneInterface, SessionInputs, SessionTrace, StreamingModel
from agents.core.runner import RunnerConfig, SessionRunner
from agents.core.session_service import InMemoryTraceStore
from agents.helpers import scope_session_id
from streams.vocab import Vocabulary

logger = logging.getLogger(__name__)


@dataclass
class SessionJob:
    """One session to run: its inputs plus factories for per-session state."""

    inputs: SessionInputs
    make_model: Callable[[], StreamingModel]
    make_backbone: Callable[[], Optional[BackboneInterface]] = lambda: None
    seed: int = 0
    meta: Dict = field(default_factory=dict)


class SessionManager:
    """Runs session jobs concurrently and stores their traces.

    Args:
        config: Runner configuration shared by every job (the job seed overrides `config.seed`)
        vocab: Vocabulary shared with the model
        store: Trace store; in-memory when None
        namespace: Prefix for stored session ids
        max_concurrency: Sessions running at once
    """

    def __init__(
        self,
        config: RunnerConfig,
        vocab: Vocabulary,
        store=None,
        namespace: str = "run",
        max_concurrency: int = 1,
    ):
        self.config = config
        self.vocab = vocab
        self.store = store or InMemoryTraceStore()
        self.namespace = namespace
        self._semaphore = asyncio.Semaphore(max(1, max_concurrency))

    async def initialize(self) -> None:
        await self.store.initialize()

    def _run_one(self, job: SessionJob) -> SessionTrace:
        config = RunnerConfig(**{**self.config.__dict__, "seed": job.seed})
        runner = SessionRunner(config, self.vocab)
        trace = runner.run(job.inputs, job.make_model(), job.make_backbone())
        trace.meta.update(job.meta)
        return trace

    async def run_session(self, job: SessionJob) -> SessionTrace:
        async with self._semaphore:
            trace = await asyncio.to_thread(self._run_one, job)
        trace.session_id = scope_session_id(self.namespace, job.inputs.session_id)
        await self.store.save_trace(trace)
        return trace

    async def run_many(self, jobs: List[SessionJob]) -> List[SessionTrace]:
        """Run all jobs; traces come back in job order whatever order they finish in."""
        logger.info(f"Running {len(jobs)} sessions (namespace {self.namespace})")
        return list(await asyncio.gather(*(self.run_session(job) for job in jobs)))
