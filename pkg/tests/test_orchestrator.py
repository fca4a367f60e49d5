"""
Tests for the duplex session runner, backbones, transcripts and trace storage.

Tests:
1. Dual mode: taking the floor, completing, yielding and backchannels
2. Unified mode: explicit and implicit turns
3. Mode checks and state-machine safety under random token streams
4. Algorithmic latency
5. Transcript rendering and parsing
6. Trace stores and the session manager
7. Backbones and session id helpers
"""

from typing import Iterator, List

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from agents.backbones import EchoBackbone, ScriptedBackbone, build_backbone
from agents.core import (
    DialogueMode,
    InMemoryTraceStore,
    JsonlTraceStore,
    RunnerConfig,
    ScriptedStreamer,
    SessionInputs,
    SessionMode,
    SessionRunner,
    SessionTrace,
    TraceEventKind,
    TransformerStreamer,
    algorithmic_latency,
    parse_transcript,
    render_trace,
    run_session,
)
from agents.helpers import derive_seed, parse_scoped_session_id, scope_session_id
from agents.manager import SessionJob, SessionManager
from exceptions import BackboneUnavailableError, ConfigurationError, SessionError, TraceError
from model.params import init_parameters
from model.transformer import DuplexTransformer
from streams.vocab import BACKCHANNEL_ID, BOS_ID, EMP_ID, SOT_ID, Vocabulary, split_pieces

VOCAB = Vocabulary.from_words(["ka-lo", "mi", "su"])
MI = VOCAB.id_of("mi")
SU = VOCAB.id_of("su")


class StubBackbone:
    """Answers every turn with a fixed number of "su" pieces and records what it heard."""

    name = "stub"

    def __init__(self, n_pieces: int = 30):
        self.n_pieces = n_pieces
        self.heard: List[str] = []
        self.turns = 0

    def ingest_user_token(self, token: str) -> None:
        self.heard.append(token)

    def on_turn(self) -> Iterator[str]:
        self.turns += 1
        return iter(["su"] * self.n_pieces)

    def reset(self) -> None:
        self.heard = []
        self.turns = 0


def _inputs(frames: int, session_id: str = "s") -> SessionInputs:
    return SessionInputs(np.zeros((frames, 16), dtype=np.int64), np.zeros((frames, 4)), np.ones(frames, dtype=bool), session_id)


def _script(frames: int, marks: dict) -> List[int]:
    tokens = [EMP_ID] * frames
    for frame, token in marks.items():
        tokens[frame] = token
    return tokens


def _frames(trace: SessionTrace, kind: TraceEventKind) -> List[int]:
    return [e.frame for e in trace.of_kind(kind)]


def _dual(text: List[int], turn: List[int], backbone=None, **config) -> SessionTrace:
    runner = SessionRunner(RunnerConfig(mode=SessionMode.DUAL, **config), VOCAB)
    return runner.run(_inputs(len(text)), ScriptedStreamer(text, turn, len(VOCAB)), backbone or StubBackbone())


def _unified(text: List[int], **config) -> SessionTrace:
    runner = SessionRunner(RunnerConfig(mode=SessionMode.UNIFIED, **config), VOCAB)
    return runner.run(_inputs(len(text)), ScriptedStreamer(text, None, len(VOCAB)))


def test_dual_takes_floor_and_yields():
    """Test 1: SOT at 75 speaks from 76; a user piece at 90 yields the floor on that frame."""
    backbone = StubBackbone()
    trace = _dual(_script(120, {90: MI}), _script(120, {75: SOT_ID}), backbone)

    changes = trace.of_kind(TraceEventKind.STATE_CHANGE)
    assert [(e.frame, e.payload["mode"]) for e in changes] == [(75, "speaking"), (90, "listening")]
    assert changes[1].payload["reason"] == "yield"
    assert _frames(trace, TraceEventKind.AGENT_TOKEN) == list(range(76, 90))
    assert _frames(trace, TraceEventKind.YIELD) == [90]
    assert backbone.heard == ["mi"]
    assert trace.sot_frames() == [75]


def test_dual_response_completes():
    """Test 1b: a three-piece reply ends with a completion on the next frame."""
    trace = _dual(_script(20, {}), _script(20, {10: SOT_ID}), StubBackbone(3))
    assert _frames(trace, TraceEventKind.AGENT_TOKEN) == [11, 12, 13]
    last = trace.of_kind(TraceEventKind.STATE_CHANGE)[-1]
    assert (last.frame, last.payload["reason"]) == (14, "complete")
    assert trace.agent_responses() == [["su", "su", "su"]]


def test_dual_caps_response_length():
    """Test 1c: replies stop at max_response_tokens."""
    trace = _dual(_script(60, {}), _script(60, {0: SOT_ID}), StubBackbone(30), max_response_tokens=5)
    assert len(trace.of_kind(TraceEventKind.AGENT_TOKEN)) == 5


def test_dual_never_sot_stays_silent():
    """Test 1d: a model that never emits SOT produces no agent events."""
    trace = _dual(_script(50, {3: MI, 4: SU}), _script(50, {}))
    assert not trace.of_kind(TraceEventKind.STATE_CHANGE)
    assert not trace.of_kind(TraceEventKind.AGENT_TOKEN)
    assert trace.user_pieces() == ["mi", "su"]


def test_dual_backchannel_only_while_listening():
    """Test 1e: BACKCHANNEL acknowledges while listening and is only logged while speaking."""
    trace = _dual(_script(30, {}), _script(30, {2: BACKCHANNEL_ID, 5: SOT_ID, 8: BACKCHANNEL_ID}))
    assert _frames(trace, TraceEventKind.BACKCHANNEL) == [2]
    assert trace.of_kind(TraceEventKind.BACKCHANNEL)[0].payload["ack"] == "mhm"
    assert len(trace.of_kind(TraceEventKind.TURN_TOKEN)) == 3


def test_dual_feeds_back_decoded_tokens():
    """Test 1f: the model sees BOS first, then its own previous decisions."""
    streamer = ScriptedStreamer(_script(10, {4: MI}), _script(10, {6: SOT_ID}), len(VOCAB))
    SessionRunner(RunnerConfig(), VOCAB).run(_inputs(10), streamer, StubBackbone())
    assert streamer.inputs[0] == (BOS_ID, BOS_ID)
    assert streamer.inputs[5] == (MI, EMP_ID)
    assert streamer.inputs[7] == (EMP_ID, SOT_ID)


def test_unified_explicit_turn():
    """Test 2: SOT then two pieces then EMP gives one completed turn."""
    trace = _unified(_script(20, {10: SOT_ID, 11: MI, 12: SU}))
    assert trace.sot_frames() == [10]
    assert _frames(trace, TraceEventKind.AGENT_TOKEN) == [11, 12]
    assert trace.of_kind(TraceEventKind.STATE_CHANGE)[-1].frame == 13


def test_unified_implicit_turns():
    """Test 2b: without SOT a response piece opens the turn only when implicit turns are on."""
    text = _script(12, {5: MI, 6: SU})
    assert not _unified(text).events
    trace = _unified(text, implicit_turns=True)
    sot = trace.of_kind(TraceEventKind.TURN_TOKEN)
    assert [e.frame for e in sot] == [5]
    assert sot[0].payload["implicit"] is True
    assert _frames(trace, TraceEventKind.AGENT_TOKEN) == [5, 6]
    assert trace.agent_responses() == [["mi", "su"]]


def test_mode_mismatch_is_rejected():
    """Test 3: heads and backbone must match the mode."""
    unified_model = ScriptedStreamer([EMP_ID], None, len(VOCAB))
    dual_model = ScriptedStreamer([EMP_ID], [EMP_ID], len(VOCAB))
    with pytest.raises(SessionError):
        SessionRunner(RunnerConfig(mode=SessionMode.DUAL), VOCAB).run(_inputs(1), unified_model, StubBackbone())
    with pytest.raises(SessionError):
        SessionRunner(RunnerConfig(mode=SessionMode.UNIFIED), VOCAB).run(_inputs(1), dual_model)
    with pytest.raises(SessionError):
        SessionRunner(RunnerConfig(mode=SessionMode.DUAL), VOCAB).run(_inputs(1), dual_model, None)


def _check_state_machine(trace: SessionTrace, cap: int) -> None:
    speaking = False
    emitted = 0
    last = -1
    for event in trace.events:
        assert event.frame >= last
        last = event.frame
        if event.kind == TraceEventKind.STATE_CHANGE:
            speaking = event.payload["mode"] == DialogueMode.SPEAKING.value
            emitted = 0
        elif event.kind == TraceEventKind.AGENT_TOKEN:
            assert speaking
            emitted += 1
            assert emitted <= cap
        elif event.kind == TraceEventKind.YIELD:
            assert speaking


token_streams = st.lists(st.sampled_from([EMP_ID, EMP_ID, EMP_ID, MI, SU]), min_size=1, max_size=80)
turn_streams = st.lists(st.sampled_from([EMP_ID, EMP_ID, EMP_ID, SOT_ID, BACKCHANNEL_ID]), min_size=80, max_size=80)


@hyp_settings(max_examples=60, deadline=None)
@given(token_streams, turn_streams, st.integers(min_value=1, max_value=6))
def test_dual_state_machine_is_safe(text, turn, cap):
    """Test 3b: agent tokens only while speaking, within the cap, in frame order, and reproducibly."""
    a = _dual(text, turn[: len(text)], StubBackbone(8), max_response_tokens=cap)
    b = _dual(text, turn[: len(text)], StubBackbone(8), max_response_tokens=cap)
    _check_state_machine(a, cap)
    assert a.events == b.events


@hyp_settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([EMP_ID, SOT_ID, BACKCHANNEL_ID, MI, SU]), min_size=1, max_size=80), st.booleans())
def test_unified_state_machine_is_safe(text, implicit):
    """Test 3c: the unified runner keeps the same safety properties."""
    trace = _unified(text, implicit_turns=implicit, max_response_tokens=4)
    _check_state_machine(trace, 4)


def test_transformer_sessions_are_deterministic(world, frontend, model_config):
    """Test 3d: a greedy session over a real model replays identically."""
    model = DuplexTransformer(model_config, init_parameters(model_config, seed=1))
    audio, visual = frontend.encode(world.conversations[0], 30)
    traces = [
        run_session(audio, visual, TransformerStreamer(model), ScriptedBackbone(world.lexicon), SessionMode.DUAL, world.vocab)
        for _ in range(2)
    ]
    assert traces[0].events == traces[1].events
    _check_state_machine(traces[0], 24)
    assert traces[0].meta["frames"] == 30


def test_algorithmic_latency():
    """Test 4: 40 ms chunks plus two 40 ms lookahead frames is 120 ms."""
    assert algorithmic_latency() == 120.0
    assert algorithmic_latency(lookahead_frames=0) == 40.0
    assert algorithmic_latency(lookahead_frames=1) == 80.0


def test_render_empty_and_single_event():
    """Test 5: an empty trace renders nothing; one agent token at frame 75 reads 3.000s."""
    assert render_trace(SessionTrace()) == ""
    trace = SessionTrace()
    trace.append(75, TraceEventKind.AGENT_TOKEN, token="mi")
    line = render_trace(trace).rstrip("\n")
    assert line.split()[:3] == ["3.000s", "AGENT", "mi"]
    assert line.endswith("| 75:A:mi")


def test_transcript_rebuilds_trace():
    """Test 5b: parsing a rendered session gives back its events."""
    trace = _dual(
        _script(40, {3: VOCAB.id_of("ka"), 4: VOCAB.id_of("##lo"), 20: MI}),
        _script(40, {1: BACKCHANNEL_ID, 10: SOT_ID}),
        StubBackbone(),
    )
    text = render_trace(trace)
    assert "yields the floor" in text
    assert "ka-lo" in text
    assert parse_transcript(text).events == trace.events


def test_transcript_parse_errors():
    """Test 5c: lines without an event list or with unknown codes are rejected."""
    with pytest.raises(TraceError):
        parse_transcript("    1.000s  USER    hello")
    with pytest.raises(TraceError):
        parse_transcript("    1.000s  USER    hello | 25:Q:hello")


def test_trace_jsonl_and_ordering():
    """Test 5d: traces survive JSON lines and refuse out-of-order events."""
    trace = _unified(_script(8, {2: SOT_ID, 3: MI}))
    assert SessionTrace.from_jsonl(trace.to_jsonl()).events == trace.events
    with pytest.raises(TraceError):
        SessionTrace.from_jsonl("")
    with pytest.raises(TraceError):
        trace.append(0, TraceEventKind.YIELD)


@pytest.mark.asyncio
async def test_jsonl_trace_store(tmp_path):
    """Test 6: scoped ids map to nested files and back."""
    store = JsonlTraceStore(tmp_path)
    await store.initialize()
    trace = _unified(_script(8, {2: SOT_ID, 3: MI}))
    trace.session_id = "dual:conv-1"
    await store.save_trace(trace)
    assert (tmp_path / "dual" / "conv-1.trace.jsonl").exists()
    assert await store.list_traces() == ["dual:conv-1"]
    restored = await store.get_trace("dual:conv-1")
    assert restored.events == trace.events
    await store.delete_trace("dual:conv-1")
    assert await store.get_trace("dual:conv-1") is None
    with pytest.raises(TraceError):
        await store.get_trace("../escape")


@pytest.mark.asyncio
async def test_in_memory_trace_store():
    """Test 6b: the in-memory store keeps traces until deleted."""
    store = InMemoryTraceStore()
    await store.initialize()
    await store.save_trace(SessionTrace(session_id="b"))
    await store.save_trace(SessionTrace(session_id="a"))
    assert await store.list_traces() == ["a", "b"]
    await store.delete_trace("a")
    assert await store.get_trace("a") is None


@pytest.mark.asyncio
async def test_session_manager_keeps_job_order():
    """Test 6c: traces come back in job order under their scoped ids."""
    manager = SessionManager(RunnerConfig(), VOCAB, namespace="dual", max_concurrency=2)
    await manager.initialize()
    jobs = [
        SessionJob(
            inputs=_inputs(length, session_id=f"conv-{i}"),
            make_model=lambda length=length: ScriptedStreamer(_script(length, {}), _script(length, {1: SOT_ID}), len(VOCAB)),
            make_backbone=lambda: StubBackbone(2),
            seed=i,
        )
        for i, length in enumerate([40, 5, 20])
    ]
    traces = await manager.run_many(jobs)
    assert [t.session_id for t in traces] == ["dual:conv-0", "dual:conv-1", "dual:conv-2"]
    assert [t.meta["frames"] for t in traces] == [40, 5, 20]
    assert [t.meta["seed"] for t in traces] == [0, 1, 2]
    assert await manager.store.list_traces() == ["dual:conv-0", "dual:conv-1", "dual:conv-2"]


def test_echo_and_scripted_backbones(world):
    """Test 7: echo repeats the heard words; scripted answers with the lexicon reply."""
    echo = EchoBackbone()
    for piece in ["ka", "##lo", "mi"]:
        echo.ingest_user_token(piece)
    assert list(echo.on_turn()) == ["ka", "##lo", "mi"]
    assert list(echo.on_turn()) == []

    word = world.lexicon.words[0]
    scripted = ScriptedBackbone(world.lexicon)
    for piece in split_pieces(word):
        scripted.ingest_user_token(piece)
    expected = [p for w in world.lexicon.respond([word]) for p in split_pieces(w)]
    assert list(scripted.on_turn()) == expected


def test_build_backbone():
    """Test 7b: unknown names fail at configuration time; large-model placeholders fail on use."""
    assert build_backbone("echo").name == "echo"
    with pytest.raises(ConfigurationError):
        build_backbone("scripted")
    with pytest.raises(ConfigurationError):
        build_backbone("oracle")
    with pytest.raises(BackboneUnavailableError):
        build_backbone("icl").on_turn()


def test_session_id_helpers():
    """Test 7c: scoped ids split back apart and seeds derive deterministically."""
    assert scope_session_id("dual-av", "conv-0003") == "dual-av:conv-0003"
    assert parse_scoped_session_id("dual-av:conv-0003") == ("dual-av", "conv-0003")
    with pytest.raises(ValueError):
        parse_scoped_session_id("no-namespace")
    assert derive_seed(0, "conv", 3) == derive_seed(0, "conv", 3)
    assert derive_seed(0, "conv", 3) != derive_seed(0, "conv", 4)
    assert 0 <= derive_seed(5, "x") < 2**63
