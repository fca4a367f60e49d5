"""On-disk corpus: conversation records, PCM audio with sidecars, manifest and stats."""

import hashlib
import json
import logging
import statistics
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from corpus.conversation import AGENT, USER, SyntheticConversation
from corpus.mixing import MixSpec
from corpus.synth import Waveform
from corpus.world import CorpusWorld
from exceptions import CorpusError
from streams.types import TurnKind

logger = logging.getLogger(__name__)

CONVERSATIONS_FILE = "conversations.jsonl"
MANIFEST_FILE = "manifest.jsonl"
STATS_FILE = "stats.json"
VOCAB_FILE = "vocab.json"


class WordRecord(BaseModel):
    w: str
    t_start: float
    t_end: float


class TurnRecord(BaseModel):
    kind: TurnKind
    t_turn: float


class SideRecord(BaseModel):
    words: List[WordRecord] = Field(default_factory=list)
    turns: List[TurnRecord] = Field(default_factory=list)


class TransferRecord(BaseModel):
    model_config = {"populate_by_name": True}

    from_side: int = Field(alias="from")
    to: int
    prev_end: float
    t_turn: float
    kind: TurnKind


class ConversationRecord(BaseModel):
    """One line of conversations.jsonl."""

    id: str
    duration: float
    voice_seeds: List[int] = Field(default_factory=lambda: [0, 1])
    sides: List[SideRecord]
    transfers: List[TransferRecord] = Field(default_factory=list)


class AudioSidecar(BaseModel):
    id: str
    sample_rate: int
    n_samples: int
    mixspec: Optional[Dict[str, Any]] = None


class ManifestRecord(BaseModel):
    id: str
    split: str
    audio: Dict[str, str]
    mixed: str
    mixspec: Dict[str, Any]


class CorpusStats(BaseModel):
    n_conversations: int
    median_fto: Optional[float]
    turns_by_kind: Dict[str, int]
    n_backchannels: int
    total_duration: float


def write_audio(path: Path, waveform: Waveform, audio_id: str, mixspec: Optional[MixSpec] = None) -> None:
    """Headerless little-endian float32 PCM plus a ``.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(waveform.samples.astype("<f4").tobytes())
    sidecar = AudioSidecar(
        id=audio_id,
        sample_rate=waveform.sample_rate,
        n_samples=len(waveform),
        mixspec=mixspec.to_dict() if mixspec else None,
    )
    path.with_suffix(".json").write_text(sidecar.model_dump_json())


def read_audio(path: Path) -> Tuple[Waveform, AudioSidecar]:
    path = Path(path)
    try:
        sidecar = AudioSidecar.model_validate_json(path.with_suffix(".json").read_text())
    except FileNotFoundError:
        raise CorpusError(f"missing sidecar for {path}")
    except ValidationError as e:
        raise CorpusError(f"invalid sidecar for {path}: {e}")
    samples = np.frombuffer(path.read_bytes(), dtype="<f4").astype(np.float64)
    if len(samples) != sidecar.n_samples:
        raise CorpusError(
            f"{path} holds {len(samples)} samples, sidecar says {sidecar.n_samples}",
            details={"path": str(path)},
        )
    return Waveform(samples, sidecar.sample_rate), sidecar


def write_conversations(path: Path, conversations: Iterable[SyntheticConversation]) -> None:
    with open(path, "w") as fh:
        for conv in conversations:
            fh.write(conv.to_json() + "\n")


def read_conversations(path: Path) -> List[SyntheticConversation]:
    convs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = ConversationRecord.model_validate_json(line)
            except ValidationError as e:
                raise CorpusError(f"{path}:{lineno}: invalid conversation record: {e}")
            convs.append(SyntheticConversation.from_record(record.model_dump(mode="json", by_alias=True)))
    return convs


def corpus_stats(conversations: List[SyntheticConversation]) -> CorpusStats:
    ftos = [f for c in conversations for f in c.fto_list]
    kinds = {k.value: 0 for k in TurnKind}
    for conv in conversations:
        for side in conv.sides:
            for turn in side.turns:
                kinds[turn.kind.value] += 1
    return CorpusStats(
        n_conversations=len(conversations),
        median_fto=statistics.median(ftos) if ftos else None,
        turns_by_kind=kinds,
        n_backchannels=kinds[TurnKind.BACKCHANNEL.value],
        total_duration=round(sum(c.duration for c in conversations), 6),
    )


def manifest_hash(out_dir: Path) -> str:
    return hashlib.sha256((Path(out_dir) / MANIFEST_FILE).read_bytes()).hexdigest()


def write_corpus(world: CorpusWorld, out_dir: Path, mix_seed: int) -> CorpusStats:
    """Materialise a corpus directory.

    Args:
        world: Generated world
        out_dir: Target directory (created)
        mix_seed: Seed for the per-conversation mixture specs

    Returns:
        Corpus statistics, also written to ``stats.json``
    """
    out_dir = Path(out_dir)
    (out_dir / "audio").mkdir(parents=True, exist_ok=True)
    world.vocab.save(out_dir / VOCAB_FILE)
    write_conversations(out_dir / CONVERSATIONS_FILE, world.conversations)

    held = {c.id for c in world.held_out}
    records: List[ManifestRecord] = []
    for index, conv in enumerate(world.conversations):
        paths = {"user": f"audio/{conv.id}.user.f32", "agent": f"audio/{conv.id}.agent.f32"}
        user = world.side_waveform(conv, USER)
        write_audio(out_dir / paths["user"], user, f"{conv.id}.user")
        write_audio(out_dir / paths["agent"], world.side_waveform(conv, AGENT), f"{conv.id}.agent")

        rng = np.random.default_rng([mix_seed, index])
        mixed, spec = world.augmenter.augment(user, rng)
        mixed_path = f"audio/{conv.id}.mixed.f32"
        write_audio(out_dir / mixed_path, mixed, f"{conv.id}.mixed", spec)
        records.append(
            ManifestRecord(
                id=conv.id,
                split="held_out" if conv.id in held else "train",
                audio=paths,
                mixed=mixed_path,
                mixspec=spec.to_dict(),
            )
        )

    with open(out_dir / MANIFEST_FILE, "w") as fh:
        for record in records:
            fh.write(record.model_dump_json() + "\n")

    stats = corpus_stats(world.conversations)
    (out_dir / STATS_FILE).write_text(json.dumps(stats.model_dump(), indent=2))
    logger.info(
        f"Wrote corpus of {stats.n_conversations} conversations to {out_dir} "
        f"(median FTO {stats.median_fto}, manifest {manifest_hash(out_dir)[:12]})"
    )
    return stats
