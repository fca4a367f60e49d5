"""NULL grids, grid files, and the conversation front-end."""

import json
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from corpus.conversation import USER, SyntheticConversation
from corpus.mixing import MixSpec
from corpus.synth import Waveform
from corpus.world import CorpusWorld
from encoders.acoustic import AcousticTokenizer
from encoders.types import AcousticTokenGrid, EncoderConfig, GridKind, VisualFeatureGrid
from encoders.visual import visual_encode
from exceptions import DataError, GridMismatchError
from streams.vocab import NULL_CODE

logger = logging.getLogger(__name__)

Grid = Union[AcousticTokenGrid, VisualFeatureGrid]


def null_grid(kind: GridKind, frames: int, config: Optional[EncoderConfig] = None) -> Grid:
    """Grid of NULL markers that the model embeds as exact zeros."""
    config = config or EncoderConfig()
    if GridKind(kind) == GridKind.AUDIO:
        return AcousticTokenGrid(np.full((frames, config.n_codebooks), NULL_CODE, dtype=np.int64), config.codebook_size)
    return VisualFeatureGrid(
        features=np.zeros((frames, config.visual_dim)),
        present=np.zeros(frames, dtype=bool),
        lookahead=config.lookahead,
    )


def save_grid(path: Path, grid: Grid, config_hash: str) -> None:
    """One JSON header line, then frame-major little-endian data.

    Token grids store int32 codes; visual grids store float32 features
    followed by one presence byte per frame.
    """
    if isinstance(grid, AcousticTokenGrid):
        header = {"kind": "audio", "frames": grid.frames, "streams": int(grid.tokens.shape[1]) if grid.frames else 16,
                  "codebook_size": grid.codebook_size, "config_hash": config_hash}
        body = grid.tokens.astype("<i4").tobytes()
    else:
        header = {"kind": "visual", "frames": grid.frames, "dims": int(grid.features.shape[1]),
                  "lookahead": grid.lookahead, "config_hash": config_hash}
        body = grid.features.astype("<f4").tobytes() + grid.present.astype(np.uint8).tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + body)


def load_grid(path: Path) -> Tuple[Grid, dict]:
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise DataError(f"{path} has no grid header")
    try:
        header = json.loads(raw[:newline])
    except json.JSONDecodeError as e:
        raise DataError(f"{path} has a malformed grid header: {e}")
    body = raw[newline + 1:]
    frames = int(header["frames"])
    if header["kind"] == "audio":
        streams = int(header["streams"])
        tokens = np.frombuffer(body, dtype="<i4").astype(np.int64)
        if tokens.size != frames * streams:
            raise DataError(f"{path}: expected {frames}x{streams} codes, found {tokens.size}")
        return AcousticTokenGrid(tokens.reshape(frames, streams), int(header["codebook_size"])), header
    dims = int(header["dims"])
    n_feat = frames * dims * 4
    if len(body) != n_feat + frames:
        raise DataError(f"{path}: visual body has {len(body)} bytes, expected {n_feat + frames}")
    features = np.frombuffer(body[:n_feat], dtype="<f4").astype(np.float64).reshape(frames, dims)
    present = np.frombuffer(body[n_feat:], dtype=np.uint8).astype(bool)
    return VisualFeatureGrid(features, present, int(header.get("lookahead", 2))), header


def check_aligned(audio: AcousticTokenGrid, visual: VisualFeatureGrid) -> None:
    if audio.frames != visual.frames:
        raise GridMismatchError(audio.frames, visual.frames)


def load_grid_pair(audio_path: Path, visual_path: Path) -> Tuple[AcousticTokenGrid, VisualFeatureGrid, str]:
    """Load a session's two grid files and check they belong together.

    Returns:
        The audio grid, the visual grid and their shared encoder config hash

    Raises:
        DataError: If a file holds the wrong kind of grid or the config hashes differ
        GridMismatchError: If the grids cover different numbers of frames
    """
    audio, audio_header = load_grid(audio_path)
    visual, visual_header = load_grid(visual_path)
    if not isinstance(audio, AcousticTokenGrid):
        raise DataError(f"{audio_path} holds a {audio_header['kind']} grid, not audio")
    if not isinstance(visual, VisualFeatureGrid):
        raise DataError(f"{visual_path} holds a {visual_header['kind']} grid, not visual")
    if audio_header.get("config_hash") != visual_header.get("config_hash"):
        raise DataError(
            "audio and visual grids come from different encoder configs",
            details={"audio": audio_header.get("config_hash"), "visual": visual_header.get("config_hash")},
        )
    check_aligned(audio, visual)
    return audio, visual, str(audio_header.get("config_hash", ""))


class FrontEnd:
    """Turns conversations (plus a mixture spec) into model input grids.

    Args:
        world: Corpus world providing audio, noise and interferers
        config: Encoder configuration
    """

    def __init__(self, world: CorpusWorld, config: EncoderConfig):
        self.world = world
        self.config = config
        self.tokenizer = AcousticTokenizer(config, world.sample_rate, world.grid.fps)

    def padded_user_audio(self, conv: SyntheticConversation, frames: int, user_side: int = USER) -> Waveform:
        spf = self.world.sample_rate // self.world.grid.fps
        return self.world.side_waveform(conv, user_side).fit(frames * spf)

    def encode(
        self,
        conv: SyntheticConversation,
        frames: int,
        spec: Optional[MixSpec] = None,
        user_side: int = USER,
    ) -> Tuple[AcousticTokenGrid, VisualFeatureGrid]:
        """Audio grid of the (optionally mixed) user side and its clean visual grid."""
        clean = self.padded_user_audio(conv, frames, user_side)
        heard = self.world.augmenter.render(clean, spec) if spec is not None else clean
        audio = self.tokenizer.tokenize(heard)
        visual = visual_encode(conv.sides[user_side], clean, self.config, frames=frames, fps=self.world.grid.fps)
        check_aligned(audio, visual)
        return audio, visual

    def encode_waveform(self, waveform: Waveform) -> AcousticTokenGrid:
        return self.tokenizer.tokenize(waveform)
