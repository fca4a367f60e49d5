"""Front-end configuration and frame grids."""

import hashlib
import json
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from config.environments.base import EncoderSettings
from exceptions import GridMismatchError


class EncoderMode(str, Enum):
    """ACOUSTIC keeps voice detail; SEMANTIC maps any voice to the same codes."""

    ACOUSTIC = "acoustic"
    SEMANTIC = "semantic"


class GridKind(str, Enum):
    AUDIO = "audio"
    VISUAL = "visual"


@dataclass(frozen=True)
class EncoderConfig:
    mode: EncoderMode = EncoderMode.ACOUSTIC
    codebook_size: int = 64
    n_codebooks: int = 16
    n_filterbank: int = 32
    visual_dim: int = 16
    lookahead: int = 2
    projection_seed: int = 1234
    visual_jitter: float = 0.01

    @classmethod
    def from_settings(cls, settings: EncoderSettings) -> "EncoderConfig":
        return cls(
            mode=EncoderMode(settings.mode),
            codebook_size=settings.codebook_size,
            n_codebooks=settings.n_codebooks,
            n_filterbank=settings.n_filterbank,
            visual_dim=settings.visual_dim,
            lookahead=settings.lookahead,
            projection_seed=settings.projection_seed,
            visual_jitter=settings.visual_jitter,
        )

    def hash(self) -> str:
        data = asdict(self)
        data["mode"] = self.mode.value
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode("utf-8")).hexdigest()


@dataclass
class AcousticTokenGrid:
    """(frames, 16) codebook ids; NULL frames hold NULL_CODE in every column."""

    tokens: np.ndarray
    codebook_size: int = 64
    fps: int = 25

    @property
    def frames(self) -> int:
        return len(self.tokens)


@dataclass
class VisualFeatureGrid:
    """(frames, D_v) features plus a per-frame presence mask."""

    features: np.ndarray
    present: np.ndarray
    lookahead: int = 2

    def __post_init__(self):
        if len(self.present) != len(self.features):
            raise GridMismatchError(len(self.features), len(self.present))

    @property
    def frames(self) -> int:
        return len(self.features)
