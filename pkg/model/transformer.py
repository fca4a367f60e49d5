"""Multi-stream causal transformer.

Each frame fuses the 16 acoustic codes, the visual features and the previous
tokens of the output streams into one embedding; a stack of causal blocks
then predicts the next token of every output stream. Training runs whole
sequences with teacher forcing; sessions step one frame at a time against a
per-layer key/value cache.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from exceptions import ContextOverflowError, VocabularyError
from model.config import ModelConfig, ModelVariant
from model.layers import Block, LayerCache, LayerNorm, Linear, softmax
from model.params import Parameters
from streams.targets import StreamInputs
from streams.vocab import NULL_CODE, NULL_ID

logger = logging.getLogger(__name__)

TEXT_HEAD = "text"
TURN_HEAD = "turn"


@dataclass
class StepActivation:
    """Activations of one streamed frame.

    Attributes:
        e: Fused input embedding (d_model,)
        z: Top-layer output after the final LayerNorm (d_model,)
        logits: Head name -> logit vector; "text" is U (dual) or R (unified)
    """

    e: np.ndarray
    z: np.ndarray
    logits: Dict[str, np.ndarray]

    def probabilities(self, head: str = TEXT_HEAD) -> np.ndarray:
        return softmax(self.logits[head])


@dataclass
class SequenceOutput:
    e: np.ndarray
    z: np.ndarray
    logits: Dict[str, np.ndarray]


@dataclass
class DecodeCache:
    """Per-layer keys/values of one session plus the next frame index."""

    layers: List[LayerCache]
    position: int = 0

    @classmethod
    def empty(cls, config: ModelConfig) -> "DecodeCache":
        return cls(layers=[LayerCache(config.max_context, config.n_heads, config.d_head) for _ in range(config.n_layers)])


@dataclass
class _FusionCache:
    audio_idx: np.ndarray
    audio_mask: np.ndarray
    prev_text: np.ndarray
    prev_turn: np.ndarray
    frames: int


class DuplexTransformer:
    """Forward, backward and cached streaming over one `Parameters` store.

    The instance holds per-call caches for backward, so one instance serves
    one training loop. Streaming sessions share the instance read-only: each
    keeps its own `DecodeCache` and `step_with_cache` stores nothing on self.
    """

    def __init__(self, config: ModelConfig, params: Parameters):
        self.config = config
        self.params = params
        self.proj_audio = Linear(params, "proj.audio", bias=False)
        self.proj_visual = Linear(params, "proj.visual", bias=False)
        self.blocks = [Block(params, f"block{i}", config.n_heads) for i in range(config.n_layers)]
        self.final_ln = LayerNorm(params, "final_ln")
        self.heads = {TEXT_HEAD: Linear(params, "head.text")}
        if config.variant == ModelVariant.DUAL:
            self.heads[TURN_HEAD] = Linear(params, "head.turn")
        self._fusion = None

    @property
    def head_names(self) -> Tuple[str, ...]:
        return tuple(self.heads)

    def _check_ids(self, tokens: np.ndarray, high: int, null: int, what: str) -> np.ndarray:
        tokens = np.asarray(tokens, dtype=np.int64)
        bad = (tokens != null) & ((tokens < 0) | (tokens >= high))
        if np.any(bad):
            raise VocabularyError(
                f"{what} id out of range [0, {high})",
                details={"ids": sorted(set(int(t) for t in tokens[bad]))[:8]},
            )
        return tokens

    def _fuse(
        self,
        audio: np.ndarray,
        visual: np.ndarray,
        visual_present: np.ndarray,
        prev_text: np.ndarray,
        prev_turn: np.ndarray,
        cache: bool,
    ) -> np.ndarray:
        """e = L_A(sum_i E_A[i, A_i]) + L_V(V) + E(U_prev) + E(T_prev), NULL entries as exact zeros."""
        cfg = self.config
        audio = self._check_ids(audio, cfg.codebook_size, NULL_CODE, "acoustic code")
        prev_text = self._check_ids(prev_text, cfg.vocab_size, NULL_ID, "token")
        prev_turn = self._check_ids(prev_turn, cfg.vocab_size, NULL_ID, "token")

        audio_mask = audio != NULL_CODE
        audio_idx = np.where(audio_mask, audio, 0)
        codebooks = np.arange(audio.shape[1])[None, :]
        summed = (self.params["embed.audio"][codebooks, audio_idx] * audio_mask[..., None]).sum(axis=1)

        vis = np.where(np.asarray(visual_present, dtype=bool)[:, None], visual, 0.0)
        table = self.params["embed.tokens"]
        text_mask = (prev_text != NULL_ID)[:, None]
        turn_mask = (prev_turn != NULL_ID)[:, None]
        tokens = table[np.where(text_mask[:, 0], prev_text, 0)] * text_mask
        tokens = tokens + table[np.where(turn_mask[:, 0], prev_turn, 0)] * turn_mask

        if cache:
            e = self.proj_audio.forward(summed) + self.proj_visual.forward(vis) + tokens
            self._fusion = _FusionCache(audio_idx, audio_mask, prev_text, prev_turn, len(audio))
        else:
            e = self.proj_audio.apply(summed) + self.proj_visual.apply(vis) + tokens
        return e

    def embed_step(
        self,
        audio_n: np.ndarray,
        visual_n: np.ndarray,
        present_n: bool,
        prev_text: int,
        prev_turn: int,
    ) -> np.ndarray:
        """Fused embedding of one frame (no position term)."""
        return self._fuse(
            np.asarray(audio_n)[None, :],
            np.asarray(visual_n, dtype=np.float64)[None, :],
            np.array([present_n], dtype=bool),
            np.array([prev_text]),
            np.array([prev_turn]),
            cache=False,
        )[0]

    def forward_sequence(self, inputs: StreamInputs) -> SequenceOutput:
        """Teacher-forced logits for every frame, caching activations for `backward`."""
        frames = inputs.frames
        if frames > self.config.max_context:
            raise ContextOverflowError(frames, self.config.max_context)
        e = self._fuse(inputs.audio, inputs.visual, inputs.visual_present, inputs.prev_text, inputs.prev_turn, cache=True)
        x = e + self.params["embed.position"][:frames]
        for block in self.blocks:
            x = block.forward(x)
        z = self.final_ln.forward(x)
        logits = {name: head.forward(z) for name, head in self.heads.items()}
        return SequenceOutput(e=e, z=z, logits=logits)

    def backward(self, grad_logits: Dict[str, np.ndarray]) -> None:
        """Accumulate parameter gradients for the last `forward_sequence` call."""
        if self._fusion is None:
            raise RuntimeError("backward called before forward_sequence")
        fusion = self._fusion
        g = None
        for name, grad in grad_logits.items():
            if name not in self.heads:
                continue
            part = self.heads[name].backward(grad)
            g = part if g is None else g + part
        if g is None:
            return
        g = self.final_ln.backward(g)
        for block in reversed(self.blocks):
            g = block.backward(g)

        grads = self.params.grads
        grads["embed.position"][: fusion.frames] += g

        for prev in (fusion.prev_text, fusion.prev_turn):
            rows = prev != NULL_ID
            np.add.at(grads["embed.tokens"], prev[rows], g[rows])

        self.proj_visual.backward(g)
        g_summed = self.proj_audio.backward(g)
        frame_idx, book_idx = np.nonzero(fusion.audio_mask)
        np.add.at(grads["embed.audio"], (book_idx, fusion.audio_idx[frame_idx, book_idx]), g_summed[frame_idx])

    def step_with_cache(
        self,
        cache: DecodeCache,
        audio_n: np.ndarray,
        visual_n: np.ndarray,
        present_n: bool,
        prev_text: int,
        prev_turn: int,
    ) -> Tuple[StepActivation, DecodeCache]:
        """Run one frame, appending its keys/values to `cache`.

        Raises:
            ContextOverflowError: When the cache already holds max_context frames
        """
        position = cache.position
        if position >= self.config.max_context:
            raise ContextOverflowError(position + 1, self.config.max_context)
        e = self.embed_step(audio_n, visual_n, present_n, prev_text, prev_turn)
        x = e + self.params["embed.position"][position]
        for block, layer_cache in zip(self.blocks, cache.layers):
            x = block.step(x, layer_cache, position)
        z = self.final_ln.apply(x)
        logits = {name: head.apply(z) for name, head in self.heads.items()}
        cache.position = position + 1
        return StepActivation(e=e, z=z, logits=logits), cache

    def new_cache(self) -> DecodeCache:
        return DecodeCache.empty(self.config)
