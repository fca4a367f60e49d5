"""Frame-synchronous model adapters for the session runner."""

from typing import Dict, Optional, Sequence

import numpy as np

from model.transformer import TEXT_HEAD, TURN_HEAD, DecodeCache, DuplexTransformer
from streams.vocab import EMP_ID, TURN_TOKEN_IDS

# Logit given to the scripted token; everything else stays at 0.
SCRIPT_LOGIT = 50.0


class TransformerStreamer:
    """Steps a `DuplexTransformer` with its own decode cache.

    Several streamers may share one transformer; each session owns one streamer.
    """

    def __init__(self, model: DuplexTransformer):
        self.model = model
        self.head_names = model.head_names
        self.cache: Optional[DecodeCache] = None
        self.reset()

    def reset(self) -> None:
        self.cache = self.model.new_cache()

    def step(self, audio_n, visual_n, present_n, prev_text, prev_turn) -> Dict[str, np.ndarray]:
        activation, self.cache = self.model.step_with_cache(self.cache, audio_n, visual_n, present_n, prev_text, prev_turn)
        return activation.logits


class ScriptedStreamer:
    """Emits a fixed token per frame, ignoring its inputs.

    Args:
        text: Token id per frame for the text (or unified) head; EMP past the end
        turn: Token id per frame for the turn head (EMP, SOT or BACKCHANNEL); None for unified
        vocab_size: Width of the text logits
    """

    def __init__(self, text: Sequence[int], turn: Optional[Sequence[int]], vocab_size: int):
        self.text = list(text)
        self.turn = None if turn is None else list(turn)
        self.vocab_size = vocab_size
        self.head_names = (TEXT_HEAD,) if turn is None else (TEXT_HEAD, TURN_HEAD)
        self.position = 0
        self.inputs = []

    def reset(self) -> None:
        self.position = 0
        self.inputs = []

    def step(self, audio_n, visual_n, present_n, prev_text, prev_turn) -> Dict[str, np.ndarray]:
        n = self.position
        self.position += 1
        self.inputs.append((int(prev_text), int(prev_turn)))
        text = np.zeros(self.vocab_size)
        text[self.text[n] if n < len(self.text) else EMP_ID] = SCRIPT_LOGIT
        logits = {TEXT_HEAD: text}
        if self.turn is not None:
            turn = np.zeros(len(TURN_TOKEN_IDS))
            token = self.turn[n] if n < len(self.turn) else EMP_ID
            turn[TURN_TOKEN_IDS.index(token)] = SCRIPT_LOGIT
            logits[TURN_HEAD] = turn
        return logits
