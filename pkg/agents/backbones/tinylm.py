"""Small-model backbone: text continuation with a stage-1 checkpoint.

Stage-1 text samples are a user turn followed by its reply and EOS, so
feeding BOS and the user pieces as previous tokens (with NULL audio and
visual) and decoding greedily continues with the reply.
"""

import logging
from typing import Iterator, List

import numpy as np

from agents.backbones.simple import BufferedBackbone
from model.decode import decode_greedy
from model.transformer import TEXT_HEAD, DuplexTransformer
from streams.vocab import BOS_ID, EOS_ID, NULL_CODE, NULL_ID, Vocabulary

logger = logging.getLogger(__name__)


class TinyLMBackbone(BufferedBackbone):
    """Greedy text continuation over a `DuplexTransformer`.

    Args:
        model: Transformer trained on the text-continuation task
        vocab: Vocabulary of the model
        max_tokens: Cap on generated pieces
    """

    name = "tinylm"

    def __init__(self, model: DuplexTransformer, vocab: Vocabulary, max_tokens: int = 24):
        super().__init__()
        self.model = model
        self.vocab = vocab
        self.max_tokens = max_tokens
        cfg = model.config
        self._no_audio = np.full(cfg.n_codebooks, NULL_CODE, dtype=np.int64)
        self._no_visual = np.zeros(cfg.visual_dim)

    def _step(self, cache, prev: int) -> np.ndarray:
        activation, _ = self.model.step_with_cache(cache, self._no_audio, self._no_visual, False, prev, NULL_ID)
        return activation.logits[TEXT_HEAD]

    def generate(self, user_pieces: List[str]) -> List[str]:
        budget = self.model.config.max_context - self.max_tokens - 1
        prompt = [self.vocab.id_of(p) for p in user_pieces if p in self.vocab.text_pieces][-max(budget, 0):]
        cache = self.model.new_cache()
        logits = self._step(cache, BOS_ID)
        for token in prompt:
            logits = self._step(cache, token)
        out: List[str] = []
        for _ in range(self.max_tokens):
            token = decode_greedy(logits)
            if token == EOS_ID or not self.vocab.is_text(token):
                break
            out.append(self.vocab.piece_of(token))
            logits = self._step(cache, token)
        return out

    def on_turn(self) -> Iterator[str]:
        pieces = list(self.buffer)
        self.buffer = []
        reply = self.generate(pieces)
        logger.debug(f"TinyLM reply to {len(pieces)} pieces: {len(reply)} pieces")
        return iter(reply)
