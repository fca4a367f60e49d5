"""The synthetic world: lexicon, conversations, voices, noise and interferers."""

import logging
from functools import cached_property
from typing import Dict, List, Optional, Tuple

from agents.helpers import derive_seed
from config.environments.base import BaseSettings
from corpus.conversation import AGENT, USER, ConversationParams, SyntheticConversation, gen_conversation
from corpus.lexicon import Lexicon, build_lexicon
from corpus.mixing import Augmenter, NoiseBank
from corpus.synth import Waveform, synth_speech
from streams.grid import FrameGrid
from streams.vocab import Vocabulary

logger = logging.getLogger(__name__)

INTERFERER_VOICE_BASE = 5000


class CorpusWorld:
    """Everything generated from (settings, seed).

    Conversations are generated eagerly; audio, the noise bank and the
    interferer pool are built on first use and cached.

    Args:
        settings: Resolved run settings
        seed: Corpus seed; defaults to ``settings.seed``
        n_conversations: Override for ``settings.corpus.n_conversations``
    """

    def __init__(self, settings: BaseSettings, seed: Optional[int] = None, n_conversations: Optional[int] = None):
        self.settings = settings
        self.seed = settings.seed if seed is None else seed
        self.grid = FrameGrid.from_settings(settings.grid)
        self.sample_rate = settings.corpus.sample_rate
        self.lexicon: Lexicon = build_lexicon(settings.lexicon)
        self.vocab: Vocabulary = self.lexicon.vocabulary()
        self.params = ConversationParams.from_settings(settings.corpus)

        n = settings.corpus.n_conversations if n_conversations is None else n_conversations
        self.conversations: List[SyntheticConversation] = [self.make_conversation(i) for i in range(n)]
        n_held = int(round(n * settings.corpus.held_out_fraction))
        if n_held == 0 and n > 1 and settings.corpus.held_out_fraction > 0:
            n_held = 1
        self.train = self.conversations[: n - n_held]
        self.held_out = self.conversations[n - n_held:]
        self._audio: Dict[Tuple[str, int], Waveform] = {}
        logger.info(f"Corpus world: {len(self.train)} train / {len(self.held_out)} held-out conversations (seed {self.seed})")

    def make_conversation(self, index: int) -> SyntheticConversation:
        return gen_conversation(
            derive_seed(self.seed, "conv", index),
            self.params,
            self.lexicon,
            conv_id=f"conv-{index:05d}",
            voice_seeds=(2 * index + 1, 2 * index + 2),
        )

    def side_waveform(self, conv: SyntheticConversation, side: int = USER) -> Waveform:
        """Clean rendering of one side, covering the whole conversation."""
        key = (conv.id, side)
        if key not in self._audio:
            self._audio[key] = synth_speech(conv.sides[side], conv.voice_seeds[side], conv.duration, self.sample_rate)
        return self._audio[key]

    def agent_waveform(self, conv: SyntheticConversation) -> Waveform:
        return self.side_waveform(conv, AGENT)

    @cached_property
    def interferers(self) -> List[Waveform]:
        """One side of each independently generated conversation, in a voice of its own."""
        pool = []
        for j in range(self.settings.corpus.n_interferer_conversations):
            conv = gen_conversation(derive_seed(self.seed, "interferer", j), self.params, self.lexicon, conv_id=f"interf-{j}")
            side = j % 2
            pool.append(synth_speech(conv.sides[side], INTERFERER_VOICE_BASE + j, conv.duration, self.sample_rate))
        return pool

    @cached_property
    def noise_bank(self) -> NoiseBank:
        aug = self.settings.augment
        return NoiseBank(aug.noise_bank_size, derive_seed(self.seed, "noise") % 100_000, aug.babble_voices, sample_rate=self.sample_rate)

    @cached_property
    def augmenter(self) -> Augmenter:
        return Augmenter(self.settings.augment, self.noise_bank, self.interferers)
