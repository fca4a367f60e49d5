"""Response backbones for dual-mode sessions."""

from typing import Optional

from agents.backbones.remote import ICLBackbone, InstructionTunedBackbone
from agents.backbones.simple import EchoBackbone, ScriptedBackbone
from agents.backbones.tinylm import TinyLMBackbone
from corpus.lexicon import Lexicon
from exceptions import ConfigurationError
from model.transformer import DuplexTransformer
from streams.vocab import Vocabulary

BACKBONES = ("echo", "scripted", "tinylm", "icl", "instruction_tuned")


def build_backbone(
    name: str,
    lexicon: Optional[Lexicon] = None,
    vocab: Optional[Vocabulary] = None,
    text_model: Optional[DuplexTransformer] = None,
    max_tokens: int = 24,
):
    """Construct a backbone by name.

    Raises:
        ConfigurationError: For an unknown name or missing dependencies
    """
    if name == "echo":
        return EchoBackbone()
    if name == "scripted":
        if lexicon is None:
            raise ConfigurationError("the scripted backbone needs the corpus lexicon")
        return ScriptedBackbone(lexicon)
    if name == "tinylm":
        if text_model is None or vocab is None:
            raise ConfigurationError("the tinylm backbone needs a text-continuation checkpoint (--backbone-ckpt)")
        return TinyLMBackbone(text_model, vocab, max_tokens)
    if name == "icl":
        return ICLBackbone()
    if name == "instruction_tuned":
        return InstructionTunedBackbone()
    raise ConfigurationError(f"unknown backbone '{name}'", details={"choices": list(BACKBONES)})


__all__ = [
    "BACKBONES",
    "EchoBackbone",
    "ICLBackbone",
    "InstructionTunedBackbone",
    "ScriptedBackbone",
    "TinyLMBackbone",
    "build_backbone",
]
