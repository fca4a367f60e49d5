"""Large-model backbones, kept as interface placeholders.

Prompted (in-context) and instruction-tuned language models can sit behind
the same protocol; no such model ships with this repository.
"""

from typing import Iterator

from exceptions import BackboneUnavailableError


class _UnavailableBackbone:
    name = "unavailable"

    def ingest_user_token(self, token: str) -> None:
        raise BackboneUnavailableError(self.name)

    def on_turn(self) -> Iterator[str]:
        raise BackboneUnavailableError(self.name)

    def reset(self) -> None:
        raise BackboneUnavailableError(self.name)


class ICLBackbone(_UnavailableBackbone):
    """In-context-prompted large model."""

    name = "icl"


class InstructionTunedBackbone(_UnavailableBackbone):
    """Instruction-tuned large model."""

    name = "instruction_tuned"
