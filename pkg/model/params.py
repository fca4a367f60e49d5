"""Named parameter store with matching gradient buffers."""

from collections import OrderedDict
from typing import Dict, Iterator, List, Tuple

import numpy as np

from model.config import ModelConfig, ModelVariant

# Embedding tables and input adapters train at the higher learning rate.
EMBED_PREFIXES = ("embed.", "proj.")


class Parameters:
    """Ordered name -> float64 array map, plus a gradient per entry."""

    def __init__(self, values: "OrderedDict[str, np.ndarray]"):
        self.values = values
        self.grads: Dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in values.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self.values.items())

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def copy(self) -> "Parameters":
        return Parameters(OrderedDict((k, v.copy()) for k, v in self.values.items()))

    def group_of(self, name: str) -> str:
        return "embed" if name.startswith(EMBED_PREFIXES) else "block"

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.values.values())

    def n_params(self) -> int:
        return int(sum(v.size for v in self.values.values()))

    def load_matching(self, other: "Parameters") -> List[str]:
        """Copy every same-name, same-shape tensor from `other`; return the names copied."""
        copied = []
        for name, value in other.items():
            if name in self.values and self.values[name].shape == value.shape:
                self.values[name][...] = value
                copied.append(name)
        return copied


def init_parameters(config: ModelConfig, seed: int) -> Parameters:
    """Gaussian weights (std `init_std`), unit LayerNorm gains, zero biases."""
    rng = np.random.default_rng(seed)
    d, std = config.d_model, config.init_std
    values: "OrderedDict[str, np.ndarray]" = OrderedDict()

    def normal(*shape: int) -> np.ndarray:
        return rng.standard_normal(shape) * std

    values["embed.tokens"] = normal(config.vocab_size, d)
    values["embed.audio"] = normal(config.n_codebooks, config.codebook_size, d)
    values["proj.audio"] = normal(d, d)
    values["proj.visual"] = normal(d, config.visual_dim)
    values["embed.position"] = normal(config.max_context, d)

    for i in range(config.n_layers):
        p = f"block{i}"
        values[f"{p}.ln1.gain"] = np.ones(d)
        values[f"{p}.ln1.bias"] = np.zeros(d)
        values[f"{p}.attn.qkv.weight"] = normal(3 * d, d)
        values[f"{p}.attn.qkv.bias"] = np.zeros(3 * d)
        values[f"{p}.attn.out.weight"] = normal(d, d)
        values[f"{p}.attn.out.bias"] = np.zeros(d)
        values[f"{p}.ln2.gain"] = np.ones(d)
        values[f"{p}.ln2.bias"] = np.zeros(d)
        values[f"{p}.mlp.fc1.weight"] = normal(config.d_ff, d)
        values[f"{p}.mlp.fc1.bias"] = np.zeros(config.d_ff)
        values[f"{p}.mlp.fc2.weight"] = normal(d, config.d_ff)
        values[f"{p}.mlp.fc2.bias"] = np.zeros(d)

    values["final_ln.gain"] = np.ones(d)
    values["final_ln.bias"] = np.zeros(d)
    values["head.text.weight"] = normal(config.vocab_size, d)
    values["head.text.bias"] = np.zeros(config.vocab_size)
    if config.variant == ModelVariant.DUAL:
        values["head.turn.weight"] = normal(config.n_turn, d)
        values["head.turn.bias"] = np.zeros(config.n_turn)
    return Parameters(values)
