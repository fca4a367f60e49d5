"""Token decoding from one logit vector."""

from typing import Optional, Union

import numpy as np

from model.layers import softmax

Seed = Union[int, np.random.Generator, None]


def decode_greedy(logits: np.ndarray) -> int:
    """Argmax; ties go to the lowest id."""
    return int(np.argmax(logits))


def decode_sample(logits: np.ndarray, temperature: float, seed: Seed = None) -> int:
    """Temperature-scaled categorical draw; temperature 0 is greedy.

    Args:
        logits: Logit vector
        temperature: Softmax temperature (>= 0)
        seed: Integer seed or an existing generator
    """
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        return decode_greedy(logits)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = softmax(np.asarray(logits, dtype=np.float64) / temperature)
    return int(rng.choice(len(p), p=p))


def decode(logits: np.ndarray, temperature: float = 0.0, rng: Optional[np.random.Generator] = None) -> int:
    if temperature == 0:
        return decode_greedy(logits)
    return decode_sample(logits, temperature, rng)
