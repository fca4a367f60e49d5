"""AdamW with two parameter groups, linear warmup and global-norm clipping."""

import logging
from typing import Dict

import numpy as np

from config.environments.base import OptimSettings
from model.params import Parameters

logger = logging.getLogger(__name__)


class AdamW:
    """Decoupled-weight-decay Adam over a `Parameters` store.

    Embedding tables and input adapters ("embed" group) step at
    ``embed_lr_multiplier`` times the block learning rate. Weight decay
    applies to matrices only, never to gains, biases or embedding tables.

    Args:
        params: Parameter store whose `grads` hold the current gradients
        settings: Optimizer settings
    """

    def __init__(self, params: Parameters, settings: OptimSettings):
        self.params = params
        self.settings = settings
        self.t = 0
        self.m: Dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in params.items()}
        self.v: Dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in params.items()}

    def lr_at(self, step: int, group: str = "block") -> float:
        s = self.settings
        warm = min(1.0, (step + 1) / s.warmup_steps) if s.warmup_steps > 0 else 1.0
        scale = s.embed_lr_multiplier if group == "embed" else 1.0
        return s.lr * scale * warm

    def _decays(self, name: str) -> bool:
        return self.params[name].ndim == 2 and self.params.group_of(name) == "block"

    def clip_gradients(self) -> float:
        """Scale gradients so their global L2 norm is at most ``grad_clip``; return the pre-clip norm."""
        norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in self.params.grads.values())))
        limit = self.settings.grad_clip
        if limit > 0 and norm > limit:
            scale = limit / (norm + 1e-12)
            for g in self.params.grads.values():
                g *= scale
        return norm

    def step(self) -> None:
        s = self.settings
        step = self.t
        self.t += 1
        c1 = 1.0 - s.beta1**self.t
        c2 = 1.0 - s.beta2**self.t
        for name, p in self.params.items():
            g = self.params.grads[name]
            lr = self.lr_at(step, self.params.group_of(name))
            m = self.m[name]
            v = self.v[name]
            m *= s.beta1
            m += (1.0 - s.beta1) * g
            v *= s.beta2
            v += (1.0 - s.beta2) * g * g
            if self._decays(name):
                p -= lr * s.weight_decay * p
            p -= lr * (m / c1) / (np.sqrt(v / c2) + s.eps)
