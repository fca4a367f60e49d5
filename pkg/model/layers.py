"""NumPy layers with hand-written backward passes.

Each layer reads its weights from a shared `Parameters` store by name,
caches what its backward pass needs during `forward`, and accumulates into
the store's gradient buffers during `backward`. Sequences are (frames, width).
"""

from typing import Optional, Tuple

import numpy as np

from model.params import Parameters

SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)
LN_EPS = 1e-5


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def gelu(x: np.ndarray) -> np.ndarray:
    """Tanh approximation of GELU."""
    return 0.5 * x * (1.0 + np.tanh(SQRT_2_OVER_PI * (x + 0.044715 * x**3)))


class GELU:
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        self.tanh = np.tanh(SQRT_2_OVER_PI * (x + 0.044715 * x**3))
        return 0.5 * x * (1.0 + self.tanh)

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        x, t = self.x, self.tanh
        d_inner = SQRT_2_OVER_PI * (1.0 + 3 * 0.044715 * x**2)
        return grad_output * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * d_inner)


class Linear:
    """y = x W^T (+ b), with W stored as (out, in)."""

    def __init__(self, params: Parameters, name: str, bias: bool = True):
        self.params = params
        self.weight = f"{name}.weight" if bias else name
        self.bias = f"{name}.bias" if bias else None

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Forward without caching, for streaming steps."""
        y = x @ self.params[self.weight].T
        if self.bias is not None:
            y = y + self.params[self.bias]
        return y

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        return self.apply(x)

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        g2 = grad_output.reshape(-1, grad_output.shape[-1])
        x2 = self.x.reshape(-1, self.x.shape[-1])
        self.params.grads[self.weight] += g2.T @ x2
        if self.bias is not None:
            self.params.grads[self.bias] += g2.sum(axis=0)
        return grad_output @ self.params[self.weight]


class LayerNorm:
    def __init__(self, params: Parameters, name: str):
        self.params = params
        self.gain = f"{name}.gain"
        self.bias = f"{name}.bias"

    def apply(self, x: np.ndarray) -> np.ndarray:
        mean = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        return (x - mean) / np.sqrt(var + LN_EPS) * self.params[self.gain] + self.params[self.bias]

    def forward(self, x: np.ndarray) -> np.ndarray:
        mean = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        self.inv_std = 1.0 / np.sqrt(var + LN_EPS)
        self.x_norm = (x - mean) * self.inv_std
        return self.x_norm * self.params[self.gain] + self.params[self.bias]

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        g2 = grad_output.reshape(-1, grad_output.shape[-1])
        self.params.grads[self.gain] += np.sum(g2 * self.x_norm.reshape(g2.shape), axis=0)
        self.params.grads[self.bias] += g2.sum(axis=0)
        g_norm = grad_output * self.params[self.gain]
        n = grad_output.shape[-1]
        return self.inv_std / n * (
            n * g_norm
            - g_norm.sum(axis=-1, keepdims=True)
            - self.x_norm * np.sum(g_norm * self.x_norm, axis=-1, keepdims=True)
        )


class LayerCache:
    """Preallocated keys/values of one attention layer for streaming decoding."""

    def __init__(self, max_context: int, n_heads: int, d_head: int):
        self.keys = np.zeros((n_heads, max_context, d_head))
        self.values = np.zeros((n_heads, max_context, d_head))


class CausalSelfAttention:
    """Multi-head causal self-attention over a (frames, d_model) sequence."""

    def __init__(self, params: Parameters, name: str, n_heads: int):
        self.n_heads = n_heads
        self.qkv = Linear(params, f"{name}.qkv")
        self.out = Linear(params, f"{name}.out")

    def _split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        frames, three_d = x.shape
        d = three_d // 3
        h = x.reshape(frames, 3, self.n_heads, d // self.n_heads).transpose(1, 2, 0, 3)
        return h[0], h[1], h[2]

    def forward(self, x: np.ndarray) -> np.ndarray:
        frames, d = x.shape
        q, k, v = self._split(self.qkv.forward(x))
        scale = 1.0 / np.sqrt(q.shape[-1])
        scores = (q @ k.transpose(0, 2, 1)) * scale
        causal = np.triu(np.ones((frames, frames), dtype=bool), k=1)
        scores = np.where(causal, -np.inf, scores)
        att = softmax(scores)
        self.q, self.k, self.v, self.att, self.scale = q, k, v, att, scale
        context = (att @ v).transpose(1, 0, 2).reshape(frames, d)
        return self.out.forward(context)

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        frames, d = grad_output.shape
        g_context = self.out.backward(grad_output).reshape(frames, self.n_heads, -1).transpose(1, 0, 2)
        g_att = g_context @ self.v.transpose(0, 2, 1)
        g_v = self.att.transpose(0, 2, 1) @ g_context
        g_scores = self.att * (g_att - np.sum(g_att * self.att, axis=-1, keepdims=True)) * self.scale
        g_q = g_scores @ self.k
        g_k = g_scores.transpose(0, 2, 1) @ self.q
        g_qkv = np.stack([g_q, g_k, g_v]).transpose(2, 0, 1, 3).reshape(frames, 3 * d)
        return self.qkv.backward(g_qkv)

    def step(self, x: np.ndarray, cache: LayerCache, position: int) -> np.ndarray:
        """Attend from one new frame to every cached frame up to and including it."""
        d = x.shape[-1]
        q, k, v = self._split(self.qkv.apply(x[None, :]))
        cache.keys[:, position] = k[:, 0]
        cache.values[:, position] = v[:, 0]
        keys = cache.keys[:, : position + 1]
        values = cache.values[:, : position + 1]
        scores = (q @ keys.transpose(0, 2, 1)) / np.sqrt(q.shape[-1])
        context = (softmax(scores) @ values).transpose(1, 0, 2).reshape(1, d)
        return self.out.apply(context)[0]


class Block:
    """Pre-LayerNorm transformer block with a GELU MLP."""

    def __init__(self, params: Parameters, name: str, n_heads: int):
        self.ln1 = LayerNorm(params, f"{name}.ln1")
        self.attn = CausalSelfAttention(params, f"{name}.attn", n_heads)
        self.ln2 = LayerNorm(params, f"{name}.ln2")
        self.fc1 = Linear(params, f"{name}.mlp.fc1")
        self.act = GELU()
        self.fc2 = Linear(params, f"{name}.mlp.fc2")

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = x + self.attn.forward(self.ln1.forward(x))
        return x + self.fc2.forward(self.act.forward(self.fc1.forward(self.ln2.forward(x))))

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        g_mlp = self.ln2.backward(self.fc1.backward(self.act.backward(self.fc2.backward(grad_output))))
        g = grad_output + g_mlp
        return g + self.ln1.backward(self.attn.backward(g))

    def step(self, x: np.ndarray, cache: LayerCache, position: int) -> np.ndarray:
        x = x + self.attn.step(self.ln1.apply(x), cache, position)
        return x + self.fc2.apply(gelu(self.fc1.apply(self.ln2.apply(x))))
