"""Multi-head scaled dot-product attention building blocks.

Shared by the temporal-memory self-attention stack and the cross-modal
fusion layer. All math is expressed in recorded tensor ops so gradients
reach every projection.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError
from .tensor import (
    Tensor,
    add,
    dropout,
    layer_norm,
    matmul,
    mul,
    randn_param,
    reshape,
    softmax,
    transpose,
    zeros_param,
    ones_param,
)


class Linear:
    """y = x W + b with W: (d_in, d_out)."""

    def __init__(self, rng, d_in: int, d_out: int, dtype=np.float64):
        self.w = randn_param(rng, (d_in, d_out), dtype=dtype)
        self.b = zeros_param((d_out,), dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return add(matmul(x, self.w), self.b)

    def params(self, prefix: str):
        yield f"{prefix}.w", self.w
        yield f"{prefix}.b", self.b


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    b, n, d = x.shape
    dk = d // n_heads
    return transpose(reshape(x, (b, n, n_heads, dk)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    b, h, n, dk = x.shape
    return reshape(transpose(x, (0, 2, 1, 3)), (b, n, h * dk))


class MultiHeadAttention:
    """Queries from one sequence, keys/values from another (or the same).

    Per head: softmax(Q K^T / sqrt(d_k)) V; heads are concatenated and
    mixed by an output projection.
    """

    def __init__(self, rng, d_model: int, n_heads: int, dtype=np.float64):
        if d_model % n_heads != 0:
            raise ConfigError(f"d_model {d_model} not divisible by n_heads {n_heads}")
        self.n_heads = n_heads
        self.d_k = d_model // n_heads
        self.wq = Linear(rng, d_model, d_model, dtype)
        self.wk = Linear(rng, d_model, d_model, dtype)
        self.wv = Linear(rng, d_model, d_model, dtype)
        self.wo = Linear(rng, d_model, d_model, dtype)

    def __call__(self, query_seq: Tensor, kv_seq: Tensor,
                 drop_p: float = 0.0, rng=None,
                 return_weights: bool = False):
        q = _split_heads(self.wq(query_seq), self.n_heads)
        k = _split_heads(self.wk(kv_seq), self.n_heads)
        v = _split_heads(self.wv(kv_seq), self.n_heads)
        scores = mul(matmul(q, transpose(k, (0, 1, 3, 2))),
                     Tensor(np.float64(1.0 / math.sqrt(self.d_k))))
        weights = softmax(scores, axis=-1)
        weights = dropout(weights, drop_p, rng)
        out = self.wo(_merge_heads(matmul(weights, v)))
        if return_weights:
            return out, weights
        return out

    def params(self, prefix: str):
        yield from self.wq.params(f"{prefix}.wq")
        yield from self.wk.params(f"{prefix}.wk")
        yield from self.wv.params(f"{prefix}.wv")
        yield from self.wo.params(f"{prefix}.wo")


class SelfAttentionBlock:
    """Pre-norm residual wiring: x + MHA(LN(x))."""

    def __init__(self, rng, d_model: int, n_heads: int, dtype=np.float64):
        self.attn = MultiHeadAttention(rng, d_model, n_heads, dtype)
        self.norm_gain = ones_param((d_model,), dtype)
        self.norm_bias = zeros_param((d_model,), dtype)

    def __call__(self, x: Tensor, drop_p: float = 0.0, rng=None) -> Tensor:
        normed = layer_norm(x, self.norm_gain, self.norm_bias)
        return add(x, self.attn(normed, normed, drop_p=drop_p, rng=rng))

    def params(self, prefix: str):
        yield from self.attn.params(f"{prefix}.attn")
        yield f"{prefix}.norm_gain", self.norm_gain
        yield f"{prefix}.norm_bias", self.norm_bias
