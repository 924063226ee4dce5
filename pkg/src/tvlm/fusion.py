"""Cross-modal gated fusion.

Temporal features query the encoder's multimodal tokens through
multi-head attention (residual + layer norm), and a sigmoid gate mixes
the attended features with the pooled multimodal summary per
coordinate. Both modalities are first projected into the shared
d_model space; the multimodal side is mean-pooled over its token axis
before gating so the token axes align.
"""

from __future__ import annotations

import numpy as np

from .attention import Linear, MultiHeadAttention
from .errors import ConfigError, ShapeError
from .tensor import (
    Tensor,
    add,
    concat,
    gelu,
    layer_norm,
    mul,
    ones_param,
    reshape,
    sigmoid,
    sub,
    tmean,
    zeros_param,
)


class FusionParams:
    """Projections, cross attention, two-layer gate network, norm affine."""

    def __init__(self, rng: np.random.Generator, d_model: int, d_hidden: int,
                 n_heads: int, d_fusion: int = 256, dtype=np.float64):
        if d_model % n_heads != 0:
            raise ConfigError(f"d_model {d_model} not divisible by n_heads {n_heads}")
        self.d_model = d_model
        self.proj_tem = Linear(rng, d_model, d_model, dtype)
        self.proj_mm = Linear(rng, d_hidden, d_model, dtype)
        self.attn = MultiHeadAttention(rng, d_model, n_heads, dtype)
        self.gate1 = Linear(rng, 2 * d_model, d_fusion, dtype)
        self.gate2 = Linear(rng, d_fusion, d_model, dtype)
        self.norm_gain = ones_param((d_model,), dtype)
        self.norm_bias = zeros_param((d_model,), dtype)

    def params(self, prefix: str = "fusion"):
        yield from self.proj_tem.params(f"{prefix}.proj_tem")
        yield from self.proj_mm.params(f"{prefix}.proj_mm")
        yield from self.attn.params(f"{prefix}.attn")
        yield from self.gate1.params(f"{prefix}.gate1")
        yield from self.gate2.params(f"{prefix}.gate2")
        yield f"{prefix}.norm_gain", self.norm_gain
        yield f"{prefix}.norm_bias", self.norm_bias


def project_shared(f_tem: Tensor, f_mm: Tensor, params: FusionParams):
    """Map both modalities into the shared d_model space."""
    if f_tem.shape[-1] != params.proj_tem.w.shape[0]:
        raise ShapeError(
            f"temporal features {f_tem.shape} do not match proj_tem {params.proj_tem.w.shape}")
    if f_mm.shape[-1] != params.proj_mm.w.shape[0]:
        raise ShapeError(
            f"multimodal features {f_mm.shape} do not match proj_mm {params.proj_mm.w.shape}")
    return params.proj_tem(f_tem), params.proj_mm(f_mm)


def cross_modal_attention(f_tem: Tensor, f_mm_proj: Tensor, params: FusionParams,
                          rng=None, drop_p: float = 0.0,
                          return_weights: bool = False):
    """Scaled dot-product attention (temporal queries, multimodal keys and
    values) with residual + layer norm."""
    attended = params.attn(f_tem, f_mm_proj, drop_p=drop_p, rng=rng,
                           return_weights=return_weights)
    if return_weights:
        attended, weights = attended
    out = layer_norm(add(f_tem, attended), params.norm_gain, params.norm_bias)
    return (out, weights) if return_weights else out


def _broadcast_patches(pooled: Tensor, n_patches: int) -> Tensor:
    b, d = pooled.shape
    return mul(reshape(pooled, (b, 1, d)), Tensor(np.ones((1, n_patches, 1))))


def gated_fuse(f_tem: Tensor, f_mm_pooled: Tensor, f_attn: Tensor,
               params: FusionParams) -> Tensor:
    """G = sigma(gate([f_tem; pooled])); out = G*f_attn + (1-G)*pooled."""
    n_p = f_tem.shape[1]
    pooled_b = _broadcast_patches(f_mm_pooled, n_p)
    logits = params.gate2(gelu(params.gate1(concat([f_tem, pooled_b], axis=-1))))
    gate = sigmoid(logits)
    one = Tensor(np.float64(1.0))
    return add(mul(gate, f_attn), mul(sub(one, gate), pooled_b))


class FusionModule:
    """Facade: project, cross-attend, pool, gate."""

    def __init__(self, rng: np.random.Generator, d_model: int, d_hidden: int,
                 n_heads: int, d_fusion: int = 256, dtype=np.float64):
        self.params = FusionParams(rng, d_model, d_hidden, n_heads, d_fusion, dtype)

    def forward(self, f_tem: Tensor, f_mm: Tensor, rng=None,
                drop_p: float = 0.0) -> Tensor:
        f_q, f_kv = project_shared(f_tem, f_mm, self.params)
        f_attn = cross_modal_attention(f_q, f_kv, self.params, rng=rng, drop_p=drop_p)
        pooled = tmean(f_kv, axis=1)
        return gated_fuse(f_q, pooled, f_attn, self.params)

    def named_params(self, prefix: str = "fusion"):
        yield from self.params.params(prefix)
