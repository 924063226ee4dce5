"""Retrieval-augmented temporal learner.

Overlapping patches of the (channel-independent) input windows are
linearly embedded, enriched with top-k lookups against a circular
memory bank of historical patch means, summarized globally by a small
self-attention stack, and fused by element-wise addition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import Linear, SelfAttentionBlock
from .errors import CapacityError, ConfigError, ShapeError
from .tensor import (
    Tensor,
    add,
    concat,
    dropout,
    gelu,
    identity,
    narrow,
    randn_param,
    repeat0,
    reshape,
    tmean,
)


@dataclass
class PatchConfig:
    patch_len: int = 16
    stride: int = 8
    padding: int = 8
    d_model: int = 128
    n_heads: int = 4
    e_layers: int = 2
    num_queries: int = 8
    dropout: float = 0.1
    top_k: int = 4
    memory_capacity: int = 128
    similarity: str = "cosine"  # cosine | dot
    use_learned_queries: bool = False
    mlp_activation: str = "gelu"  # gelu | identity

    def __post_init__(self):
        if self.patch_len < 1:
            raise ConfigError(f"patch_len must be >= 1, got {self.patch_len}")
        if not 1 <= self.stride <= self.patch_len:
            raise ConfigError(
                f"stride must be in [1, patch_len]: stride={self.stride}, patch_len={self.patch_len}")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.similarity not in ("cosine", "dot"):
            raise ConfigError(f"unknown similarity {self.similarity!r}")

    def num_patches(self, seq_len: int) -> int:
        padded = seq_len + self.padding
        if padded < self.patch_len:
            raise ConfigError(
                f"window of {seq_len}+{self.padding} padded steps shorter than patch_len {self.patch_len}")
        return (padded - self.patch_len) // self.stride + 1


@dataclass
class PatchEmbeddings:
    values: Tensor  # (B', N_p, d_model)

    @property
    def num_patches(self) -> int:
        return self.values.shape[1]

    @property
    def d_model(self) -> int:
        return self.values.shape[2]


@dataclass
class MemoryFeatures:
    local: Tensor           # (B', N_p, d_model)
    global_summary: Tensor  # (B', d_model)
    fused: Tensor           # (B', N_p, d_model)


class MemoryBank:
    """Fixed-capacity circular store of detached patch-summary vectors.

    Slots beyond `filled` have never been written and are never
    retrieved. Updates require exclusive access; retrieval between
    updates is read-only.
    """

    def __init__(self, capacity: int, d_model: int, dtype=np.float64):
        if capacity < 1:
            raise ConfigError(f"memory capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.entries = np.zeros((capacity, d_model), dtype=dtype)
        self.write_cursor = 0
        self.filled = 0

    @property
    def d_model(self) -> int:
        return self.entries.shape[1]

    def live(self) -> np.ndarray:
        return self.entries[: self.filled]

    def write_batch(self, rows: np.ndarray) -> None:
        for row in rows:
            self.entries[self.write_cursor] = row
            self.write_cursor = (self.write_cursor + 1) % self.capacity
            self.filled = min(self.filled + 1, self.capacity)

    def state(self) -> dict:
        return {
            "entries": self.entries.copy(),
            "write_cursor": self.write_cursor,
            "filled": self.filled,
        }

    def load_state(self, state: dict) -> None:
        self.entries = np.array(state["entries"], dtype=self.entries.dtype)
        self.write_cursor = int(state["write_cursor"])
        self.filled = int(state["filled"])


class RalParams:
    """Trainable state: patch projection, positions, retrieval MLP,
    attention stack, optional learned queries."""

    def __init__(self, rng: np.random.Generator, cfg: PatchConfig,
                 max_patches: int = 256, dtype=np.float64):
        self.cfg = cfg
        self.max_patches = max_patches
        self.proj = Linear(rng, cfg.patch_len, cfg.d_model, dtype)
        self.positions = randn_param(rng, (max_patches, cfg.d_model), scale=0.02, dtype=dtype)
        self.mlp1 = Linear(rng, cfg.d_model, cfg.d_model, dtype)
        self.mlp2 = Linear(rng, cfg.d_model, cfg.d_model, dtype)
        self.blocks = [SelfAttentionBlock(rng, cfg.d_model, cfg.n_heads, dtype)
                       for _ in range(cfg.e_layers)]
        self.queries = None
        if cfg.use_learned_queries:
            self.queries = randn_param(rng, (cfg.num_queries, cfg.d_model),
                                       scale=0.02, dtype=dtype)

    def params(self, prefix: str = "ral"):
        yield from self.proj.params(f"{prefix}.proj")
        yield f"{prefix}.positions", self.positions
        yield from self.mlp1.params(f"{prefix}.mlp1")
        yield from self.mlp2.params(f"{prefix}.mlp2")
        for i, blk in enumerate(self.blocks):
            yield from blk.params(f"{prefix}.block{i}")
        if self.queries is not None:
            yield f"{prefix}.queries", self.queries


def patchify(x: np.ndarray, cfg: PatchConfig) -> Tensor:
    """(B, L, D) -> (B*D, N_p, patch_len); channel-independent, the last
    value replicated `padding` times before patching."""
    x = np.asarray(x, dtype=np.float64)
    b, length, d = x.shape
    n_p = cfg.num_patches(length)
    series = x.transpose(0, 2, 1).reshape(b * d, length)
    if cfg.padding:
        tail = np.repeat(series[:, -1:], cfg.padding, axis=1)
        series = np.concatenate([series, tail], axis=1)
    starts = np.arange(n_p) * cfg.stride
    idx = starts[:, None] + np.arange(cfg.patch_len)[None, :]
    return Tensor(series[:, idx])


def embed_patches(patches: Tensor, params: RalParams) -> PatchEmbeddings:
    n_p = patches.shape[1]
    if n_p > params.max_patches:
        raise CapacityError(
            f"{n_p} patches exceed positional table capacity {params.max_patches}")
    values = add(params.proj(patches), narrow(params.positions, 0, 0, n_p))
    return PatchEmbeddings(values=values)


def memory_update(bank: MemoryBank, emb: PatchEmbeddings) -> MemoryBank:
    """Write each instance's temporal patch mean; detached from the graph."""
    if bank.d_model != emb.d_model:
        raise ShapeError(f"bank d_model {bank.d_model} != embedding d_model {emb.d_model}")
    bank.write_batch(emb.values.data.mean(axis=1))
    return bank


def _top_k_mean(sims: np.ndarray, live: np.ndarray, k: int) -> np.ndarray:
    # stable argsort on -sims: ties resolve to the lowest slot index
    order = np.argsort(-sims, axis=-1, kind="stable")[..., :k]
    return live[order].mean(axis=-2)


def retrieve_local(bank: MemoryBank, emb: PatchEmbeddings, k: int,
                   params: RalParams, rng=None, drop_p: float = 0.0) -> Tensor:
    """Top-k memory lookup -> MLP -> patch-mean -> residual broadcast.

    With an empty bank the lookup is skipped and the embeddings pass
    through unchanged.
    """
    if k < 1:
        raise ConfigError(f"top-k must be >= 1, got {k}")
    if bank.filled == 0:
        return emb.values
    live = bank.live()
    e = emb.values.data
    if params.cfg.similarity == "cosine":
        qn = e / (np.linalg.norm(e, axis=-1, keepdims=True) + 1e-12)
        mn = live / (np.linalg.norm(live, axis=-1, keepdims=True) + 1e-12)
        sims = qn @ mn.T
    else:
        sims = e @ live.T
    retrieved = Tensor(_top_k_mean(sims, live, min(k, bank.filled)))
    act = gelu if params.cfg.mlp_activation == "gelu" else identity
    hidden = dropout(act(params.mlp1(retrieved)), drop_p, rng)
    features = params.mlp2(hidden)
    pooled = tmean(features, axis=1)  # (B', d_model)
    b, _, d = emb.values.shape
    return add(emb.values, reshape(pooled, (b, 1, d)))


def global_memory(emb: PatchEmbeddings, params: RalParams,
                  rng=None, drop_p: float = 0.0) -> Tensor:
    """Self-attention stack over patches, then the temporal mean."""
    tokens = emb.values
    if params.queries is not None:
        b = tokens.shape[0]
        nq, d = params.queries.shape
        tiled = repeat0(reshape(params.queries, (1, nq, d)), b)
        tokens = concat([tiled, tokens], axis=1)
    for blk in params.blocks:
        tokens = blk(tokens, drop_p=drop_p, rng=rng)
    return tmean(tokens, axis=1)


def fuse_memory(local: Tensor, global_summary: Tensor) -> MemoryFeatures:
    """fused[b, p, :] = local[b, p, :] + global_summary[b, :]."""
    if local.shape[0] != global_summary.shape[0] or local.shape[2] != global_summary.shape[1]:
        raise ShapeError(
            f"cannot fuse local {local.shape} with global {global_summary.shape}")
    b, _, d = local.shape
    fused = add(local, reshape(global_summary, (b, 1, d)))
    return MemoryFeatures(local=local, global_summary=global_summary, fused=fused)


class RetrievalAugmentedLearner:
    """Pipeline facade: patchify -> embed -> retrieve/update -> attend -> fuse."""

    def __init__(self, rng: np.random.Generator, cfg: PatchConfig,
                 max_patches: int = 256, dtype=np.float64):
        self.cfg = cfg
        self.params = RalParams(rng, cfg, max_patches=max_patches, dtype=dtype)
        self.bank = MemoryBank(cfg.memory_capacity, cfg.d_model, dtype=dtype)

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> Tensor:
        drop_p = self.cfg.dropout if training else 0.0
        emb = embed_patches(patchify(x, self.cfg), self.params)
        local = retrieve_local(self.bank, emb, self.cfg.top_k, self.params,
                               rng=rng, drop_p=drop_p)
        if training:
            memory_update(self.bank, emb)
        summary = global_memory(emb, self.params, rng=rng, drop_p=drop_p)
        return fuse_memory(local, summary).fused

    def named_params(self, prefix: str = "ral"):
        yield from self.params.params(prefix)
