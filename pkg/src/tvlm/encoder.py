"""Pluggable frozen multimodal encoder.

The deterministic mock projects non-overlapping image patches through
seeded constant matrices (differentiable down to the pixels) and embeds
whitespace tokens via seeded hash buckets. The remote client speaks the
bridge wire protocol (POST /embed, GET /health) and is forward-only.
Neither path owns trainable parameters; the mock's checksum must be
identical before and after any number of calls.
"""

from __future__ import annotations

import base64
import hashlib
import math
from dataclasses import dataclass

import numpy as np
import requests

from .errors import (
    ConfigError,
    EmbeddingShapeError,
    MalformedResponseError,
    TransportError,
)
from .tensor import Tensor, concat, matmul, mul, narrow, reshape, tmean, transpose
from .val import EncodedImage, quantize_pixels

_TEXT_BUCKETS = 1024


@dataclass
class MultimodalEmbedding:
    tokens: Tensor          # (B, L_f, d_h)
    token_types: list       # 'text' | 'visual', length L_f

    @property
    def n_text(self) -> int:
        return sum(1 for t in self.token_types if t == "text")

    @property
    def n_visual(self) -> int:
        return sum(1 for t in self.token_types if t == "visual")


@dataclass
class EncoderDescriptor:
    kind: str = "mock"      # mock | remote
    seed: int = 0
    endpoint: str = ""
    fused_len: int = 156
    hidden_dim: int = 768
    n_text: int = 11

    def __post_init__(self):
        if self.kind not in ("mock", "remote"):
            raise ConfigError(f"unknown encoder kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ConfigError("remote encoder needs an endpoint")
        if not 0 < self.n_text < self.fused_len:
            raise ConfigError(
                f"n_text {self.n_text} must be in (0, fused_len={self.fused_len})")


def _word_hash(word: str, seed: int) -> int:
    h = hashlib.blake2b(word.encode("utf-8"), digest_size=8,
                        key=(seed & (2 ** 64 - 1)).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


def _as_text_list(text, batch: int):
    if isinstance(text, str):
        return [text] * batch
    texts = list(text)
    if len(texts) != batch:
        raise ConfigError(f"{len(texts)} prompts for a batch of {batch}")
    return texts


class MockEncoder:
    """Seeded constant-weight encoder; frozen by construction.

    Visual side: the image is zero-padded to a g x g grid of
    patch_size x patch_size tiles (g = ceil(sqrt(n_visual - 1))), each
    tile is flattened and linearly projected, and one extra global
    token (the patch-token mean) leads the visual block. Text side:
    whitespace tokens hash into a seeded embedding table, truncated or
    zero-padded to n_text. Token order is text first.
    """

    def __init__(self, desc: EncoderDescriptor, channels: int = 3,
                 image_size: int = 64):
        self.desc = desc
        self.channels = channels
        self.image_size = image_size
        self.n_visual = desc.fused_len - desc.n_text
        self.n_patches = self.n_visual - 1
        if self.n_patches < 1:
            raise ConfigError("fused_len leaves no room for visual patches")
        self.grid = math.ceil(math.sqrt(self.n_patches))
        self.patch_size = math.ceil(image_size / self.grid)
        rng = np.random.default_rng(desc.seed)
        flat = channels * self.patch_size ** 2
        self.patch_proj = rng.standard_normal((flat, desc.hidden_dim)) / math.sqrt(flat)
        self.text_table = rng.standard_normal((_TEXT_BUCKETS, desc.hidden_dim))
        # full-hash-scaled salt keeps distinct words distinct across bucket ties
        self.text_salt = rng.standard_normal(desc.hidden_dim)
        self.token_types = ["text"] * desc.n_text + ["visual"] * self.n_visual

    # frozen contract: digest of every constant matrix
    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(self.patch_proj.tobytes())
        h.update(self.text_table.tobytes())
        h.update(self.text_salt.tobytes())
        return h.hexdigest()

    def _pad_to_grid(self, pixels: Tensor) -> Tensor:
        b, c, h, w = pixels.shape
        target = self.grid * self.patch_size
        if h == target and w == target:
            return pixels
        out = pixels
        if target > h:
            out = concat([out, Tensor(np.zeros((b, c, target - h, w)))], axis=2)
        if target > w:
            out = concat([out, Tensor(np.zeros((b, c, target, target - w)))], axis=3)
        return out

    def _visual_tokens(self, pixels: Tensor) -> Tensor:
        b, c, _, _ = pixels.shape
        g, ps = self.grid, self.patch_size
        padded = self._pad_to_grid(mul(pixels, Tensor(np.float64(1.0 / 255.0))))
        tiles = reshape(padded, (b, c, g, ps, g, ps))
        tiles = transpose(tiles, (0, 2, 4, 1, 3, 5))
        flat = reshape(tiles, (b, g * g, c * ps * ps))
        flat = narrow(flat, 1, 0, self.n_patches)
        patch_tokens = matmul(flat, Tensor(self.patch_proj))
        global_token = tmean(patch_tokens, axis=1, keepdims=True)
        return concat([global_token, patch_tokens], axis=1)

    def _text_tokens(self, texts) -> np.ndarray:
        out = np.zeros((len(texts), self.desc.n_text, self.desc.hidden_dim))
        for i, text in enumerate(texts):
            words = text.split()[: self.desc.n_text]
            for j, word in enumerate(words):
                h = _word_hash(word, self.desc.seed)
                frac = (h + 1) / 2.0 ** 64
                out[i, j] = self.text_table[h % _TEXT_BUCKETS] + frac * self.text_salt
        return out

    def encode_pixels(self, pixels: Tensor, text) -> MultimodalEmbedding:
        """Core path: differentiable w.r.t. `pixels` (range [0, 255])."""
        texts = _as_text_list(text, pixels.shape[0])
        visual = self._visual_tokens(pixels)
        tokens = concat([Tensor(self._text_tokens(texts)), visual], axis=1)
        return MultimodalEmbedding(tokens=tokens, token_types=list(self.token_types))

    def encode(self, img: EncodedImage, text) -> MultimodalEmbedding:
        return self.encode_pixels(img.pixels, text)


class RemoteEncoder:
    """Client for the bridge wire protocol; embeddings are forward-only."""

    def __init__(self, desc: EncoderDescriptor, timeout: float = 30.0):
        self.desc = desc
        self.endpoint = desc.endpoint.rstrip("/")
        self.timeout = timeout

    def health(self) -> dict:
        url = f"{self.endpoint}/health"
        try:
            resp = requests.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(self.endpoint, detail=str(exc)) from exc
        if resp.status_code != 200:
            raise TransportError(self.endpoint, status=resp.status_code)
        try:
            return resp.json()
        except ValueError as exc:
            raise MalformedResponseError(f"/health returned non-JSON: {exc}") from exc

    def _embed_one(self, pixels_u8: np.ndarray, text: str):
        h, w, c = pixels_u8.shape
        payload = {
            "image": base64.b64encode(pixels_u8.tobytes()).decode("ascii"),
            "height": h,
            "width": w,
            "channels": c,
            "text": text,
        }
        url = f"{self.endpoint}/embed"
        try:
            resp = requests.post(url, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(self.endpoint, detail=str(exc)) from exc
        if resp.status_code != 200:
            raise TransportError(self.endpoint, status=resp.status_code)
        try:
            body = resp.json()
            tokens = body["tokens"]
            types = body["token_types"]
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponseError(f"/embed payload malformed: {exc}") from exc
        arr = np.asarray(tokens, dtype=np.float64)
        if arr.ndim != 2 or arr.shape != (self.desc.fused_len, self.desc.hidden_dim):
            raise EmbeddingShapeError(
                (self.desc.fused_len, self.desc.hidden_dim),
                tuple(arr.shape) if arr.ndim == 2 else f"ndim={arr.ndim}")
        if len(types) != self.desc.fused_len or any(t not in ("text", "visual") for t in types):
            raise MalformedResponseError(f"token_types invalid (len {len(types)})")
        return arr, list(types)

    def encode(self, img: EncodedImage, text) -> MultimodalEmbedding:
        b = img.pixels.shape[0]
        texts = _as_text_list(text, b)
        quantized = quantize_pixels(img.pixels.data)
        tokens, types = [], None
        for i in range(b):
            arr, t = self._embed_one(quantized[i].transpose(1, 2, 0), texts[i])
            tokens.append(arr)
            types = t
        return MultimodalEmbedding(tokens=Tensor(np.stack(tokens)), token_types=types)

    def checksum(self) -> str:
        # the backbone lives behind the wire; identity stands in for weights
        info = self.health()
        return hashlib.sha256(
            f"{info.get('model')}|{info.get('l_f')}|{info.get('d_h')}".encode()
        ).hexdigest()


def build_encoder(desc: EncoderDescriptor, channels: int = 3, image_size: int = 64):
    if desc.kind == "mock":
        return MockEncoder(desc, channels=channels, image_size=image_size)
    return RemoteEncoder(desc)


def encode(img: EncodedImage, text, desc: EncoderDescriptor) -> MultimodalEmbedding:
    """One-shot convenience wrapper over build_encoder(...).encode(...)."""
    b, c, h, _ = img.pixels.shape
    return build_encoder(desc, channels=c, image_size=h).encode(img, text)
