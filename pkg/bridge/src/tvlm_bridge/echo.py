"""Deterministic echo embeddings.

Tokens are a seeded pure function of the request bytes: the canonical
request digest seeds a PCG64 stream that fills the token matrix, so an
identical request always produces identical response bytes.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

ECHO_TEXT_TOKENS = 11  # matches the default backbone's text-token count


def canonical_request_bytes(image_b64: str, height: int, width: int,
                            channels: int, text: str) -> bytes:
    payload = {"image": image_b64, "height": height, "width": width,
               "channels": channels, "text": text}
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def echo_embed(image_b64: str, height: int, width: int, channels: int,
               text: str, l_f: int, d_h: int):
    """-> (tokens list[l_f][d_h], token_types list[l_f])."""
    digest = hashlib.blake2b(
        canonical_request_bytes(image_b64, height, width, channels, text),
        digest_size=8).digest()
    seed = int.from_bytes(digest, "little")
    rng = np.random.default_rng(seed)
    tokens = np.round(rng.standard_normal((l_f, d_h)), 6)
    n_text = min(ECHO_TEXT_TOKENS, l_f - 1)
    types = ["text"] * n_text + ["visual"] * (l_f - n_text)
    return tokens.tolist(), types
