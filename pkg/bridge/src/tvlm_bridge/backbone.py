"""Frozen vision-language backbone wrapper (real mode).

Loads a pre-trained fused image-text encoder, runs it inference-only,
and normalizes its final-layer hidden states to the wire contract:
exactly l_f tokens of width d_h, text tokens first. Token sequences
longer than l_f lose tail visual tokens; shortfalls are padded with
zero vectors typed "visual". Backbone parameters are never updated.
"""

from __future__ import annotations

import numpy as np


class BackboneLoadError(RuntimeError):
    pass


class ViltBackbone:
    """Joint text-image transformer; its fused hidden states interleave
    one text block followed by the visual patch block, which is exactly
    the segmentation the wire protocol reports."""

    def __init__(self, model_id: str, d_h: int):
        try:
            import torch
            from PIL import Image  # noqa: F401  (import check up front)
            from transformers import ViltModel, ViltProcessor
        except ImportError as exc:
            raise BackboneLoadError(f"real mode needs torch/transformers/Pillow: {exc}") from exc
        try:
            self.processor = ViltProcessor.from_pretrained(model_id)
            self.model = ViltModel.from_pretrained(model_id)
        except Exception as exc:  # hub unreachable, bad id, corrupt cache
            raise BackboneLoadError(f"cannot load backbone {model_id!r}: {exc}") from exc
        self.model.eval()
        for p in self.model.parameters():
            p.requires_grad_(False)
        hidden = int(self.model.config.hidden_size)
        if hidden != d_h:
            raise BackboneLoadError(
                f"backbone hidden size {hidden} does not match configured d_h {d_h}")
        self._torch = torch
        self.model_id = model_id
        self.d_h = d_h

    def parameter_checksum(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for name, p in sorted(self.model.named_parameters()):
            h.update(name.encode())
            h.update(p.detach().cpu().numpy().tobytes())
        return h.hexdigest()

    def embed(self, pixels_hwc: np.ndarray, text: str):
        """uint8 (H, W, C) image + text -> (tokens (seq, d_h), types)."""
        from PIL import Image

        image = Image.fromarray(pixels_hwc, mode="RGB" if pixels_hwc.shape[2] == 3 else "L")
        if image.mode != "RGB":
            image = image.convert("RGB")
        inputs = self.processor(images=image, text=text or " ", return_tensors="pt")
        with self._torch.no_grad():
            out = self.model(**inputs)
        hidden = out.last_hidden_state[0].cpu().numpy().astype(np.float64)
        n_text = int(inputs["input_ids"].shape[1])
        types = ["text"] * n_text + ["visual"] * (hidden.shape[0] - n_text)
        return hidden, types


def fit_to_length(tokens: np.ndarray, types, l_f: int):
    """Truncate tail visual tokens or zero-pad (typed visual) to l_f."""
    seq = tokens.shape[0]
    if seq > l_f:
        return tokens[:l_f], list(types[:l_f])
    if seq < l_f:
        pad = np.zeros((l_f - seq, tokens.shape[1]), dtype=tokens.dtype)
        return np.concatenate([tokens, pad]), list(types) + ["visual"] * (l_f - seq)
    return tokens, list(types)
