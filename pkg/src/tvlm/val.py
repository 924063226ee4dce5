"""Vision-augmented learner: time series to normalized images.

Raw windows are stacked with DFT magnitudes and sin/cos phase channels,
passed through a 1-D + two 2-D convolution cascade, resized bilinearly
to the target square, and min-max scaled into [0, 255] per instance.
Deterministic: no randomness anywhere on this path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, ShapeError
from .fft import dft_batch
from .tensor import (
    Tensor,
    add,
    bilinear_resize,
    conv1d,
    conv2d,
    mul,
    randn_param,
    reshape,
    sub,
    tmean,
    zeros_param,
)

FEATURE_CHANNELS = ("raw", "freq", "sin", "cos")


@dataclass
class ImageConfig:
    image_size: int = 64
    periodicity: int = 24
    hidden_dim: int = 16
    out_channels: int = 3
    eps: float = 1e-5

    def __post_init__(self):
        if self.image_size < 8:
            raise ConfigError(f"image_size must be >= 8, got {self.image_size}")
        if self.periodicity < 1:
            raise ConfigError(f"periodicity must be >= 1, got {self.periodicity}")
        if self.hidden_dim % 2 != 0:
            raise ConfigError(
                f"hidden_dim must be even (one stage halves it), got {self.hidden_dim}")


@dataclass
class EncodedFeatures:
    channels: np.ndarray  # (B, L, D, F)

    @property
    def num_channels(self) -> int:
        return self.channels.shape[-1]


@dataclass
class EncodedImage:
    pixels: Tensor        # (B, C, H, W) in [0, 255]
    mins: np.ndarray      # per-instance pre-normalization minimum
    maxs: np.ndarray
    eps: float


def frequency_encode(x: np.ndarray) -> np.ndarray:
    """Per-series DFT magnitudes, bin k aligned with time step k."""
    x = np.asarray(x, dtype=np.float64)
    b, length, d = x.shape
    flat = x.transpose(1, 0, 2).reshape(length, b * d)
    re, im = dft_batch(flat)
    mag = np.hypot(re, im)
    return mag.reshape(length, b, d).transpose(1, 0, 2)


def periodicity_encode(length: int, periodicity: int) -> np.ndarray:
    """(L, 2) rows [sin(2*pi*t/P), cos(2*pi*t/P)]."""
    if periodicity < 1:
        raise ConfigError(f"periodicity must be >= 1, got {periodicity}")
    t = np.arange(length, dtype=np.float64)
    ang = 2.0 * np.pi * t / periodicity
    return np.stack([np.sin(ang), np.cos(ang)], axis=1)


def assemble_features(x: np.ndarray, freq: np.ndarray, per: np.ndarray,
                      channels=FEATURE_CHANNELS) -> EncodedFeatures:
    """Stack the selected channels (default [raw, freq, sin, cos]) into
    (B, L, D, F)."""
    x = np.asarray(x, dtype=np.float64)
    b, length, d = x.shape
    if freq.shape != x.shape:
        raise ShapeError(f"frequency channel {freq.shape} does not match input {x.shape}")
    if per.shape != (length, 2):
        raise ShapeError(f"periodicity table {per.shape} does not match length {length}")
    unknown = set(channels) - set(FEATURE_CHANNELS)
    if unknown or not channels:
        raise ConfigError(f"unknown feature channels {sorted(unknown)}")
    per_b = np.broadcast_to(per[None, :, None, :], (b, length, d, 2))
    available = {"raw": x[..., None], "freq": freq[..., None],
                 "sin": per_b[..., :1], "cos": per_b[..., 1:]}
    stacked = np.concatenate([available[name] for name in channels], axis=-1)
    return EncodedFeatures(channels=stacked)


class ValParams:
    """Conv cascade weights: 1-D lift F->hidden, 2-D halve, 2-D to C.

    All kernels are 3-wide, stride 1, same-padding.
    """

    KERNEL = 3

    def __init__(self, rng: np.random.Generator, cfg: ImageConfig,
                 in_channels: int = len(FEATURE_CHANNELS), dtype=np.float64):
        h = cfg.hidden_dim
        k = self.KERNEL
        self.cfg = cfg
        self.conv1_k = randn_param(rng, (h, in_channels, k), scale=0.2, dtype=dtype)
        self.conv1_b = zeros_param((h, 1), dtype=dtype)
        self.conv2_k = randn_param(rng, (h // 2, 1, k, k), scale=0.2, dtype=dtype)
        self.conv2_b = zeros_param((h // 2, 1, 1), dtype=dtype)
        self.conv3_k = randn_param(rng, (cfg.out_channels, h // 2, k, k), scale=0.2, dtype=dtype)
        self.conv3_b = zeros_param((cfg.out_channels, 1, 1), dtype=dtype)

    def params(self, prefix: str = "val"):
        yield f"{prefix}.conv1_k", self.conv1_k
        yield f"{prefix}.conv1_b", self.conv1_b
        yield f"{prefix}.conv2_k", self.conv2_k
        yield f"{prefix}.conv2_b", self.conv2_b
        yield f"{prefix}.conv3_k", self.conv3_k
        yield f"{prefix}.conv3_b", self.conv3_b


def multiscale_conv(features: EncodedFeatures, params: ValParams) -> Tensor:
    """(B, L, D, F) -> (B, C, hidden, L) temporal feature map.

    Lift channels along time per variable, average over variables, view
    hidden x time as the image plane, then two 2-D stages (halve, to C).
    """
    b, length, d, f = features.channels.shape
    pad = params.KERNEL // 2
    # (B, L, D, F) -> (B*D, F, L)
    x = Tensor(features.channels.transpose(0, 2, 3, 1).reshape(b * d, f, length))
    lifted = add(conv1d(x, params.conv1_k, padding=pad), params.conv1_b)
    hidden = params.cfg.hidden_dim
    per_var = reshape(lifted, (b, d, hidden, length))
    plane = reshape(tmean(per_var, axis=1), (b, 1, hidden, length))
    halved = add(conv2d(plane, params.conv2_k, padding=pad), params.conv2_b)
    return add(conv2d(halved, params.conv3_k, padding=pad), params.conv3_b)


def to_image(conv_out: Tensor, cfg: ImageConfig, stats=None) -> EncodedImage:
    """Bilinear resize to the target square, then per-instance min-max
    scaling to [0, 255]; min/max are constants of the forward pass.

    `stats`, when given, pins (mins, maxs) from an earlier pass so that
    finite-difference probes see the same partial derivative the
    backward pass computes.
    """
    resized = bilinear_resize(conv_out, cfg.image_size, cfg.image_size)
    if stats is None:
        mins = resized.data.min(axis=(1, 2, 3), keepdims=True)
        maxs = resized.data.max(axis=(1, 2, 3), keepdims=True)
    else:
        mins, maxs = stats
    scale = 255.0 / (maxs - mins + cfg.eps)
    pixels = mul(sub(resized, Tensor(mins)), Tensor(scale))
    return EncodedImage(pixels=pixels, mins=mins.reshape(-1), maxs=maxs.reshape(-1),
                        eps=cfg.eps)


def quantize_pixels(pixels: np.ndarray) -> np.ndarray:
    """Round half up to 8-bit."""
    return np.clip(np.floor(pixels + 0.5), 0, 255).astype(np.uint8)


def render_image(img: EncodedImage, path, instance: int = 0,
                 metadata: bool = False, periodicity: int | None = None) -> None:
    """Write one instance as a binary portable pixmap (P5 gray / P6 RGB).

    Bytes are a pure function of the pixel tensor. The optional sidecar
    records the normalization context next to the image.
    """
    _, c, h, w = img.pixels.shape
    if c not in (1, 3):
        raise DomainError(f"portable pixmap export needs 1 or 3 channels, got {c}")
    raw = quantize_pixels(img.pixels.data[instance])
    magic = b"P5" if c == 1 else b"P6"
    body = raw[0].tobytes() if c == 1 else raw.transpose(1, 2, 0).tobytes()
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(body)
    if metadata:
        with open(str(path) + ".meta", "w") as fh:
            fh.write(f"min = {img.mins[instance]!r}\n")
            fh.write(f"max = {img.maxs[instance]!r}\n")
            fh.write(f"eps = {img.eps!r}\n")
            if periodicity is not None:
                fh.write(f"periodicity = {periodicity}\n")
            fh.write(f"image_size = {h}\n")


class VisionAugmentedLearner:
    """Pipeline facade: encode a window batch into a normalized image."""

    def __init__(self, rng: np.random.Generator, cfg: ImageConfig, dtype=np.float64):
        self.cfg = cfg
        self.params = ValParams(rng, cfg, dtype=dtype)
        # gradient-check support: pin min/max across forwards so numeric
        # probes differentiate the same function backward does
        self.freeze_stats = False
        self._stats_cache = None

    def forward(self, x: np.ndarray) -> EncodedImage:
        x = np.asarray(x, dtype=np.float64)
        freq = frequency_encode(x)
        per = periodicity_encode(x.shape[1], self.cfg.periodicity)
        features = assemble_features(x, freq, per)
        conv_out = multiscale_conv(features, self.params)
        # amplitude gate: min-max normalization is scale-invariant, so this
        # only matters for degenerate (constant) windows, which must render
        # as degenerate images rather than as the bare periodic texture
        amp = x.std(axis=(1, 2)).reshape(-1, 1, 1, 1)
        gated = mul(conv_out, Tensor(amp))
        stats = self._stats_cache if self.freeze_stats else None
        image = to_image(gated, self.cfg, stats=stats)
        if self.freeze_stats and self._stats_cache is None:
            shape = (-1, 1, 1, 1)
            self._stats_cache = (image.mins.reshape(shape), image.maxs.reshape(shape))
        return image

    def named_params(self, prefix: str = "val"):
        yield from self.params.params(prefix)
