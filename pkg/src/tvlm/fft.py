"""Discrete Fourier transform of real series.

spectrum[k] = sum_t x(t) * exp(-2*pi*i*k*t/n), reported at the original
n bins. Lengths below 1024 (and any non-power-of-two length) go through
a vectorized DFT-matrix product; power-of-two lengths >= 1024 use an
iterative radix-2 path. Applied only to raw inputs, so no gradient is
recorded.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .tensor import Tensor

_RADIX2_MIN = 1024

_dft_cache: dict[int, np.ndarray] = {}


def _dft_matrix(n: int) -> np.ndarray:
    w = _dft_cache.get(n)
    if w is None:
        k = np.arange(n)
        ang = -2.0 * np.pi / n * np.outer(k, k)
        w = np.cos(ang) + 1j * np.sin(ang)
        if n <= 2048:
            _dft_cache[n] = w
    return w


def _radix2(x: np.ndarray) -> np.ndarray:
    """Iterative Cooley-Tukey over the first axis; n must be a power of two."""
    n = x.shape[0]
    levels = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(levels):
        rev |= ((idx >> b) & 1) << (levels - 1 - b)
    out = x[rev].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        ang = -2.0 * np.pi / size * np.arange(half)
        tw = (np.cos(ang) + 1j * np.sin(ang)).reshape(half, *([1] * (out.ndim - 1)))
        blocks = out.reshape(n // size, size, *out.shape[1:])
        even = blocks[:, :half].copy()
        odd = blocks[:, half:] * tw
        blocks[:, :half] = even + odd
        blocks[:, half:] = even - odd
        out = blocks.reshape(n, *out.shape[1:])
        size *= 2
    return out


def dft_batch(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """DFT along axis 0 of a real (n,) or (n, m) array -> (real, imag)."""
    n = data.shape[0]
    if n == 0:
        raise DomainError("DFT of an empty series")
    if n >= _RADIX2_MIN and (n & (n - 1)) == 0:
        spec = _radix2(data)
    else:
        spec = _dft_matrix(n) @ data
    return np.ascontiguousarray(spec.real), np.ascontiguousarray(spec.imag)


def fft_real(series: Tensor) -> tuple[Tensor, Tensor]:
    """Spectrum of a 1-D real series as (real, imag) tensors of length n."""
    if series.ndim != 1:
        raise DomainError(f"fft_real expects a 1-D series, got shape {series.shape}")
    re, im = dft_batch(series.data)
    return Tensor(re), Tensor(im)
