"""Minimal dense tensor with reverse-mode differentiation.

Arrays are numpy ndarrays (float64 by default, float32 opt-in for
training); every operation that participates in training records its
inputs and a vector-Jacobian closure, so a single reverse sweep from a
scalar loss yields gradients for all requires_grad leaves. Tensors are
immutable after construction except through recorded ops; a graph is
confined to one worker at a time.

Kernels are guarded by a finite check: any NaN/Inf output raises
NumericsError instead of propagating silently.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import ContractError, DomainError, NumericsError, ShapeError

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715

_finite_checks = True


def set_finite_checks(enabled: bool) -> bool:
    """Toggle NaN/Inf guarding of kernel outputs; returns the old value."""
    global _finite_checks
    old = _finite_checks
    _finite_checks = bool(enabled)
    return old


def _check_finite(arr: np.ndarray, op: str) -> None:
    if _finite_checks and not np.all(np.isfinite(arr)):
        raise NumericsError(f"{op} produced non-finite values")


_ids = itertools.count()


class Tensor:
    """A dense array plus optional autodiff bookkeeping.

    `data` is always an owned ndarray; `grad` is filled by backward()
    for requires_grad tensors. Interior nodes additionally carry the
    op name, parent tensors and a VJP closure.
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "vjp", "node_id")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.op = "leaf"
        self.parents = ()
        self.vjp = None
        self.node_id = next(_ids)

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self._not_scalar()

    def _not_scalar(self):
        raise ContractError(f"item() on non-scalar tensor of shape {self.shape}")

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        return backward(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes=None):
        return transpose(self, axes)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data, op, parents, vjp) -> Tensor:
    """Build a graph node; drops bookkeeping when no parent needs grad."""
    _check_finite(data, op)
    needs = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    if needs:
        out.op = op
        out.parents = tuple(parents)
        out.vjp = vjp
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcasted gradient back to the parent's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, (gs, ss) in enumerate(zip(g.shape, shape)):
        if ss == 1 and gs != 1:
            g = g.sum(axis=i, keepdims=True)
    return g.reshape(shape)


# -- graph ---------------------------------------------------------------


def trace(root: Tensor):
    """Topologically ordered node list of the graph below `root`.

    Every node's parents appear before it; leaves come first.
    """
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if node.node_id in seen:
            continue
        if expanded:
            seen.add(node.node_id)
            order.append(node)
        else:
            stack.append((node, True))
            for p in node.parents:
                if p.node_id not in seen:
                    stack.append((p, False))
    return order


def backward(loss: Tensor) -> dict:
    """Reverse-accumulate gradients from a scalar loss.

    Returns {node_id: ndarray} for every requires_grad tensor reached;
    also populates each such tensor's .grad. Leaves without
    requires_grad get no entry.
    """
    if loss.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")
    order = trace(loss)
    partial = {loss.node_id: np.ones_like(loss.data)}
    grads = {}
    for node in reversed(order):
        g = partial.pop(node.node_id, None)
        if g is None or not node.requires_grad:
            continue
        grads[node.node_id] = g
        node.grad = g if node.grad is None else node.grad + g
        if node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            if parent.node_id in partial:
                partial[parent.node_id] = partial[parent.node_id] + pg
            else:
                partial[parent.node_id] = pg
    return grads


def zero_grad(tensors) -> None:
    for t in tensors:
        t.grad = None


# -- elementwise / reduction kernels --------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, "add", (a, b), vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(out, "sub", (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(out, "mul", (a, b), vjp)


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, "neg", (a,), lambda g: (-g,))


def tsum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(out, "sum", (x,), vjp)


def tmean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    out = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.data.size if axis is None else np.prod(
        [x.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]
    )

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape) / count,)

    return _make(out, "mean", (x,), vjp)


def sigmoid(x: Tensor) -> Tensor:
    # two-branch form keeps exp() argument nonpositive for stability
    d = x.data
    out = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                   np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _make(out, "sigmoid", (x,), vjp)


def gelu(x: Tensor) -> Tensor:
    """tanh-approximation GELU (0.5x(1+tanh(c(x+ax^3))))."""
    d = x.data
    u = _GELU_C * (d + _GELU_A * d ** 3)
    t = np.tanh(u)
    out = 0.5 * d * (1.0 + t)

    def vjp(g):
        du = _GELU_C * (1.0 + 3.0 * _GELU_A * d ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * d * (1.0 - t ** 2) * du),)

    return _make(out, "gelu", (x,), vjp)


def identity(x: Tensor) -> Tensor:
    return _make(x.data.copy(), "identity", (x,), lambda g: (g,))


def dropout(x: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; pass rng=None (or p=0) for eval mode."""
    if rng is None or p <= 0.0:
        return x
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return _make(x.data * mask, "dropout", (x,), lambda g: (g * mask,))


# -- linear algebra --------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} x {b.shape}")
    out = a.data @ b.data

    def vjp(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _make(out, "matmul", (a, b), vjp)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    return _make(x.data.reshape(shape), "reshape", (x,),
                 lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    inv = np.argsort(axes)

    def vjp(g):
        return (g.transpose(inv),)

    return _make(x.data.transpose(axes), "transpose", (x,), vjp)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, "concat", tuple(tensors), vjp)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis (used to index positional tables)."""
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def vjp(g):
        full = np.zeros_like(x.data)
        full[idx] = g
        return (full,)

    return _make(x.data[idx].copy(), "narrow", (x,), vjp)


def repeat0(x: Tensor, repeats: int) -> Tensor:
    """Repeat each leading-axis element `repeats` times consecutively."""
    out = np.repeat(x.data, repeats, axis=0)

    def vjp(g):
        return (g.reshape((x.shape[0], repeats) + x.shape[1:]).sum(axis=1),)

    return _make(out, "repeat0", (x,), vjp)


# -- neural-net kernels -----------------------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax axis {axis} invalid for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return ((g - dot) * out,)

    return _make(out, "softmax", (x,), vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit (population) variance,
    then apply the affine gain/bias."""
    gain, bias = _as_tensor(gain), _as_tensor(bias)
    d = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def vjp(g):
        lead = tuple(range(g.ndim - 1))
        ggain = _unbroadcast((g * xhat).sum(axis=lead), gain.shape)
        gbias = _unbroadcast(g.sum(axis=lead), bias.shape)
        gh = g * gain.data
        gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                    - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        return gx, ggain, gbias

    if d < 1:
        raise ShapeError("layer_norm needs a nonempty last axis")
    return _make(out, "layer_norm", (x, gain, bias), vjp)


def _pair(v):
    return tuple(v) if isinstance(v, (tuple, list)) else (int(v), int(v))


def conv2d(x: Tensor, kernel: Tensor, stride=1, padding=0) -> Tensor:
    """Cross-correlation (no kernel flip), zero padding, floor strides.

    x: (b, c_in, h, w); kernel: (c_out, c_in, kh, kw). Bias is handled by
    callers as a broadcast add.
    """
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    b, cin, h, w = x.shape
    cout, cin_k, kh, kw = kernel.shape
    if cin != cin_k:
        raise ShapeError(f"conv2d channel mismatch: input {x.shape} vs kernel {kernel.shape}")
    hp, wp = h + 2 * ph, w + 2 * pw
    if kh > hp or kw > wp:
        raise ShapeError(f"conv2d kernel {kernel.shape} larger than padded input ({hp}x{wp})")
    oh = (hp - kh) // sh + 1
    ow = (wp - kw) // sw + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    bs, cs, hs, ws = xp.strides
    cols = np.lib.stride_tricks.as_strided(
        xp,
        shape=(b, cin, kh, kw, oh, ow),
        strides=(bs, cs, hs, ws, hs * sh, ws * sw),
        writeable=False,
    )
    cols2 = cols.transpose(0, 4, 5, 1, 2, 3).reshape(b, oh * ow, cin * kh * kw)
    kmat = kernel.data.reshape(cout, cin * kh * kw)
    out = (cols2 @ kmat.T).transpose(0, 2, 1).reshape(b, cout, oh, ow)

    def vjp(g):
        g2 = g.reshape(b, cout, oh * ow).transpose(0, 2, 1)
        gk = np.einsum("bpk,bpc->ck", cols2, g2).reshape(kernel.shape)
        gcols = (g2 @ kmat).reshape(b, oh, ow, cin, kh, kw)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + sh * oh:sh, j:j + sw * ow:sw] += (
                    gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                )
        gx = gxp[:, :, ph:ph + h, pw:pw + w]
        return gx, gk

    return _make(out, "conv2d", (x, kernel), vjp)


def conv1d(x: Tensor, kernel: Tensor, stride=1, padding=0) -> Tensor:
    """Same contract as conv2d with singleton height.

    x: (b, c_in, n); kernel: (c_out, c_in, k).
    """
    b, cin, n = x.shape
    cout, cin_k, k = kernel.shape
    x2 = reshape(x, (b, cin, 1, n))
    k2 = reshape(kernel, (cout, cin_k, 1, k))
    out = conv2d(x2, k2, stride=(1, int(stride)), padding=(0, int(padding)))
    return reshape(out, (b, cout, out.shape[-1]))


def bilinear_resize(img: Tensor, out_h: int, out_w: int) -> Tensor:
    """Align-corners bilinear interpolation over the trailing (h, w) axes.

    Each output pixel is the distance-weighted mix of its four nearest
    source neighbors; exact at source grid points.
    """
    if out_h < 1 or out_w < 1:
        raise DomainError(f"bilinear_resize target {out_h}x{out_w} must be >=1")
    b, c, h, w = img.shape

    def _coords(n_out, n_in):
        if n_out == 1 or n_in == 1:
            src = np.zeros(n_out)
        else:
            src = np.arange(n_out) * (n_in - 1) / (n_out - 1)
        lo = np.floor(src).astype(np.int64)
        lo = np.clip(lo, 0, n_in - 1)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = src - lo
        return lo, hi, frac

    y0, y1, fy = _coords(out_h, h)
    x0, x1, fx = _coords(out_w, w)
    wy = fy[:, None]
    wx = fx[None, :]
    w00 = (1 - wy) * (1 - wx)
    w01 = (1 - wy) * wx
    w10 = wy * (1 - wx)
    w11 = wy * wx

    d = img.data
    # two-stage lerp: exact at grid points and for constant images
    c00 = d[:, :, y0[:, None], x0[None, :]]
    c01 = d[:, :, y0[:, None], x1[None, :]]
    c10 = d[:, :, y1[:, None], x0[None, :]]
    c11 = d[:, :, y1[:, None], x1[None, :]]
    top = c00 + wx * (c01 - c00)
    bottom = c10 + wx * (c11 - c10)
    out = top + wy * (bottom - top)

    def vjp(g):
        gx = np.zeros_like(d)
        yy0 = np.broadcast_to(y0[:, None], (out_h, out_w))
        yy1 = np.broadcast_to(y1[:, None], (out_h, out_w))
        xx0 = np.broadcast_to(x0[None, :], (out_h, out_w))
        xx1 = np.broadcast_to(x1[None, :], (out_h, out_w))
        for corner_y, corner_x, cw in ((yy0, xx0, w00), (yy0, xx1, w01),
                                       (yy1, xx0, w10), (yy1, xx1, w11)):
            np.add.at(gx, (slice(None), slice(None), corner_y, corner_x), g * cw)
        return (gx,)

    return _make(out, "bilinear_resize", (img,), vjp)


# -- parameter init ---------------------------------------------------------


def randn_param(rng: np.random.Generator, shape, scale: float | None = None,
                dtype=np.float64) -> Tensor:
    """Gaussian-initialized trainable tensor; default scale 1/sqrt(fan_in)."""
    shape = tuple(shape)
    if scale is None:
        fan_in = shape[0] if len(shape) > 1 else max(shape[0], 1)
        scale = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True, dtype=dtype)


def zeros_param(shape, dtype=np.float64) -> Tensor:
    return Tensor(np.zeros(tuple(shape)), requires_grad=True, dtype=dtype)


def ones_param(shape, dtype=np.float64) -> Tensor:
    return Tensor(np.ones(tuple(shape)), requires_grad=True, dtype=dtype)
