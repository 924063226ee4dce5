"""Finite-difference gradient checking harness.

The numeric side reruns the forward function on perturbed copies and
never touches the reverse sweep, so it stays an independent oracle for
the analytic gradients.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, backward, tsum, mul


def _loss_weights(shapes, seed: int):
    rng = np.random.default_rng(seed)
    return [rng.standard_normal(s) for s in shapes]


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(1.0, abs(a), abs(n))


def _forward_scalar(fn, arrays, weights) -> float:
    outs = fn(*[Tensor(a.copy()) for a in arrays])
    if isinstance(outs, Tensor):
        outs = (outs,)
    total = 0.0
    for o, w in zip(outs, weights):
        total += float((o.data * w).sum())
    return total


def grad_check_params(forward_fn, params, step: float = 1e-6, seed: int = 0,
                      max_coords: int = 5) -> float:
    """Finite-difference check of a composed module against its parameters.

    `forward_fn()` takes no arguments and must rebuild the graph from the
    live parameter tensors each call. A seeded weighted sum of its output
    is the probe scalar; `max_coords` coordinates per parameter are
    perturbed in place (and restored) for the numeric side.
    """
    params = list(params)
    out = forward_fn()
    weights = _loss_weights([out.shape], seed)[0]
    for p in params:
        p.grad = None
    backward(tsum(mul(out, Tensor(weights))))

    def scalar():
        return float((forward_fn().data * weights).sum())

    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat_data = p.data.reshape(-1)
        flat_grad = analytic.reshape(-1)
        coords = np.arange(flat_data.size)
        if flat_data.size > max_coords:
            coords = rng.choice(flat_data.size, size=max_coords, replace=False)
        for c in coords:
            base = flat_data[c]
            flat_data[c] = base + step
            plus = scalar()
            flat_data[c] = base - step
            minus = scalar()
            flat_data[c] = base
            numeric = (plus - minus) / (2 * step)
            worst = max(worst, _rel_err(float(flat_grad[c]), numeric))
    return worst


def grad_check(fn, inputs, step: float = 1e-6, seed: int = 0,
               max_coords: int | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    `fn` maps Tensors to a Tensor (or tuple of Tensors); its outputs are
    contracted with fixed seeded weights into a scalar, which both sides
    differentiate. Inputs must be double precision. When `max_coords` is
    given, only that many randomly chosen coordinates per input are
    probed (for composite modules with many parameters).

    Error per coordinate: |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    inputs = list(inputs)
    arrays = [np.asarray(t.data, dtype=np.float64) for t in inputs]

    probe = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    outs = fn(*probe)
    if isinstance(outs, Tensor):
        outs = (outs,)
    weights = _loss_weights([o.shape for o in outs], seed)
    loss = None
    for o, w in zip(outs, weights):
        term = tsum(mul(o, Tensor(w)))
        loss = term if loss is None else loss + term
    backward(loss)

    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for t_idx, t in enumerate(probe):
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = analytic.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for c in coords:
            base = arrays[t_idx].reshape(-1)[c]
            plus = [a.copy() for a in arrays]
            plus[t_idx].reshape(-1)[c] = base + step
            minus = [a.copy() for a in arrays]
            minus[t_idx].reshape(-1)[c] = base - step
            numeric = (_forward_scalar(fn, plus, weights)
                       - _forward_scalar(fn, minus, weights)) / (2 * step)
            worst = max(worst, _rel_err(float(flat[c]), numeric))
    return worst
