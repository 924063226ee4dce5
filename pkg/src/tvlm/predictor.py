"""Instance normalization, prediction head, loss, Adam, training loop.

Normalization scales each (instance, variable) series by
std**norm_const + 1e-8 around its mean; the head is a
channel-independent linear map from flattened patch features to the
horizon. Training runs minibatch Adam with the learning rate halved
each epoch and early stopping on validation MSE; only registered
trainable parameters ever change.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .attention import Linear
from .errors import CheckpointError, ConfigError, ShapeError
from .tensor import Tensor, backward, mul, reshape, sub, tmean, transpose, zero_grad


# ---------------------------------------------------------------- normalization


@dataclass
class NormState:
    mean: np.ndarray   # (B, 1, D)
    std: np.ndarray    # (B, 1, D), population std
    norm_const: float

    @property
    def denom(self) -> np.ndarray:
        return self.std ** self.norm_const + 1e-8


def instance_normalize(x: np.ndarray, norm_const: float = 0.4):
    """(x - mean) / (std**norm_const + 1e-8) per instance and variable."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=1, keepdims=True)
    std = x.std(axis=1, keepdims=True)
    state = NormState(mean=mean, std=std, norm_const=norm_const)
    return (x - mean) / state.denom, state


def denormalize(values, state: NormState):
    """Invert instance_normalize; accepts a Tensor (graph) or ndarray."""
    if isinstance(values, Tensor):
        return mul(values, Tensor(state.denom)) + Tensor(state.mean)
    return values * state.denom + state.mean


# ---------------------------------------------------------------- head / loss


class PredictionHead:
    """Flattened patch features -> horizon, shared across variables."""

    def __init__(self, rng: np.random.Generator, n_patches: int, d_model: int,
                 horizon: int, dtype=np.float64):
        self.n_patches = n_patches
        self.d_model = d_model
        self.horizon = horizon
        self.linear = Linear(rng, n_patches * d_model, horizon, dtype)

    def params(self, prefix: str = "head"):
        yield from self.linear.params(prefix)


def predict(f_fused: Tensor, head: PredictionHead, horizon: int, n_vars: int) -> Tensor:
    """(B*D, N_p, d_model) -> (B, H, D) in normalized space."""
    bd, n_p, d_model = f_fused.shape
    if n_p != head.n_patches or d_model != head.d_model or horizon != head.horizon:
        raise ShapeError(
            f"head built for {head.n_patches}x{head.d_model}->{head.horizon}, "
            f"got {n_p}x{d_model}->{horizon}")
    if bd % n_vars != 0:
        raise ShapeError(f"batch axis {bd} not divisible by {n_vars} variables")
    flat = reshape(f_fused, (bd, n_p * d_model))
    per_instance = head.linear(flat)                      # (B*D, H)
    stacked = reshape(per_instance, (bd // n_vars, n_vars, horizon))
    return transpose(stacked, (0, 2, 1))                  # (B, H, D)


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean of squared differences over all elements."""
    target = target if isinstance(target, Tensor) else Tensor(np.asarray(target, dtype=np.float64))
    if pred.shape != target.shape:
        raise ShapeError(f"loss shapes differ: {pred.shape} vs {target.shape}")
    diff = sub(pred, target)
    return tmean(mul(diff, diff))


# ---------------------------------------------------------------- Adam


class AdamState:
    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {}
        self.v = {}


def adam_step(named_params, grads, state: AdamState, lr: float) -> None:
    """Standard bias-corrected Adam update, in place.

    `grads` maps parameter name -> ndarray; missing entries count as zero.
    """
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for name, p in named_params:
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------- training


@dataclass
class TrainConfig:
    batch_size: int = 32
    lr: float = 1e-3
    epochs: int = 10
    patience: int = 3
    seed: int = 0

    def __post_init__(self):
        if min(self.batch_size, self.epochs, self.patience) < 1 or self.lr <= 0:
            raise ConfigError(f"training parameters must be positive: {self}")

    def epoch_lr(self, epoch: int) -> float:
        return self.lr * 2.0 ** (-epoch)


def _xy(data):
    if hasattr(data, "x") and hasattr(data, "y"):
        return np.asarray(data.x), np.asarray(data.y)
    x, y = data
    return np.asarray(x), np.asarray(y)


def evaluate_mse(model, data, batch_size: int = 32) -> float:
    """Full-pass MSE in original units; eval mode (no memory writes)."""
    x, y = _xy(data)
    total, count = 0.0, 0
    for start in range(0, len(x), batch_size):
        xb, yb = x[start:start + batch_size], y[start:start + batch_size]
        pred = model.forward_batch(xb, training=False)
        total += float(((pred.data - yb) ** 2).sum())
        count += yb.size
    return total / count


def fit(model, train_data, val_data, cfg: TrainConfig):
    """Seeded minibatch Adam over the model's trainable parameters.

    Returns (history, best_epoch); the model is left holding the
    best-validation state. Each history row reports the post-epoch
    full-pass train/val MSE at that epoch's parameters.
    """
    train_x, train_y = _xy(train_data)
    val_x, val_y = _xy(val_data)
    if len(train_x) == 0 or len(val_x) == 0:
        raise ConfigError("fit needs nonempty train and validation data")

    rng = np.random.default_rng(cfg.seed)
    adam = AdamState()
    named = list(model.trainable_params())
    tensors = [t for _, t in named]

    history = []
    best_val = np.inf
    best_epoch = -1
    best_state = None
    bad_epochs = 0

    for epoch in range(cfg.epochs):
        lr = cfg.epoch_lr(epoch)
        order = rng.permutation(len(train_x))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            pred = model.forward_batch(train_x[idx], training=True, rng=rng)
            loss = mse_loss(pred, train_y[idx])
            zero_grad(tensors)
            backward(loss)
            grads = {name: (t.grad if t.grad is not None else np.zeros_like(t.data))
                     for name, t in named}
            adam_step(named, grads, adam, lr)
        train_mse = evaluate_mse(model, (train_x, train_y), cfg.batch_size)
        val_mse = evaluate_mse(model, (val_x, val_y), cfg.batch_size)
        history.append({"epoch": epoch, "train_mse": train_mse,
                        "val_mse": val_mse, "lr": lr})
        if val_mse < best_val:
            best_val = val_mse
            best_epoch = epoch
            best_state = model.state_dict()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    if best_state is not None:
        model.load_state_dict(best_state)
    return history, best_epoch


def history_to_csv(history) -> str:
    lines = ["epoch,train_mse,val_mse,lr"]
    for row in history:
        lines.append(f"{row['epoch']},{row['train_mse']:.10e},"
                     f"{row['val_mse']:.10e},{row['lr']:.10e}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- checkpoints

_MAGIC = b"TVLM"
_VERSION = 1
_DTYPE_CODES = {np.dtype(np.float64): 0, np.dtype(np.float32): 1, np.dtype(np.int64): 2}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


def save_checkpoint(path, tensors: dict, fingerprint: str) -> None:
    """Versioned binary blob of named arrays plus a config fingerprint.

    Byte-deterministic for identical inputs (names written in sorted order).
    """
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fp = fingerprint.encode("utf-8")
        fh.write(struct.pack("<I", len(fp)))
        fh.write(fp)
        names = sorted(tensors)
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            arr = np.ascontiguousarray(tensors[name])
            meta = name.encode("utf-8")
            fh.write(struct.pack("<I", len(meta)))
            fh.write(meta)
            fh.write(struct.pack("<B", _DTYPE_CODES[arr.dtype]))
            fh.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    """-> (dict name -> ndarray, fingerprint)."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        (fp_len,) = struct.unpack("<I", fh.read(4))
        fingerprint = fh.read(fp_len).decode("utf-8")
        (count,) = struct.unpack("<I", fh.read(4))
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (code,) = struct.unpack("<B", fh.read(1))
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim))
            dtype = _CODE_DTYPES.get(code)
            if dtype is None:
                raise CheckpointError(f"{path}: unknown dtype code {code}")
            n_bytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if shape else dtype.itemsize
            arr = np.frombuffer(fh.read(n_bytes), dtype=dtype).reshape(shape).copy()
            tensors[name] = arr
        return tensors, fingerprint
