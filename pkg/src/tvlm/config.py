"""Run configuration: flat key = value text with sections.

Every field carries the benchmark default; unknown sections or keys are
rejected, and all values are validated before any work starts. The
canonical echo form re-parses to an identical config and is the basis
of the checkpoint fingerprint.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass

from .data import DatasetSpec
from .encoder import EncoderDescriptor
from .errors import ConfigError
from .predictor import TrainConfig
from .ral import PatchConfig
from .val import ImageConfig

# section -> key -> (attribute, type tag)
_SCHEMA = {
    "data": {
        "dataset_name": ("dataset_name", "str"),
        "path": ("data_path", "str"),
        "n_vars": ("n_vars", "optint"),
        "periodicity": ("periodicity", "int"),
        "train_rows": ("train_rows", "optint"),
        "val_rows": ("val_rows", "optint"),
        "test_rows": ("test_rows", "optint"),
        "window_stride": ("window_stride", "int"),
        "few_shot_fraction": ("few_shot_fraction", "float"),
        "domain_description": ("domain_description", "str"),
    },
    "model": {
        "seq_len": ("seq_len", "int"),
        "pred_len": ("pred_len", "int"),
        "patch_len": ("patch_len", "int"),
        "stride": ("stride", "int"),
        "padding": ("padding", "int"),
        "d_model": ("d_model", "int"),
        "d_fusion": ("d_fusion", "int"),
        "n_heads": ("n_heads", "int"),
        "e_layers": ("e_layers", "int"),
        "dropout": ("dropout", "float"),
        "num_queries": ("num_queries", "int"),
        "use_learned_queries": ("use_learned_queries", "bool"),
        "top_k": ("top_k", "int"),
        "memory_capacity": ("memory_capacity", "int"),
        "similarity": ("similarity", "str"),
        "image_size": ("image_size", "int"),
        "image_hidden": ("image_hidden", "int"),
        "image_channels": ("image_channels", "int"),
        "norm_const": ("norm_const", "float"),
    },
    "training": {
        "batch_size": ("batch_size", "int"),
        "lr": ("lr", "float"),
        "epochs": ("epochs", "int"),
        "patience": ("patience", "int"),
        "seed": ("seed", "int"),
        "horizon_mode": ("horizon_mode", "str"),
    },
    "encoder": {
        "kind": ("encoder_kind", "str"),
        "endpoint": ("endpoint", "str"),
        "seed": ("encoder_seed", "int"),
        "vlm_fused_len": ("vlm_fused_len", "int"),
        "vlm_hidden_dim": ("vlm_hidden_dim", "int"),
        "n_text": ("n_text", "int"),
    },
}


@dataclass
class RunConfig:
    # data
    dataset_name: str = "series"
    data_path: str = ""
    n_vars: int | None = None
    periodicity: int = 24
    train_rows: int | None = None
    val_rows: int | None = None
    test_rows: int | None = None
    window_stride: int = 1
    few_shot_fraction: float = 1.0
    domain_description: str = ""
    # model
    seq_len: int = 512
    pred_len: int = 96
    patch_len: int = 16
    stride: int = 8
    padding: int = 8
    d_model: int = 128
    d_fusion: int = 256
    n_heads: int = 4
    e_layers: int = 2
    dropout: float = 0.1
    num_queries: int = 8
    use_learned_queries: bool = False
    top_k: int = 4
    memory_capacity: int = 128
    similarity: str = "cosine"
    image_size: int = 64
    image_hidden: int = 16
    image_channels: int = 3
    norm_const: float = 0.4
    # training
    batch_size: int = 32
    lr: float = 1e-3
    epochs: int = 10
    patience: int = 3
    seed: int = 0
    horizon_mode: str = "long"
    # encoder
    encoder_kind: str = "mock"
    endpoint: str = ""
    encoder_seed: int = 0
    vlm_fused_len: int = 156
    vlm_hidden_dim: int = 768
    n_text: int = 11

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = {
            "seq_len": self.seq_len, "pred_len": self.pred_len,
            "patch_len": self.patch_len, "stride": self.stride,
            "d_model": self.d_model, "d_fusion": self.d_fusion,
            "n_heads": self.n_heads, "e_layers": self.e_layers,
            "top_k": self.top_k, "memory_capacity": self.memory_capacity,
            "batch_size": self.batch_size, "epochs": self.epochs,
            "patience": self.patience, "periodicity": self.periodicity,
            "vlm_fused_len": self.vlm_fused_len,
            "vlm_hidden_dim": self.vlm_hidden_dim, "n_text": self.n_text,
            "window_stride": self.window_stride, "image_size": self.image_size,
            "image_hidden": self.image_hidden,
        }
        for name, value in positive.items():
            if value < 1:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.dropout < 1:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0 < self.few_shot_fraction <= 1:
            raise ConfigError(
                f"few_shot_fraction must be in (0, 1], got {self.few_shot_fraction}")
        if self.horizon_mode not in ("long", "short"):
            raise ConfigError(f"horizon_mode must be long|short, got {self.horizon_mode!r}")
        if self.encoder_kind not in ("mock", "remote"):
            raise ConfigError(f"encoder kind must be mock|remote, got {self.encoder_kind!r}")
        if self.similarity not in ("cosine", "dot"):
            raise ConfigError(f"similarity must be cosine|dot, got {self.similarity!r}")

    # -- component configs ------------------------------------------------

    def dataset_spec(self) -> DatasetSpec:
        return DatasetSpec(name=self.dataset_name, path=self.data_path,
                           n_vars=self.n_vars, periodicity=self.periodicity,
                           train_rows=self.train_rows, val_rows=self.val_rows,
                           test_rows=self.test_rows)

    def patch_config(self) -> PatchConfig:
        return PatchConfig(patch_len=self.patch_len, stride=self.stride,
                           padding=self.padding, d_model=self.d_model,
                           n_heads=self.n_heads, e_layers=self.e_layers,
                           num_queries=self.num_queries, dropout=self.dropout,
                           top_k=self.top_k, memory_capacity=self.memory_capacity,
                           similarity=self.similarity,
                           use_learned_queries=self.use_learned_queries)

    def image_config(self) -> ImageConfig:
        return ImageConfig(image_size=self.image_size, periodicity=self.periodicity,
                           hidden_dim=self.image_hidden,
                           out_channels=self.image_channels)

    def encoder_descriptor(self) -> EncoderDescriptor:
        return EncoderDescriptor(kind=self.encoder_kind, seed=self.encoder_seed,
                                 endpoint=self.endpoint,
                                 fused_len=self.vlm_fused_len,
                                 hidden_dim=self.vlm_hidden_dim, n_text=self.n_text)

    def train_config(self) -> TrainConfig:
        return TrainConfig(batch_size=self.batch_size, lr=self.lr,
                           epochs=self.epochs, patience=self.patience,
                           seed=self.seed)

    # -- serialization -----------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for section in _SCHEMA:
            lines.append(f"[{section}]")
            for key, (attr, tag) in _SCHEMA[section].items():
                value = getattr(self, attr)
                if value is None:
                    rendered = ""
                elif tag == "bool":
                    rendered = "true" if value else "false"
                elif tag == "float":
                    rendered = repr(float(value))
                else:
                    rendered = str(value)
                lines.append(f"{key} = {rendered}")
            lines.append("")
        return "\n".join(lines)

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
        values = {}
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                attr, tag = _SCHEMA[section][key]
                values[attr] = _convert(section, key, raw.strip(), tag)
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                return cls.from_text(fh.read())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None


def _convert(section, key, raw, tag):
    where = f"[{section}] {key}"
    if tag == "str":
        return raw
    if tag == "optint":
        if raw == "":
            return None
        tag = "int"
    if raw == "":
        raise ConfigError(f"{where}: empty value")
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {tag}") from None
    raise ConfigError(f"{where}: unhandled type {tag}")
