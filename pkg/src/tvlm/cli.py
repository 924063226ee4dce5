"""Command-line entry point.

Subcommands: train, eval, forecast, render, bridge-check. Exit codes:
0 ok, 1 runtime failure, 2 config/input error, 3 transport error. The
environment variable TVLM_BRIDGE_URL overrides --endpoint everywhere.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig
from .data import WindowSet, few_shot_subset, load_csv, split, windows_for_split
from .encoder import EncoderDescriptor, RemoteEncoder
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    EmbeddingShapeError,
    MalformedResponseError,
    TransportError,
    TvlmError,
)
from .metrics import (
    format_report,
    metric_mae,
    metric_mase,
    metric_mse,
    metric_owa,
    metric_smape,
    naive2_forecast,
    report_csv,
)
from .model import Forecaster
from .predictor import (
    fit,
    history_to_csv,
    load_checkpoint,
    save_checkpoint,
)
from .tal import default_domain_descriptions
from .val import render_image

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_TRANSPORT = 3


def _resolve_endpoint(args, cfg: RunConfig | None = None) -> str:
    env = os.environ.get("TVLM_BRIDGE_URL")
    if env:
        return env
    if getattr(args, "endpoint", None):
        return args.endpoint
    return cfg.endpoint if cfg is not None else ""


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "encoder", None):
        cfg.encoder_kind = args.encoder
    endpoint = _resolve_endpoint(args, cfg)
    if endpoint:
        cfg.endpoint = endpoint
    cfg.validate()
    return cfg


def build_model(cfg: RunConfig, n_vars: int) -> Forecaster:
    domain = cfg.domain_description
    if not domain:
        domain = default_domain_descriptions().get(cfg.dataset_name, "")
    return Forecaster(
        np.random.default_rng(cfg.seed),
        seq_len=cfg.seq_len,
        horizon=cfg.pred_len,
        n_vars=n_vars,
        patch_cfg=cfg.patch_config(),
        image_cfg=cfg.image_config(),
        encoder_desc=cfg.encoder_descriptor(),
        d_fusion=cfg.d_fusion,
        norm_const=cfg.norm_const,
        dataset_name=cfg.dataset_name,
        domain_description=domain,
    )


def prepare_windows(cfg: RunConfig):
    """-> (n_vars, {split: list[WindowSample]})."""
    if not cfg.data_path:
        raise ConfigError("no dataset path configured ([data] path)")
    spec = cfg.dataset_spec()
    matrix = load_csv(cfg.data_path, spec)
    bounds = split(matrix, spec)
    out = {}
    for name in ("train", "val", "test"):
        samples = windows_for_split(matrix, bounds, name, cfg.seq_len,
                                    cfg.pred_len, stride=cfg.window_stride)
        if name == "train":
            samples = few_shot_subset(samples, cfg.few_shot_fraction)
        out[name] = samples
    return matrix.shape[1], out


def _predictions(model, window_set: WindowSet, batch_size: int):
    preds = []
    for start in range(0, len(window_set), batch_size):
        xb = window_set.x[start:start + batch_size]
        preds.append(model.forward_batch(xb, training=False).data)
    return np.concatenate(preds) if preds else np.zeros_like(window_set.y)


# ---------------------------------------------------------------- commands


def cmd_train(args) -> int:
    cfg = _load_config(args)
    sys.stdout.write(cfg.to_text())
    n_vars, windows = prepare_windows(cfg)
    train_set = WindowSet.from_samples(windows["train"])
    val_set = WindowSet.from_samples(windows["val"])
    if len(train_set) == 0 or len(val_set) == 0:
        raise ConfigError("no windows: train or validation split too short")
    model = build_model(cfg, n_vars)
    checksum_before = model.encoder_checksum()
    history, best_epoch = fit(model, train_set, val_set, cfg.train_config())
    if model.encoder_checksum() != checksum_before:
        raise TvlmError("frozen-encoder contract violated during fit")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "history.csv").write_text(history_to_csv(history))
    save_checkpoint(out / "checkpoint.tvlm", model.state_dict(), cfg.fingerprint())

    preds = _predictions(model, val_set, cfg.batch_size)
    val_mse = metric_mse(preds, val_set.y)
    val_mae = metric_mae(preds, val_set.y)
    print(f"best_epoch={best_epoch} val_mse={val_mse:.6f} val_mae={val_mae:.6f}")
    return EXIT_OK


def _load_model_from_checkpoint(args, cfg: RunConfig, n_vars: int) -> Forecaster:
    ckpt_path = args.checkpoint or str(Path(args.out) / "checkpoint.tvlm")
    tensors, fingerprint = load_checkpoint(ckpt_path)
    if fingerprint != cfg.fingerprint():
        raise CheckpointError(
            "checkpoint does not match this config: "
            f"checkpoint fingerprint {fingerprint}, config fingerprint {cfg.fingerprint()}")
    model = build_model(cfg, n_vars)
    model.load_state_dict(tensors)
    return model


def _short_horizon_report(model, window_set: WindowSet, cfg: RunConfig):
    """SMAPE/MASE/OWA against the seasonal-naive reference, macro-averaged
    over (window, variable) series; series with zero seasonal scale are
    skipped."""
    preds = _predictions(model, window_set, cfg.batch_size)
    s = cfg.periodicity
    smape_m, mase_m, smape_n, mase_n = [], [], [], []
    skipped = 0
    for i in range(len(window_set)):
        for d in range(window_set.y.shape[2]):
            insample = window_set.x[i, :, d]
            truth = window_set.y[i, :, d]
            naive = naive2_forecast(insample, s, len(truth))
            try:
                mase_m.append(metric_mase(preds[i, :, d], truth, insample, s))
                mase_n.append(metric_mase(naive, truth, insample, s))
            except TvlmError:
                skipped += 1
                continue
            smape_m.append(metric_smape(preds[i, :, d], truth))
            smape_n.append(metric_smape(naive, truth))
    if not smape_m:
        raise ConfigError("no scorable series for short-horizon metrics")
    smape = float(np.mean(smape_m))
    mase = float(np.mean(mase_m))
    owa = metric_owa(smape, mase, float(np.mean(smape_n)), float(np.mean(mase_n)))
    return {"smape": smape, "mase": mase, "owa": owa, "skipped_series": skipped}


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    n_vars, windows = prepare_windows(cfg)
    samples = windows[args.split]
    if not samples:
        raise ConfigError(f"no windows in split {args.split!r}")
    window_set = WindowSet.from_samples(samples)
    model = _load_model_from_checkpoint(args, cfg, n_vars)

    if cfg.horizon_mode == "long":
        preds = _predictions(model, window_set, cfg.batch_size)
        row = {"split": args.split,
               "mse": metric_mse(preds, window_set.y),
               "mae": metric_mae(preds, window_set.y)}
        columns = ["split", "mse", "mae"]
    else:
        row = {"split": args.split, **_short_horizon_report(model, window_set, cfg)}
        columns = ["split", "smape", "mase", "owa", "skipped_series"]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report_csv([row], columns))
    table = format_report([row], columns)
    (out / "report.txt").write_text(table)
    sys.stdout.write(table)
    return EXIT_OK


def cmd_forecast(args) -> int:
    cfg = _load_config(args)
    n_vars, windows = prepare_windows(cfg)
    samples = windows[args.split]
    if not samples:
        raise ConfigError(f"no windows in split {args.split!r}")
    idx = args.window if args.window is not None else len(samples) - 1
    if not 0 <= idx < len(samples):
        raise ConfigError(f"window index {idx} out of range [0, {len(samples)})")
    model = _load_model_from_checkpoint(args, cfg, n_vars)
    pred = model.forward_batch(samples[idx].x[None]).data[0]  # (H, D)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = "step," + ",".join(f"v{d + 1}" for d in range(pred.shape[1]))
    lines = [header] + [f"{h}," + ",".join(f"{v:.10g}" for v in pred[h])
                        for h in range(pred.shape[0])]
    (out / "forecast.csv").write_text("\n".join(lines) + "\n")
    print(f"forecast window={idx} shape={pred.shape[0]}x{pred.shape[1]} "
          f"written to {out / 'forecast.csv'}")
    return EXIT_OK


def cmd_render(args) -> int:
    cfg = _load_config(args)
    n_vars, windows = prepare_windows(cfg)
    samples = windows[args.split]
    if not samples:
        raise ConfigError(f"no windows in split {args.split!r}")
    idx = args.window
    if not 0 <= idx < len(samples):
        raise ConfigError(f"window index {idx} out of range [0, {len(samples)})")
    if args.checkpoint:
        model = _load_model_from_checkpoint(args, cfg, n_vars)
    else:
        model = build_model(cfg, n_vars)
    details = model.forward_details(samples[idx].x[None])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    image_path = out / f"window{idx}.ppm"
    render_image(details["image"], image_path, metadata=True,
                 periodicity=cfg.periodicity)
    prompt_path = out / f"window{idx}_prompt.txt"
    prompt_path.write_text(details["prompts"][0] + "\n")
    print(f"wrote {image_path} and {prompt_path}")
    return EXIT_OK


def cmd_bridge_check(args) -> int:
    endpoint = _resolve_endpoint(args)
    if not endpoint and args.config:
        endpoint = _load_config(args).endpoint
    if not endpoint:
        raise ConfigError("no endpoint: pass --endpoint or set TVLM_BRIDGE_URL")

    probe = RemoteEncoder(EncoderDescriptor(kind="remote", endpoint=endpoint,
                                            fused_len=2, hidden_dim=2, n_text=1))
    failures = []
    health = probe.health()  # TransportError propagates -> exit 3
    for key in ("status", "model", "l_f", "d_h"):
        if key not in health:
            failures.append(f"/health missing key {key!r}")
    if health.get("status") != "ok":
        failures.append(f"/health status is {health.get('status')!r}")

    l_f = int(health.get("l_f", 0) or 0)
    d_h = int(health.get("d_h", 0) or 0)
    if l_f < 2 or d_h < 1:
        failures.append(f"/health advertises unusable shape l_f={l_f} d_h={d_h}")
    else:
        desc = EncoderDescriptor(kind="remote", endpoint=endpoint,
                                 fused_len=l_f, hidden_dim=d_h, n_text=1)
        enc = RemoteEncoder(desc)
        from .tensor import Tensor
        from .val import EncodedImage

        zeros = np.zeros((1, 3, 64, 64))
        img = EncodedImage(pixels=Tensor(zeros), mins=np.zeros(1),
                           maxs=np.zeros(1), eps=1e-5)
        try:
            emb = enc.encode(img, "bridge conformance probe")
        except (EmbeddingShapeError, MalformedResponseError) as exc:
            failures.append(f"/embed: {exc}")
        else:
            types = set(emb.token_types)
            if not types <= {"text", "visual"}:
                failures.append(f"/embed token_types has unknown kinds {types}")
            if emb.n_text + emb.n_visual != l_f:
                failures.append("/embed token_types do not partition l_f")

    if failures:
        for f in failures:
            print(f"FAIL {f}")
        return EXIT_RUNTIME
    print(f"OK L_f={l_f} d_h={d_h}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_common(sub, config_required=True):
    sub.add_argument("--config", default=None, required=config_required,
                     help="path to a key = value config file")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--encoder", choices=["mock", "remote"], default=None)
    sub.add_argument("--endpoint", default=None)
    sub.add_argument("--out", default="tvlm-out")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvlm",
        description="Multimodal time series forecasting pipeline")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("train", help="train and write checkpoint + history")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser("forecast", help="forecast one window to CSV")
    _add_common(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--window", type=int, default=None)
    p.set_defaults(func=cmd_forecast)

    p = commands.add_parser("render", help="export one window's image and prompt")
    _add_common(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--window", type=int, default=0)
    p.set_defaults(func=cmd_render)

    p = commands.add_parser("bridge-check", help="wire-protocol conformance probe")
    _add_common(p, config_required=False)
    p.set_defaults(func=cmd_bridge_check)

    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (ConfigError, DataError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TvlmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
