"""Forecast accuracy metrics and the seasonal-naive reference.

Long-horizon reporting uses MSE/MAE; short-horizon reporting uses
SMAPE (factor 200/H), MASE scaled by the in-sample seasonal-difference
mean, and OWA against a seasonal-naive reference. Multi-window arrays
macro-average per-(window, variable) series over the horizon axis.
"""

from __future__ import annotations

import numpy as np

from .errors import MetricError, ShapeError


def _check_shapes(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"metric shapes differ: {pred.shape} vs {truth.shape}")
    return pred, truth


def metric_mse(pred, truth) -> float:
    pred, truth = _check_shapes(pred, truth)
    return float(((pred - truth) ** 2).mean())


def metric_mae(pred, truth) -> float:
    pred, truth = _check_shapes(pred, truth)
    return float(np.abs(pred - truth).mean())


def _per_series(pred, truth):
    """-> (n_series, H) views: 1-D is one series, 3-D is (n, H, D)."""
    if pred.ndim == 1:
        return pred[None, :], truth[None, :]
    if pred.ndim == 2:  # (n, H)
        return pred, truth
    if pred.ndim == 3:  # (n, H, D) -> series per (window, variable)
        n, h, d = pred.shape
        return (pred.transpose(0, 2, 1).reshape(n * d, h),
                truth.transpose(0, 2, 1).reshape(n * d, h))
    raise ShapeError(f"unsupported metric rank {pred.ndim}")


def metric_smape(pred, truth) -> float:
    """200/H * sum |Y-Yhat| / (|Y|+|Yhat|); zero-denominator terms are 0."""
    pred, truth = _check_shapes(pred, truth)
    p, t = _per_series(pred, truth)
    num = np.abs(t - p)
    den = np.abs(t) + np.abs(p)
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(200.0 * terms.mean(axis=1).mean())


def metric_mase(pred, truth, insample, s: int) -> float:
    """Mean |Y-Yhat| over the horizon, scaled by the mean in-sample
    seasonal-naive error at period s."""
    pred, truth = _check_shapes(pred, truth)
    if pred.ndim != 1:
        raise ShapeError("metric_mase scores one series at a time")
    insample = np.asarray(insample, dtype=np.float64).reshape(-1)
    if len(insample) <= s:
        raise MetricError(f"insample of {len(insample)} values too short for s={s}")
    scale = float(np.abs(insample[s:] - insample[:-s]).mean())
    if scale == 0.0:
        raise MetricError("seasonal-naive in-sample error is zero; MASE undefined")
    return float(np.abs(truth - pred).mean() / scale)


def metric_owa(smape: float, mase: float, smape_ref: float, mase_ref: float) -> float:
    """0.5 * (SMAPE/SMAPE_ref + MASE/MASE_ref)."""
    if smape_ref <= 0 or mase_ref <= 0:
        raise MetricError(f"reference values must be positive: {smape_ref}, {mase_ref}")
    return 0.5 * (smape / smape_ref + mase / mase_ref)


def naive2_forecast(insample, s: int, horizon: int) -> np.ndarray:
    """Seasonal-naive continuation: repeat the last season across the horizon."""
    insample = np.asarray(insample, dtype=np.float64).reshape(-1)
    t_len = len(insample)
    if t_len < s:
        raise MetricError(f"insample of {t_len} values shorter than season {s}")
    steps = np.arange(1, horizon + 1)
    idx = t_len - s + (steps - 1) % s
    return insample[idx]


def format_report(rows, columns) -> str:
    """Aligned plain-text table; `rows` is a list of dicts."""
    widths = {c: len(c) for c in columns}
    rendered = []
    for row in rows:
        cells = {c: (f"{row[c]:.6f}" if isinstance(row[c], float) else str(row[c]))
                 for c in columns}
        rendered.append(cells)
        for c in columns:
            widths[c] = max(widths[c], len(cells[c]))
    lines = ["  ".join(c.ljust(widths[c]) for c in columns)]
    for cells in rendered:
        lines.append("  ".join(cells[c].ljust(widths[c]) for c in columns))
    return "\n".join(lines) + "\n"


def report_csv(rows, columns) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(
            f"{row[c]:.10g}" if isinstance(row[c], float) else str(row[c])
            for c in columns))
    return "\n".join(lines) + "\n"
