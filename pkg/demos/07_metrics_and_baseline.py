"""Forecast metrics and the seasonal-naive reference behind OWA.

Run from the repo root:  python3 demos/07_metrics_and_baseline.py
"""

import numpy as np

from tvlm.metrics import (
    format_report,
    metric_mae,
    metric_mase,
    metric_mse,
    metric_owa,
    metric_smape,
    naive2_forecast,
)

rng = np.random.default_rng(6)

# A noisy periodic truth, one smart and one lazy forecast.
s, H = 12, 24
t = np.arange(120 + H)
truth_full = np.sin(2 * np.pi * t / s) + 0.1 * rng.standard_normal(len(t))
insample, truth = truth_full[:120], truth_full[120:]

naive = naive2_forecast(insample, s, H)          # repeat the last season
smart = truth + 0.05 * rng.standard_normal(H)    # close to the truth

rows = []
for name, pred in (("seasonal-naive", naive), ("smart", smart)):
    rows.append({
        "model": name,
        "mse": metric_mse(pred, truth),
        "mae": metric_mae(pred, truth),
        "smape": metric_smape(pred, truth),
        "mase": metric_mase(pred, truth, insample, s),
    })
print(format_report(rows, ["model", "mse", "mae", "smape", "mase"]))

owa = metric_owa(rows[1]["smape"], rows[1]["mase"],
                 rows[0]["smape"], rows[0]["mase"])
print(f"OWA of the smart model against the naive reference: {owa:.3f} "
      "(parity would be 1.0)")
