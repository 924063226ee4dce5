"""Metric fixtures against hand-computed values, plus the naive reference."""

import numpy as np
import pytest

from tvlm.errors import MetricError, ShapeError
from tvlm.metrics import (
    format_report,
    metric_mae,
    metric_mase,
    metric_mse,
    metric_owa,
    metric_smape,
    naive2_forecast,
    report_csv,
)


# ---------------------------------------------------------------- mse / mae


def test_identical_scores_zero():
    x = np.arange(6, dtype=float).reshape(2, 3)
    assert metric_mse(x, x) == 0.0
    assert metric_mae(x, x) == 0.0


def test_constant_error_two():
    t = np.zeros((2, 3))
    p = t + 2.0
    assert metric_mse(p, t) == pytest.approx(4.0, abs=1e-12)
    assert metric_mae(p, t) == pytest.approx(2.0, abs=1e-12)


def test_random_case_matches_hand_formula():
    rng = np.random.default_rng(0)
    p, t = rng.standard_normal((3, 2)), rng.standard_normal((3, 2))
    assert metric_mse(p, t) == pytest.approx(((p - t) ** 2).mean(), abs=1e-12)
    assert metric_mae(p, t) == pytest.approx(np.abs(p - t).mean(), abs=1e-12)


def test_shape_mismatch_rejected():
    with pytest.raises(ShapeError):
        metric_mse(np.zeros(3), np.zeros(4))


def test_mae_bounded_by_rmse():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p, t = rng.standard_normal(50), rng.standard_normal(50)
        assert metric_mae(p, t) <= np.sqrt(metric_mse(p, t)) + 1e-12


# ---------------------------------------------------------------- smape


def test_smape_zero_for_perfect_nonzero_forecast():
    assert metric_smape(np.array([3.0, 4.0]), np.array([3.0, 4.0])) == 0.0


def test_smape_hand_case_is_100():
    assert metric_smape(np.array([3.0]), np.array([1.0])) == pytest.approx(100.0, abs=1e-12)


def test_smape_zero_denominator_contributes_zero():
    assert metric_smape(np.array([0.0]), np.array([0.0])) == 0.0
    # one degenerate term among two: only the live term counts
    val = metric_smape(np.array([0.0, 3.0]), np.array([0.0, 1.0]))
    assert val == pytest.approx(100.0 / 2, abs=1e-12)


def test_smape_range():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p, t = rng.standard_normal(20), rng.standard_normal(20)
        assert 0.0 <= metric_smape(p, t) <= 200.0
    # opposite signs hit the upper bound
    assert metric_smape(np.array([1.0]), np.array([-1.0])) == pytest.approx(200.0)


def test_smape_macro_average_over_batch():
    p = np.stack([np.array([[3.0], [1.0]]), np.array([[1.0], [1.0]])])  # (2, 2, 1)
    t = np.stack([np.array([[1.0], [1.0]]), np.array([[1.0], [1.0]])])
    # series one: terms (0.5, 0) -> 50; series two: 0
    assert metric_smape(p, t) == pytest.approx(25.0, abs=1e-12)


# ---------------------------------------------------------------- mase


def test_mase_perfect_forecast_is_zero():
    insample = np.array([1.0, 2.0, 3.0, 4.0])
    assert metric_mase(np.array([5.0]), np.array([5.0]), insample, s=1) == 0.0


def test_mase_ramp_denominator_is_one():
    insample = np.array([0.0, 1.0, 2.0, 3.0])
    got = metric_mase(np.array([9.0]), np.array([5.0]), insample, s=1)
    assert got == pytest.approx(4.0, abs=1e-12)  # |9-5| / 1


def test_mase_equals_one_when_errors_match_scale():
    # periodic insample with constant seasonal error c; forecast off by c
    insample = np.array([0.0, 1.0, 2.0, 3.0])  # s=1 scale = 1
    pred = np.array([5.0, 3.0])
    truth = np.array([4.0, 4.0])  # abs errors (1, 1) -> mean 1
    assert metric_mase(pred, truth, insample, s=1) == pytest.approx(1.0, abs=1e-12)


def test_mase_errors():
    with pytest.raises(MetricError):
        metric_mase(np.array([1.0]), np.array([1.0]), np.array([1.0, 2.0]), s=2)
    with pytest.raises(MetricError):
        metric_mase(np.array([1.0]), np.array([1.0]), np.array([2.0, 2.0, 2.0]), s=1)


# ---------------------------------------------------------------- owa


def test_owa_parity_is_one():
    assert metric_owa(10.0, 2.0, 10.0, 2.0) == pytest.approx(1.0, abs=1e-12)


def test_owa_half_reference():
    assert metric_owa(5.0, 1.0, 10.0, 2.0) == pytest.approx(0.5, abs=1e-12)


def test_owa_formula_case():
    assert metric_owa(10.0, 2.0, 20.0, 4.0) == pytest.approx(0.5, abs=1e-12)


def test_owa_rejects_zero_reference():
    with pytest.raises(MetricError):
        metric_owa(10.0, 2.0, 0.0, 4.0)


# ---------------------------------------------------------------- naive2


def test_naive_s1_repeats_last_value():
    np.testing.assert_array_equal(
        naive2_forecast(np.array([1.0, 2.0, 7.0]), s=1, horizon=4),
        [7.0, 7.0, 7.0, 7.0])


def test_naive_s2_alternates_tail():
    got = naive2_forecast(np.array([9.0, 9.0, 3.0, 5.0]), s=2, horizon=4)
    np.testing.assert_array_equal(got, [3.0, 5.0, 3.0, 5.0])


def test_naive_perfect_on_periodic_series():
    s = 4
    base = np.array([1.0, 5.0, 2.0, 8.0])
    series = np.tile(base, 5)
    forecast = naive2_forecast(series, s=s, horizon=8)
    np.testing.assert_array_equal(forecast, np.tile(base, 2))


def test_naive_insample_too_short():
    with pytest.raises(MetricError):
        naive2_forecast(np.array([1.0]), s=2, horizon=3)


# ---------------------------------------------------------------- reports


def test_report_formats():
    rows = [{"split": "test", "mse": 0.25, "mae": 0.5}]
    table = format_report(rows, ["split", "mse", "mae"])
    lines = table.splitlines()
    assert lines[0].split() == ["split", "mse", "mae"]
    assert "0.250000" in lines[1]
    csv_text = report_csv(rows, ["split", "mse", "mae"])
    assert csv_text.splitlines()[0] == "split,mse,mae"
    assert csv_text.splitlines()[1] == "test,0.25,0.5"
