"""Window statistics and prompt construction."""

import re

import numpy as np
import pytest

from tvlm.errors import ConfigError, DomainError
from tvlm.tal import (
    PROMPT_MAX_CHARS,
    PromptContext,
    build_prompt,
    compute_stats,
    default_domain_descriptions,
    load_domain_descriptions,
    stats_for_window,
)


def test_constant_series_is_flat():
    s = compute_stats([5.0, 5.0, 5.0, 5.0])
    assert (s.min, s.max, s.median, s.trend) == (5.0, 5.0, 5.0, "flat")


def test_ramp_slope_and_lower_middle_median():
    s = compute_stats([0.0, 1.0, 2.0, 3.0])
    assert s.slope == pytest.approx(1.0)
    assert s.trend == "upward"
    assert s.median == 1.0  # lower-middle rule for even length


def test_mirrored_ramp_is_downward():
    assert compute_stats([3.0, 2.0, 1.0, 0.0]).trend == "downward"


def test_empty_series_rejected():
    with pytest.raises(DomainError):
        compute_stats([])


def test_single_point_is_flat():
    s = compute_stats([2.5])
    assert s.trend == "flat" and s.slope == 0.0


def test_trend_sign_consistent_with_slope():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.standard_normal(16)
        s = compute_stats(x)
        tau = 1e-6 * (s.max - s.min + 1e-8)
        if s.trend == "upward":
            assert s.slope > tau
        elif s.trend == "downward":
            assert s.slope < -tau
        else:
            assert abs(s.slope) <= tau


def test_multivariate_stats_use_mean_series():
    window = np.stack([np.arange(8.0), -np.arange(8.0)], axis=1)
    s = stats_for_window(window)  # mean series is identically zero
    assert s.trend == "flat" and s.min == 0.0 and s.max == 0.0


# ---------------------------------------------------------------- prompts


def ctx(**kw):
    base = dict(dataset_name="ETTh1", input_len=512, horizon=96, periodicity=24)
    base.update(kw)
    return PromptContext(**base)


def test_flat_zero_prompt_contains_forced_fields():
    prompt = build_prompt(compute_stats(np.zeros(16)), ctx())
    assert "range [0.000, 0.000]" in prompt
    assert "flat" in prompt
    assert "512" in prompt and "96" in prompt
    assert "cycle of 24 steps" in prompt


def test_prompt_is_deterministic():
    stats = compute_stats(np.sin(np.arange(32.0)))
    a = build_prompt(stats, ctx())
    b = build_prompt(stats, ctx())
    assert a == b


def test_ramp_prompt_says_upward():
    assert "upward" in build_prompt(compute_stats(np.arange(20.0)), ctx())


def test_prompt_numbers_round_trip():
    rng = np.random.default_rng(1)
    stats = compute_stats(rng.standard_normal(64) * 3)
    prompt = build_prompt(stats, ctx())
    floats = [float(m) for m in re.findall(r"-?\d+\.\d{3}", prompt)]
    assert floats[0] == pytest.approx(stats.min, abs=5e-4)
    assert floats[1] == pytest.approx(stats.max, abs=5e-4)
    assert floats[2] == pytest.approx(stats.median, abs=5e-4)
    ints = [int(m) for m in re.findall(r"\b\d+\b", prompt.split("range")[0])]
    assert 512 in ints and 96 in ints and 24 in ints


def test_prompt_respects_length_cap():
    stats = compute_stats(np.arange(10.0))
    long_desc = "electricity " * 60
    prompt = build_prompt(stats, ctx(domain_description=long_desc))
    assert len(prompt) <= PROMPT_MAX_CHARS
    assert not prompt.endswith(" ")  # truncated at a word boundary


def test_domain_description_is_included():
    prompt = build_prompt(compute_stats(np.zeros(4)),
                          ctx(domain_description="Hourly transformer data."))
    assert prompt.startswith("Hourly transformer data.")


def test_invalid_context_rejected():
    with pytest.raises(ConfigError):
        PromptContext(dataset_name="x", input_len=0, horizon=96, periodicity=24)


# ---------------------------------------------------------------- domain file


def test_default_domain_file_parses():
    table = default_domain_descriptions()
    assert "ETTh1" in table and "Weather" in table
    assert table["Traffic"].startswith("Hourly road occupancy")


def test_domain_file_loader(tmp_path):
    f = tmp_path / "domains.txt"
    f.write_text("# comment\nfoo: A toy dataset.\nbar:  Another one. \n")
    table = load_domain_descriptions(f)
    assert table == {"foo": "A toy dataset.", "bar": "Another one."}
    bad = tmp_path / "bad.txt"
    bad.write_text("no separator here\n")
    with pytest.raises(ConfigError):
        load_domain_descriptions(bad)
