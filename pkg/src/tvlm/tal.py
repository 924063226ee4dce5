"""Text-augmented learner: window statistics into structured prompts.

Prompts are a pure deterministic function of the statistics and the
dataset context; multivariate windows are summarized through the mean
series across variables.

Canonical template (v1):
    "<domain description> The <name> window spans <L> steps with a
     forecast horizon of <H> steps and a seasonal cycle of <P> steps.
     Values lie in range [<min>, <max>] with median <med> and a
     <trend> trend."
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError

PROMPT_MAX_CHARS = 320
_TREND_EPS = 1e-8


@dataclass
class WindowStats:
    min: float
    max: float
    median: float
    trend: str  # upward | downward | flat
    slope: float


@dataclass
class PromptContext:
    dataset_name: str
    input_len: int
    horizon: int
    periodicity: int
    domain_description: str = ""

    def __post_init__(self):
        if self.input_len < 1 or self.horizon < 1:
            raise ConfigError(
                f"input_len/horizon must be >= 1, got {self.input_len}/{self.horizon}")


def compute_stats(x) -> WindowStats:
    """Range, lower-middle median, OLS slope and thresholded trend."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    n = x.size
    if n == 0:
        raise DomainError("cannot compute statistics of an empty series")
    lo, hi = float(x.min()), float(x.max())
    median = float(np.sort(x)[(n - 1) // 2])
    if n == 1:
        slope = 0.0
    else:
        t = np.arange(n, dtype=np.float64)
        tc = t - t.mean()
        slope = float((tc * (x - x.mean())).sum() / (tc * tc).sum())
    tau = 1e-6 * (hi - lo + _TREND_EPS)
    trend = "upward" if slope > tau else "downward" if slope < -tau else "flat"
    return WindowStats(min=lo, max=hi, median=median, trend=trend, slope=slope)


def stats_for_window(window) -> WindowStats:
    """Stats of a (L, D) window via its cross-variable mean series."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        return compute_stats(window)
    return compute_stats(window.mean(axis=1))


def _truncate_at_word(text: str, limit: int) -> str:
    if len(text) <= limit:
        return text
    cut = text.rfind(" ", 0, limit + 1)
    return text[:limit] if cut <= 0 else text[:cut]


def build_prompt(stats: WindowStats, ctx: PromptContext,
                 max_chars: int = PROMPT_MAX_CHARS) -> str:
    parts = []
    if ctx.domain_description:
        parts.append(ctx.domain_description.strip())
    parts.append(
        f"The {ctx.dataset_name} window spans {ctx.input_len} steps with a "
        f"forecast horizon of {ctx.horizon} steps and a seasonal cycle of "
        f"{ctx.periodicity} steps."
    )
    article = "an" if stats.trend == "upward" else "a"
    parts.append(
        f"Values lie in range [{stats.min:.3f}, {stats.max:.3f}] with median "
        f"{stats.median:.3f} and {article} {stats.trend} trend."
    )
    return _truncate_at_word(" ".join(parts), max_chars)


def load_domain_descriptions(path) -> dict:
    """Parse `name: description` lines; '#' lines are comments."""
    table = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, _, desc = line.partition(":")
        if not desc:
            raise ConfigError(f"domain description line without ':': {raw!r}")
        table[name.strip()] = desc.strip()
    return table


def default_domain_descriptions() -> dict:
    return load_domain_descriptions(Path(__file__).with_name("domains.txt"))
