"""Window statistics into deterministic text prompts.

Run from the repo root:  python3 demos/04_prompt_generation.py
"""

import numpy as np

from tvlm.tal import (
    PromptContext,
    build_prompt,
    compute_stats,
    default_domain_descriptions,
    stats_for_window,
)

rng = np.random.default_rng(3)

trending = np.linspace(0, 3, 96) + 0.1 * rng.standard_normal(96)
stats = compute_stats(trending)
print(f"min={stats.min:.3f} max={stats.max:.3f} median={stats.median:.3f} "
      f"slope={stats.slope:.4f} -> {stats.trend}")

domains = default_domain_descriptions()
ctx = PromptContext(dataset_name="ETTh1", input_len=96, horizon=24,
                    periodicity=24, domain_description=domains["ETTh1"])
print()
print(build_prompt(stats, ctx))

# Multivariate windows are summarized through the cross-variable mean.
window = np.stack([trending, -trending, trending * 0.5], axis=1)
print()
print(build_prompt(stats_for_window(window), ctx))
