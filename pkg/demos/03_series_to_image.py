"""Series-to-image encoding: frequency + phase channels, convs, PPM export.

Run from the repo root:  python3 demos/03_series_to_image.py
Writes demo_window.ppm next to this script.
"""

from pathlib import Path

import numpy as np

from tvlm.val import (
    ImageConfig,
    VisionAugmentedLearner,
    assemble_features,
    frequency_encode,
    periodicity_encode,
    render_image,
)

rng = np.random.default_rng(2)
cfg = ImageConfig(image_size=64, periodicity=24, hidden_dim=16, out_channels=3)

# A daily-cycle signal with a mid-window level shift.
t = np.arange(192)
series = np.sin(2 * np.pi * t / 24) + (t > 96) * 0.8
x = series[None, :, None]

freq = frequency_encode(x)
per = periodicity_encode(len(t), cfg.periodicity)
feats = assemble_features(x, freq, per)
print(f"feature stack: {feats.channels.shape} (raw, |DFT|, sin, cos)")
print(f"dominant frequency bin: {np.argmax(freq[0, 1:96, 0]) + 1} "
      f"(192 steps / 24-step cycle = 8 cycles)")

learner = VisionAugmentedLearner(rng, cfg)
image = learner.forward(x)
px = image.pixels.data
print(f"image: {px.shape}, range [{px.min():.1f}, {px.max():.1f}] of [0, 255]")

out = Path(__file__).with_name("demo_window.ppm")
render_image(image, out, metadata=True, periodicity=cfg.periodicity)
print(f"wrote {out} (+ .meta sidecar); any PPM viewer will open it")
