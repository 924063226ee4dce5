"""Frozen mock encoder plus gated cross-modal attention.

Run from the repo root:  python3 demos/05_cross_modal_fusion.py
"""

import numpy as np

from tvlm.encoder import EncoderDescriptor, MockEncoder
from tvlm.fusion import FusionModule
from tvlm.tensor import Tensor
from tvlm.val import ImageConfig, VisionAugmentedLearner

rng = np.random.default_rng(4)

# Render one window into an image, then into frozen multimodal tokens.
cfg = ImageConfig(image_size=64, periodicity=24, hidden_dim=16)
val = VisionAugmentedLearner(rng, cfg)
x = np.sin(2 * np.pi * np.arange(128) / 24)[None, :, None]
image = val.forward(x)

desc = EncoderDescriptor(kind="mock", seed=7)  # 156 tokens x 768, 11 text
encoder = MockEncoder(desc)
emb = encoder.encode(image, "hourly electricity, upward trend")
print(f"tokens {emb.tokens.shape}: {emb.n_text} text + {emb.n_visual} visual")
print(f"frozen checksum: {encoder.checksum()[:16]}...")

# Temporal features query the tokens; a sigmoid gate mixes the result.
d_model = 32
fusion = FusionModule(rng, d_model=d_model, d_hidden=desc.hidden_dim, n_heads=4)
f_tem = Tensor(rng.standard_normal((1, 12, d_model)))
fused = fusion.forward(f_tem, emb.tokens)
print(f"fused features: {fused.shape}")

# The gate keeps every coordinate between its two sources (convex mix).
from tvlm.fusion import cross_modal_attention, gated_fuse, project_shared
from tvlm.tensor import tmean

f_q, f_kv = project_shared(f_tem, emb.tokens, fusion.params)
f_attn = cross_modal_attention(f_q, f_kv, fusion.params)
pooled = tmean(f_kv, axis=1)
mixed = gated_fuse(f_q, pooled, f_attn, fusion.params)
lo = np.minimum(f_attn.data, pooled.data[:, None, :])
hi = np.maximum(f_attn.data, pooled.data[:, None, :])
inside = np.all(mixed.data >= lo - 1e-12) and np.all(mixed.data <= hi + 1e-12)
print(f"gated output stays between attention and pooled tokens: {inside}")
