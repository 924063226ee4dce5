"""End-to-end forecaster.

Per forward pass: instance-normalize the window batch, run the
retrieval-augmented temporal path (per variable), render the window
into an image and a prompt, push both through the frozen encoder,
cross-modally fuse, and map to the horizon. Forecasts come back in
original units. Only RAL/VAL/fusion/head parameters are trainable; the
encoder is frozen by construction.
"""

from __future__ import annotations

import numpy as np

from .encoder import EncoderDescriptor, build_encoder
from .fusion import FusionModule
from .predictor import PredictionHead, denormalize, instance_normalize, predict
from .ral import PatchConfig, RetrievalAugmentedLearner
from .tal import PromptContext, build_prompt, stats_for_window
from .tensor import Tensor, repeat0
from .val import ImageConfig, VisionAugmentedLearner


class Forecaster:
    def __init__(self, rng: np.random.Generator, *, seq_len: int, horizon: int,
                 n_vars: int, patch_cfg: PatchConfig, image_cfg: ImageConfig,
                 encoder_desc: EncoderDescriptor, d_fusion: int = 256,
                 norm_const: float = 0.4, dataset_name: str = "series",
                 domain_description: str = "", dtype=np.float64):
        self.seq_len = seq_len
        self.horizon = horizon
        self.n_vars = n_vars
        self.norm_const = norm_const
        self.patch_cfg = patch_cfg
        self.image_cfg = image_cfg
        self.encoder_desc = encoder_desc
        self.prompt_ctx = PromptContext(
            dataset_name=dataset_name, input_len=seq_len, horizon=horizon,
            periodicity=image_cfg.periodicity, domain_description=domain_description)
        n_patches = patch_cfg.num_patches(seq_len)
        self.ral = RetrievalAugmentedLearner(rng, patch_cfg, max_patches=n_patches,
                                             dtype=dtype)
        self.val = VisionAugmentedLearner(rng, image_cfg, dtype=dtype)
        self.encoder = build_encoder(encoder_desc, channels=image_cfg.out_channels,
                                     image_size=image_cfg.image_size)
        self.fusion = FusionModule(rng, patch_cfg.d_model, encoder_desc.hidden_dim,
                                   patch_cfg.n_heads, d_fusion, dtype=dtype)
        self.head = PredictionHead(rng, n_patches, patch_cfg.d_model, horizon,
                                   dtype=dtype)

    # -- forward --------------------------------------------------------

    def prompts_for(self, x: np.ndarray):
        return [build_prompt(stats_for_window(window), self.prompt_ctx)
                for window in x]

    def forward_details(self, x: np.ndarray, training: bool = False, rng=None) -> dict:
        """Full pass returning intermediates for inspection and tests."""
        x = np.asarray(x, dtype=np.float64)
        drop_p = self.patch_cfg.dropout if training else 0.0
        x_norm, state = instance_normalize(x, self.norm_const)
        f_tem = self.ral.forward(x_norm, training=training, rng=rng)
        image = self.val.forward(x_norm)
        prompts = self.prompts_for(x)
        embedding = self.encoder.encode(image, prompts)
        f_mm = repeat0(embedding.tokens, self.n_vars)
        f_fused = self.fusion.forward(f_tem, f_mm, rng=rng, drop_p=drop_p)
        pred_norm = predict(f_fused, self.head, self.horizon, self.n_vars)
        forecast = denormalize(pred_norm, state)
        return {
            "forecast": forecast,
            "embedding": embedding,
            "image": image,
            "prompts": prompts,
            "temporal": f_tem,
            "norm_state": state,
        }

    def forward_batch(self, x: np.ndarray, training: bool = False, rng=None) -> Tensor:
        return self.forward_details(x, training=training, rng=rng)["forecast"]

    # -- parameters and state --------------------------------------------

    def trainable_params(self):
        yield from self.ral.named_params("ral")
        yield from self.val.named_params("val")
        yield from self.fusion.named_params("fusion")
        yield from self.head.params("head")

    def encoder_checksum(self) -> str:
        return self.encoder.checksum()

    def state_dict(self) -> dict:
        state = {name: t.data.copy() for name, t in self.trainable_params()}
        bank = self.ral.bank
        state["memory.entries"] = bank.entries.copy()
        state["memory.cursor"] = np.array([bank.write_cursor], dtype=np.int64)
        state["memory.filled"] = np.array([bank.filled], dtype=np.int64)
        return state

    def load_state_dict(self, state: dict) -> None:
        for name, t in self.trainable_params():
            t.data[...] = state[name]
        bank = self.ral.bank
        bank.entries[...] = state["memory.entries"]
        bank.write_cursor = int(state["memory.cursor"][0])
        bank.filled = int(state["memory.filled"][0])
