"""Acceptance criteria, one test per criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS/FAIL
line per criterion.
"""

import cmath
import time
from contextlib import contextmanager

import numpy as np

from toys import sine_windows, toy_config, toy_model, write_sine_csv
from tvlm.cli import main
from tvlm.config import RunConfig
from tvlm.data import few_shot_subset, window
from tvlm.fft import fft_real
from tvlm.fusion import FusionModule
from tvlm.gradcheck import grad_check, grad_check_params
from tvlm.metrics import (
    metric_mae,
    metric_mase,
    metric_mse,
    metric_owa,
    metric_smape,
    naive2_forecast,
)
from tvlm.model import Forecaster
from tvlm.predictor import (
    AdamState,
    PredictionHead,
    adam_step,
    evaluate_mse,
    fit,
    history_to_csv,
    mse_loss,
    predict,
)
from tvlm.ral import MemoryBank, PatchConfig, RetrievalAugmentedLearner
from tvlm.tensor import (
    Tensor,
    backward,
    bilinear_resize,
    conv1d,
    conv2d,
    gelu,
    layer_norm,
    matmul,
    sigmoid,
    softmax,
    zero_grad,
)
from tvlm.val import ImageConfig, VisionAugmentedLearner


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"\n[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"\n[ACCEPTANCE] {name}: PASS")


# ---------------------------------------------------------------- 1. gradients


def test_gradient_suite():
    with criterion("gradient suite (kernels < 1e-5, composites < 1e-3, 20 seeds, < 60 s)"):
        start = time.monotonic()
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            # kernels
            m, k, n = (int(v) for v in rng.integers(1, 5, size=3))
            a, b = Tensor(rng.standard_normal((m, k))), Tensor(rng.standard_normal((k, n)))
            assert grad_check(matmul, [a, b], seed=seed) < 1e-5
            v = Tensor(rng.standard_normal(int(rng.integers(2, 7))))
            assert grad_check(lambda t: softmax(t, axis=-1), [v], seed=seed) < 1e-5
            assert grad_check(sigmoid, [v], seed=seed) < 1e-5
            assert grad_check(gelu, [v], seed=seed) < 1e-5
            d = int(rng.integers(2, 6))
            x = Tensor(rng.standard_normal((2, d)))
            gain, bias = Tensor(rng.standard_normal(d)), Tensor(rng.standard_normal(d))
            assert grad_check(layer_norm, [x, gain, bias], seed=seed) < 1e-5
            xi = Tensor(rng.standard_normal((1, 2, 5, 5)))
            ki = Tensor(rng.standard_normal((2, 2, 3, 3)))
            assert grad_check(lambda p, q: conv2d(p, q, padding=1), [xi, ki], seed=seed) < 1e-5
            x1 = Tensor(rng.standard_normal((1, 2, 7)))
            k1 = Tensor(rng.standard_normal((2, 2, 3)))
            assert grad_check(lambda p, q: conv1d(p, q, padding=1), [x1, k1], seed=seed) < 1e-5
            xb = Tensor(rng.standard_normal((1, 1, 3, 4)))
            assert grad_check(lambda t: bilinear_resize(t, 5, 6), [xb], seed=seed) < 1e-5

            # composed modules
            ral_cfg = PatchConfig(patch_len=8, stride=4, padding=0, d_model=8,
                                  n_heads=2, e_layers=1, dropout=0.0, memory_capacity=8)
            ral = RetrievalAugmentedLearner(np.random.default_rng(seed), ral_cfg,
                                            max_patches=8)
            ral.bank.write_batch(rng.standard_normal((3, 8)))
            x_ral = rng.standard_normal((2, 32, 1))
            err = grad_check_params(lambda: ral.forward(x_ral),
                                    [t for _, t in ral.named_params()],
                                    max_coords=2, seed=seed)
            assert err < 1e-3

            val_cfg = ImageConfig(image_size=8, periodicity=4, hidden_dim=4,
                                  out_channels=3)
            val = VisionAugmentedLearner(np.random.default_rng(seed), val_cfg)
            val.freeze_stats = True
            x_val = rng.standard_normal((1, 12, 2))
            err = grad_check_params(lambda: val.forward(x_val).pixels,
                                    [t for _, t in val.named_params()],
                                    max_coords=2, seed=seed)
            assert err < 1e-3

            fusion = FusionModule(np.random.default_rng(seed), d_model=8,
                                  d_hidden=6, n_heads=2, d_fusion=8)
            f_tem = Tensor(rng.standard_normal((2, 3, 8)))
            f_mm = Tensor(rng.standard_normal((2, 4, 6)))
            err = grad_check_params(lambda: fusion.forward(f_tem, f_mm),
                                    [t for _, t in fusion.named_params()],
                                    max_coords=2, seed=seed)
            assert err < 1e-3

            head = PredictionHead(np.random.default_rng(seed), n_patches=3,
                                  d_model=4, horizon=2)
            feats = Tensor(rng.standard_normal((2, 3, 4)))
            err = grad_check_params(lambda: predict(feats, head, 2, 1),
                                    [t for _, t in head.params()],
                                    max_coords=2, seed=seed)
            assert err < 1e-3
        elapsed = time.monotonic() - start
        assert elapsed < 60.0, f"gradient suite took {elapsed:.1f}s"


# ---------------------------------------------------------------- 2. FFT


def _naive_dft(x):
    n = len(x)
    return np.array([sum(x[t] * cmath.exp(-2j * cmath.pi * k * t / n)
                         for t in range(n)) for k in range(n)])


def test_fft_oracle():
    with criterion("FFT oracle (lengths 1..64, 128, 512 within 1e-9)"):
        rng = np.random.default_rng(2)
        for n in list(range(1, 65)) + [128, 512]:
            x = rng.standard_normal(n)
            re, im = fft_real(Tensor(x))
            ref = _naive_dft(x)
            assert np.max(np.abs(re.data - ref.real)) < 1e-9
            assert np.max(np.abs(im.data - ref.imag)) < 1e-9


# ---------------------------------------------------------------- 3. shapes


def test_shape_contract_table_defaults():
    with criterion("shape contract (defaults: forecast 2x96x7, embedding 2x156x768, 11 text tokens)"):
        cfg = RunConfig()  # every Table default
        model = Forecaster(
            np.random.default_rng(0),
            seq_len=cfg.seq_len, horizon=cfg.pred_len, n_vars=7,
            patch_cfg=cfg.patch_config(), image_cfg=cfg.image_config(),
            encoder_desc=cfg.encoder_descriptor(), d_fusion=cfg.d_fusion,
            norm_const=cfg.norm_const)
        x = np.random.default_rng(1).standard_normal((2, 512, 7))
        details = model.forward_details(x)
        assert details["forecast"].shape == (2, 96, 7)
        emb = details["embedding"]
        assert emb.tokens.shape == (2, 156, 768)
        assert emb.n_text == 11
        assert emb.n_text + emb.n_visual == 156


# ---------------------------------------------------------------- 4. memory


def test_memory_bank_oracle():
    with criterion("memory bank equals naive FIFO over 1000 random sequences, capacities 1..16"):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            cap = int(rng.integers(1, 17))
            bank = MemoryBank(cap, 2)
            fifo = []
            for _ in range(int(rng.integers(0, 3 * cap + 4))):
                batch = rng.standard_normal((int(rng.integers(1, 4)), 2))
                bank.write_batch(batch)
                fifo.extend(batch)
                fifo = fifo[-cap:]
            assert bank.filled == len(fifo)
            assert {tuple(r) for r in bank.live()} == {tuple(r) for r in fifo}


# ---------------------------------------------------------------- 5. learning


def _learning_config():
    return toy_config(
        seq_len=96, pred_len=16,
        patch_len=16, stride=8, padding=8,
        d_model=32, n_heads=4, e_layers=2, d_fusion=64,
        dropout=0.0, top_k=4, memory_capacity=128,
        image_size=32, image_hidden=8, periodicity=24,
        vlm_fused_len=24, vlm_hidden_dim=64, n_text=5,
        batch_size=32, lr=1e-3, seed=0,
    )


def _run_learning(n_steps=200):
    cfg = _learning_config()
    model = toy_model(cfg)
    xs, ys = sine_windows(300, cfg.seq_len, cfg.pred_len, seed=42,
                          noise=0.05, period=24.0)
    train = (xs[:240], ys[:240])
    test = (xs[240:], ys[240:])

    init_mse = evaluate_mse(model, train, cfg.batch_size)
    named = list(model.trainable_params())
    tensors = [t for _, t in named]
    adam = AdamState()
    rng = np.random.default_rng(cfg.seed)
    steps = 0
    while steps < n_steps:
        order = rng.permutation(len(train[0]))
        for start in range(0, len(order), cfg.batch_size):
            if steps >= n_steps:
                break
            idx = order[start:start + cfg.batch_size]
            loss = mse_loss(model.forward_batch(train[0][idx], training=True, rng=rng),
                            train[1][idx])
            zero_grad(tensors)
            backward(loss)
            grads = {n: (t.grad if t.grad is not None else np.zeros_like(t.data))
                     for n, t in named}
            adam_step(named, grads, adam, cfg.lr)
            steps += 1
    final_mse = evaluate_mse(model, train, cfg.batch_size)
    test_mse = evaluate_mse(model, test, cfg.batch_size)
    param_bytes = b"".join(t.data.tobytes() for _, t in model.trainable_params())
    return init_mse, final_mse, test_mse, param_bytes


def test_learning_check():
    with criterion("learning check (200 Adam steps: train MSE halves, test MSE < 0.05, "
                   "bit-identical reruns, < 5 min)"):
        start = time.monotonic()
        init_mse, final_mse, test_mse, params1 = _run_learning()
        assert final_mse <= 0.5 * init_mse, (init_mse, final_mse)
        assert test_mse < 0.05, test_mse
        init2, final2, test2, params2 = _run_learning()
        assert (init_mse, final_mse, test_mse) == (init2, final2, test2)
        assert params1 == params2
        elapsed = time.monotonic() - start
        assert elapsed < 300.0, f"learning check took {elapsed:.1f}s"


# ---------------------------------------------------------------- 6. metrics


def test_metric_oracle():
    with criterion("metric oracle (hand fixtures to 1e-12)"):
        assert abs(metric_smape(np.array([3.0]), np.array([1.0])) - 100.0) < 1e-12
        assert abs(metric_owa(10.0, 2.0, 10.0, 2.0) - 1.0) < 1e-12
        insample = np.array([0.0, 1.0, 2.0, 3.0])
        assert metric_mase(np.array([5.0]), np.array([5.0]), insample, s=1) == 0.0
        p = np.zeros((2, 3)) + 2.0
        assert abs(metric_mse(p, np.zeros((2, 3))) - 4.0) < 1e-12
        assert abs(metric_mae(p, np.zeros((2, 3))) - 2.0) < 1e-12
        assert abs(metric_mase(np.array([9.0]), np.array([5.0]), insample, 1) - 4.0) < 1e-12
        assert abs(metric_owa(10.0, 2.0, 20.0, 4.0) - 0.5) < 1e-12
        assert metric_smape(np.array([0.0]), np.array([0.0])) == 0.0
        np.testing.assert_array_equal(
            naive2_forecast(np.array([1.0, 2.0, 7.0]), 1, 3), [7.0, 7.0, 7.0])


# ---------------------------------------------------------------- 7. few-shot


def test_few_shot_plumbing():
    with criterion("few-shot plumbing (ceil(f*count) prefix, deterministic training)"):
        samples = window(np.zeros((219, 1)), 16, 4)
        assert len(samples) == 200
        for fraction, expect in ((0.05, 10), (0.10, 20)):
            subset = few_shot_subset(samples, fraction)
            assert len(subset) == int(np.ceil(fraction * 200)) == expect
            assert [s.start for s in subset] == list(range(expect))

        cfg = toy_config(epochs=2)
        xs, ys = sine_windows(40, cfg.seq_len, cfg.pred_len, seed=5)
        keep = int(np.ceil(0.10 * 30))
        train = (xs[:30][:keep], ys[:30][:keep])
        val = (xs[30:], ys[30:])
        histories = []
        for _ in range(2):
            model = toy_model(cfg)
            history, _ = fit(model, train, val, cfg.train_config())
            histories.append(history_to_csv(history))
        assert histories[0] == histories[1]


# ---------------------------------------------------------------- 8. rendering


def test_val_determinism_and_degenerate_window(tmp_path):
    with criterion("VAL determinism (byte-identical renders; constant window -> zero image)"):
        data = tmp_path / "sine.csv"
        write_sine_csv(data, rows=120, n_vars=1, period=8.0)
        ini = tmp_path / "run.ini"
        ini.write_text(
            "[data]\npath = %s\nperiodicity = 4\n\n"
            "[model]\nseq_len = 16\npred_len = 4\npatch_len = 8\nstride = 4\n"
            "padding = 0\nd_model = 8\nd_fusion = 8\nn_heads = 2\ne_layers = 1\n"
            "dropout = 0.0\nimage_size = 8\nimage_hidden = 4\n\n"
            "[encoder]\nvlm_fused_len = 12\nvlm_hidden_dim = 16\nn_text = 3\n" % data)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["render", "--config", str(ini), "--out", str(out1), "--window", "1"]) == 0
        assert main(["render", "--config", str(ini), "--out", str(out2), "--window", "1"]) == 0
        assert (out1 / "window1.ppm").read_bytes() == (out2 / "window1.ppm").read_bytes()
        assert (out1 / "window1_prompt.txt").read_bytes() == (out2 / "window1_prompt.txt").read_bytes()

        const = tmp_path / "const.csv"
        const.write_text("date,v1\n" + "\n".join(
            f"2020-{i:03d},3.25" for i in range(120)) + "\n")
        ini2 = tmp_path / "const.ini"
        ini2.write_text(ini.read_text().replace(str(data), str(const)))
        out3 = tmp_path / "r3"
        assert main(["render", "--config", str(ini2), "--out", str(out3), "--window", "0"]) == 0
        blob = (out3 / "window0.ppm").read_bytes()
        head = b"P6\n8 8\n255\n"
        assert blob[:len(head)] == head
        assert blob[len(head):] == bytes(8 * 8 * 3)


# ---------------------------------------------------------------- 9. frozen


def test_frozen_encoder_contract():
    with criterion("frozen contract (encoder checksum unchanged across fit)"):
        cfg = toy_config(epochs=2)
        model = toy_model(cfg)
        before = model.encoder_checksum()
        xs, ys = sine_windows(12, cfg.seq_len, cfg.pred_len, seed=6)
        fit(model, (xs[:8], ys[:8]), (xs[8:], ys[8:]), cfg.train_config())
        assert model.encoder_checksum() == before
