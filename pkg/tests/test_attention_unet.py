"""Attention gate traces, model assembly, training, and checkpoints."""

import numpy as np
import numpy.testing as npt
import pytest

from quanvseg.checkpoint import load_checkpoint, save_checkpoint
from quanvseg.datapipe import PatchItem, PatchSet
from quanvseg.exceptions import (
    ConfigError,
    DataError,
    FileFormatError,
    ShapeError,
    StateError,
)
from quanvseg.nn.gradcheck import gradcheck
from quanvseg.nn.metrics import overall_accuracy
from quanvseg.qsim.circuits import build_circuit, serialize_circuit
from quanvseg.quanvolution import QuanvConfig
from quanvseg.training import (
    LOG_HEADER,
    TrainConfig,
    evaluate,
    predict_masks,
    train,
)
from quanvseg.unet import (
    BASELINE_REFERENCE_CONFIG,
    QUANTUM_REFERENCE_CONFIG,
    UPSAMPLE_KINDS,
    AttentionUNetConfig,
    attention_gate_backward,
    attention_gate_forward,
    build_model,
    count_params,
    init_gate_params,
    parameter_shapes,
)


def zeroed_gate(c_g, c_x, width, seed=0):
    params, stats = init_gate_params(c_g, c_x, width, np.random.default_rng(seed))
    for key in ("wg.w", "wg.b", "wx.w", "wx.b", "wr.w", "wr.b"):
        params[key] = np.zeros_like(params[key])
    return params, stats


def toy_patches(n=4, size=16, seed=0):
    """Rectangle-on-background patches small enough to overfit quickly."""
    rng = np.random.default_rng(seed)
    items = []
    for i in range(n):
        mask = np.zeros((size, size))
        r, c = int(rng.integers(2, size - 8)), int(rng.integers(2, size - 8))
        mask[r : r + 6, c : c + 6] = 1.0
        image = 0.15 + 0.5 * mask + rng.normal(0.0, 0.02, (size, size))
        items.append(PatchItem(image=np.clip(image, 0.0, 1.0), mask=mask,
                               row=i, col=0))
    return PatchSet(items=tuple(items))


# ---------------------------------------------------------------------
# Attention gate


def test_gate_zero_weight_trace():
    # all projection weights zero, batch-norm at identity: the attention
    # map collapses to sigmoid(0) = 0.5 and the output vanishes exactly
    params, stats = zeroed_gate(3, 3, 4)
    g = np.random.default_rng(1).normal(size=(2, 3, 8, 8))
    x_i = np.random.default_rng(2).normal(size=(2, 3, 8, 8))
    out, _, cache = attention_gate_forward(g, x_i, params, stats)
    npt.assert_array_equal(cache["psi"], 0.0)
    npt.assert_array_equal(cache["psi_norm"], 0.0)
    npt.assert_array_equal(cache["alpha"], 0.5)
    npt.assert_array_equal(cache["rho"], 0.0)
    npt.assert_array_equal(out, 0.0)


def test_gate_unit_rho_passes_half_input():
    params, stats = zeroed_gate(2, 2, 1)
    params["wr.w"] = np.ones_like(params["wr.w"])
    x_i = np.random.default_rng(3).normal(size=(1, 2, 6, 6))
    g = np.random.default_rng(4).normal(size=(1, 2, 6, 6))
    out, _, cache = attention_gate_forward(g, x_i, params, stats)
    npt.assert_array_equal(cache["rho"], 0.5)
    npt.assert_array_equal(out, 0.5 * x_i)


def test_gate_alpha_is_bounded_and_psi_act_nonnegative():
    params, stats = init_gate_params(4, 4, 2, np.random.default_rng(5))
    g = np.random.default_rng(6).normal(size=(2, 4, 8, 8))
    x_i = np.random.default_rng(7).normal(size=(2, 4, 8, 8))
    _, _, cache = attention_gate_forward(g, x_i, params, stats, train=True)
    assert np.all(cache["alpha"] > 0.0) and np.all(cache["alpha"] < 1.0)
    assert np.all(cache["psi_act"] >= 0.0)


def test_gate_zero_upstream_gives_zero_grads():
    params, stats = init_gate_params(3, 3, 2, np.random.default_rng(8))
    g = np.random.default_rng(9).normal(size=(1, 3, 4, 4))
    x_i = np.random.default_rng(10).normal(size=(1, 3, 4, 4))
    out, _, cache = attention_gate_forward(g, x_i, params, stats, train=True)
    g_g, g_x, grads = attention_gate_backward(cache, np.zeros_like(out))
    npt.assert_array_equal(g_g, 0.0)
    npt.assert_array_equal(g_x, 0.0)
    for v in grads.values():
        npt.assert_array_equal(v, 0.0)


def test_gate_grad_x_contains_direct_product_term():
    # kill the projection path by driving psi negative (dead ReLU);
    # what is left of grad_x is exactly rho * upstream
    params, stats = zeroed_gate(2, 2, 3)
    params["wg.b"] = np.full(3, -1.0)
    params["wx.b"] = np.full(3, -1.0)
    params["wr.w"] = np.random.default_rng(11).normal(size=(1, 3, 1, 1))
    params["wr.b"] = np.array([0.25])
    g = np.random.default_rng(12).normal(size=(1, 2, 5, 5))
    x_i = np.random.default_rng(13).normal(size=(1, 2, 5, 5))
    out, _, cache = attention_gate_forward(g, x_i, params, stats)
    gy = np.random.default_rng(14).normal(size=out.shape)
    _, g_x, _ = attention_gate_backward(cache, gy)
    npt.assert_allclose(g_x, cache["rho"] * gy, rtol=1e-12)


def test_gate_rejects_spatial_mismatch():
    params, stats = init_gate_params(2, 2, 2, np.random.default_rng(15))
    with pytest.raises(ShapeError):
        attention_gate_forward(np.zeros((1, 2, 4, 4)), np.zeros((1, 2, 8, 8)),
                               params, stats)


def test_gate_backward_rejects_foreign_cache():
    with pytest.raises(StateError):
        attention_gate_backward({"psi": np.zeros(1)}, np.zeros((1, 1, 2, 2)))
    with pytest.raises(StateError):
        attention_gate_backward("nonsense", np.zeros((1, 1, 2, 2)))


@pytest.mark.parametrize("seed", range(5))
def test_gate_gradcheck_randomized_shapes(seed):
    rng = np.random.default_rng(seed)
    c = int(rng.integers(2, 9))
    s = int(rng.integers(4, 13))
    width = int(rng.integers(1, 5))
    params, stats = init_gate_params(c, c, width, rng, dtype=np.float64)
    g = rng.normal(size=(2, c, s, s))
    x_i = rng.normal(size=(2, c, s, s))
    weight = rng.normal(size=(2, c, s, s))
    arrays = [g, x_i] + [params[k] for k in sorted(params)]
    state = {}

    def loss():
        out, _, cache = attention_gate_forward(g, x_i, params, stats, train=True)
        state["cache"] = cache
        return float((out * weight).sum())

    def grads():
        loss()
        g_g, g_x, pg = attention_gate_backward(state["cache"], weight)
        return [g_g, g_x] + [pg[k] for k in sorted(pg)]

    report = gradcheck(f"gate-random-{seed}", loss, grads, arrays, 1e-4,
                       seed=seed)
    assert report.passed, str(report)


# ---------------------------------------------------------------------
# Configuration and parameter accounting


def test_config_validation():
    with pytest.raises(ConfigError):
        AttentionUNetConfig(depth=1, widths=(4,))
    with pytest.raises(ConfigError):
        AttentionUNetConfig(depth=3, widths=(4, 8))
    with pytest.raises(ConfigError):
        AttentionUNetConfig(depth=2, widths=(4, 0))
    with pytest.raises(ConfigError):
        AttentionUNetConfig(depth=2, widths=(4, 8), in_channels=0)
    with pytest.raises(ConfigError):
        AttentionUNetConfig(depth=2, widths=(4, 8), upsample="bilinear")
    with pytest.raises(ConfigError):
        AttentionUNetConfig(depth=3, widths=(4, 8, 16), gate_widths=(2,))
    with pytest.raises(ConfigError):
        AttentionUNetConfig(depth=2, widths=(4, 8), gate_widths=(0,))


def test_default_gate_widths_are_half_skip_widths():
    cfg = AttentionUNetConfig(depth=3, widths=(8, 16, 32))
    assert cfg.resolved_gate_widths() == (4, 8)
    narrow = AttentionUNetConfig(depth=2, widths=(1, 2))
    assert narrow.resolved_gate_widths() == (1,)
    explicit = AttentionUNetConfig(depth=3, widths=(8, 16, 32), gate_widths=(3, 5))
    assert explicit.resolved_gate_widths() == (3, 5)


def enumerated_param_total(cfg):
    return sum(int(np.prod(shape)) for kind, name, shape in parameter_shapes(cfg)
               if kind == "param")


@pytest.mark.parametrize("cfg", [
    AttentionUNetConfig(depth=2, widths=(4, 8)),
    AttentionUNetConfig(depth=2, widths=(4, 8), upsample="nearest"),
    AttentionUNetConfig(depth=3, widths=(8, 16, 32)),
    AttentionUNetConfig(depth=3, widths=(4, 8, 16), in_channels=9),
    AttentionUNetConfig(depth=3, widths=(8, 16, 32), gate_widths=(3, 7)),
    AttentionUNetConfig(depth=4, widths=(4, 8, 16, 32), upsample="nearest"),
])
def test_count_params_matches_enumeration_and_model(cfg):
    expected = enumerated_param_total(cfg)
    assert count_params(cfg) == expected
    assert build_model(cfg, seed=0).n_params() == expected


def test_depth2_count_matches_hand_sum():
    # depth=2, widths=[4,8], in=1, transposed upsampling, gate width 2:
    #   enc0  : 1*4*9+4 + 8 + 4*4*9+4 + 8            = 204
    #   bottl : 4*8*9+8 + 16 + 8*8*9+8 + 16          = 912
    #   up    : 8*4*4+4                               = 132
    #   gate  : (2*4+2)*2 + 4 + 2+1                   = 27
    #   dec0  : 8*4*9+4 + 8 + 4*4*9+4 + 8            = 456
    #   head  : 4+1                                   = 5
    cfg = AttentionUNetConfig(depth=2, widths=(4, 8))
    assert count_params(cfg) == 204 + 912 + 132 + 27 + 456 + 5


def test_reference_configs_hit_target_budgets():
    baseline = count_params(BASELINE_REFERENCE_CONFIG)
    quantum = count_params(QUANTUM_REFERENCE_CONFIG)
    assert baseline == enumerated_param_total(BASELINE_REFERENCE_CONFIG)
    assert quantum == enumerated_param_total(QUANTUM_REFERENCE_CONFIG)
    assert baseline == 34_876_453
    assert abs(baseline - 34.8e6) / 34.8e6 <= 0.05
    assert quantum / baseline <= 0.07


def test_build_model_is_seeded():
    cfg = AttentionUNetConfig(depth=2, widths=(4, 8))
    a = build_model(cfg, seed=7)
    b = build_model(cfg, seed=7)
    c = build_model(cfg, seed=8)
    for k in a.params:
        npt.assert_array_equal(a.params[k], b.params[k])
    assert any(not np.array_equal(a.params[k], c.params[k]) for k in a.params)


def test_parameter_shapes_align_with_built_model():
    cfg = AttentionUNetConfig(depth=3, widths=(4, 8, 16), upsample="nearest")
    model = build_model(cfg)
    declared = {name: (kind, shape) for kind, name, shape in parameter_shapes(cfg)}
    actual = {name: ("param", p.shape) for name, p in model.params.items()}
    actual.update({name: ("stat", s.shape) for name, s in model.stats.items()})
    assert declared == actual


# ---------------------------------------------------------------------
# Forward contracts


@pytest.mark.parametrize("kind", UPSAMPLE_KINDS)
def test_forward_shapes_and_range(kind):
    cfg = AttentionUNetConfig(depth=3, widths=(4, 8, 16), upsample=kind)
    model = build_model(cfg, seed=0)
    x = np.random.default_rng(0).uniform(size=(1, 1, 64, 64))
    out, caches = model.forward(x)
    assert out.shape == (1, 1, 64, 64)
    assert np.all(out > 0.0) and np.all(out < 1.0)
    assert {"enc0", "enc1", "bottleneck", "dec0", "dec1", "head", "out"} \
        <= caches.keys()


def test_forward_accepts_nine_channel_input():
    cfg = AttentionUNetConfig(depth=2, widths=(4, 8), in_channels=9)
    model = build_model(cfg, seed=1)
    out, _ = model.forward(np.random.default_rng(1).uniform(size=(2, 9, 16, 16)))
    assert out.shape == (2, 1, 16, 16)


def test_forward_rejects_bad_inputs():
    model = build_model(AttentionUNetConfig(depth=3, widths=(4, 8, 16)))
    with pytest.raises(ShapeError):
        model.forward(np.zeros((1, 2, 16, 16)))  # wrong channel count
    with pytest.raises(ShapeError):
        model.forward(np.zeros((1, 1, 18, 18)))  # not a multiple of 4
    with pytest.raises(ShapeError):
        model.forward(np.zeros((1, 16, 16)))


def test_forward_eval_mode_ignores_batch_composition():
    cfg = AttentionUNetConfig(depth=2, widths=(4, 8))
    model = build_model(cfg, seed=2)
    rng = np.random.default_rng(3)
    a = rng.uniform(size=(1, 1, 16, 16))
    b = rng.uniform(size=(1, 1, 16, 16))
    out_joint, _ = model.forward(np.concatenate([a, b]))
    out_a, _ = model.forward(a)
    npt.assert_allclose(out_joint[:1], out_a, rtol=1e-5, atol=1e-7)


# ---------------------------------------------------------------------
# Training and evaluation


def test_train_zero_lr_keeps_params_and_logs():
    patches = toy_patches()
    model = build_model(AttentionUNetConfig(depth=2, widths=(4, 8)), seed=0)
    before = {k: v.copy() for k, v in model.params.items()}
    _, lines = train(model, patches, TrainConfig(lr=0.0, epochs=1, batch_size=2))
    assert lines[0] == LOG_HEADER
    assert len(lines) == 2 and lines[1].startswith("1\t")
    for k, v in model.params.items():
        npt.assert_array_equal(v, before[k])


def test_train_is_deterministic():
    def run():
        model = build_model(AttentionUNetConfig(depth=2, widths=(4, 8)), seed=4)
        _, lines = train(model, toy_patches(), TrainConfig(lr=1e-3, epochs=3,
                                                           batch_size=2), seed=11)
        return model, lines

    m1, log1 = run()
    m2, log2 = run()
    assert log1 == log2
    for k in m1.params:
        npt.assert_array_equal(m1.params[k], m2.params[k])


def test_train_overfits_four_patches():
    patches = toy_patches(n=4)
    model = build_model(AttentionUNetConfig(depth=2, widths=(4, 8)), seed=0)
    _, lines = train(model, patches, TrainConfig(lr=1e-2, epochs=200,
                                                 batch_size=4), seed=0)
    final_oa = float(lines[-1].split("\t")[2])
    assert final_oa >= 0.99


def test_train_rejects_empty_split():
    model = build_model(AttentionUNetConfig(depth=2, widths=(4, 8)))
    with pytest.raises(DataError):
        train(model, PatchSet(), TrainConfig(epochs=1))
    with pytest.raises(DataError):
        evaluate(model, PatchSet())


def test_train_rejects_channel_mismatch():
    model = build_model(AttentionUNetConfig(depth=2, widths=(4, 8), in_channels=9))
    with pytest.raises(ShapeError):
        train(model, toy_patches(), TrainConfig(epochs=1))


def forced_bias_model(bias):
    model = build_model(AttentionUNetConfig(depth=2, widths=(4, 8)), seed=5)
    model.params["head.w"][...] = 0.0
    model.params["head.b"][...] = bias
    return model


def test_evaluate_forced_negative_model_scores_background_fraction():
    patches = toy_patches()
    result = evaluate(forced_bias_model(-50.0), patches)
    background = 1.0 - float(patches.masks().mean())
    assert result.oa == pytest.approx(background)
    assert result.iou == 0.0


def test_evaluate_micro_average_equals_concatenated_pixels():
    patches = toy_patches(n=6, seed=3)
    model = build_model(AttentionUNetConfig(depth=2, widths=(4, 8)), seed=6)
    train(model, patches, TrainConfig(lr=1e-3, epochs=2, batch_size=3))
    result = evaluate(model, patches)
    preds = predict_masks(model, patches)
    assert result.oa == pytest.approx(overall_accuracy(preds, patches.masks()))
    assert len(result.rows) == 6
    assert [r.index for r in result.rows] == list(range(6))


def test_evaluate_rows_bound_the_aggregate():
    patches = toy_patches(n=5, seed=9)
    result = evaluate(forced_bias_model(50.0), patches)
    lo = min(r.oa for r in result.rows)
    hi = max(r.oa for r in result.rows)
    assert lo <= result.oa <= hi


# ---------------------------------------------------------------------
# Checkpoints


@pytest.mark.parametrize("kind", UPSAMPLE_KINDS)
def test_checkpoint_round_trip(tmp_path, kind):
    cfg = AttentionUNetConfig(depth=2, widths=(4, 8), upsample=kind)
    model = build_model(cfg, seed=12)
    train(model, toy_patches(), TrainConfig(lr=1e-3, epochs=1, batch_size=2))
    prefix = tmp_path / "ckpt"
    save_checkpoint(prefix, model)
    loaded, extras = load_checkpoint(prefix)
    assert extras == {}
    # the manifest stores gate widths explicitly, so compare resolved values
    assert loaded.config.in_channels == cfg.in_channels
    assert loaded.config.depth == cfg.depth
    assert loaded.config.widths == cfg.widths
    assert loaded.config.upsample == cfg.upsample
    assert loaded.config.resolved_gate_widths() == cfg.resolved_gate_widths()
    assert loaded.params.keys() == model.params.keys()
    for k in model.params:
        npt.assert_array_equal(loaded.params[k], model.params[k])
    for k in model.stats:
        npt.assert_array_equal(loaded.stats[k], model.stats[k])
    x = np.random.default_rng(13).uniform(size=(1, 1, 16, 16))
    npt.assert_array_equal(loaded.forward(x)[0], model.forward(x)[0])


def test_checkpoint_carries_quanvolution_settings(tmp_path):
    spec = build_circuit("basic_entangled", 4, 1, seed=2)
    qcfg = QuanvConfig(circuit=spec, kernel_size=2, stride=1,
                       padding="same-reflect", rescale=True)
    model = build_model(AttentionUNetConfig(depth=2, widths=(4, 8),
                                            in_channels=4), seed=14)
    prefix = tmp_path / "qckpt"
    save_checkpoint(prefix, model, quanv_config=qcfg,
                    circuit_text=serialize_circuit(spec))
    _, extras = load_checkpoint(prefix)
    assert extras["quanv.kernel"] == "2"
    assert extras["quanv.stride"] == "1"
    assert extras["quanv.padding"] == "same-reflect"
    assert extras["quanv.rescale"] == "1"
    assert extras["circuit"] == serialize_circuit(spec)
    assert (tmp_path / "qckpt.circuit").exists()


def test_checkpoint_quanv_requires_circuit(tmp_path):
    spec = build_circuit("basic_entangled", 4, 1, seed=2)
    qcfg = QuanvConfig(circuit=spec, kernel_size=2, stride=1,
                       padding="valid", rescale=True)
    model = build_model(AttentionUNetConfig(depth=2, widths=(4, 8),
                                            in_channels=4))
    with pytest.raises(ValueError):
        save_checkpoint(tmp_path / "bad", model, quanv_config=qcfg)


def test_checkpoint_rejects_bad_magic(tmp_path):
    model = build_model(AttentionUNetConfig(depth=2, widths=(4, 8)))
    prefix = tmp_path / "ckpt"
    save_checkpoint(prefix, model)
    manifest = (prefix.parent / "ckpt.manifest").read_text()
    (prefix.parent / "ckpt.manifest").write_text(
        manifest.replace("quanvseg-checkpoint 1", "something-else 9", 1)
    )
    with pytest.raises(FileFormatError):
        load_checkpoint(prefix)


def test_checkpoint_rejects_missing_tensor(tmp_path):
    model = build_model(AttentionUNetConfig(depth=2, widths=(4, 8)))
    prefix = tmp_path / "ckpt"
    save_checkpoint(prefix, model)
    lines = (prefix.parent / "ckpt.manifest").read_text().splitlines()
    kept = [ln for ln in lines if not ln.startswith("param head.b ")]
    (prefix.parent / "ckpt.manifest").write_text("\n".join(kept) + "\n")
    with pytest.raises(FileFormatError, match="head.b"):
        load_checkpoint(prefix)


def test_checkpoint_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_checkpoint(tmp_path / "absent")
