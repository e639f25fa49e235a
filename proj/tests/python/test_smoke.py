"""Smoke tests for the gqakit python extension."""

import math

import numpy as np
import pytest

import gqakit


def make_config(heads=4, groups=2, head_dim=4, layers=2, vocab=16):
    return gqakit.AttentionConfig(
        n_heads=heads, n_kv_groups=groups, head_dim=head_dim, n_layers=layers, vocab=vocab
    )


def test_version_and_config():
    assert gqakit.__version__
    cfg = make_config()
    assert cfg.d_model == 16
    assert cfg.n_kv_groups == 2
    with pytest.raises(ValueError):
        make_config(heads=8, groups=3)


def test_group_of_head():
    cfg = make_config(heads=8, groups=4, head_dim=2)
    assert gqakit.group_of_head(3, cfg) == 1
    assert gqakit.group_of_head(7, cfg) == 3


def test_model_forward_shape_and_buffer():
    cfg = make_config()
    ckpt = gqakit.random_checkpoint(cfg, seed=0)
    logits = gqakit.model_forward(ckpt, [1, 2, 3])
    arr = np.asarray(logits)
    assert arr.shape == (3, 16)
    assert np.isfinite(arr).all()


def test_generate_deterministic_and_cache_bytes():
    cfg = make_config()
    ckpt = gqakit.random_checkpoint(cfg, seed=7)
    a = gqakit.generate(ckpt, [1, 2, 3, 4], steps=8)
    b = gqakit.generate(ckpt, [1, 2, 3, 4], steps=8)
    assert a.tokens == b.tokens
    assert len(a.tokens) == 8
    assert list(a.step_cache_bytes) == sorted(a.step_cache_bytes)
    # bytes after the first ingest: 5 positions cached
    assert a.step_cache_bytes[0] == gqakit.kv_cache_bytes(cfg, 5, 1, "f32")


def test_convert_identity_and_drift():
    cfg = make_config(heads=4, groups=4)
    ckpt = gqakit.random_checkpoint(cfg, seed=1)
    same = gqakit.convert_checkpoint(ckpt, groups=4, method="mean")
    rep = gqakit.conversion_report(ckpt, same, method="mean")
    assert rep.output_drift == 0.0

    mqa = gqakit.convert_checkpoint(ckpt, groups=1, method="mean")
    assert mqa.config.n_kv_groups == 1
    rep = gqakit.conversion_report(ckpt, mqa, method="mean")
    assert rep.output_drift > 0.0
    with pytest.raises(ValueError):
        gqakit.convert_checkpoint(ckpt, groups=3, method="mean")


def test_checkpoint_roundtrip(tmp_path):
    cfg = make_config()
    ckpt = gqakit.random_checkpoint(cfg, seed=5)
    path = tmp_path / "model.gqac"
    gqakit.save_checkpoint(ckpt, path)
    back = gqakit.load_checkpoint(path)
    a = np.asarray(gqakit.model_forward(ckpt, [0, 1]))
    b = np.asarray(gqakit.model_forward(back, [0, 1]))
    assert (a == b).all()
    with pytest.raises(IOError):
        gqakit.load_checkpoint(tmp_path / "missing.gqac")


def test_cost_model():
    cfg = make_config(heads=8, groups=1, head_dim=4, layers=2)
    assert gqakit.kv_cache_bytes(cfg, seq_len=8, batch=1, precision="f32") == 512
    assert gqakit.sharded_kv_heads_per_partition(1, 8) == 1
    assert gqakit.sharding_waste_factor(1, 8) == 8.0

    hw = gqakit.HardwareSpec(5e10, 1e11, partitions=1)
    prev = 0.0
    for g in (1, 2, 4, 8):
        c = gqakit.AttentionConfig(
            n_heads=8, n_kv_groups=g, head_dim=4, n_layers=2, vocab=16
        )
        rep = gqakit.predict_step_time(c, hw, seq_len=256, batch=1)
        assert rep.predicted_step_seconds >= prev
        prev = rep.predicted_step_seconds


def test_tiny_uptrain_loop():
    cfg = gqakit.AttentionConfig(n_heads=4, n_kv_groups=4, head_dim=1, n_layers=1, vocab=8)
    task = gqakit.SyntheticTask.markov(seed=3, vocab=8, seq_len=16)
    ckpt, run = gqakit.pretrain_base(cfg, task, steps=40, learning_rate=0.3, batch_size=16, seed=1)
    assert len(run.loss_trajectory) == 40
    assert run.final_eval_loss < math.log(8.0) + 0.5

    up_ckpt, up_run = gqakit.uptrain(ckpt, run, groups=1, method="mean", alpha=0.1, seed=2)
    assert up_run.steps == 4
    assert up_run.eval_points[0].alpha == 0.0
    assert up_run.method == "mean"
    assert gqakit.eval_loss(up_ckpt, task) == pytest.approx(up_run.final_eval_loss)
