import math
import os
import subprocess

import numpy as np
import pytest

import deguv


def test_config_roundtrip():
    cfg = deguv.Config()
    text = cfg.canonical()
    assert "train.seed" in text
    assert deguv.Config.parse(text).canonical() == text
    cfg.set("seed", "7")
    assert "train.seed = 7" in cfg.canonical()
    with pytest.raises(ValueError):
        cfg.set("no.such.key", "1")


def test_config_hash_tracks_compat_fields():
    a = deguv.Config()
    b = deguv.Config()
    b.set("eval.episodes", "2")
    assert a.compat_hash() == b.compat_hash()
    b.set("env.frame_stack", "4")
    assert a.compat_hash() != b.compat_hash()


def test_env_reset_and_step():
    env = deguv.Env(deguv.Config())
    rgb, depth = env.reset(11, "train")
    assert rgb.shape == (3, 64, 64, 3) and rgb.dtype == np.uint8
    assert depth.shape == (3, 64, 64) and depth.dtype == np.float32
    assert 0.0 <= float(depth.min()) and float(depth.max()) <= 1.0

    rgb2, depth2 = env.reset(11, "train")
    assert np.array_equal(rgb, rgb2) and np.array_equal(depth, depth2)

    _, depth_hard = env.reset(11, "hard")
    rgb_hard, _ = env.reset(11, "hard")
    assert np.array_equal(depth, depth_hard)
    assert not np.array_equal(rgb, rgb_hard)

    env.reset(11, "train")
    nrgb, ndepth, reward, done = env.step(env.oracle())
    assert nrgb.shape == rgb.shape and ndepth.shape == depth.shape
    assert math.isfinite(reward) and isinstance(done, bool)

    labels = env.relevance_mask()
    assert labels.shape == (64, 64)
    assert set(np.unique(labels)) <= {0, 1}
    assert labels.sum() > 0


def test_oracle_return_in_pinned_band():
    lo, hi = deguv.ORACLE_BAND
    mean, std, returns = deguv.evaluate_oracle(episodes=2, seeds=[1, 2], mode="train")
    assert lo <= mean <= hi
    assert std >= 0.0 and len(returns) == 4


def test_agent_act_and_mask():
    cfg = deguv.Config()
    agent = deguv.Agent(cfg)
    env = deguv.Env(cfg)
    rgb, depth = env.reset(3, "train")
    action = agent.act(rgb, depth)
    assert len(action) == 3
    assert all(-1.0 <= a <= 1.0 for a in action)
    assert action == agent.act(rgb, depth)

    stoch = agent.act(rgb, depth, deterministic=False, seed=5)
    assert stoch == agent.act(rgb, depth, deterministic=False, seed=5)

    mask = agent.mask(depth[np.newaxis, ...])
    assert mask.shape == (1, 1, 64, 64)
    assert float(mask.min()) >= 0.0 and float(mask.max()) <= 1.0
    assert float(mask.mean()) > 0.5

    with pytest.raises(ValueError):
        agent.act(rgb[:, :, :, :2], depth)


def test_infonce_uniform_batch():
    rng = np.random.default_rng(0)
    q = rng.standard_normal(16).astype(np.float32)
    key = rng.standard_normal(16).astype(np.float32)
    negs = np.tile(key, (7, 1))
    loss, grad = deguv.infonce(q, key, negs, temperature=0.1)
    assert abs(loss - math.log(8.0)) < 1e-6
    assert grad.shape == (16,)
    assert np.all(np.isfinite(grad))


def test_augment_zero_strength_is_identity():
    cfg = deguv.Config()
    for key in ("shift_pad", "overlay_alpha", "jitter_contrast", "jitter_hue"):
        cfg.set(key, "0")
    rng = np.random.default_rng(1)
    x = (rng.random((2, 9, 32, 32)) * 255.0).astype(np.float32)
    out = deguv.augment(x, cfg, seed=4)
    assert np.array_equal(out, x)

    strong = deguv.augment(x, deguv.Config(), seed=4)
    again = deguv.augment(x, deguv.Config(), seed=4)
    assert not np.array_equal(strong, x)
    assert np.array_equal(strong, again)


def _tiny_overrides(steps):
    return [
        "batch_size=8",
        "warmup_steps=40",
        f"total_steps={steps}",
        "horizon=20",
        "replay_capacity=400",
        "eval.interval=1048576",
        "eval.episodes=1",
        "eval.seeds=1",
    ]


def test_train_smoke_and_determinism(tmp_path):
    dirs = [str(tmp_path / "a"), str(tmp_path / "b")]
    for d in dirs:
        rc = deguv.train(overrides=_tiny_overrides(60), run_dir=d, seed="9")
        assert rc == 0
        assert os.path.exists(os.path.join(d, "final.ckpt"))
    rows = []
    for d in dirs:
        with open(os.path.join(d, "metrics.csv"), "rb") as f:
            rows.append(f.read())
    assert rows[0] == rows[1]
    assert rows[0].splitlines()[0].startswith(b"step,")

    agent = deguv.Agent.from_checkpoint(os.path.join(dirs[0], "final.ckpt"))
    assert agent.update_count > 0
    assert "total_steps = 60" in agent.config_text


def test_cli_binary_if_available(tmp_path):
    cli = os.environ.get("DEGUV_CLI")
    if not cli:
        pytest.skip("DEGUV_CLI not set")
    run_dir = str(tmp_path / "cli-run")
    cmd = [cli, "train", "--run-dir", run_dir, "--seed", "2"]
    for ov in _tiny_overrides(0):
        cmd += ["--set", ov]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert os.path.exists(os.path.join(run_dir, "config.cfg"))
    assert os.path.exists(os.path.join(run_dir, "run.info"))

    bad = subprocess.run([cli, "train", "--set", "nope=1"], capture_output=True, text=True)
    assert bad.returncode == 2
