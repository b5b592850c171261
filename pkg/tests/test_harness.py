import json

import numpy as np
import pytest

from freepca.analysis import edge_dispersion, edge_overlay, temporal_diff
from freepca.errors import ConfigError, DomainError
from freepca.fusion import FusionSchedule
from freepca.harness import (
    Mover,
    RunConfig,
    SynthSpec,
    demo_pipeline,
    load_config,
    mover_mask,
    run_pipeline,
    synth_video,
)

EXPECTED_ARTIFACTS = {"noise.ften", "output.ften", "components.csv", "edge_overlay.pgm",
                      "temporal_diff.pgm", "diagnostics.json"}


def test_static_scene_frames_identical():
    v = synth_video(SynthSpec(5, 8, 8, 2, "seeded-texture", [], 0.0, 3))
    assert all(np.array_equal(v[0], fr) for fr in v)


def test_dot_kinematics():
    W = 10
    spec = SynthSpec(25, 6, W, 1, "constant", [Mover("dot", 1, (1, 0), 1.0, (7, 2))], 0.0, 0)
    v = synth_video(spec)
    for t in range(25):
        ys, xs = np.nonzero(v[t, :, :, 0] > 0.75)
        assert xs.tolist() == [(7 + t) % W] and ys.tolist() == [2]


def test_mover_wraps():
    m = Mover("square", 3, (0, 0), 1.0, (0, 0))
    mask = mover_mask(m, 0, 5, 5)
    assert mask.sum() == 9 and mask[4, 4] and mask[0, 0] and mask[1, 1]


def test_synth_deterministic_and_noisy():
    spec = SynthSpec(4, 6, 6, 1, "gradient", [Mover()], 0.1, 5)
    a, b = synth_video(spec), synth_video(spec)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a[0], synth_video(SynthSpec(4, 6, 6, 1, "gradient", [Mover()], 0.0, 5))[0])


@pytest.mark.parametrize("spec", [
    SynthSpec(4, 4, 4, 1, "gradient", [Mover("square", 5)]),
    SynthSpec(4, 4, 4, 1, "plaid"),
    SynthSpec(4, 4, 4, 1, "gradient", [], -1.0),
    SynthSpec(4, 4, 4, 1, "gradient", [Mover("star", 1)]),
])
def test_synth_rejects_bad_spec(spec):
    with pytest.raises(DomainError):
        synth_video(spec)


@pytest.mark.parametrize("mutate", [
    lambda c: setattr(c.plan, "window", 1),
    lambda c: setattr(c.plan, "frames", 8),
    lambda c: setattr(c.plan, "stride", 0),
    lambda c: setattr(c, "schedule", FusionSchedule(17, 25, 50)),
    lambda c: setattr(c, "schedule", FusionSchedule(3, 51, 50)),
    lambda c: setattr(c.noise, "strategy", "median"),
    lambda c: setattr(c.denoiser, "mode", "hybrid"),
    lambda c: setattr(c.denoiser, "workers", 0),
])
def test_config_validation(mutate):
    cfg = RunConfig()
    mutate(cfg)
    with pytest.raises(ConfigError):
        cfg.validate()


def test_config_json_round_trip(tmp_path):
    cfg = RunConfig()
    cfg.schedule = FusionSchedule(2, 10, 20)
    (tmp_path / "c.json").write_text(json.dumps(cfg.to_dict()))
    assert load_config(tmp_path / "c.json") == cfg
    (tmp_path / "partial.json").write_text(json.dumps({"schedule": {"k_max": 1}}))
    part = load_config(tmp_path / "partial.json")
    assert part.schedule.k_max == 1 and part.target == RunConfig().target
    (tmp_path / "bad.json").write_text(json.dumps({"plan": {"frame_count": 3}}))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")


def small_config(**schedule):
    cfg = RunConfig()
    cfg.plan.frames, cfg.plan.window, cfg.plan.stride = 24, 8, 4
    cfg.target = SynthSpec(24, 8, 8, 4, "seeded-texture", [Mover("square", 3, (1, 0), 1.0, (1, 1))], seed=2)
    cfg.schedule = FusionSchedule(**schedule) if schedule else FusionSchedule(3, 5, 10)
    return cfg


def test_degenerate_config_equals_local_baseline():
    cfg = small_config(k_max=0, mode_switch_step=0, total_steps=10)
    _, a = run_pipeline(cfg)
    _, b = run_pipeline(cfg, mode="local")
    assert a.tobytes() == b.tobytes()


def test_small_demo_writes_artifacts_and_replays(tmp_path):
    m1 = demo_pipeline(small_config(), tmp_path / "a")
    assert EXPECTED_ARTIFACTS <= set(m1["artifacts"])
    assert any(a.startswith("similarity/") for a in m1["artifacts"])
    replay = load_config(tmp_path / "a" / "manifest.json")
    m2 = demo_pipeline(replay, tmp_path / "b")
    assert m1["artifacts"] == m2["artifacts"]


@pytest.fixture(scope="module")
def baselines():
    out = {}
    for mode in ("freepca", "local", "global"):
        cfg = RunConfig()
        cfg.denoiser.mode = mode
        out[mode] = run_pipeline(cfg)[1]
    return out


def test_default_edge_dispersion_not_above_local(baselines):
    assert edge_dispersion(edge_overlay(baselines["freepca"])) <= edge_dispersion(edge_overlay(baselines["local"]))


@pytest.mark.xfail(strict=True, reason="mock global attention averages over all frames and is the "
                   "smoothest pipeline; the FreePCA output cannot undercut it")
def test_default_temporal_diff_not_above_global(baselines):
    assert temporal_diff(baselines["freepca"]).mean() <= temporal_diff(baselines["global"]).mean()
