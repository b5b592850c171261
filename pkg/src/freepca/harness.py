"""Synthetic videos, run configuration and the end-to-end demo pipeline."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import __version__
from .analysis import (
    analyze_video,
    edge_dispersion,
    edge_overlay,
    temporal_diff,
)
from .decompose import AttentionParams, decompose_window, entropy_scale, global_local_features, make_plan
from .errors import ConfigError, DomainError, FreePCAError
from .fusion import PIPELINE_MODES, FusionSchedule, run_pseudo_denoiser
from .noise import MEAN_STRATEGIES, init_noise
from .pca import NORMALIZATIONS, reconstruct
from .tensors import video_to_features, write_tensor

BACKGROUNDS = ("constant", "gradient", "seeded-texture")
SHAPES = ("square", "dot")


@dataclass
class Mover:
    shape: str = "square"
    size: int = 3
    velocity: tuple = (1.0, 0.0)
    intensity: float = 1.0
    start: tuple = (0, 0)


@dataclass
class SynthSpec:
    F: int = 32
    H: int = 32
    W: int = 32
    C: int = 1
    background: str = "gradient"
    movers: list = field(default_factory=list)
    noise_sigma: float = 0.0
    seed: int = 0
    background_level: float = 0.5


def _background(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    H, W, C = spec.H, spec.W, spec.C
    if spec.background == "constant":
        bg = np.full((H, W), spec.background_level)
        return np.repeat(bg[:, :, None], C, axis=2)
    if spec.background == "gradient":
        ramp = np.linspace(0.0, 1.0, W)
        return np.repeat(np.broadcast_to(ramp, (H, W))[:, :, None], C, axis=2).copy()
    tex = ndimage.gaussian_filter(rng.standard_normal((H, W, C)), sigma=(2.0, 2.0, 0), mode="wrap")
    tex -= tex.min()
    top = tex.max()
    return tex / top if top > 0 else tex


def mover_mask(m: Mover, t: int, H: int, W: int) -> np.ndarray:
    cx = int(round(m.start[0] + t * m.velocity[0])) % W
    cy = int(round(m.start[1] + t * m.velocity[1])) % H
    lo = -(m.size // 2)
    offs = range(lo, lo + m.size)
    mask = np.zeros((H, W), dtype=bool)
    r2 = (m.size / 2.0) ** 2
    for dy in offs:
        for dx in offs:
            if m.shape == "dot" and m.size > 1 and dx * dx + dy * dy > r2:
                continue
            mask[(cy + dy) % H, (cx + dx) % W] = True
    return mask


def synth_video(spec: SynthSpec) -> np.ndarray:
    """Background plus wrap-around movers plus seeded Gaussian pixel noise."""
    if min(spec.F, spec.H, spec.W, spec.C) < 1:
        raise DomainError("synthetic video dims must be positive")
    if spec.background not in BACKGROUNDS:
        raise DomainError(f"unknown background {spec.background!r}")
    if spec.noise_sigma < 0:
        raise DomainError("noise_sigma must be >= 0")
    for m in spec.movers:
        if m.shape not in SHAPES:
            raise DomainError(f"unknown mover shape {m.shape!r}")
        if m.size < 1 or m.size > min(spec.H, spec.W):
            raise DomainError(f"mover of size {m.size} does not fit a {spec.H}x{spec.W} frame")
    rng = np.random.default_rng(spec.seed)
    bg = _background(spec, rng)
    video = np.repeat(bg[None], spec.F, axis=0)
    for t in range(spec.F):
        for m in spec.movers:
            video[t][mover_mask(m, t, spec.H, spec.W)] += m.intensity
    if spec.noise_sigma > 0:
        video += spec.noise_sigma * rng.standard_normal(video.shape)
    return video


@dataclass
class PlanConfig:
    frames: int = 64
    window: int = 16
    stride: int = 4


@dataclass
class NoiseConfig:
    seed: int = 0
    strategy: str = "map"
    shuffle: bool = True


@dataclass
class DenoiserConfig:
    mode: str = "freepca"
    step_size: float = 0.1
    attention_weight: float = 0.5
    normalization: str = "center"
    workers: int = 1


@dataclass
class RunConfig:
    plan: PlanConfig = field(default_factory=PlanConfig)
    schedule: FusionSchedule = field(default_factory=FusionSchedule)
    attention: AttentionParams = field(default_factory=AttentionParams)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)
    target: SynthSpec = field(
        default_factory=lambda: SynthSpec(
            F=64,
            H=16,
            W=16,
            C=4,
            background="seeded-texture",
            movers=[Mover("square", 4, (1.0, 0.5), 1.0, (2, 6))],
            seed=7,
        )
    )
    analysis_threshold_db: float = 35.0

    def validate(self) -> "RunConfig":
        p, t = self.plan, self.target
        if p.window < 2:
            raise ConfigError(f"window must be >= 2, got {p.window}")
        if p.frames < p.window:
            raise ConfigError(f"frames={p.frames} < window={p.window}")
        if p.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {p.stride}")
        if t.F != p.frames:
            raise ConfigError(f"target has {t.F} frames, plan has {p.frames}")
        if t.C != self.attention.channels:
            raise ConfigError(f"target has {t.C} channels, attention expects {self.attention.channels}")
        if self.noise.strategy not in MEAN_STRATEGIES:
            raise ConfigError(f"unknown noise strategy {self.noise.strategy!r}")
        if self.denoiser.mode not in PIPELINE_MODES:
            raise ConfigError(f"unknown mode {self.denoiser.mode!r}")
        if self.denoiser.normalization not in NORMALIZATIONS:
            raise ConfigError(f"unknown normalization {self.denoiser.normalization!r}")
        if self.denoiser.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            self.schedule.validate(p.window)
        except DomainError as e:
            raise ConfigError(str(e)) from e
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if "config" in d:
            d = dict(d["config"])
        try:
            target = dataclasses.asdict(cls().target)
            target.update(d.pop("target", {}))
            target["movers"] = [
                Mover(**{**m, "velocity": tuple(m["velocity"]), "start": tuple(m["start"])})
                for m in ({**dataclasses.asdict(Mover()), **m} for m in target["movers"])
            ]
            tspec = SynthSpec(**target)
            return cls(
                plan=PlanConfig(**d.pop("plan", {})),
                schedule=FusionSchedule(**d.pop("schedule", {})),
                attention=AttentionParams(**d.pop("attention", {})),
                noise=NoiseConfig(**d.pop("noise", {})),
                denoiser=DenoiserConfig(**d.pop("denoiser", {})),
                target=tspec,
                **d,
            )
        except TypeError as e:
            raise ConfigError(f"bad config: {e}") from e


def load_config(path) -> RunConfig:
    """Read a JSON config file, or the ``config`` block of a run manifest."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return RunConfig.from_dict(data)


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def window_diagnostics(video, config: RunConfig):
    """Per-window similarity rankings and motion-set change magnitudes.

    The motion set of each window is split at ``k_max``; its features are
    rebuilt from the local and from the global projection and their mean
    adjacent-frame difference is reported.
    """
    p = config.plan
    plan = make_plan(p.frames, p.window, p.stride)
    x = video_to_features(video)
    k = config.schedule.k_max
    rankings, local_diffs, global_diffs = [], [], []
    for w, (xg, xl) in zip(plan.windows, global_local_features(x, plan, config.attention)):
        d = decompose_window(xg, xl, k, config.denoiser.normalization)
        mot = list(d.split.motion_indices)
        only = np.zeros_like(d.z_local.z)
        only[mot] = d.z_local.z[mot]
        local_diffs.append(float(temporal_diff(reconstruct(d.basis, only)).mean()))
        only[mot] = d.z_global.z[mot]
        global_diffs.append(float(temporal_diff(reconstruct(d.basis, only)).mean()))
        rankings.append((w, d.ranking))
    return rankings, {
        "motion_diff_local": float(np.mean(local_diffs)),
        "motion_diff_global": float(np.mean(global_diffs)),
        "motion_diff_local_per_window": local_diffs,
        "motion_diff_global_per_window": global_diffs,
    }


def run_pipeline(config: RunConfig, mode: str | None = None):
    """Noise init and pseudo-denoising; returns ``(noise, video)``."""
    config.validate()
    p, t = config.plan, config.target
    plan = make_plan(p.frames, p.window, p.stride)
    noise = init_noise(p.frames, t.H, t.W, t.C, p.window, config.noise.seed,
                       config.noise.strategy, config.noise.shuffle)
    dn = config.denoiser
    video = run_pseudo_denoiser(
        noise, plan, config.schedule, config.attention,
        target=synth_video(t), mode=mode or dn.mode, step_size=dn.step_size,
        attention_weight=dn.attention_weight, normalization=dn.normalization, workers=dn.workers,
    )
    return noise, video


def demo_pipeline(config: RunConfig, out_dir) -> dict:
    """Run the pipeline, write every artifact and the replay manifest.

    Returns the manifest dict.
    """
    out = Path(out_dir)
    os.makedirs(out / "similarity", exist_ok=True)
    try:
        noise, video = run_pipeline(config)
    except FreePCAError as e:
        raise type(e)(f"pipeline: {e}") from e

    write_tensor(noise.frames, out / "noise.ften")
    write_tensor(video, out / "output.ften")
    rankings, motion = window_diagnostics(video, config)
    for w, r in rankings:
        with open(out / "similarity" / f"window_{w.index:03d}.csv", "w") as fh:
            fh.write("component_index,similarity,rank\n")
            for t, s, rank in r.rows():
                fh.write(f"{t},{s:.9f},{rank}\n")
    report = analyze_video(video, out, config.analysis_threshold_db)
    overlay = edge_overlay(video)
    diagnostics = {
        "temporal_diff_mean": float(temporal_diff(video).mean()),
        "edge_dispersion": edge_dispersion(overlay),
        "video_class": report.video_class.value,
        "n_consistent": report.n_consistent,
        **motion,
    }
    (out / "diagnostics.json").write_text(json.dumps(diagnostics, indent=2, sort_keys=True) + "\n")

    p = config.plan
    plan = make_plan(p.frames, p.window, p.stride)
    artifacts = sorted(
        str(f.relative_to(out)) for f in out.rglob("*") if f.is_file() and f.name != "manifest.json"
    )
    manifest = {
        "freepca_version": __version__,
        "config": config.to_dict(),
        "seeds": {
            "noise": config.noise.seed,
            "attention": config.attention.seed,
            "target": config.target.seed,
        },
        "plan": [[w.index, w.start, w.end] for w in plan.windows],
        "entropy_scale": entropy_scale(p.frames, p.window),
        "shuffle_perms": [list(perm) for perm in noise.shuffle_perms],
        "artifacts": {a: sha256_file(out / a) for a in artifacts},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
