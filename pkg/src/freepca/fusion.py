"""Progressive fusion of window components and the pseudo-denoising loop."""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .decompose import (
    AttentionParams,
    WindowPlan,
    decompose_window,
    global_features,
    local_features,
    mock_temporal_attention,
)
from .errors import ConsistencyError, DomainError, PlanError, ShapeError
from .noise import NoiseSequence
from .pca import ComponentSpace, ComponentSplit, reconstruct
from .tensors import features_to_video, video_to_features


@dataclass(frozen=True)
class FusionSchedule:
    k_max: int = 3
    mode_switch_step: int = 25
    total_steps: int = 50

    def validate(self, f: int) -> None:
        if not 0 <= self.k_max <= f:
            raise DomainError(f"k_max={self.k_max} outside [0, {f}]")
        if self.total_steps < 0 or not 0 <= self.mode_switch_step <= self.total_steps:
            raise DomainError(
                f"need 0 <= mode_switch_step={self.mode_switch_step} <= total_steps={self.total_steps}"
            )


class DenoiseMode(enum.Enum):
    FREEPCA = "freepca"
    LOCAL_ONLY = "local"


def schedule_k(i: int, k_max: int) -> int:
    """Number of consistency components for window ``i`` (windows count from 0)."""
    return min(i, k_max)


def denoise_mode(step: int, schedule: FusionSchedule) -> DenoiseMode:
    if not 0 <= step < schedule.total_steps:
        raise DomainError(f"step {step} outside [0, {schedule.total_steps})")
    return DenoiseMode.FREEPCA if step < schedule.mode_switch_step else DenoiseMode.LOCAL_ONLY


def fuse_components(split: ComponentSplit) -> ComponentSpace:
    """Scatter consistency and motion slices back to their original component rows."""
    indices = list(split.consistency_indices) + list(split.motion_indices)
    if sorted(indices) != list(range(split.f)):
        raise ConsistencyError(
            f"component indices {indices} are not a partition of 0..{split.f - 1}"
        )
    template = split.consistency if len(split.consistency_indices) else split.motion
    z = np.empty((split.f,) + template.shape[1:], dtype=np.float64)
    if split.consistency_indices:
        z[list(split.consistency_indices)] = split.consistency
    if split.motion_indices:
        z[list(split.motion_indices)] = split.motion
    return ComponentSpace(z, split.basis_id)


def accumulate_windows(fused, plan: WindowPlan) -> np.ndarray:
    """Average per-window tensors into the full sequence.

    ``fused`` is a list of ``(window, tensor)`` pairs. Contributions are summed
    in window order so the result does not depend on how they were produced.
    """
    fused = sorted(fused, key=lambda pair: pair[0].index)
    if [w.index for w, _ in fused] != [w.index for w in plan.windows]:
        raise PlanError("expected exactly one tensor per plan window")
    shape = fused[0][1].shape[1:]
    total = np.zeros((plan.F,) + shape, dtype=np.float64)
    counts = np.zeros(plan.F, dtype=np.int64)
    for w, t in fused:
        if t.shape != (w.end - w.start,) + shape:
            raise ShapeError(f"window {w.index} tensor has shape {t.shape}")
        total[w.start:w.end] += t
        counts[w.start:w.end] += 1
    if np.any(counts == 0):
        raise PlanError(f"frames {np.flatnonzero(counts == 0).tolist()} are not covered")
    return total / counts.reshape((-1,) + (1,) * len(shape))


def fuse_window(x_global, x_local, k, normalization="center") -> np.ndarray:
    d = decompose_window(x_global, x_local, k, normalization)
    return reconstruct(d.basis, fuse_components(d.split))


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def freepca_step(x, plan, schedule, params, normalization="center", workers=1):
    """One FreePCA attention pass over ``(F, S, c)`` features."""
    g = global_features(x, plan, params)

    def work(w):
        xl = local_features(x, w, params)
        return w, fuse_window(g[w.start:w.end], xl, schedule_k(w.index, schedule.k_max), normalization)

    return accumulate_windows(_map(work, plan.windows, workers), plan)


def local_step(x, plan, params, workers=1):
    return accumulate_windows(_map(lambda w: (w, local_features(x, w, params)), plan.windows, workers), plan)


def global_step(x, params):
    # direct long-sequence attention, no entropy scaling
    return mock_temporal_attention(x, params)


PIPELINE_MODES = ("freepca", "local", "global")


def run_pseudo_denoiser(
    noise,
    plan: WindowPlan,
    schedule: FusionSchedule,
    params: AttentionParams,
    *,
    target=None,
    mode="freepca",
    step_size=0.1,
    attention_weight=0.5,
    normalization="center",
    workers=1,
):
    """Iterate ``x <- x + step_size * (attention_weight * h(x) + (1 - attention_weight) * target - x)``.

    ``h`` is the attention pass selected by ``mode`` and the schedule; the
    affine pull toward ``target`` stands in for a trained denoiser. Returns a
    video with the same shape as the noise.
    """
    if mode not in PIPELINE_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    frames = noise.frames if isinstance(noise, NoiseSequence) else np.asarray(noise)
    F, H, W, C = frames.shape
    if F != plan.F:
        raise ShapeError(f"noise has {F} frames, plan expects {plan.F}")
    schedule.validate(plan.f)
    x = video_to_features(frames).astype(np.float64)
    tgt = np.zeros_like(x) if target is None else video_to_features(np.asarray(target, dtype=np.float64))
    if tgt.shape != x.shape:
        raise ShapeError(f"target shape {tgt.shape} does not match noise {x.shape}")

    for step in range(schedule.total_steps):
        if mode == "global":
            h = global_step(x, params)
        elif mode == "local" or denoise_mode(step, schedule) is DenoiseMode.LOCAL_ONLY:
            h = local_step(x, plan, params, workers)
        else:
            h = freepca_step(x, plan, schedule, params, normalization, workers)
        x = x + step_size * (attention_weight * h + (1.0 - attention_weight) * tgt - x)
    return features_to_video(x, H, W)
