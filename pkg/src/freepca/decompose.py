"""Global/local temporal-attention pathways and per-window component splits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, PlanError, ShapeError
from .pca import (
    ComponentSpace,
    ComponentSplit,
    PCABasis,
    SimilarityRanking,
    component_cosine,
    fit_basis,
    project,
    split_components,
)
from .tensors import check_features


@dataclass(frozen=True)
class Window:
    index: int
    start: int
    end: int


@dataclass(frozen=True)
class WindowPlan:
    F: int
    f: int
    stride: int
    windows: tuple = field(default=())

    def coverage(self) -> np.ndarray:
        counts = np.zeros(self.F, dtype=np.int64)
        for w in self.windows:
            counts[w.start:w.end] += 1
        return counts


def make_plan(F: int, f: int, stride: int | None = None) -> WindowPlan:
    """Sliding windows of length ``f``; the last start is clamped to ``F - f``."""
    if f < 1 or F < f:
        raise PlanError(f"need 1 <= f <= F, got f={f}, F={F}")
    if stride is None:
        stride = max(1, f // 4)
    if stride < 1:
        raise PlanError(f"stride must be >= 1, got {stride}")
    n = -(-(F - f) // stride) + 1
    windows = tuple(
        Window(i, min(i * stride, F - f), min(i * stride, F - f) + f) for i in range(n)
    )
    return WindowPlan(F, f, stride, windows)


@dataclass(frozen=True)
class AttentionParams:
    seed: int = 0
    channels: int = 4
    scale: float = 1.0


def entropy_scale(F: int, f: int) -> float:
    """Query amplification sqrt(log_f F) for attention over F frames of an f-frame model."""
    if f < 2 or F < f:
        raise DomainError(f"entropy scale needs f >= 2 and F >= f, got F={F}, f={f}")
    return math.sqrt(math.log(F) / math.log(f))


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def attention_maps(channels: int, seed: int):
    """Fixed orthogonal query, key and value maps for a seed."""
    rng = np.random.default_rng(seed)
    return tuple(_orthogonal(rng, channels) for _ in range(3))


def attention_weights(x: np.ndarray, params: AttentionParams) -> np.ndarray:
    """Per-site softmax weights, shape ``(S, frames, frames)``."""
    x = check_features(x)
    c = x.shape[2]
    if c != params.channels:
        raise ShapeError(f"features have {c} channels, attention expects {params.channels}")
    Wq, Wk, _ = attention_maps(c, params.seed)
    xs = np.asarray(x, dtype=np.float64).transpose(1, 0, 2)
    q = (params.scale * (xs @ Wq))
    k = xs @ Wk
    scores = q @ k.transpose(0, 2, 1) / math.sqrt(c)
    scores -= scores.max(axis=2, keepdims=True)
    e = np.exp(scores)
    return e / e.sum(axis=2, keepdims=True)


def mock_temporal_attention(x: np.ndarray, params: AttentionParams) -> np.ndarray:
    """Single-head attention along frames, independently per site.

    Values are rotated by the value map and rotated back on output so the
    result stays in the input channel basis.
    """
    x = check_features(x)
    _, _, Wv = attention_maps(x.shape[2], params.seed)
    A = attention_weights(x, params)
    v = np.asarray(x, dtype=np.float64).transpose(1, 0, 2) @ Wv
    out = (A @ v) @ Wv.T
    return np.ascontiguousarray(out.transpose(1, 0, 2))


def _check_plan(x: np.ndarray, plan: WindowPlan) -> None:
    if x.shape[0] != plan.F:
        raise ShapeError(f"features have {x.shape[0]} frames, plan expects {plan.F}")


def global_features(x: np.ndarray, plan: WindowPlan, params: AttentionParams) -> np.ndarray:
    """Temp(x) over all F frames with the entropy-scaled queries."""
    x = check_features(x)
    _check_plan(x, plan)
    lam = entropy_scale(plan.F, plan.f) if plan.f >= 2 else 1.0
    return mock_temporal_attention(x, replace(params, scale=lam))


def local_features(x: np.ndarray, window: Window, params: AttentionParams) -> np.ndarray:
    """Temp(Slice(x)) for one window, unscaled."""
    return mock_temporal_attention(x[window.start:window.end], replace(params, scale=1.0))


def global_local_features(x: np.ndarray, plan: WindowPlan, params: AttentionParams):
    """Per-window ``(x_global_i, x_local_i)`` pairs.

    The global pathway runs attention once over the whole sequence and then
    slices; the local pathway slices first and attends inside the window.
    """
    g = global_features(x, plan, params)
    return [(g[w.start:w.end], local_features(x, w, params)) for w in plan.windows]


@dataclass(frozen=True)
class WindowDecomposition:
    basis: PCABasis
    z_global: ComponentSpace
    z_local: ComponentSpace
    ranking: SimilarityRanking
    split: ComponentSplit


def decompose_window(
    x_global: np.ndarray, x_local: np.ndarray, k: int, normalization: str = "center"
) -> WindowDecomposition:
    """Fit P on the global slice, project both pathways and split at k."""
    if np.shape(x_global) != np.shape(x_local):
        raise ShapeError(f"pathway shapes differ: {np.shape(x_global)} vs {np.shape(x_local)}")
    basis = fit_basis(x_global, normalization)
    zg = project(basis, x_global)
    zl = project(basis, x_local)
    ranking = component_cosine(zg, zl)
    return WindowDecomposition(basis, zg, zl, ranking, split_components(zg, zl, ranking, k))
