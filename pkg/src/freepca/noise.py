"""Initial noise for long sequences: block-wise mean reuse and frame shuffling."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

MEAN_STRATEGIES = ("map", "scalar", "direct", "none")


@dataclass(frozen=True)
class NoiseSequence:
    frames: np.ndarray
    block_size: int
    seed: int
    shuffle_perms: tuple = ()


def block_bounds(F: int, f: int):
    """(start, end) of every block after the first, including a short tail."""
    return [(j, min(j + f, F)) for j in range(f, F, f)]


def sample_noise(F: int, H: int, W: int, C: int, seed: int, block_size: int | None = None) -> NoiseSequence:
    if min(F, H, W, C) < 1:
        raise DomainError(f"noise dims must be positive, got {(F, H, W, C)}")
    rng = np.random.default_rng(seed)
    frames = rng.standard_normal((F, H, W, C))
    return NoiseSequence(frames, block_size or F, seed)


def reuse_mean(noise: NoiseSequence, f: int, strategy: str = "map") -> NoiseSequence:
    """Give every later block the temporal mean of frames ``[0, f)``.

    ``map`` swaps per-site temporal means, ``scalar`` swaps the block's
    overall mean, ``direct`` copies the first block's frames outright and
    ``none`` leaves the noise alone. A short trailing block is treated with its
    own length.
    """
    if strategy not in MEAN_STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    eps = noise.frames
    F = eps.shape[0]
    if f < 1 or F < f:
        raise DomainError(f"need 1 <= f <= F, got f={f}, F={F}")
    out = eps.copy()
    first = eps[:f]
    axis = None if strategy == "scalar" else 0
    ref = first.mean(axis=axis)
    for j, end in block_bounds(F, f):
        if strategy == "map" or strategy == "scalar":
            out[j:end] = eps[j:end] - eps[j:end].mean(axis=axis) + ref
        elif strategy == "direct":
            out[j:end] = first[: end - j]
    return replace(noise, frames=out, block_size=f)


def block_permutation(seed: int, block: int, length: int) -> np.ndarray:
    # keyed on (seed, block) so each block's permutation is independent of the others
    return np.random.default_rng([seed, block]).permutation(length)


def shuffle_blocks(noise: NoiseSequence, f: int, seed: int) -> NoiseSequence:
    """Permute frame order inside every block after the first."""
    eps = noise.frames
    F = eps.shape[0]
    if f < 1 or F < f:
        raise DomainError(f"need 1 <= f <= F, got f={f}, F={F}")
    out = eps.copy()
    perms = []
    for b, (j, end) in enumerate(block_bounds(F, f), start=1):
        perm = block_permutation(seed, b, end - j)
        out[j:end] = eps[j:end][perm]
        perms.append(tuple(int(p) for p in perm))
    return replace(noise, frames=out, block_size=f, shuffle_perms=tuple(perms))


def init_noise(F, H, W, C, f, seed, strategy="map", shuffle=True) -> NoiseSequence:
    """Sample, reuse the first block's mean, then shuffle."""
    noise = reuse_mean(sample_noise(F, H, W, C, seed), f, strategy)
    if shuffle:
        noise = shuffle_blocks(noise, f, seed)
    return noise
