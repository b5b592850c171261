"""Consistency analysis of videos in the temporal principal-component space."""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DomainError, ShapeError
from .pca import PCABasis, fit_basis, project, reconstruct
from .tensors import check_video, read_tensor, video_to_features

PSNR_CAP = 99.0
DEFAULT_THRESHOLD_DB = 35.0


class VideoClass(enum.Enum):
    HIGH = "HighConsistency"
    LOW = "LowConsistency"


@dataclass(frozen=True)
class ConsistencyReport:
    per_component: list
    threshold_db: float
    video_class: VideoClass

    @property
    def n_consistent(self) -> int:
        return sum(1 for _, _, ok in self.per_component if ok)


def psnr(a, b, peak: float = 1.0) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    if peak <= 0:
        raise DomainError(f"peak must be positive, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak * peak / mse))


def dynamic_range(video) -> float:
    """max - min, falling back to max |v| and then 1 for flat videos."""
    v = np.asarray(video)
    span = float(v.max() - v.min())
    if span > 0:
        return span
    m = float(np.abs(v).max())
    return m if m > 0 else 1.0


def video_basis(video, normalization: str = "none") -> PCABasis:
    # pixel-channel sites are the samples, frames the feature axis
    return fit_basis(video_to_features(video), normalization)


def per_component_video(video, component: int, basis: PCABasis | None = None, normalization: str = "none"):
    """Video rebuilt from one temporal principal component alone."""
    video = check_video(video)
    F = video.shape[0]
    if not 0 <= component < F:
        raise DomainError(f"component {component} outside [0, {F})")
    if basis is None:
        basis = video_basis(video, normalization)
    z = project(basis, video_to_features(video)).z
    single = np.zeros_like(z)
    single[component] = z[component]
    return reconstruct(basis, single).reshape(video.shape)


def classify_components(
    video,
    threshold_db: float = DEFAULT_THRESHOLD_DB,
    peak: float | None = None,
    normalization: str = "none",
) -> ConsistencyReport:
    """PSNR of each single-component video against the original.

    ``peak`` defaults to the video's own dynamic range.
    """
    video = check_video(video).astype(np.float64)
    if peak is None:
        peak = dynamic_range(video)
    basis = video_basis(video, normalization)
    x = video_to_features(video)
    z = project(basis, x).z
    rows = []
    for t in range(basis.f):
        # rank-1 reconstruction: outer product of basis row t with component t
        rec = np.tensordot(basis.P[t], z[t], axes=0)
        db = psnr(rec, x, peak)
        rows.append((t, db, db >= threshold_db))
    cls = VideoClass.HIGH if any(ok for _, _, ok in rows) else VideoClass.LOW
    return ConsistencyReport(rows, threshold_db, cls)


def to_gray(video) -> np.ndarray:
    video = check_video(video)
    return np.asarray(video, dtype=np.float64).mean(axis=3)


def canny(image, sigma: float = 1.4, low: float = 0.1, high: float = 0.2) -> np.ndarray:
    """Binary Canny edge map; thresholds are fractions of the frame's max gradient."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < 3:
        raise DomainError(f"edge detection needs a 2-D frame of at least 3x3, got {img.shape}")
    smooth = ndimage.gaussian_filter(img, sigma, mode="nearest")
    gx = ndimage.sobel(smooth, axis=1, mode="nearest")
    gy = ndimage.sobel(smooth, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    top = mag.max()
    if top <= 1e-12:
        return np.zeros(img.shape, dtype=bool)

    # non-maximum suppression along the quantised gradient direction
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    padded = np.pad(mag, 1)
    H, W = mag.shape

    def shifted(dy, dx):
        return padded[1 + dy:1 + dy + H, 1 + dx:1 + dx + W]

    sector = np.digitize(angle, [22.5, 67.5, 112.5, 157.5]) % 4
    offsets = [(0, 1), (1, 1), (1, 0), (1, -1)]
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dy, dx) in enumerate(offsets):
        m = sector == s
        keep |= m & (mag >= shifted(dy, dx)) & (mag >= shifted(-dy, -dx))
    nms = np.where(keep, mag, 0.0)

    strong = nms >= high * top
    weak = nms >= low * top
    labels, n = ndimage.label(weak, structure=np.ones((3, 3)))
    if n == 0:
        return strong
    hit = np.zeros(n + 1, dtype=bool)
    hit[np.unique(labels[strong])] = True
    hit[0] = False
    return hit[labels]


def edge_overlay(video, sigma: float = 1.4, low: float = 0.1, high: float = 0.2) -> np.ndarray:
    """Per-pixel max of the per-frame edge maps, in [0, 1]."""
    gray = to_gray(video)
    out = np.zeros(gray.shape[1:])
    for frame in gray:
        np.maximum(out, canny(frame, sigma, low, high), out=out)
    return out


def edge_dispersion(overlay) -> float:
    """Fraction of pixels touched by an edge in any frame."""
    return float(np.count_nonzero(overlay)) / overlay.size


def temporal_diff(x) -> np.ndarray:
    """|frame(t+1) - frame(t)| for every adjacent pair along axis 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2 or x.shape[0] < 2:
        raise DomainError(f"temporal difference needs at least 2 frames, got shape {x.shape}")
    return np.abs(np.diff(x, axis=0))


def write_pgm(path, image, normalize: bool = False) -> None:
    """Binary 8-bit PGM. Values are clipped to [0, 1] unless ``normalize`` rescales by the max."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeError(f"PGM needs a 2-D image, got {img.shape}")
    if normalize:
        top = img.max()
        img = img / top if top > 0 else img
    data = np.round(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    H, W = data.shape
    Path(path).write_bytes(f"P5\n{W} {H}\n255\n".encode("ascii") + data.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(raw) and not raw[end:end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError("not a binary PGM")
    W, H = int(fields[1]), int(fields[2])
    return np.frombuffer(raw, dtype=np.uint8, count=W * H, offset=pos + 1).reshape(H, W)


def write_component_csv(path, report: ConsistencyReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "psnr_db", "is_consistent"])
        for t, db, ok in report.per_component:
            w.writerow([t, f"{db:.6f}", int(ok)])


def classify_directory(directory, threshold_db=DEFAULT_THRESHOLD_DB, peak=None, normalization="none"):
    """Classify every .ften video under ``directory``, sorted by path."""
    rows = []
    for p in sorted(Path(directory).glob("*.ften")):
        rep = classify_components(read_tensor(p), threshold_db, peak, normalization)
        rows.append((p.name, rep.video_class.value, rep.n_consistent))
    return rows


def write_batch_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["video", "class", "n_consistent"])
        w.writerows(rows)


def analyze_video(video, out_dir, threshold_db=DEFAULT_THRESHOLD_DB, peak=None, normalization="none"):
    """Write components.csv, edge_overlay.pgm and temporal_diff.pgm; return the report."""
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    report = classify_components(video, threshold_db, peak, normalization)
    write_component_csv(out / "components.csv", report)
    write_pgm(out / "edge_overlay.pgm", edge_overlay(video))
    diff = temporal_diff(to_gray(video)).mean(axis=0)
    write_pgm(out / "temporal_diff.pgm", diff, normalize=True)
    return report
