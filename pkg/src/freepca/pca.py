"""Temporal PCA over feature blocks.

Every (site, channel) pair of a ``(f, S, c)`` block is one sample vector of
length ``f``; the basis ``P`` is ``f x f`` with one principal direction per row.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .tensors import check_features

NORMALIZATIONS = ("center", "none", "standardize")
COSINE_EPS = 1e-12
_TIE_RTOL = 1e-10


@dataclass(frozen=True)
class PCABasis:
    P: np.ndarray
    eigenvalues: np.ndarray
    center: np.ndarray
    normalization: str = "center"

    @property
    def f(self) -> int:
        return self.P.shape[0]

    @property
    def basis_id(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.P).tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class ComponentSpace:
    z: np.ndarray
    basis_id: str


@dataclass(frozen=True)
class SimilarityRanking:
    similarities: np.ndarray
    order: np.ndarray

    def rows(self):
        """(component_index, similarity, rank) triples in component order."""
        rank = np.empty_like(self.order)
        rank[self.order] = np.arange(len(self.order))
        return [(t, float(self.similarities[t]), int(rank[t])) for t in range(len(self.order))]


@dataclass(frozen=True)
class ComponentSplit:
    """Components partitioned by similarity rank, each keeping its original index."""

    consistency_indices: tuple
    consistency: np.ndarray
    motion_indices: tuple
    motion: np.ndarray
    f: int
    basis_id: str


def _sample_matrix(x: np.ndarray) -> np.ndarray:
    f = x.shape[0]
    return np.asarray(x, dtype=np.float64).reshape(f, -1)


def covariance(x: np.ndarray, normalization: str = "center"):
    """Return ``(cov, center)`` for a ``(f, S, c)`` block."""
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")
    X = _sample_matrix(x)
    n = X.shape[1]
    if normalization == "none":
        center = np.zeros(X.shape[0])
        Xc = X
    else:
        center = X.mean(axis=1)
        Xc = X - center[:, None]
        if normalization == "standardize":
            std = np.sqrt((Xc * Xc).mean(axis=1))
            Xc = Xc / np.where(std > 0, std, 1.0)[:, None]
    return (Xc @ Xc.T) / n, center


def _lead_index(v: np.ndarray) -> int:
    # first entry within round-off of the max magnitude, so exact ties pick the lowest index
    a = np.abs(v)
    return int(np.flatnonzero(a >= a.max() * (1 - 1e-9))[0])


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    return -v if v[_lead_index(v)] < 0 else v


def fit_basis(x: np.ndarray, normalization: str = "center") -> PCABasis:
    """Fit the temporal PCA basis of a ``(f, S, c)`` block.

    Rows of ``P`` are eigenvectors of the sample covariance sorted by
    descending eigenvalue. Each row is signed so its largest-magnitude entry
    is positive. Eigenvectors sharing an eigenvalue are ordered by the index
    of that entry, and an all-zero covariance yields the identity.
    """
    x = check_features(x)
    f = x.shape[0]
    if f < 2:
        raise DomainError(f"PCA needs at least 2 frames, got {f}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature values")

    cov, center = covariance(x, normalization)
    scale = max(1.0, float(np.max(np.abs(x)))) ** 2
    if np.max(np.abs(cov)) <= 1e-24 * scale:
        return PCABasis(np.eye(f), np.zeros(f), center, normalization)

    w, V = np.linalg.eigh(cov)
    w = np.maximum(w, 0.0)
    vecs = [_canonical_sign(V[:, j]) for j in range(f)]
    desc = sorted(range(f), key=lambda j: -w[j])

    tol = _TIE_RTOL * max(float(w.max()), np.finfo(float).tiny)
    ordered = []
    group = [desc[0]]
    for j in desc[1:]:
        if w[group[-1]] - w[j] <= tol:
            group.append(j)
        else:
            ordered += sorted(group, key=lambda g: _lead_index(vecs[g]))
            group = [j]
    ordered += sorted(group, key=lambda g: _lead_index(vecs[g]))

    P = np.stack([vecs[j] for j in ordered])
    # tied values differ only by round-off, so keep the value list sorted
    return PCABasis(P, w[desc].copy(), center, normalization)


def project(basis: PCABasis, x: np.ndarray) -> ComponentSpace:
    """z = P x along the frame axis. Raw features are projected, not centered."""
    x = check_features(x)
    if x.shape[0] != basis.f:
        raise ShapeError(f"features have {x.shape[0]} frames, basis has {basis.f}")
    z = np.tensordot(basis.P, np.asarray(x, dtype=np.float64), axes=(1, 0))
    return ComponentSpace(z, basis.basis_id)


def reconstruct(basis: PCABasis, z) -> np.ndarray:
    """x = P^T z along the frame axis."""
    arr = z.z if isinstance(z, ComponentSpace) else z
    arr = check_features(arr)
    if arr.shape[0] != basis.f:
        raise ShapeError(f"components have {arr.shape[0]} rows, basis has {basis.f}")
    return np.tensordot(basis.P.T, arr, axes=(1, 0))


def rank_descending(similarities: np.ndarray) -> np.ndarray:
    # stable sort on the negated values breaks ties by ascending index
    return np.argsort(-np.asarray(similarities), kind="stable")


def component_cosine(z_a: ComponentSpace, z_b: ComponentSpace) -> SimilarityRanking:
    if z_a.z.shape != z_b.z.shape:
        raise ShapeError(f"shape mismatch {z_a.z.shape} vs {z_b.z.shape}")
    if z_a.basis_id != z_b.basis_id:
        raise ShapeError("component spaces come from different bases")
    f = z_a.z.shape[0]
    A = z_a.z.reshape(f, -1)
    B = z_b.z.reshape(f, -1)
    na2 = np.einsum("ij,ij->i", A, A)
    nb2 = np.einsum("ij,ij->i", B, B)
    dot = np.einsum("ij,ij->i", A, B)
    live = (na2 >= COSINE_EPS**2) & (nb2 >= COSINE_EPS**2)
    sims = np.zeros(f)
    # sqrt of the product keeps identical inputs at exactly 1.0
    sims[live] = np.clip(dot[live] / np.sqrt(na2[live] * nb2[live]), -1.0, 1.0)
    return SimilarityRanking(sims, rank_descending(sims))


def split_components(
    z_global: ComponentSpace, z_local: ComponentSpace, ranking: SimilarityRanking, k: int
) -> ComponentSplit:
    """Top-k similarity components from the global side, the rest from the local side."""
    f = z_global.z.shape[0]
    if z_local.z.shape != z_global.z.shape:
        raise ShapeError(f"shape mismatch {z_global.z.shape} vs {z_local.z.shape}")
    if not 0 <= k <= f:
        raise DomainError(f"k={k} outside [0, {f}]")
    con = tuple(int(i) for i in ranking.order[:k])
    mot = tuple(int(i) for i in ranking.order[k:])
    return ComponentSplit(
        consistency_indices=con,
        consistency=z_global.z[list(con)],
        motion_indices=mot,
        motion=z_local.z[list(mot)],
        f=f,
        basis_id=z_global.basis_id,
    )
