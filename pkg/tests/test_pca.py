import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from freepca.errors import DomainError, ShapeError
from freepca.pca import (
    ComponentSpace,
    PCABasis,
    SimilarityRanking,
    component_cosine,
    covariance,
    fit_basis,
    project,
    rank_descending,
    reconstruct,
    split_components,
)
from oracles import cosine, jacobi_eigenvalues, loop_covariance

R2 = math.sqrt(2.0)


def block(seed, f, S, c):
    return np.random.default_rng(seed).standard_normal((f, S, c))


@st.composite
def feature_blocks(draw, max_f=8):
    f = draw(st.integers(2, max_f))
    S = draw(st.integers(1, 12))
    c = draw(st.integers(1, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    return block(seed, f, S, c)


def two_sample_block():
    # samples v1 = (1, -1), v2 = (-1, 1) over f = 2 frames
    return np.array([[[1.0], [-1.0]], [[-1.0], [1.0]]])


def test_fit_basis_two_by_two_closed_form():
    b = fit_basis(two_sample_block())
    np.testing.assert_allclose(b.center, [0.0, 0.0])
    np.testing.assert_allclose(covariance(two_sample_block())[0], [[1, -1], [-1, 1]])
    np.testing.assert_allclose(b.eigenvalues, [2.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(b.P[0], [1 / R2, -1 / R2], atol=1e-12)
    np.testing.assert_allclose(b.P[1], [1 / R2, 1 / R2], atol=1e-12)


def test_zero_covariance_gives_identity():
    # every sample vector is (0.1, 0.2, 0.3): nothing varies across samples
    x = np.broadcast_to(np.array([0.1, 0.2, 0.3])[:, None, None], (3, 5, 2)).copy()
    b = fit_basis(x)
    np.testing.assert_array_equal(b.P, np.eye(3))
    np.testing.assert_array_equal(b.eigenvalues, np.zeros(3))


def test_random_block_reconstructs_covariance():
    x = block(0, 4, 30, 3)
    b = fit_basis(x)
    np.testing.assert_allclose(b.P @ b.P.T, np.eye(4), atol=1e-5)
    cov = np.array(loop_covariance(x.tolist()))
    np.testing.assert_allclose(b.P.T @ np.diag(b.eigenvalues) @ b.P, cov, atol=1e-4)


def test_fit_basis_errors():
    with pytest.raises(DomainError):
        fit_basis(np.ones((1, 4, 2)))
    bad = np.ones((3, 4, 2))
    bad[1, 1, 1] = np.nan
    with pytest.raises(ValueError):
        fit_basis(bad)


@given(feature_blocks())
def test_basis_invariants(x):
    b = fit_basis(x)
    assert np.max(np.abs(b.P @ b.P.T - np.eye(b.f))) < 1e-5
    assert np.all(np.diff(b.eigenvalues) <= 0)
    assert np.all(b.eigenvalues >= 0)
    for row in b.P:
        lead = np.flatnonzero(np.abs(row) >= np.abs(row).max() * (1 - 1e-9))[0]
        assert row[lead] > 0
    cov = covariance(x)[0]
    assert math.isclose(b.eigenvalues.sum(), np.trace(cov), rel_tol=1e-6, abs_tol=1e-12)


@given(feature_blocks(max_f=6))
def test_eigenvalues_match_jacobi_oracle(x):
    b = fit_basis(x)
    expect = jacobi_eigenvalues(loop_covariance(x.tolist()))
    floor = 1e-12 * max(expect[0], 1e-300)
    for got, want in zip(b.eigenvalues, expect):
        assert abs(got - max(want, 0.0)) <= 1e-6 * abs(want) + floor


@given(feature_blocks())
def test_fit_is_bit_deterministic(x):
    assert fit_basis(x).P.tobytes() == fit_basis(x.copy()).P.tobytes()


def test_project_identity_basis(rng):
    x = rng.standard_normal((3, 5, 2))
    b = PCABasis(np.eye(3), np.zeros(3), np.zeros(3))
    np.testing.assert_array_equal(project(b, x).z, x)


def test_project_hand_multiply():
    b = fit_basis(two_sample_block())
    z = project(b, np.array([[[3.0]], [[1.0]]])).z
    np.testing.assert_allclose(z[:, 0, 0], [R2, 2 * R2], atol=1e-12)


@given(feature_blocks())
def test_project_reconstruct_round_trip(x):
    b = fit_basis(x)
    np.testing.assert_allclose(reconstruct(b, project(b, x)), x, atol=1e-5)


def test_single_component_reconstruction_is_rank_one(rng):
    x = rng.standard_normal((4, 6, 2))
    b = fit_basis(x)
    z = np.zeros((4, 6, 2))
    z[2] = rng.standard_normal((6, 2))
    np.testing.assert_allclose(reconstruct(b, z), np.einsum("t,sc->tsc", b.P[2], z[2]), atol=1e-12)


def test_repeated_multiply_identity(rng):
    b = fit_basis(rng.standard_normal((5, 8, 3)))
    z = rng.standard_normal((5, 8, 3))
    once = reconstruct(b, z)
    again = reconstruct(b, project(b, once))
    np.testing.assert_allclose(again, once, atol=1e-5)


def test_shape_errors(rng):
    b = fit_basis(rng.standard_normal((4, 3, 2)))
    with pytest.raises(ShapeError):
        project(b, rng.standard_normal((3, 3, 2)))
    with pytest.raises(ShapeError):
        reconstruct(b, rng.standard_normal((5, 3, 2)))


def space(rows, basis_id="b"):
    return ComponentSpace(np.asarray(rows, dtype=float)[:, :, None], basis_id)


def test_cosine_identical_orthogonal_and_oblique():
    z = np.random.default_rng(3).standard_normal((4, 6, 2))
    r = component_cosine(ComponentSpace(z, "b"), ComponentSpace(z.copy(), "b"))
    np.testing.assert_allclose(r.similarities, 1.0, atol=1e-12)

    r = component_cosine(space([[1, 0]]), space([[0, 1]]))
    assert r.similarities[0] == 0.0

    r = component_cosine(space([[1, 1]]), space([[1, 0]]))
    assert r.similarities[0] == pytest.approx(cosine([1, 1], [1, 0]))
    assert r.similarities[0] == pytest.approx(0.70710678, abs=1e-8)


def test_cosine_dead_component_is_zero():
    r = component_cosine(space([[0, 0], [1, 2]]), space([[0, 0], [1, 2]]))
    assert r.similarities[0] == 0.0 and r.similarities[1] == pytest.approx(1.0)
    assert list(r.order) == [1, 0]


def test_cosine_errors():
    with pytest.raises(ShapeError):
        component_cosine(space([[1, 0]]), space([[1, 0, 0]]))
    with pytest.raises(ShapeError):
        component_cosine(space([[1, 0]], "a"), space([[1, 0]], "b"))


@given(st.lists(st.sampled_from([-1.0, -0.5, 0.0, 0.3, 0.3, 1.0]), min_size=1, max_size=10))
def test_ranking_order_is_descending_with_index_ties(sims):
    order = rank_descending(np.array(sims))
    assert sorted(order.tolist()) == list(range(len(sims)))
    for a, b in zip(order[:-1], order[1:]):
        assert sims[a] > sims[b] or (sims[a] == sims[b] and a < b)


def test_split_example_from_sort():
    sims = np.array([0.9, 0.1, 0.95, 0.5])
    zg = ComponentSpace(np.arange(4.0)[:, None, None] + 100, "b")
    zl = ComponentSpace(np.arange(4.0)[:, None, None], "b")
    split = split_components(zg, zl, SimilarityRanking(sims, rank_descending(sims)), 2)
    assert split.consistency_indices == (2, 0)
    assert split.motion_indices == (3, 1)
    np.testing.assert_array_equal(split.consistency[:, 0, 0], [102, 100])
    np.testing.assert_array_equal(split.motion[:, 0, 0], [3, 1])


@pytest.mark.parametrize("k", [0, 4])
def test_split_extremes(k):
    sims = np.array([0.2, 0.4, 0.1, 0.3])
    zg = ComponentSpace(np.ones((4, 2, 1)), "b")
    zl = ComponentSpace(np.zeros((4, 2, 1)), "b")
    split = split_components(zg, zl, SimilarityRanking(sims, rank_descending(sims)), k)
    assert len(split.consistency_indices) == k
    assert len(split.motion_indices) == 4 - k


@given(st.integers(2, 8), st.data())
def test_split_partitions(f, data):
    k = data.draw(st.integers(0, f))
    sims = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=f, max_size=f)))
    z = ComponentSpace(np.zeros((f, 1, 1)), "b")
    split = split_components(z, z, SimilarityRanking(sims, rank_descending(sims)), k)
    con, mot = set(split.consistency_indices), set(split.motion_indices)
    assert not con & mot and con | mot == set(range(f))


def test_split_k_out_of_range():
    z = ComponentSpace(np.zeros((3, 1, 1)), "b")
    r = SimilarityRanking(np.zeros(3), np.arange(3))
    with pytest.raises(DomainError):
        split_components(z, z, r, 4)
    with pytest.raises(DomainError):
        split_components(z, z, r, -1)


def test_normalization_variants(rng):
    x = rng.standard_normal((4, 20, 2)) * np.array([1, 2, 3, 4])[:, None, None] + 5
    for mode in ("center", "none", "standardize"):
        b = fit_basis(x, mode)
        np.testing.assert_allclose(b.P @ b.P.T, np.eye(4), atol=1e-10)
    cov, _ = covariance(x, "standardize")
    np.testing.assert_allclose(np.diag(cov), 1.0)
    with pytest.raises(ValueError):
        covariance(x, "whiten")
