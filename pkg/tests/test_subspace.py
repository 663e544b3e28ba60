import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jsdm.errors import InvalidParameterError
from jsdm.subspace import (chordal_distance, chordal_distance_matrix, dft_block_subspaces, orthonormal,
                           projector, sorted_eigh, subspace_mean)


def random_basis(rng, M, p):
    A = rng.standard_normal((M, p)) + 1j * rng.standard_normal((M, p))
    return np.linalg.qr(A)[0]


def random_unitary(rng, p):
    return random_basis(rng, p, p)


seeds = st.integers(0, 2**32 - 1)


def test_distance_to_itself_is_zero():
    X = random_basis(np.random.default_rng(0), 6, 2)
    assert chordal_distance(X, X) == pytest.approx(0.0, abs=1e-12)


def test_orthogonal_subspaces():
    Q = random_unitary(np.random.default_rng(1), 6)
    assert chordal_distance(Q[:, :3], Q[:, 3:]) == pytest.approx(6.0)


def test_matches_projector_difference():
    rng = np.random.default_rng(2)
    X, Y = random_basis(rng, 8, 2), random_basis(rng, 8, 3)
    oracle = np.linalg.norm(X @ X.conj().T - Y @ Y.conj().T, "fro") ** 2
    assert chordal_distance(X, Y) == pytest.approx(oracle, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_distance_properties(seed, p, q):
    rng = np.random.default_rng(seed)
    X, Y = random_basis(rng, 8, p), random_basis(rng, 8, q)
    d = chordal_distance(X, Y)
    assert d == pytest.approx(chordal_distance(Y, X), abs=1e-12)
    assert abs(p - q) - 1e-10 <= d <= p + q + 1e-10
    assert chordal_distance(X @ random_unitary(rng, p), Y @ random_unitary(rng, q)) == pytest.approx(d, abs=1e-10)


def test_distance_matrix_matches_pairwise():
    rng = np.random.default_rng(3)
    xs = [random_basis(rng, 6, p) for p in (1, 2, 3, 2)]
    ys = [random_basis(rng, 6, q) for q in (2, 1, 3)]
    D = chordal_distance_matrix(xs, ys)
    for i, X in enumerate(xs):
        for j, Y in enumerate(ys):
            assert D[i, j] == pytest.approx(chordal_distance(X, Y), abs=1e-12)


def test_orthonormal_rejects_bad_basis():
    with pytest.raises(InvalidParameterError):
        orthonormal(np.array([[1.0, 1.0], [0.0, 1.0]]))
    np.testing.assert_allclose(projector(np.eye(3)[:, :1]), np.diag([1.0, 0, 0]))


def test_mean_of_one_subspace():
    U = random_basis(np.random.default_rng(4), 8, 3)
    assert chordal_distance(subspace_mean([U], 3), U) == pytest.approx(0.0, abs=1e-10)
    assert chordal_distance(subspace_mean([U, U], 3), U) == pytest.approx(0.0, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 5))
def test_mean_of_copies_is_exact_projector(seed, copies):
    U = random_basis(np.random.default_rng(seed), 7, 2)
    V = subspace_mean([U] * copies, 2)
    np.testing.assert_allclose(projector(V), projector(U), atol=1e-10)


def test_mean_tie_break_on_orthogonal_pair():
    e1, e2 = np.eye(4)[:, :1], np.eye(4)[:, 1:2]
    V = subspace_mean([e1, e2], 1)
    # brute-force eigensolve in the (e1, e2) coordinates: the averaged projector is I/2 there
    coords = np.vstack([e1.T, e2.T]) @ V
    vals = np.linalg.eigvalsh(0.5 * np.eye(2))
    np.testing.assert_allclose(vals, [0.5, 0.5])
    assert np.linalg.norm(coords) == pytest.approx(1.0)
    assert chordal_distance(V, e1) == pytest.approx(0.0, abs=1e-12)
    # the same call is reproducible
    np.testing.assert_array_equal(V, subspace_mean([e1, e2], 1))


def test_sorted_eigh_is_descending_and_phase_fixed():
    rng = np.random.default_rng(5)
    A = random_basis(rng, 5, 5)
    H = A @ np.diag([3.0, 2.0, 2.0, 1.0, 0.5]) @ A.conj().T
    vals, vecs = sorted_eigh(H)
    assert np.all(np.diff(vals) <= 1e-12)
    lead = vecs[np.argmax(np.abs(vecs), axis=0), np.arange(5)]
    np.testing.assert_allclose(lead.imag, 0, atol=1e-12)
    assert np.all(lead.real > 0)


def test_disjoint_blocks_are_orthogonal():
    blocks = dft_block_subspaces(9, 3, 3)
    D = chordal_distance_matrix(blocks, blocks)
    np.testing.assert_allclose(D[~np.eye(3, dtype=bool)], 6.0, atol=1e-10)


def test_wrapped_blocks_at_m8():
    F = np.exp(2j * np.pi * np.outer(np.arange(8), np.arange(8)) / 8) / np.sqrt(8)
    blocks = dft_block_subspaces(8, 8, 1, "wrapped")
    for g, B in enumerate(blocks):
        np.testing.assert_allclose(B, F[:, [g % 8, (g + 1) % 8]], atol=1e-12)


def test_wrapped_blocks_at_m16():
    blocks = dft_block_subspaces(16, 8, 2, "wrapped")
    F = np.exp(2j * np.pi * np.outer(np.arange(16), np.arange(16)) / 16) / np.sqrt(16)
    assert all(B.shape == (16, 4) for B in blocks)
    np.testing.assert_allclose(blocks[7], F[:, [14, 15, 0, 1]], atol=1e-12)


def test_block_rules_validate():
    with pytest.raises(InvalidParameterError):
        dft_block_subspaces(8, 3, 3)
    with pytest.raises(InvalidParameterError):
        dft_block_subspaces(8, 2, 1, "staggered")
