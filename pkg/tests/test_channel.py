import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.linalg import toeplitz

from jsdm.channel import (SystemGeometry, UserProfile, approx_eigval, dft_columns, dft_approx_covariance,
                          dft_matrix, dft_support, eigendecompose, load_covariance, one_ring_covariance,
                          sample_channel, save_covariance)
from jsdm.errors import InvalidParameterError
from jsdm.subspace import chordal_distance

profiles = st.builds(UserProfile.from_degrees, st.floats(-60, 60), st.floats(1, 20))


def test_single_antenna_covariance_is_one():
    R = one_ring_covariance(UserProfile.from_degrees(30, 10), SystemGeometry(1))
    np.testing.assert_array_equal(R, [[1.0]])


def test_diagonal_is_exactly_one():
    R = one_ring_covariance(UserProfile.from_degrees(30, 10), SystemGeometry(4))
    np.testing.assert_array_equal(np.diag(R), np.ones(4))


def test_off_diagonal_matches_adaptive_quadrature():
    delta = np.deg2rad(15)
    R = one_ring_covariance(UserProfile(0.0, delta), SystemGeometry(2))

    def part(fn):
        return quad(lambda a: fn(np.exp(-2j * np.pi * 0.5 * np.sin(a))), -delta, delta, epsabs=1e-13)[0]

    expected = (part(np.real) + 1j * part(np.imag)) / (2 * delta)
    assert abs(R[1, 0] - expected) < 1e-8


@settings(max_examples=40, deadline=None)
@given(profiles, st.integers(1, 24))
def test_covariance_structure(profile, M):
    R = one_ring_covariance(profile, SystemGeometry(M))
    np.testing.assert_allclose(R, R.conj().T, atol=1e-14)
    np.testing.assert_array_equal(np.real(np.diag(R)), np.ones(M))
    assert np.linalg.eigvalsh(R).min() >= -1e-10
    np.testing.assert_allclose(R, toeplitz(R[:, 0], R[0, :]), atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(profiles, st.integers(1, 24))
def test_decomposition_reconstructs(profile, M):
    cov = eigendecompose(one_ring_covariance(profile, SystemGeometry(M)), "full")
    assert np.linalg.norm(cov.reconstruct() - cov.matrix) < 1e-9


def test_identity_full_policy():
    cov = eigendecompose(np.eye(4), "full")
    assert cov.rank == 4 and cov.dominant_rank == 4
    np.testing.assert_allclose(cov.eigvals, np.ones(4))


def test_rank_one_outer_product():
    u = np.exp(1j * np.arange(6))  # |u|^2 = M
    cov = eigendecompose(np.outer(u, u.conj()), "full")
    assert cov.rank == 1
    assert cov.eigvals[0] == pytest.approx(6.0)


def test_energy_policy_matches_prefix_oracle():
    R = one_ring_covariance(UserProfile.from_degrees(0, 10), SystemGeometry(8))
    vals = np.sort(np.linalg.eigvalsh(R))[::-1]
    share = np.cumsum(vals) / vals.sum()
    expected = int(np.argmax(share >= 0.95)) + 1
    assert eigendecompose(R, ("energy", 0.95)).dominant_rank == expected
    assert eigendecompose(R, 0.95).dominant_rank == expected


def test_fixed_policy_and_bad_inputs():
    R = one_ring_covariance(UserProfile.from_degrees(10, 10), SystemGeometry(8))
    assert eigendecompose(R, ("fixed", 3)).dominant_rank == 3
    assert eigendecompose(R, 3).dominant_rank == 3
    with pytest.raises(InvalidParameterError):
        eigendecompose(R, ("energy", 1.5))
    with pytest.raises(InvalidParameterError):
        eigendecompose(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_sampling_is_reproducible():
    cov = eigendecompose(one_ring_covariance(UserProfile.from_degrees(20, 10), SystemGeometry(8)))
    a = sample_channel(cov, np.random.default_rng(11))
    b = sample_channel(cov, np.random.default_rng(11))
    np.testing.assert_array_equal(a.coeffs, b.coeffs)


def test_samples_live_in_the_eigenspace():
    cov = eigendecompose(np.diag([2.0, 1.0, 0.0, 0.0]).astype(complex), "full")
    h = sample_channel(cov, np.random.default_rng(0), size=50)
    np.testing.assert_allclose(h[2:], 0, atol=1e-10)


def test_sample_covariance_converges():
    R = one_ring_covariance(UserProfile.from_degrees(-15, 12), SystemGeometry(4))
    h = sample_channel(eigendecompose(R, "full"), np.random.default_rng(3), size=10_000)
    empirical = h @ h.conj().T / h.shape[1]
    assert np.linalg.norm(empirical - R) / np.linalg.norm(R) < 0.05


def test_support_for_vanishing_spread():
    sup = dft_support(UserProfile(0.0, 1e-15), SystemGeometry(64))
    assert (sup.lower, sup.upper) == (0, 0)


def test_support_matches_direct_evaluation():
    theta, delta, n = np.deg2rad(45), np.deg2rad(10), 64
    sup = dft_support(UserProfile(theta, delta), SystemGeometry(64))
    assert sup.lower == int(np.floor(-n * 0.5 * np.sin(theta + delta)))
    assert sup.upper == int(np.ceil(-n * 0.5 * np.sin(theta - delta)))


def test_support_uses_full_array_size():
    p = UserProfile.from_degrees(20, 5)
    assert dft_support(p, SystemGeometry(16), N=4).lower == dft_support(p, SystemGeometry(64)).lower


def test_approx_eigval_at_zero_frequency():
    delta = np.deg2rad(7)
    assert approx_eigval(0.0, delta, 0.5) == pytest.approx(1 / (2 * delta * 0.5))
    sup = dft_support(UserProfile(0.0, delta), SystemGeometry(32))
    assert sup.eigvals_approx[list(sup.indices).index(0)] == pytest.approx(1 / (2 * delta * 0.5))


def test_dft_helpers_agree():
    F = dft_matrix(8)
    np.testing.assert_allclose(F.conj().T @ F, np.eye(8), atol=1e-12)
    np.testing.assert_allclose(dft_columns(8, [-1, 0, 3]), F[:, [7, 0, 3]], atol=1e-12)


@pytest.mark.parametrize("theta,delta", [(20, 10), (-35, 8), (5, 15)])
def test_dft_eigenspace_approximation_improves_with_size(theta, delta):
    profile = UserProfile.from_degrees(theta, delta)
    distances = []
    for n in (32, 64, 128):
        approx = dft_approx_covariance(profile, SystemGeometry(n))
        exact = eigendecompose(one_ring_covariance(profile, SystemGeometry(n)), ("fixed", approx.rank))
        # normalized by rank so that growing supports compare fairly
        distances.append(chordal_distance(exact.dominant_eigvecs, approx.eigvecs) / approx.rank)
    assert distances[0] > distances[1] > distances[2]


def test_covariance_file_roundtrip(tmp_path):
    profile = UserProfile.from_degrees(12.5, 7.0)
    R = one_ring_covariance(profile, SystemGeometry(5))
    save_covariance(tmp_path / "cov.txt", R, profile, 0.5)
    R2, profile2, spacing = load_covariance(tmp_path / "cov.txt")
    np.testing.assert_array_equal(R, R2)
    assert profile2.aoa_deg == pytest.approx(12.5) and spacing == 0.5
