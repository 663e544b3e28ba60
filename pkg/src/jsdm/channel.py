"""One-ring channel covariances for a uniform linear array.

Covers covariance synthesis, Karhunen-Loeve decomposition with a
dominant-rank policy, Gaussian channel draws and the DFT (Toeplitz ~
circulant) approximation used in the large-array regime.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.linalg import toeplitz

from .errors import InvalidParameterError

_GL_NODES = 256
_TRUNCATION_FLOOR = 1e-10
_HERMITIAN_TOL = 1e-9
_GL_RULE = np.polynomial.legendre.leggauss(_GL_NODES)


@dataclass(frozen=True)
class SystemGeometry:
    """Array geometry and power budget. Noise variance is fixed to 1."""

    num_antennas: int
    antenna_spacing: float = 0.5
    total_power: float = 1.0

    def __post_init__(self):
        if int(self.num_antennas) != self.num_antennas or self.num_antennas < 1:
            raise InvalidParameterError(f"num_antennas must be a positive integer, got {self.num_antennas}")
        if not self.antenna_spacing > 0:
            raise InvalidParameterError(f"antenna_spacing must be positive, got {self.antenna_spacing}")
        if not self.total_power > 0:
            raise InvalidParameterError(f"total_power must be positive, got {self.total_power}")

    @property
    def noise_variance(self) -> float:
        return 1.0


@dataclass(frozen=True)
class UserProfile:
    """Angle of arrival and angular spread of a user, both in radians."""

    aoa: float
    angular_spread: float

    def __post_init__(self):
        if not self.angular_spread > 0:
            raise InvalidParameterError(f"angular spread must be positive, got {self.angular_spread}")
        if not -np.pi / 2 < self.aoa < np.pi / 2:
            raise InvalidParameterError(f"aoa must lie in (-pi/2, pi/2), got {self.aoa}")

    @classmethod
    def from_degrees(cls, theta_deg: float, delta_deg: float) -> "UserProfile":
        return cls(np.deg2rad(theta_deg), np.deg2rad(delta_deg))

    @property
    def aoa_deg(self) -> float:
        return float(np.rad2deg(self.aoa))

    @property
    def spread_deg(self) -> float:
        return float(np.rad2deg(self.angular_spread))


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Covariance matrix with its truncated eigen-structure.

    ``eigvecs`` (M x r) and ``eigvals`` (r, descending) hold the non-negligible
    part of the spectrum; the first ``dominant_rank`` columns form U*.
    """

    matrix: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    dominant_rank: int

    @property
    def rank(self) -> int:
        return int(self.eigvals.size)

    @property
    def dominant_eigvecs(self) -> np.ndarray:
        return self.eigvecs[:, : self.dominant_rank]

    @property
    def dominant_eigvals(self) -> np.ndarray:
        return self.eigvals[: self.dominant_rank]

    def reconstruct(self) -> np.ndarray:
        return (self.eigvecs * self.eigvals) @ self.eigvecs.conj().T


@dataclass(frozen=True)
class ChannelVector:
    coeffs: np.ndarray
    innovation: np.ndarray


@dataclass(frozen=True, eq=False)
class DftSupport:
    """DFT frequency indices [lower, upper] (centered, inclusive) and the
    approximate eigenvalue attached to each of them."""

    lower: int
    upper: int
    eigvals_approx: np.ndarray = field(repr=False)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.lower, self.upper + 1)


def one_ring_covariance(profile: UserProfile, geom: SystemGeometry) -> np.ndarray:
    """Covariance of a ULA channel under the one-ring scattering model.

    ``R[m, p] = 1/(2*delta) * integral_{theta-delta}^{theta+delta}
    exp(-1j*2*pi*D*(m-p)*sin(a)) da``, evaluated for each lag with a fixed
    256-node Gauss-Legendre rule. The result is Hermitian Toeplitz with an
    exactly unit diagonal.
    """
    if not profile.angular_spread > 0:
        raise InvalidParameterError("angular spread must be positive")
    M = geom.num_antennas
    theta, delta = profile.aoa, profile.angular_spread
    x, w = _GL_RULE
    alpha = theta + delta * x  # maps [-1, 1] onto [theta - delta, theta + delta]
    lags = np.arange(M)
    # integral * 1/(2 delta) = (delta * sum w f) / (2 delta) = 0.5 * sum w f
    phase = np.exp(-2j * np.pi * geom.antenna_spacing * np.outer(lags, np.sin(alpha)))
    first_col = 0.5 * (phase @ w)
    first_col[0] = 1.0
    return toeplitz(first_col, first_col.conj())


def _dominant_count(eigvals: np.ndarray, policy) -> int:
    r = eigvals.size
    if r == 0:
        return 0
    if policy == "full" or policy is None:
        return r
    if isinstance(policy, tuple):
        kind, value = policy
    elif isinstance(policy, (int, np.integer)) and not isinstance(policy, bool):
        kind, value = "fixed", int(policy)
    elif isinstance(policy, float):
        kind, value = "energy", policy
    else:
        raise InvalidParameterError(f"unknown rank policy {policy!r}")
    if kind == "fixed":
        if not 1 <= value:
            raise InvalidParameterError("fixed dominant rank must be >= 1")
        return int(min(value, r))
    if kind == "energy":
        if not 0 < value <= 1:
            raise InvalidParameterError("energy fraction must lie in (0, 1]")
        cum = np.cumsum(eigvals)
        # smallest prefix whose energy reaches value * trace; slack guards round-off
        target = value * cum[-1] * (1 - 1e-12)
        return int(min(np.searchsorted(cum, target) + 1, r))
    raise InvalidParameterError(f"unknown rank policy {policy!r}")


def eigendecompose(matrix: np.ndarray, rank_policy: Union[str, float, int, tuple] = ("energy", 0.95)) -> CovarianceModel:
    """Eigen-decompose a Hermitian covariance.

    Parameters
    ----------
    matrix : (M, M) complex array
        Hermitian PSD matrix.
    rank_policy : {"full", ("energy", eta), ("fixed", r)}
        How many leading eigenvectors form the dominant subspace. A bare float
        is read as an energy fraction, a bare int as a fixed rank.

    Eigenvalues below ``1e-10 * lambda_max`` are dropped before the policy
    is applied.
    """
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidParameterError("covariance must be a square matrix")
    if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > _HERMITIAN_TOL:
        raise InvalidParameterError("covariance is not Hermitian")
    vals, vecs = np.linalg.eigh(matrix)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    lam_max = vals[0] if vals.size else 0.0
    keep = vals > _TRUNCATION_FLOOR * lam_max if lam_max > 0 else np.zeros(vals.size, bool)
    vals, vecs = vals[keep], vecs[:, keep]
    r_star = _dominant_count(vals, rank_policy)
    return CovarianceModel(matrix=matrix, eigvecs=vecs, eigvals=vals, dominant_rank=r_star)


def sample_channel(cov: CovarianceModel, rng: np.random.Generator, size: Optional[int] = None):
    """Draw h = U Lambda^{1/2} w with w ~ CN(0, I_r).

    With ``size`` set, returns an (M, size) array of independent columns
    instead of a single ChannelVector.
    """
    r = cov.rank
    shape = (r,) if size is None else (r, size)
    w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    scale = np.sqrt(cov.eigvals)
    h = cov.eigvecs @ (scale[:, None] * w if size is not None else scale * w)
    if size is not None:
        return h
    return ChannelVector(coeffs=h, innovation=w)


def approx_eigval(freq: np.ndarray, delta: float, spacing: float) -> np.ndarray:
    """Large-array eigenvalue density 1/(2 delta sqrt(D^2 - x^2)) at normalized frequency x."""
    freq = np.asarray(freq, dtype=float)
    return 1.0 / (2.0 * delta * np.sqrt(spacing**2 - freq**2))


def support_limits(profile: UserProfile, spacing: float) -> tuple[float, float]:
    """Normalized-frequency interval (-D sin(theta+delta), -D sin(theta-delta))."""
    lo = -spacing * np.sin(profile.aoa + profile.angular_spread)
    hi = -spacing * np.sin(profile.aoa - profile.angular_spread)
    return float(lo), float(hi)


def _snap(value: float, tol: float = 1e-9) -> float:
    # keep floor/ceil from jumping an index because of round-off
    nearest = np.round(value)
    return float(nearest) if abs(value - nearest) <= tol else float(value)


def dft_support(profile: UserProfile, geom: SystemGeometry, N: int = 1) -> DftSupport:
    """Indices of the DFT frequencies that carry the covariance's energy.

    ``geom.num_antennas`` is M; the array has M*N antennas.
    """
    if abs(profile.aoa) + profile.angular_spread >= np.pi / 2:
        raise InvalidParameterError("|aoa| + spread must stay below pi/2")
    n_total = geom.num_antennas * N
    D = geom.antenna_spacing
    lower = int(np.floor(_snap(-n_total * D * np.sin(profile.aoa + profile.angular_spread))))
    upper = int(np.ceil(_snap(-n_total * D * np.sin(profile.aoa - profile.angular_spread))))
    if lower <= -n_total / 2 or upper > n_total / 2:
        raise InvalidParameterError(f"support [{lower}, {upper}] exceeds (-{n_total}/2, {n_total}/2]")
    idx = np.arange(lower, upper + 1)
    freq = idx / n_total
    if np.any(np.abs(freq) >= D):
        raise InvalidParameterError("support reaches the |x| = D pole")
    vals = approx_eigval(freq, profile.angular_spread, D)
    return DftSupport(lower=lower, upper=upper, eigvals_approx=vals)


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT, column j holds exp(2j*pi*k*j/n)/sqrt(n)."""
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def dft_columns(n: int, indices) -> np.ndarray:
    """DFT columns for centered frequency indices (taken modulo n)."""
    idx = np.mod(np.asarray(indices, dtype=int), n)
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, idx) / n) / np.sqrt(n)


def dft_approx_covariance(profile: UserProfile, geom: SystemGeometry, N: int = 1) -> CovarianceModel:
    """Circulant approximation F Lambda_bar F^H restricted to the DFT support."""
    sup = dft_support(profile, geom, N)
    n_total = geom.num_antennas * N
    F = dft_columns(n_total, sup.indices)
    vals = sup.eigvals_approx
    order = np.argsort(-vals, kind="stable")
    vals, F = vals[order], F[:, order]
    matrix = (F * vals) @ F.conj().T
    return CovarianceModel(matrix=matrix, eigvecs=F, eigvals=vals, dominant_rank=vals.size)


def save_covariance(path, matrix: np.ndarray, profile: UserProfile, spacing: float) -> None:
    """Write a covariance as a header line ``M D theta_deg delta_deg`` then
    one row per matrix row with ``re,im`` pairs."""
    matrix = np.asarray(matrix, dtype=complex)
    M = matrix.shape[0]
    with open(path, "w") as fh:
        fh.write(f"{M} {float(spacing)!r} {float(profile.aoa_deg)!r} {float(profile.spread_deg)!r}\n")
        for row in matrix:
            fh.write(",".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row) + "\n")


def load_covariance(path):
    """Inverse of :func:`save_covariance`; returns (matrix, profile, spacing)."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise InvalidParameterError("covariance header must read 'M D theta_deg delta_deg'")
        M = int(header[0])
        spacing, theta_deg, delta_deg = map(float, header[1:])
        rows = [line for line in fh.read().splitlines() if line.strip()]
    if len(rows) != M:
        raise InvalidParameterError(f"expected {M} matrix rows, found {len(rows)}")
    data = np.array([[float(v) for v in row.split(",")] for row in rows])
    if data.shape != (M, 2 * M):
        raise InvalidParameterError("each row must hold M re,im pairs")
    matrix = data[:, 0::2] + 1j * data[:, 1::2]
    return matrix, UserProfile.from_degrees(theta_deg, delta_deg), spacing
