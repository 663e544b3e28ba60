"""Closed-form SINR statistics of opportunistic group beamforming.

A user's SINR on a beam exceeds ``x`` exactly when the quadratic form
``wᴴ (A1 - x A2) w - x/rho`` is positive, with ``w`` standard complex
Gaussian. The tail probability therefore follows from the eigenvalues of
``A(x) = A1 - x A2``; this module evaluates it, its growth function and the
sum-rate scaling bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect

from .errors import ConvergenceError, InvalidParameterError

_DEGENERACY_GAP = 1e-9
_LEMMA_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SinrSpectral:
    """Matrices A1 (rank one) and A2 of a beam, and its per-beam power rho."""

    a1: np.ndarray
    a2: np.ndarray
    rho: float
    contour_offset: Optional[float] = None

    def matrix(self, x: float) -> np.ndarray:
        return self.a1 - x * self.a2

    def mu(self, x: float) -> np.ndarray:
        """Eigenvalues of A1 - x A2 in descending order."""
        A = self.matrix(x)
        return np.linalg.eigvalsh(0.5 * (A + A.conj().T))[::-1]

    @property
    def signal_vector(self) -> np.ndarray:
        """u with A1 = u uᴴ."""
        vals, vecs = np.linalg.eigh(0.5 * (self.a1 + self.a1.conj().T))
        return vecs[:, -1] * np.sqrt(max(vals[-1], 0.0))

    @property
    def mu_star(self) -> float:
        """lim_{x -> inf} of the leading eigenvalue: ||P u||^2 with P the
        projector onto the null space of A2."""
        vals, vecs = np.linalg.eigh(0.5 * (self.a2 + self.a2.conj().T))
        scale = max(np.max(np.abs(vals)), 1e-300)
        null = vecs[:, np.abs(vals) <= 1e-10 * scale]
        u = self.signal_vector
        return float(np.linalg.norm(null.conj().T @ u) ** 2)


def build_a_matrices(eigvecs: np.ndarray, eigvals: np.ndarray, pre_beamformers: Sequence[np.ndarray],
                     g: int, m: int, rho: float) -> SinrSpectral:
    """A-matrices of beam ``m`` of group ``g`` for a user with covariance
    ``U diag(eigvals) Uᴴ``. Interference comes from the other beams of g and
    from every beam of the other groups in ``pre_beamformers``."""
    W = np.sqrt(np.asarray(eigvals, dtype=float))[:, None] * np.asarray(eigvecs).conj().T  # r x M
    proj = [W @ B for B in pre_beamformers]
    own = proj[g]
    signal = own[:, m:m + 1]
    a1 = signal @ signal.conj().T
    rest = np.delete(own, m, axis=1)
    a2 = rest @ rest.conj().T
    for j, P in enumerate(proj):
        if j != g:
            a2 = a2 + P @ P.conj().T
    return SinrSpectral(a1=a1, a2=a2, rho=float(rho))


def _contour_ccdf(x: float, spectral: SinrSpectral, mu: np.ndarray) -> float:
    positive = mu[mu > 0]
    if positive.size == 0:
        return 0.0
    scale = float(np.max(np.abs(mu)))
    nu = mu / scale  # dimensionless eigenvalues, s = sigma / scale
    if spectral.contour_offset is not None:
        c = spectral.contour_offset * scale
    else:
        c = 0.5 / np.max(nu)
    if not 0 < c < 1.0 / np.max(nu):
        raise InvalidParameterError("contour offset must lie strictly between 0 and 1/mu_1")
    t = x / (spectral.rho * scale)

    def integrand(w):
        s = c + 1j * w
        return (np.exp(-s * t) / (s * np.prod(1.0 - s * nu))).real

    total, lo, width = 0.0, 0.0, 50.0
    for _ in range(60):
        piece, _ = quad(integrand, lo, lo + width, limit=400, epsabs=1e-13, epsrel=1e-11)
        total += piece
        lo += width
        if abs(piece) < 1e-11 and lo > 1e3:
            break
        width *= 2.0
    else:
        raise ConvergenceError("contour integral did not settle", residual=abs(piece))
    return float(min(max(total / np.pi, 0.0), 1.0))


def sinr_ccdf(x: float, spectral: SinrSpectral, with_method: bool = False):
    """P(SINR > x) from the residue at the leading eigenvalue.

    ``exp(-x/(rho mu_1)) / prod_{i>=2} (1 - mu_i/mu_1)`` with mu the
    eigenvalues of A1 - x A2. When the leading eigenvalue is not simple the
    inverse-Laplace contour integral is evaluated numerically instead; pass
    ``with_method=True`` to also get ``"residue"`` or ``"contour"``.
    """
    if x < 0:
        raise InvalidParameterError("x must be non-negative")
    if x == 0:
        return (1.0, "residue") if with_method else 1.0
    mu = spectral.mu(x)
    mu1 = mu[0]
    if mu1 <= 0:
        value, method = 0.0, "residue"
    elif mu.size > 1 and mu1 - mu[1] <= _DEGENERACY_GAP * abs(mu1):
        value, method = _contour_ccdf(x, spectral, mu), "contour"
    else:
        value = float(np.exp(-x / (spectral.rho * mu1)) / np.prod(1.0 - mu[1:] / mu1))
        method = "residue"
    return (value, method) if with_method else value


def contour_ccdf(x: float, spectral: SinrSpectral) -> float:
    """P(SINR > x) by direct numerical inversion along Re(s) = c."""
    if x == 0:
        return 1.0
    return _contour_ccdf(x, spectral, spectral.mu(x))


@dataclass(frozen=True)
class LemmaReport:
    passed: bool
    min_leading: float
    max_trailing: float
    violations: list = field(default_factory=list)

    @property
    def min_margin(self) -> float:
        """Smallest slack over both conditions (negative when violated)."""
        return min(self.min_leading, _LEMMA_TOL - self.max_trailing)


def lemma_checks(spectral: SinrSpectral, x_grid: Sequence[float]) -> LemmaReport:
    """Check mu_1(x) > 0 and mu_i(x) <= 1e-10 (i >= 2) on a grid of x."""
    violations = []
    min_lead, max_trail = np.inf, -np.inf
    for x in x_grid:
        mu = spectral.mu(float(x))
        min_lead = min(min_lead, mu[0])
        if mu[0] <= 0:
            violations.append((float(x), 1, float(mu[0])))
        if mu.size > 1:
            max_trail = max(max_trail, float(np.max(mu[1:])))
            for i in np.flatnonzero(mu[1:] > _LEMMA_TOL):
                violations.append((float(x), int(i) + 2, float(mu[i + 1])))
    if max_trail == -np.inf:
        max_trail = 0.0
    return LemmaReport(not violations, float(min_lead), float(max_trail), violations)


def _mu_derivative(spectral: SinrSpectral, x: float) -> tuple[np.ndarray, np.ndarray]:
    step = 1e-4 * x
    return spectral.mu(x), (spectral.mu(x + step) - spectral.mu(x - step)) / (2 * step)


def growth_function(x: float, spectral: SinrSpectral) -> float:
    """g(x) = (1 - F(x)) / f(x) from the eigenvalue trajectories and their
    central-difference derivatives."""
    if not x > 0:
        raise InvalidParameterError("growth function needs x > 0")
    mu, dmu = _mu_derivative(spectral, x)
    mu1, d1 = mu[0], dmu[0]
    if mu1 <= 0:
        raise InvalidParameterError(f"leading eigenvalue is not positive at x = {x}")
    rho = spectral.rho
    denom = 1.0 / (rho * mu1) - x * d1 / (rho * mu1**2)
    rest, drest = mu[1:], dmu[1:]
    denom += float(np.sum((d1 * rest - mu1 * drest) / ((mu1 - rest) * mu1)))
    return 1.0 / denom


def growth_limit(spectral: SinrSpectral, x_values: Sequence[float] = (1e3, 1e4), rtol: float = 1e-3) -> float:
    """Plateau of the growth function, rho * mu*.

    Raises ConvergenceError when g drifts by more than ``rtol`` (relative)
    between the last two points of ``x_values``.
    """
    g = [growth_function(float(x), spectral) for x in x_values]
    drift = abs(g[-1] - g[-2]) / abs(g[-1])
    if drift > rtol:
        raise ConvergenceError(
            f"growth function has not settled: g({x_values[-2]:g}) = {g[-2]:.6g}, "
            f"g({x_values[-1]:g}) = {g[-1]:.6g}, relative drift {drift:.2e}", residual=drift)
    return spectral.rho * spectral.mu_star


@dataclass(frozen=True, eq=False)
class ScalingReport:
    beta: int
    kprime: np.ndarray
    upper_bound: np.ndarray
    achievable_prediction: Optional[np.ndarray] = None
    mc_mean: Optional[np.ndarray] = None
    mc_stderr: Optional[np.ndarray] = None


def theorem1_bounds(M: int, group_eigvals: Sequence[Sequence[float]], P: float, kprime) -> ScalingReport:
    """Leading-order sum-capacity upper bound for K' users per group.

    ``group_eigvals[g]`` holds the r_g positive eigenvalues of group g. With
    R = sum r_g: if M > R the bound is sum_g log det Lambda_g + R (log log K'
    + log(P/R)); otherwise M log lambda_max + M log(P/M) + M log log K'.
    """
    k = np.atleast_1d(np.asarray(kprime, dtype=float))
    if np.any(k < 2):
        raise InvalidParameterError("K' must be at least 2")
    spectra = [np.asarray(v, dtype=float) for v in group_eigvals]
    if any(np.any(v <= 0) for v in spectra):
        raise InvalidParameterError("eigenvalues must be positive")
    total_rank = int(sum(v.size for v in spectra))
    loglog = np.log(np.log(k))
    if M > total_rank:
        bound = sum(np.sum(np.log(v)) for v in spectra) + total_rank * (loglog + np.log(P / total_rank))
    else:
        lam_max = max(np.max(v) for v in spectra)
        bound = M * np.log(lam_max) + M * np.log(P / M) + M * loglog
    return ScalingReport(beta=min(M, total_rank), kprime=k, upper_bound=np.asarray(bound, dtype=float))


def extreme_value_prediction(ccdf: Callable[[float], float], kprime: float,
                             rho_mu_star: Optional[float] = None) -> tuple[float, Optional[float]]:
    """Solve 1 - F(u) = 1/K' for u by bisection.

    Returns ``(u, rho_mu_star * log K')``; the second entry is None when
    ``rho_mu_star`` is not given.
    """
    target = 1.0 / kprime
    hi = 1.0
    while ccdf(hi) > target:
        hi *= 2.0
        if hi > 1e9:
            raise ConvergenceError("no bracket for the tail quantile below 1e9")
    u = bisect(lambda x: ccdf(x) - target, 0.0, hi, xtol=1e-8, maxiter=500)
    first_order = None if rho_mu_star is None else rho_mu_star * np.log(kprime)
    return float(u), first_order
