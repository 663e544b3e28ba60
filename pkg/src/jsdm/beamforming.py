"""Pre-beamformers (approximate block diagonalization) and MU-MIMO precoders."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve

from .errors import InfeasibleBDError, InvalidParameterError, SelectionInfeasibleError
from .subspace import sorted_eigh

_NULL_TOL = 1e-10
_COND_LIMIT = 1e10


@dataclass(frozen=True, eq=False)
class PrecoderStack:
    """Two-stage precoder of one pattern.

    ``pre_beamformers[g]`` is M x b_g; ``mu_precoders[g]`` is b_g x S_g (it
    already includes the normalization ``zeta[g]``) or None for opportunistic
    beamforming, where each pre-beamformer column is a beam with power
    ``per_stream_power``.
    """

    pre_beamformers: list
    mu_precoders: Optional[list] = None
    zeta: Optional[np.ndarray] = None
    per_stream_power: float = 1.0

    @property
    def num_groups(self) -> int:
        return len(self.pre_beamformers)


def bd_prebeamformer(group_subspaces: Sequence[np.ndarray], g: int, b_g: int,
                     others: Optional[Sequence[int]] = None) -> np.ndarray:
    """Pre-beamformer of group ``g`` orthogonal to the other groups' subspaces.

    The basis ``N0`` of the null space of the stacked subspaces of the
    ``others`` groups (all other groups by default) is computed by SVD; the
    returned ``N0 @ E`` keeps the ``b_g`` directions of that null space that
    capture the most energy of group g's own subspace.

    Raises
    ------
    InfeasibleBDError
        If the null space has fewer than ``b_g`` dimensions.
    """
    V_g = np.asarray(group_subspaces[g], dtype=complex)
    M = V_g.shape[0]
    if others is None:
        others = [j for j in range(len(group_subspaces)) if j != g]
    others = [j for j in others if j != g]
    if b_g < 1:
        raise InvalidParameterError("b_g must be positive")
    if others:
        stacked = np.hstack([np.asarray(group_subspaces[j], dtype=complex) for j in others])
        U, s, _ = np.linalg.svd(stacked, full_matrices=True)
        rank = int(np.sum(s > _NULL_TOL * max(1.0, s[0]))) if s.size else 0
        null_basis = U[:, rank:]
    else:
        stacked = np.zeros((M, 0), dtype=complex)
        null_basis = np.eye(M, dtype=complex)
    null_dim = null_basis.shape[1]
    if null_dim < b_g:
        if stacked.shape[1]:
            overlap_rank = np.linalg.matrix_rank(stacked.conj().T @ V_g, tol=1e-9)
        else:
            overlap_rank = 0
        raise InfeasibleBDError(
            f"group {g}: null space of the other groups has dimension {null_dim} < b_g = {b_g} "
            f"(deficit {b_g - null_dim}); dim of the group subspace outside the others' span "
            f"= {V_g.shape[1] - overlap_rank}")
    projected = null_basis.conj().T @ V_g
    _, vecs = sorted_eigh(projected @ projected.conj().T)
    return null_basis @ vecs[:, :b_g]


def bd_prebeamformers(group_subspaces: Sequence[np.ndarray], budgets: Sequence[int],
                      active: Optional[Sequence[int]] = None) -> list:
    """Pre-beamformers for the ``active`` groups (all by default), each
    orthogonal to the other active groups only."""
    active = list(range(len(group_subspaces))) if active is None else list(active)
    return [bd_prebeamformer(group_subspaces, g, budgets[g], others=active) for g in active]


def zfbf_precoder(effective_channel: np.ndarray, S_g: Optional[int] = None, N: int = 1,
                  tall_unitary_B: bool = True, pre_beamformer: Optional[np.ndarray] = None,
                  normalization: str = "zeta"):
    """Zero-forcing precoder on an effective channel.

    Parameters
    ----------
    effective_channel : (b_g, n) array
        Columns are the effective channels Bᴴ h of the n = S_g * N served users.
    tall_unitary_B : bool
        The pre-beamformer has orthonormal columns, so the trace-inverse
        normalization applies; otherwise ``pre_beamformer`` is needed.
    normalization : {"zeta", "column"}
        ``"zeta"`` scales the whole precoder so that its power is n (one unit
        per user); ``"column"`` gives each column unit norm and returns
        ``zeta = None``.

    Returns
    -------
    precoder : (b_g, n) array
    zeta : float or None
    """
    H = np.asarray(effective_channel, dtype=complex)
    if H.ndim == 1:
        H = H[:, None]
    n = H.shape[1]
    if S_g is not None and S_g * N != n:
        raise InvalidParameterError(f"effective channel has {n} columns, expected S_g*N = {S_g * N}")
    if n == 0:
        return np.zeros((H.shape[0], 0), dtype=complex), 0.0
    if n > H.shape[0]:
        raise SelectionInfeasibleError(f"{n} users exceed the {H.shape[0]} available dimensions")
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond >= _COND_LIMIT:
        raise SelectionInfeasibleError(f"effective channel is rank deficient (condition number {cond:.3e})")
    gram = H.conj().T @ H
    # H gram^{-1} without forming the inverse
    pinv_t = solve(gram, H.conj().T, assume_a="her").conj().T
    if normalization == "column":
        return pinv_t / np.linalg.norm(pinv_t, axis=0), None
    if normalization != "zeta":
        raise InvalidParameterError(f"unknown normalization {normalization!r}")
    if tall_unitary_B:
        denom = np.real(np.trace(solve(gram, np.eye(n), assume_a="her")))
    else:
        if pre_beamformer is None:
            raise InvalidParameterError("pre_beamformer required when tall_unitary_B is False")
        denom = np.linalg.norm(np.asarray(pre_beamformer) @ pinv_t) ** 2
    zeta = float(np.sqrt(n / denom))
    return zeta * pinv_t, zeta


def zf_stack(pre_beamformers: Sequence[np.ndarray], channels: Sequence[np.ndarray], total_power: float,
             normalization: str = "zeta") -> PrecoderStack:
    """Per-group ZF precoders for the users whose channels (M x n_g) are given.

    Power is split equally, ``per_stream_power = P / sum_g n_g``.
    """
    precoders, zetas = [], []
    for B, Hg in zip(pre_beamformers, channels):
        P_g, z = zfbf_precoder(B.conj().T @ Hg, normalization=normalization)
        precoders.append(P_g)
        zetas.append(np.nan if z is None else z)
    served = sum(np.asarray(Hg).shape[1] for Hg in channels)
    p_u = total_power / served if served else 0.0
    return PrecoderStack(list(pre_beamformers), precoders, np.asarray(zetas), p_u)


def beam_sinr_table(channels: np.ndarray, pre_beamformers: Sequence[np.ndarray], g: int, rho: float) -> np.ndarray:
    """SINR of every user (columns of ``channels``) on every beam of group g.

    Beam m of group g sees interference from the other beams of g and from
    all beams of the other groups, each beam carrying power ``rho``.
    """
    if not rho > 0:
        raise InvalidParameterError("rho must be positive")
    H = np.asarray(channels, dtype=complex)
    if H.ndim == 1:
        H = H[:, None]
    own = np.abs(pre_beamformers[g].conj().T @ H) ** 2  # b_g x K
    inter = sum((np.abs(B.conj().T @ H) ** 2).sum(axis=0)
                for j, B in enumerate(pre_beamformers) if j != g) if len(pre_beamformers) > 1 else 0.0
    intra = own.sum(axis=0) - own
    return (own / (1.0 / rho + intra + inter)).T


def beam_sinr(h: np.ndarray, stack: PrecoderStack, g: int, m: int, rho: Optional[float] = None) -> float:
    """SINR of a user with channel ``h`` on beam ``m`` of group ``g``."""
    rho = stack.per_stream_power if rho is None else rho
    return float(beam_sinr_table(np.asarray(h)[:, None], stack.pre_beamformers, g, rho)[0, m])


def zf_sinr_all(channels: np.ndarray, stack: PrecoderStack, g: int) -> np.ndarray:
    """ZF SINR of users of group g (columns of ``channels``) on streams of g.

    Returns a (K, S_g) array: entry (k, j) is the SINR user k would see on
    stream j, ``Pu |hᴴ B_g p_j|^2 / (1 + Pu sum_{g' != g} ||hᴴ B_g' P_g'||^2)``.
    """
    H = np.asarray(channels, dtype=complex)
    if H.ndim == 1:
        H = H[:, None]
    p_u = stack.per_stream_power
    signal = np.abs(H.conj().T @ stack.pre_beamformers[g] @ stack.mu_precoders[g]) ** 2
    interference = np.zeros(H.shape[1])
    for j, (B, P) in enumerate(zip(stack.pre_beamformers, stack.mu_precoders)):
        if j != g and P.shape[1]:
            interference += (np.abs(H.conj().T @ B @ P) ** 2).sum(axis=1)
    return p_u * signal / (1.0 + p_u * interference[:, None])


def zf_sinr(h: np.ndarray, stack: PrecoderStack, g: int, k: int) -> float:
    """ZF SINR of the k-th selected user of group g with channel ``h``."""
    if stack.mu_precoders is None or not 0 <= k < stack.mu_precoders[g].shape[1]:
        raise InvalidParameterError(f"user {k} is not among the selected users of group {g}")
    return float(zf_sinr_all(np.asarray(h)[:, None], stack, g)[0, k])
