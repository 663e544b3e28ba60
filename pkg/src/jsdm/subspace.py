"""Grassmannian primitives: chordal distance, subspace mean, DFT block subspaces."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .channel import dft_columns
from .errors import InvalidParameterError

_ORTHO_TOL = 1e-10


def orthonormal(basis: np.ndarray, check: bool = True) -> np.ndarray:
    """Return ``basis`` as a 2-D complex array, optionally checking XᴴX = I."""
    X = np.asarray(basis, dtype=complex)
    if X.ndim == 1:
        X = X[:, None]
    if check and X.shape[1] > 0:
        err = np.max(np.abs(X.conj().T @ X - np.eye(X.shape[1])))
        if err > _ORTHO_TOL:
            raise InvalidParameterError(f"basis is not column-orthonormal (error {err:.2e})")
    return X


def projector(basis: np.ndarray) -> np.ndarray:
    X = orthonormal(basis, check=False)
    return X @ X.conj().T


def chordal_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Squared Frobenius distance between the projectors onto span(x) and span(y).

    Computed as ``p + q - 2 ||xᴴ y||_F^2`` which avoids forming M x M projectors.
    """
    X = orthonormal(x, check=False)
    Y = orthonormal(y, check=False)
    if X.shape[0] != Y.shape[0]:
        raise InvalidParameterError(f"ambient dimensions differ: {X.shape[0]} vs {Y.shape[0]}")
    cross = np.linalg.norm(X.conj().T @ Y) ** 2
    return float(max(X.shape[1] + Y.shape[1] - 2.0 * cross, 0.0))


def chordal_distance_matrix(xs: Sequence[np.ndarray], ys: Sequence[np.ndarray]) -> np.ndarray:
    """All pairwise chordal distances, shape (len(xs), len(ys))."""
    xs = [orthonormal(X, check=False) for X in xs]
    ys = [orthonormal(Y, check=False) for Y in ys]
    out = np.empty((len(xs), len(ys)))
    if not xs or not ys:
        return out
    if len({X.shape[0] for X in xs} | {Y.shape[0] for Y in ys}) != 1:
        raise InvalidParameterError("ambient dimensions differ")

    def buckets(bases):
        groups = {}
        for i, B in enumerate(bases):
            groups.setdefault(B.shape[1], []).append(i)
        return groups

    for p, rows in buckets(xs).items():
        X = np.stack([xs[i] for i in rows])
        for q, cols in buckets(ys).items():
            Y = np.stack([ys[j] for j in cols])
            cross = (np.abs(np.einsum("amp,bmq->abpq", X.conj(), Y)) ** 2).sum(axis=(2, 3))
            out[np.ix_(rows, cols)] = p + q - 2.0 * cross
    return np.maximum(out, 0.0)


def sorted_eigh(matrix: np.ndarray, decimals: int = 12):
    """Hermitian eigendecomposition in a reproducible order.

    Each eigenvector's phase is fixed so that its largest-magnitude entry is
    real positive; pairs are then sorted by eigenvalue (descending, rounded to
    ``decimals``) and, among ties, lexicographically on the rounded entries.
    """
    vals, vecs = np.linalg.eigh(matrix)
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        lead = np.argmax(np.round(np.abs(v), decimals))
        if abs(v[lead]) > 0:
            vecs[:, j] = v * (abs(v[lead]) / v[lead])
    keys = []
    for j in range(vecs.shape[1]):
        entries = np.round(vecs[:, j], decimals) + 0.0  # drop signed zeros
        flat = tuple(np.column_stack([entries.real, entries.imag]).ravel())
        keys.append((-np.round(vals[j], decimals), tuple(-e for e in flat)))
    order = sorted(range(len(keys)), key=lambda j: keys[j])
    return vals[order], vecs[:, order]


def subspace_mean(subspaces: Sequence[np.ndarray], target_rank: int) -> np.ndarray:
    """p dominant eigenvectors of the averaged projector (1/n) sum U Uᴴ."""
    if len(subspaces) == 0:
        raise InvalidParameterError("cannot average an empty list of subspaces")
    bases = [orthonormal(U, check=False) for U in subspaces]
    M = bases[0].shape[0]
    if any(U.shape[0] != M for U in bases):
        raise InvalidParameterError("subspaces have different ambient dimensions")
    if not 1 <= target_rank <= M:
        raise InvalidParameterError(f"target rank must lie in [1, {M}]")
    avg = sum(U @ U.conj().T for U in bases) / len(bases)
    avg = 0.5 * (avg + avg.conj().T)
    _, vecs = sorted_eigh(avg)
    return vecs[:, :target_rank]


def dft_block_subspaces(M: int, G: int, r: int, offset_rule: str = "disjoint") -> list[np.ndarray]:
    """Group subspaces made of DFT columns.

    ``disjoint``: group g (0-based) takes columns g*r ... g*r + r - 1.
    ``wrapped``: group g takes the 2r columns (g*r + 1 ... g*r + 2r) mod M,
    using 1-based column labels, i.e. 0-based columns (g*r + 1 + j) mod M - 1.
    """
    F = dft_columns(M, np.arange(M))
    if offset_rule == "disjoint":
        if G * r > M:
            raise InvalidParameterError(f"G*r = {G * r} exceeds M = {M} under the disjoint rule")
        return [F[:, g * r:(g + 1) * r] for g in range(G)]
    if offset_rule == "wrapped":
        if 2 * r > M:
            raise InvalidParameterError("wrapped windows need 2r <= M")
        out = []
        for g in range(G):
            labels = g * r + np.arange(1, 2 * r + 1)  # 1-based Mod_M labels in 1..M
            cols = np.mod(labels - 1, M)
            out.append(F[:, cols])
        return out
    raise InvalidParameterError(f"unknown offset rule {offset_rule!r}")
