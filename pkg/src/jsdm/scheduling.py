"""User selection: opportunistic GBF policies, SUS and greedy ZF baselines,
and the probabilistic per-slot selector driven by user fractions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidParameterError

POLICIES = ("gbf-all", "gbf-max", "zfbf-sus", "zfbf-gus", "prob")


@dataclass(frozen=True, eq=False)
class SelectionOutcome:
    """Served (group, beam, user) triples and their rates in nats."""

    served: list = field(default_factory=list)
    instantaneous_rates: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.instantaneous_rates))


def gbf_all_select(sinr_table: np.ndarray, group: int = 0) -> SelectionOutcome:
    """Serve, on every beam, the user with the largest reported SINR.

    ``sinr_table`` is K' x b (users x beams). The first user wins ties.
    """
    table = np.asarray(sinr_table, dtype=float)
    if table.ndim != 2 or table.shape[0] == 0:
        raise InvalidParameterError("gbf-all needs a non-empty users x beams SINR table")
    winners = np.argmax(table, axis=0)
    best = table[winners, np.arange(table.shape[1])]
    served = [(group, m, int(k)) for m, k in enumerate(winners)]
    return SelectionOutcome(served, np.log1p(best))


def max_sinr_feedback(sinr_table: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Each user's (best SINR, beam index) report; lowest beam on ties."""
    table = np.asarray(sinr_table, dtype=float)
    beams = np.argmax(table, axis=1)
    return table[np.arange(table.shape[0]), beams], beams


def gbf_max_select(max_values: Sequence[float], beam_index: Sequence[int], num_beams: int,
                   group: int = 0) -> SelectionOutcome:
    """Serve each beam's strongest reporter; beams nobody reported stay silent."""
    values = np.asarray(max_values, dtype=float)
    beams = np.asarray(beam_index, dtype=int)
    served, rates = [], []
    for m in range(num_beams):
        reporters = np.flatnonzero(beams == m)
        if reporters.size == 0:
            continue
        k = reporters[np.argmax(values[reporters])]
        served.append((group, m, int(k)))
        rates.append(np.log1p(values[k]))
    return SelectionOutcome(served, np.asarray(rates))


def sus_select(channels: np.ndarray, S_max: int, alpha: float = 0.3) -> list[int]:
    """Semi-orthogonal user selection.

    ``channels`` holds one user per column. At each step the candidate with
    the largest component orthogonal to the already chosen users is taken;
    then only candidates whose normalized correlation with that component is
    at most ``alpha`` remain.
    """
    if not 0 < alpha <= 1:
        raise InvalidParameterError("alpha must lie in (0, 1]")
    H = np.asarray(channels, dtype=complex)
    if H.ndim == 1:
        H = H[:, None]
    norms = np.linalg.norm(H, axis=0)
    candidates = [k for k in range(H.shape[1]) if norms[k] > 0]
    chosen: list[int] = []
    basis: list[np.ndarray] = []  # orthonormal directions of the chosen components
    while candidates and len(chosen) < S_max:
        best_k, best_norm, best_vec = None, -1.0, None
        for k in candidates:
            v = H[:, k].copy()
            for q in basis:
                v -= (q.conj() @ v) * q
            nv = np.linalg.norm(v)
            if nv > best_norm:
                best_k, best_norm, best_vec = k, nv, v
        if best_norm <= 1e-12 * max(norms):
            break
        chosen.append(best_k)
        direction = best_vec / best_norm
        basis.append(direction)
        candidates = [k for k in candidates if k != best_k
                      and abs(direction.conj() @ H[:, k]) / norms[k] <= alpha]
    return chosen


def zf_rates(channels: np.ndarray, power: float) -> Optional[np.ndarray]:
    """Per-user rates (nats) of column-normalized ZF with equal power split.

    Returns None when the users cannot be separated by zero forcing.
    """
    H = np.asarray(channels, dtype=complex)
    n = H.shape[1]
    if n == 0:
        return np.zeros(0)
    if n > H.shape[0] or np.linalg.cond(H) >= 1e10:
        return None
    gram = H.conj().T @ H
    inv_diag = np.real(np.diag(np.linalg.solve(gram, np.eye(n))))
    return np.log1p((power / n) / inv_diag)


def gus_select(channels: np.ndarray, S_max: int, power: float = 1.0) -> list[int]:
    """Greedy user selection maximizing the ZF sum rate.

    Adds the user that yields the largest sum rate until none improves it or
    ``S_max`` users are chosen; the lowest index wins ties.
    """
    H = np.asarray(channels, dtype=complex)
    if H.ndim == 1:
        H = H[:, None]
    chosen: list[int] = []
    current = 0.0
    while len(chosen) < S_max:
        best_k, best_rate = None, current
        for k in range(H.shape[1]):
            if k in chosen:
                continue
            rates = zf_rates(H[:, chosen + [k]], power)
            if rates is None:
                continue
            total = float(rates.sum())
            if total > best_rate * (1 + 1e-12) + 1e-300:
                best_k, best_rate = k, total
        if best_k is None:
            break
        chosen.append(best_k)
        current = best_rate
    return chosen


@dataclass(frozen=True, eq=False)
class SlotAssignment:
    """Per-stream outcome of a probabilistic slot.

    ``labels[m]`` is the drawn subgroup of stream m (-1 for an idle draw);
    ``users[m]`` the served user within that subgroup, or -1 when the stream
    idles (idle draw or subgroup exhausted).
    """

    labels: np.ndarray
    users: np.ndarray

    @property
    def subgroups(self) -> np.ndarray:
        """Subgroup actually served on each stream, -1 when idle."""
        return np.where(self.users >= 0, self.labels, -1)


def probabilistic_select(gamma: Sequence[float], b_g: int, N: int, rng: np.random.Generator,
                         population: Optional[Sequence[int]] = None) -> SlotAssignment:
    """Draw the subgroup of each of the b_g * N streams of a group.

    Stream labels are i.i.d. with P(k) = gamma_k / b_g and idle probability
    1 - sum(gamma)/b_g. A stream labelled k serves a uniformly chosen user of
    subgroup k not yet served in this slot (``population[k]`` users, N by
    default); if none is left the stream idles.
    """
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0) or np.any(gamma > 1 + 1e-12) or gamma.sum() > b_g * (1 + 1e-12):
        raise InvalidParameterError("fractions must lie in [0, 1] with sum at most b_g")
    K = gamma.size
    pop = np.full(K, N, dtype=int) if population is None else np.asarray(population, dtype=int)
    probs = np.append(gamma / b_g, max(0.0, 1.0 - gamma.sum() / b_g))
    probs = probs / probs.sum()
    draws = rng.choice(K + 1, size=b_g * N, p=probs)
    labels = np.where(draws == K, -1, draws)
    users = np.full(labels.size, -1, dtype=int)
    queues = {}
    for m, k in enumerate(labels):
        if k < 0:
            continue
        if k not in queues:
            queues[k] = list(rng.permutation(pop[k]))
        if queues[k]:
            users[m] = queues[k].pop(0)
    return SlotAssignment(labels=labels, users=users)
