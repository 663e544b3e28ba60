"""User grouping: Grassmannian K-means, fixed quantization, the simplified
angle-based quantizer and the split of groups into two patterns."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .channel import UserProfile
from .errors import InvalidParameterError
from .subspace import chordal_distance_matrix, subspace_mean

_MAXMIN_LIMIT = 12


@dataclass(frozen=True, eq=False)
class GroupLayout:
    """Result of a grouping algorithm.

    ``membership[g]`` lists user indices (0-based); ``pattern_of_group`` holds
    1 or 2 per group. ``centers``/``half_widths`` are only set by the simplified
    quantizer.
    """

    group_subspaces: list
    membership: list
    pattern_of_group: tuple = ()
    stream_budget: tuple = ()
    centers: Optional[np.ndarray] = None
    half_widths: Optional[np.ndarray] = None
    distance_trace: tuple = field(default=())

    @property
    def num_groups(self) -> int:
        return len(self.membership)

    def labels(self, num_users: Optional[int] = None) -> np.ndarray:
        K = num_users if num_users is not None else sum(len(m) for m in self.membership)
        out = np.full(K, -1, dtype=int)
        for g, members in enumerate(self.membership):
            out[list(members)] = g
        return out

    def groups_in_pattern(self, pattern: int) -> list[int]:
        return [g for g, p in enumerate(self.pattern_of_group) if p == pattern]


def _assign(users, means) -> tuple[np.ndarray, float]:
    dist = chordal_distance_matrix(users, means)
    labels = np.argmin(dist, axis=1)  # first minimum on ties
    return labels, float(dist[np.arange(len(users)), labels].sum())


def _membership(labels: np.ndarray, G: int) -> list:
    return [tuple(int(k) for k in np.flatnonzero(labels == g)) for g in range(G)]


def _kmeans_single(users, G, rank, eps, max_iter, rng):
    K = len(users)
    # seeds always get the target rank, otherwise the first update would raise the cost
    means = [subspace_mean([users[i]], rank) for i in rng.choice(K, size=G, replace=False)]
    labels, cost = _assign(users, means)
    trace = [cost]
    for _ in range(max_iter):
        new_means = []
        for g in range(G):
            members = [users[k] for k in np.flatnonzero(labels == g)]
            new_means.append(subspace_mean(members, rank) if members else means[g])
        means = new_means
        labels, new_cost = _assign(users, means)
        trace.append(new_cost)
        if abs(trace[-2] - new_cost) <= eps * trace[-2]:
            break
    return means, labels, trace


def kmeans_group(users: Sequence[np.ndarray], G: int, eps: float = 1e-3, max_iter: int = 100,
                 seed: int = 0, rank: Optional[int] = None, restarts: int = 5) -> GroupLayout:
    """Cluster user subspaces into G groups on the Grassmannian.

    Each restart draws G distinct users as initial means, alternates
    minimum-chordal-distance assignment with subspace-mean updates and stops
    once the relative change of the total distance falls to ``eps``. The
    restart with the lowest final total distance wins (earliest on ties).

    ``rank`` is the dimension of the group subspaces; by default the largest
    user rank.
    """
    K = len(users)
    if K < G:
        raise InvalidParameterError(f"need at least G={G} users, got {K}")
    if G < 1:
        raise InvalidParameterError("G must be positive")
    users = [np.asarray(U, dtype=complex).reshape(U.shape[0], -1) for U in users]
    if rank is None:
        rank = max(U.shape[1] for U in users)
    best = None
    for restart in range(max(restarts, 1)):
        rng = np.random.default_rng([seed, restart])
        means, labels, trace = _kmeans_single(users, G, rank, eps, max_iter, rng)
        if best is None or trace[-1] < best[2][-1]:
            best = (means, labels, trace)
    means, labels, trace = best
    return GroupLayout(group_subspaces=means, membership=_membership(labels, G),
                       distance_trace=tuple(trace))


def fixed_quantization_group(users: Sequence[np.ndarray], group_subspaces: Sequence[np.ndarray]) -> GroupLayout:
    """Assign each user to the nearest fixed group subspace (lowest index on ties)."""
    if len(group_subspaces) == 0:
        raise InvalidParameterError("no group subspaces given")
    labels, _ = _assign(list(users), list(group_subspaces)) if len(users) else (np.zeros(0, int), 0.0)
    return GroupLayout(group_subspaces=list(group_subspaces),
                       membership=_membership(labels, len(group_subspaces)))


def window_centers(G: int, pattern: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Normalized centers A_g and half-widths B_g of G equal frequency windows.

    Pattern 1 uses A_g = (g - 1/2)/G - 1/2, pattern 2 is shifted by half a
    window, A_g = g/G - 1/2 (g = 1..G).
    """
    g = np.arange(1, G + 1)
    centers = (g - 0.5) / G - 0.5 if pattern == 1 else g / G - 0.5
    return centers, np.full(G, 0.5 / G)


def projected_center(profile: UserProfile, spacing: float) -> float:
    """Center of a user's normalized DFT support, -D sin(theta) cos(delta)."""
    return float(-spacing * np.sin(profile.aoa) * np.cos(profile.angular_spread))


def simplified_group(profile: UserProfile, spacing: float, centers: Sequence[float], circular: bool = False) -> int:
    """Index of the window center nearest to the user's projected center.

    With ``circular`` the distance is measured on the unit-period frequency
    circle, which matters when a window straddles +-1/2.
    """
    centers = np.asarray(centers, dtype=float)
    if centers.size == 0:
        raise InvalidParameterError("empty center list")
    a = projected_center(profile, spacing)
    gap = np.abs(centers - a)
    if circular:
        gap = np.minimum(gap, 1.0 - np.mod(gap, 1.0))
    return int(np.argmin(gap))


def _min_pairwise(dist: np.ndarray, idx) -> float:
    if len(idx) < 2:
        return 0.0
    return float(min(dist[i, j] for i, j in combinations(idx, 2)))


def partition_patterns(layout: GroupLayout, n_patterns: int = 2, mode: str = "alternating") -> GroupLayout:
    """Split the groups into two patterns.

    ``alternating`` puts groups 1, 3, 5, ... (1-based) in pattern 1 and the
    rest in pattern 2. ``maxmin`` searches all balanced bipartitions for the
    one maximizing the sum over patterns of the smallest within-pattern
    chordal distance; the first bipartition in lexicographic order wins ties.
    """
    if n_patterns != 2:
        raise InvalidParameterError("only two patterns are supported")
    G = layout.num_groups
    if mode == "alternating":
        if G % 2 and G > 1:
            raise InvalidParameterError("alternating patterns need an even number of groups")
        patterns = tuple(1 if g % 2 == 0 else 2 for g in range(G))
    elif mode == "maxmin":
        if G > _MAXMIN_LIMIT:
            raise InvalidParameterError(f"maxmin pattern search supports G <= {_MAXMIN_LIMIT}, got {G}")
        if G % 2:
            raise InvalidParameterError("maxmin patterns need an even number of groups")
        dist = chordal_distance_matrix(layout.group_subspaces, layout.group_subspaces)
        best_val, best_set = -np.inf, None
        for first in combinations(range(G), G // 2):
            if 0 not in first:
                continue  # each bipartition once, with group 0 in pattern 1
            second = tuple(g for g in range(G) if g not in first)
            val = _min_pairwise(dist, first) + _min_pairwise(dist, second)
            if val > best_val + 1e-12:
                best_val, best_set = val, set(first)
        patterns = tuple(1 if g in best_set else 2 for g in range(G))
    else:
        raise InvalidParameterError(f"unknown pattern mode {mode!r}")
    return replace(layout, pattern_of_group=patterns)


def read_population(path) -> list[UserProfile]:
    """Read a ``theta_deg,delta_deg`` CSV into user profiles."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        if reader.fieldnames is None or set(reader.fieldnames) != {"theta_deg", "delta_deg"}:
            raise InvalidParameterError("population file needs header 'theta_deg,delta_deg'")
        return [UserProfile.from_degrees(float(r["theta_deg"]), float(r["delta_deg"])) for r in reader]


def write_population(path, profiles: Sequence[UserProfile], comment: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta_deg", "delta_deg"])
        for p in profiles:
            w.writerow([repr(p.aoa_deg), repr(p.spread_deg)])


def write_grouping(path, layout: GroupLayout, num_users: int, comment: Optional[str] = None) -> None:
    """Write ``user_id,group,pattern`` rows (1-based group and pattern labels)."""
    labels = layout.labels(num_users)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "group", "pattern"])
        for k, g in enumerate(labels):
            pat = layout.pattern_of_group[g] if layout.pattern_of_group and g >= 0 else 0
            w.writerow([k, g + 1 if g >= 0 else 0, pat])
