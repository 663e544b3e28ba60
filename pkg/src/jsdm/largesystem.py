"""Large-system (deterministic-equivalent) analysis of per-group ZF precoding
with DFT pre-beamforming, and greedy optimization of user fractions.

A pattern consists of G groups, each owning a window of normalized DFT
frequencies. Subgroup k (co-located users sharing (theta, delta)) has an
eigenvalue density f(k, x) on its support; every trace in the
deterministic equivalents becomes a weighted sum over quadrature nodes (the
continuous limit) or over DFT indices (finite N), so both modes share one
solver.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import UserProfile, approx_eigval, support_limits
from .errors import ConvergenceError, InvalidParameterError
from .grouping import simplified_group, window_centers

_TOL = 1e-9
_MAX_ITER = 10_000
_NODE_BUDGET = 2048
_POLE_GUARD = 1e-6
_COLLAPSE = 1e-10
_DAMPED_STEPS = 100


@dataclass(frozen=True, eq=False)
class LsProblem:
    """Subgroups of one pattern together with their group windows.

    ``supports[k]`` is the normalized frequency interval of subgroup k,
    ``group_of[k]`` its group; ``windows[g] = (start, end)`` is the half-open
    window of group g (``end`` may exceed 1/2, the axis is periodic).
    ``flat_levels`` replaces the one-ring density by a constant per subgroup.
    """

    supports: np.ndarray
    group_of: np.ndarray
    windows: tuple
    M: int
    spacing: float = 0.5
    total_power: float = 10.0
    spreads: Optional[np.ndarray] = None
    flat_levels: Optional[np.ndarray] = None
    density: Optional[np.ndarray] = None
    profiles: tuple = ()

    @property
    def num_groups(self) -> int:
        return len(self.windows)

    @property
    def num_subgroups(self) -> int:
        return int(self.group_of.size)

    @property
    def budgets(self) -> np.ndarray:
        """Streams per group, b_g = M * (window width)."""
        return np.array([int(round(self.M * (e - s))) for s, e in self.windows])

    def members(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.group_of == g)

    def kappa(self, g: int) -> float:
        """DFT frequencies per stream dimension per unit normalized frequency."""
        if self.density is not None:
            return float(self.density[g])
        return self.M / self.budgets[g]

    @classmethod
    def from_profiles(cls, profiles: Sequence[UserProfile], M: int, G: int, pattern: int = 1,
                      spacing: float = 0.5, total_power: float = 10.0) -> "LsProblem":
        """Group subgroups by nearest window center (periodic distance) and
        give each of the G groups a window of width 1/G."""
        centers, half = window_centers(G, pattern)
        windows = tuple((float(a - b), float(a + b)) for a, b in zip(centers, half))
        group_of = np.array([simplified_group(p, spacing, centers, circular=True) for p in profiles], dtype=int)
        supports = np.array([support_limits(p, spacing) for p in profiles], dtype=float).reshape(-1, 2)
        if np.any(supports[:, 0] <= -0.5) or np.any(supports[:, 1] >= 0.5):
            raise InvalidParameterError("subgroup supports must stay inside (-1/2, 1/2)")
        spreads = np.array([p.angular_spread for p in profiles], dtype=float)
        return cls(supports=supports, group_of=group_of, windows=windows, M=M, spacing=spacing,
                   total_power=total_power, spreads=spreads, profiles=tuple(profiles))


def _window_pieces(window) -> list[tuple[float, float]]:
    """Split a periodic window into intervals inside [-1/2, 1/2]."""
    s, e = window
    shift = np.floor(s + 0.5)
    s, e = s - shift, e - shift
    if e <= 0.5:
        return [(s, e)]
    return [(s, 0.5), (-0.5, e - 1.0)]


def overlap_intervals(problem: LsProblem, k: int, g: int) -> list[tuple[float, float]]:
    """Intersection of subgroup k's support with the window of group g."""
    lo, hi = problem.supports[k]
    out = []
    for a, b in _window_pieces(problem.windows[g]):
        left, right = max(lo, a), min(hi, b)
        if right > left:
            out.append((left, right))
    return out


def _density(problem: LsProblem, k: int, x: np.ndarray) -> np.ndarray:
    if problem.flat_levels is not None:
        return np.full_like(x, problem.flat_levels[k], dtype=float)
    return approx_eigval(x, problem.spreads[k], problem.spacing)


def f_function(problem: LsProblem, k: int, g: int, x) -> np.ndarray:
    """Eigenvalue density of subgroup k seen through the window of group g:
    1/(2 delta sqrt(D^2 - x^2)) on the overlap, 0 elsewhere."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    inside = np.zeros(x.shape, dtype=bool)
    for a, b in overlap_intervals(problem, k, g):
        inside |= (x >= a) & (x < b)
    out = np.zeros(x.shape)
    if np.any(inside):
        out[inside] = _density(problem, k, x[inside])
    return out


@dataclass(frozen=True, eq=False)
class _Measure:
    """Quadrature of one group window: nodes x, weights w (density included),
    and the subgroup densities ``values[k, j] = f(k, g, x_j)``. Each row of
    ``values`` comes with ``measure[k] = sum_j w_j f(k, x_j)``."""

    x: np.ndarray
    w: np.ndarray
    values: np.ndarray


def _gl_segment(a: float, b: float, n: int, spacing: float):
    t, wt = np.polynomial.legendre.leggauss(n)
    near_pole = abs(abs(a) - spacing) < _POLE_GUARD or abs(abs(b) - spacing) < _POLE_GUARD
    if near_pole and -spacing <= a < b <= spacing:
        # x = D sin(u) removes the inverse square-root endpoint singularity
        ua, ub = np.arcsin(a / spacing), np.arcsin(b / spacing)
        u = 0.5 * (ub - ua) * t + 0.5 * (ub + ua)
        return spacing * np.sin(u), 0.5 * (ub - ua) * wt * spacing * np.cos(u)
    return 0.5 * (b - a) * t + 0.5 * (b + a), 0.5 * (b - a) * wt


def _continuous_measure(problem: LsProblem, g: int, budget: int) -> _Measure:
    pieces = _window_pieces(problem.windows[g])
    xs, ws = [], []
    total = sum(b - a for a, b in pieces)
    for a, b in pieces:
        cuts = {a, b}
        for lo, hi in problem.supports:
            for c in (lo, hi):
                if a < c < b:
                    cuts.add(float(c))
        cuts = sorted(cuts)
        for left, right in zip(cuts[:-1], cuts[1:]):
            if right - left <= 0:
                continue
            n = max(16, int(round(budget * (right - left) / total)))
            x, w = _gl_segment(left, right, n, problem.spacing)
            xs.append(x)
            ws.append(w)
    x = np.concatenate(xs)
    w = np.concatenate(ws) * problem.kappa(g)
    values = np.vstack([f_function(problem, k, g, x) for k in range(problem.num_subgroups)])
    return _Measure(x, w, values)


def _finite_measure(problem: LsProblem, g: int, N: int) -> _Measure:
    n_total = problem.M * N
    centered = window_indices(problem, g, N)
    count = centered.size
    x = centered / n_total
    b_g = problem.budgets[g]
    w = np.full(count, 1.0 / (N * b_g))
    values = np.zeros((problem.num_subgroups, count))
    D = problem.spacing
    for k in range(problem.num_subgroups):
        lo, hi = problem.supports[k]
        # DFT support of the subgroup at this array size (floor/ceil of the scaled limits)
        l_k, u_k = np.floor(lo * n_total + 1e-9), np.ceil(hi * n_total - 1e-9)
        mask = (centered >= l_k) & (centered <= u_k) & (np.abs(x) < D)
        if np.any(mask):
            values[k, mask] = _density(problem, k, x[mask])
    return _Measure(x, w, values)


def build_measures(problem: LsProblem, mode: str = "continuous", N: Optional[int] = None,
                   nodes: int = _NODE_BUDGET) -> list[_Measure]:
    if mode == "continuous":
        return [_continuous_measure(problem, g, nodes) for g in range(problem.num_groups)]
    if mode in ("finite", "finite_N"):
        if N is None or N < 1:
            raise InvalidParameterError("finite mode needs a positive N")
        return [_finite_measure(problem, g, int(N)) for g in range(problem.num_groups)]
    raise InvalidParameterError(f"unknown mode {mode!r}")


@dataclass(frozen=True, eq=False)
class GroupSolution:
    """Fixed-point quantities of one group (arrays indexed by its members)."""

    members: np.ndarray
    m0: np.ndarray
    h: np.ndarray
    J: np.ndarray
    v: np.ndarray
    q: np.ndarray
    gamma0: float
    zeta0_sq: float
    upsilon: np.ndarray  # interference coefficient of this group's precoder on every subgroup
    iterations: int
    residual: float


def _ratio(gam: np.ndarray, m: np.ndarray, power: int = 1) -> np.ndarray:
    out = np.zeros_like(m)
    active = gam > 0
    out[active] = gam[active] / m[active] ** power
    return out


def solve_group(measure: _Measure, members: np.ndarray, gamma: np.ndarray, b_g: int,
                m_init: Optional[np.ndarray] = None, tol: float = _TOL,
                max_iter: int = _MAX_ITER) -> GroupSolution:
    """Solve one group's fixed point and assemble its Gamma, zeta^2 and Upsilon row.

    ``gamma`` holds the fractions of all subgroups; only ``members`` matter
    for the fixed point.
    """
    F = measure.values[members]
    w = measure.w
    gam = np.asarray(gamma, dtype=float)[members]
    base = F @ w
    if np.any((gam > 0) & (base <= 0)):
        bad = members[(gam > 0) & (base <= 0)]
        raise InvalidParameterError(f"subgroups {bad.tolist()} have zero-measure support but positive fraction")
    m = base.copy() if m_init is None else np.asarray(m_init, dtype=float).copy()
    m = np.where(base > 0, np.maximum(m, 1e-300), 0.0)
    active = gam > 0

    def update(m):
        h = 1.0 + (_ratio(gam, m) @ F) / b_g
        return F @ (w / h), h

    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        m_iter, h = update(m)
        gap = np.abs(m_iter - m)
        residual = float(np.max(gap, initial=0.0))
        if np.all(gap <= tol * np.maximum(np.minimum(np.abs(m_iter), 1.0), 1e-300)):
            m = m_iter
            break
        if it <= _DAMPED_STEPS:
            m = 0.5 * m_iter + 0.5 * m
        else:
            # Near-critical loads contract slowly; the Jacobian of the map is
            # J, so a Newton step on m - map(m) = 0 finishes the job.
            C = (F * (w / h**2)) @ F.T
            jac = C * (_ratio(gam, m, 2) / b_g)[None, :]
            step = np.linalg.solve(np.eye(len(m)) - jac, m_iter - m)
            t = 1.0
            while np.any((m + t * step)[active] <= 0) and t > 1e-6:
                t *= 0.5
            m = np.where(base > 0, m + t * step, 0.0)
        if np.any(m[active] <= _COLLAPSE * base[active]):
            raise ConvergenceError("fraction exceeds the dimensions a subgroup occupies in its window "
                                   "(m collapses to zero)", residual=residual)
    else:
        raise ConvergenceError(f"fixed point did not converge in {max_iter} iterations "
                               f"(last residual {residual:.3e})", residual=residual)
    h = 1.0 + (_ratio(gam, m) @ F) / b_g
    weights_sq = w / h**2
    C = (F * weights_sq) @ F.T
    coef = _ratio(gam, m, 2) / b_g  # gamma_l / (b m_l^2), acts on the summed index
    J = C * coef[None, :]
    v = F @ weights_sq
    system = np.eye(len(members)) - J
    q = np.linalg.solve(system, v) if len(members) else v
    gamma0 = float(coef @ q)
    s_g = float(gam.sum())
    if s_g > 0:
        if not gamma0 > 0:
            raise ConvergenceError(f"non-positive Gamma {gamma0:.3e} for a loaded group")
        zeta_sq = s_g / gamma0
        cross = (F * weights_sq) @ measure.values.T  # v' for every subgroup of the pattern
        n_cross = np.linalg.solve(system, cross)
        upsilon = coef @ n_cross
    else:
        zeta_sq = 0.0
        upsilon = np.zeros(measure.values.shape[0])
    return GroupSolution(members, m, h, J, v, q, gamma0, zeta_sq, upsilon, it, residual)


@dataclass(frozen=True, eq=False)
class LsSolution:
    """Deterministic equivalents of a whole pattern for one fraction vector."""

    gamma: np.ndarray
    m0: np.ndarray
    gamma0: np.ndarray
    zeta0_sq: np.ndarray
    upsilon: np.ndarray  # (G, K): Upsilon[g', k], zero for k in g'
    sinr0: np.ndarray
    groups: list = field(default_factory=list)

    @property
    def rates(self) -> np.ndarray:
        """Normalized subgroup rates gamma_k log(1 + SINR_k) in nats."""
        return self.gamma * np.log1p(self.sinr0)


def sinr_limit(zeta0_sq: np.ndarray, upsilon: np.ndarray, group_of: np.ndarray, P: float, S: float) -> np.ndarray:
    """Limit SINR of every subgroup:
    zeta_g^2 (P/S) / (1 + sum_{g' != g} zeta_{g'}^2 Upsilon[g', k] P/S)."""
    group_of = np.asarray(group_of)
    if S <= 0:
        return np.zeros(group_of.size)
    load = P / S
    interference = (np.asarray(zeta0_sq)[:, None] * np.asarray(upsilon)).sum(axis=0)
    own = np.asarray(zeta0_sq)[group_of] * np.asarray(upsilon)[group_of, np.arange(group_of.size)]
    interference = interference - own
    return np.asarray(zeta0_sq)[group_of] * load / (1.0 + interference * load)


def _assemble(problem: LsProblem, gamma: np.ndarray, groups: list) -> LsSolution:
    K = problem.num_subgroups
    m0 = np.zeros(K)
    upsilon = np.zeros((problem.num_groups, K))
    for g, sol in enumerate(groups):
        m0[sol.members] = sol.m0
        upsilon[g] = sol.upsilon
        upsilon[g, sol.members] = 0.0
    gamma0 = np.array([s.gamma0 for s in groups])
    zeta = np.array([s.zeta0_sq for s in groups])
    sinr = sinr_limit(zeta, upsilon, problem.group_of, problem.total_power, float(np.sum(gamma)))
    return LsSolution(gamma=np.asarray(gamma, dtype=float), m0=m0, gamma0=gamma0, zeta0_sq=zeta,
                      upsilon=upsilon, sinr0=sinr, groups=list(groups))


def check_fractions(problem: LsProblem, gamma: np.ndarray) -> None:
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (problem.num_subgroups,):
        raise InvalidParameterError("one fraction per subgroup expected")
    if np.any(gamma < -1e-12) or np.any(gamma > 1 + 1e-12):
        raise InvalidParameterError("fractions must lie in [0, 1]")
    for g, b in enumerate(problem.budgets):
        if gamma[problem.members(g)].sum() > b + 1e-9:
            raise InvalidParameterError(f"group {g} fractions exceed its {b} streams")


def solve_fixed_point(problem: LsProblem, gamma, mode: str = "continuous", N: Optional[int] = None,
                      nodes: int = _NODE_BUDGET, measures: Optional[list] = None,
                      covariance: str = "dft") -> LsSolution:
    """Deterministic equivalents for fractions ``gamma``.

    ``mode="continuous"`` integrates the limit densities with composite
    Gauss-Legendre rules (``nodes`` per window). ``mode="finite"`` works with
    an array of M*N antennas: with ``covariance="dft"`` each covariance is
    replaced by its DFT approximation (diagonal in the window basis, summed
    over DFT indices); with ``covariance="one-ring"`` the exact one-ring
    covariances are projected on the window's DFT columns and the traces are
    taken with full matrices.
    """
    gamma = np.asarray(gamma, dtype=float)
    check_fractions(problem, gamma)
    if covariance == "one-ring":
        if mode not in ("finite", "finite_N") or N is None:
            raise InvalidParameterError("one-ring covariances are only available in finite mode")
        return _solve_one_ring(problem, gamma, int(N))
    if covariance != "dft":
        raise InvalidParameterError(f"unknown covariance model {covariance!r}")
    if measures is None:
        measures = build_measures(problem, mode, N, nodes)
    groups = [solve_group(measures[g], problem.members(g), gamma, problem.budgets[g])
              for g in range(problem.num_groups)]
    return _assemble(problem, gamma, groups)


def fixed_point_matrices(rbars: Sequence[np.ndarray], gamma: Sequence[float], b_g: int, N: int,
                         cross: Sequence[np.ndarray] = (), tol: float = _TOL, max_iter: int = _MAX_ITER):
    """Finite-N fixed point with explicit (b_g N x b_g N) projected covariances.

    Returns ``(m0, gamma0, upsilon)`` where ``upsilon[j]`` is the coefficient
    for the projected covariance ``cross[j]`` of a user outside the group.
    """
    gam = np.asarray(gamma, dtype=float)
    n = b_g * N
    R = [np.asarray(r, dtype=complex) for r in rbars]
    base = np.array([np.real(np.trace(r)) / n for r in R])
    m = base.copy()
    eye = np.eye(R[0].shape[0])

    def resolvent(m):
        return np.linalg.inv(eye + sum(c * r for c, r in zip(_ratio(gam, m), R)) / b_g)

    for it in range(1, max_iter + 1):
        T = resolvent(m)
        m_iter = np.array([np.real(np.trace(r @ T)) / n for r in R])
        if np.all(np.abs(m_iter - m) <= tol * np.maximum(np.minimum(np.abs(m_iter), 1.0), 1e-300)):
            m = m_iter
            break
        if it <= _DAMPED_STEPS:
            m = 0.5 * m_iter + 0.5 * m
        else:
            C = np.array([[np.real(np.trace(ri @ T @ rj @ T)) / n for rj in R] for ri in R])
            jac = C * (_ratio(gam, m, 2) / b_g)[None, :]
            step = np.linalg.solve(np.eye(len(R)) - jac, m_iter - m)
            t = 1.0
            while np.any((m + t * step)[gam > 0] <= 0) and t > 1e-6:
                t *= 0.5
            m = m + t * step
        if np.any(m[gam > 0] <= _COLLAPSE * base[gam > 0]):
            raise ConvergenceError("fraction exceeds the dimensions a subgroup occupies in its window")
    else:
        raise ConvergenceError("matrix fixed point did not converge")
    T = resolvent(m)
    coef = _ratio(gam, m, 2) / b_g
    C = np.array([[np.real(np.trace(ri @ T @ rj @ T)) / n for rj in R] for ri in R])
    J = C * coef[None, :]
    system = np.eye(len(R)) - J
    v = np.array([np.real(np.trace(r @ T @ T)) / n for r in R])
    gamma0 = float(coef @ np.linalg.solve(system, v))
    ups = []
    for A in cross:
        vp = np.array([np.real(np.trace(r @ T @ A @ T)) / n for r in R])
        ups.append(float(coef @ np.linalg.solve(system, vp)))
    return m, gamma0, np.asarray(ups)


def window_indices(problem: LsProblem, g: int, N: int) -> np.ndarray:
    """Centered DFT indices (in (-MN/2, MN/2]) of group g's window."""
    n_total = problem.M * N
    s, e = problem.windows[g]
    idx = int(round(s * n_total)) + np.arange(int(round((e - s) * n_total)))
    return np.mod(idx + n_total // 2 - 1, n_total) - n_total // 2 + 1


def _solve_one_ring(problem: LsProblem, gamma: np.ndarray, N: int) -> LsSolution:
    from .channel import SystemGeometry, dft_columns, one_ring_covariance

    if not problem.profiles:
        raise InvalidParameterError("one-ring finite mode needs subgroup profiles")
    n_total = problem.M * N
    geom = SystemGeometry(n_total, problem.spacing)
    covs = [one_ring_covariance(p, geom) for p in problem.profiles]
    K = problem.num_subgroups
    groups = []
    for g in range(problem.num_groups):
        members = problem.members(g)
        B = dft_columns(n_total, window_indices(problem, g, N))
        projected = [B.conj().T @ R @ B for R in covs]
        b_g = problem.budgets[g]
        gam = gamma[members]
        if members.size == 0:
            groups.append(GroupSolution(members, np.zeros(0), None, np.zeros((0, 0)), np.zeros(0), np.zeros(0),
                                        0.0, 0.0, np.zeros(K), 0, 0.0))
            continue
        m, gamma0, ups = fixed_point_matrices([projected[k] for k in members], gam, b_g, N, cross=projected)
        s_g = float(gam.sum())
        zeta_sq = s_g / gamma0 if s_g > 0 else 0.0
        if s_g == 0:
            ups = np.zeros(K)
        groups.append(GroupSolution(members, m, None, None, None, None, gamma0, zeta_sq, ups, 0, 0.0))
    return _assemble(problem, gamma, groups)


def network_utility(rates, kind: str = "pfs", floor: float = 1e-12) -> float:
    """Sum of log rates (proportional fairness) or plain sum rate."""
    rates = np.asarray(rates, dtype=float)
    if kind == "pfs":
        return float(np.sum(np.log(np.maximum(rates, floor))))
    if kind == "sumrate":
        return float(np.sum(rates))
    raise InvalidParameterError(f"unknown utility {kind!r}")


@dataclass(frozen=True, eq=False)
class FractionPlan:
    gamma: np.ndarray
    utility_kind: str
    step: float
    objective_trace: list
    solution: Optional[LsSolution] = None


class _GreedyState:
    """Per-group solutions cached between greedy candidates; raising one
    subgroup's fraction only re-solves that subgroup's group."""

    def __init__(self, problem, measures, gamma):
        self.problem, self.measures = problem, measures
        self.gamma = gamma.copy()
        self.groups = [solve_group(measures[g], problem.members(g), gamma, problem.budgets[g])
                       for g in range(problem.num_groups)]

    def trial(self, k: int, step: float):
        g = self.problem.group_of[k]
        gamma = self.gamma.copy()
        gamma[k] += step
        prev = self.groups[g]
        sol = solve_group(self.measures[g], prev.members, gamma, self.problem.budgets[g], m_init=prev.m0)
        groups = list(self.groups)
        groups[g] = sol
        return gamma, groups

    def evaluate(self, gamma, groups, kind, floor):
        sol = _assemble(self.problem, gamma, groups)
        return network_utility(sol.rates, kind, floor), sol


def greedy_fractions(problem: LsProblem, kind: str = "pfs", step: float = 0.01, with_stop: bool = True,
                     mode: str = "continuous", N: Optional[int] = None, floor: float = 1e-12,
                     nodes: int = _NODE_BUDGET, max_steps: Optional[int] = None) -> FractionPlan:
    """Greedy user-fraction allocation.

    Starting from all-zero fractions, every iteration tries raising each
    subgroup's fraction by ``step`` (respecting gamma <= 1 and the group's
    stream budget) and keeps the best candidate; the lowest subgroup index
    wins ties. With ``with_stop`` the search ends when no candidate improves
    the utility, otherwise only when no feasible increment is left.
    Candidates whose fixed point cannot be solved are skipped.
    """
    if not 0 < step <= 0.1:
        raise InvalidParameterError("step must lie in (0, 0.1]")
    measures = build_measures(problem, mode, N, nodes)
    K = problem.num_subgroups
    budgets = problem.budgets
    state = _GreedyState(problem, measures, np.zeros(K))
    current, solution = state.evaluate(state.gamma, state.groups, kind, floor)
    trace = [(0, 0.0, current)]
    it = 0
    while max_steps is None or it < max_steps:
        best = None
        for k in range(K):
            g = problem.group_of[k]
            if state.gamma[k] + step > 1 + 1e-9:
                continue
            if state.gamma[problem.members(g)].sum() + step > budgets[g] + 1e-9:
                continue
            try:
                gamma, groups = state.trial(k, step)
                value, sol = state.evaluate(gamma, groups, kind, floor)
            except (ConvergenceError, np.linalg.LinAlgError):
                continue
            if best is None or value > best[0]:
                best = (value, k, gamma, groups, sol)
        if best is None:
            break
        if with_stop and not best[0] > current:
            break
        it += 1
        current, _, state.gamma, state.groups, solution = best
        trace.append((it, float(state.gamma.sum()), current))
    return FractionPlan(gamma=state.gamma, utility_kind=kind, step=step, objective_trace=trace, solution=solution)


def write_plan(path, problem: LsProblem, plan: FractionPlan, comment: Optional[str] = None) -> None:
    """CSV with one row per subgroup: group,subgroup,theta_deg,delta_deg,gamma,rate_norm."""
    rates = plan.solution.rates if plan.solution is not None else np.zeros(problem.num_subgroups)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "subgroup", "theta_deg", "delta_deg", "gamma", "rate_norm"])
        for k in range(problem.num_subgroups):
            p = problem.profiles[k] if problem.profiles else None
            w.writerow([int(problem.group_of[k]) + 1, k + 1,
                        f"{p.aoa_deg:.10g}" if p else "", f"{p.spread_deg:.10g}" if p else "",
                        f"{plan.gamma[k]:.10g}", f"{rates[k] / np.log(2):.10g}"])


def write_trace(path, plan: FractionPlan, comment: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "S", "objective"])
        for it, s, obj in plan.objective_trace:
            w.writerow([it, f"{s:.10g}", f"{obj:.12g}"])
