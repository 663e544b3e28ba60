"""Seeded experiment drivers and CSV emission.

Each ``*_experiment`` function is a pure computation returning arrays (rates
in nats); :func:`run_experiment` maps a validated configuration onto one of
them and writes the CSV files. Random streams are derived from
``(seed, trial, ...)`` only, so adding trials never changes earlier ones.
"""
from __future__ import annotations

import csv
import json
import platform
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .asymptotics import build_a_matrices, contour_ccdf, extreme_value_prediction, sinr_ccdf, theorem1_bounds
from .beamforming import bd_prebeamformer, beam_sinr_table, zf_sinr_all, zf_stack, zfbf_precoder
from .channel import (SystemGeometry, UserProfile, dft_columns, eigendecompose, one_ring_covariance,
                      sample_channel)
from .config import config_hash
from .errors import InfeasibleBDError, InvalidParameterError, SelectionInfeasibleError
from .grouping import (GroupLayout, fixed_quantization_group, kmeans_group, partition_patterns,
                       read_population, window_centers)
from .largesystem import LsProblem, greedy_fractions, overlap_intervals, solve_fixed_point, window_indices
from .scheduling import (gbf_all_select, gbf_max_select, gus_select, max_sinr_feedback,
                         probabilistic_select, sus_select, zf_rates)
from .subspace import dft_block_subspaces

LOG2 = np.log(2.0)

# purpose tags mixed into per-trial seeds
_PROFILE, _CHANNEL, _GROUPING, _SLOT, _SUBGROUP = 1, 2, 3, 4, 5


def trial_rng(seed: int, trial: int, *purpose: int) -> np.random.Generator:
    """Independent stream for one (seed, trial, purpose...) tuple."""
    return np.random.default_rng([seed, trial, *purpose])


def db_to_linear(db: float) -> float:
    return float(10.0 ** (db / 10.0))


class Accumulator:
    """Order-independent running mean / standard error."""

    def __init__(self):
        self.n, self.total, self.total_sq = 0, 0.0, 0.0

    def add(self, value: float) -> None:
        self.n += 1
        self.total += value
        self.total_sq += value * value

    @property
    def mean(self) -> float:
        return self.total / self.n if self.n else float("nan")

    @property
    def stderr(self) -> float:
        if self.n < 2:
            return float("nan")
        var = max(self.total_sq - self.total**2 / self.n, 0.0) / (self.n - 1)
        return float(np.sqrt(var / self.n))


def mean_stderr(samples: np.ndarray, axis: int = 0):
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[axis]
    mean = samples.mean(axis=axis)
    err = samples.std(axis=axis, ddof=1) / np.sqrt(n) if n >= 2 else np.full(mean.shape, np.nan)
    return mean, err


def random_profiles(rng_for, count: int, theta_range, delta_range) -> list[UserProfile]:
    """``count`` profiles with uniform angles; user k draws from ``rng_for(k)``."""
    out = []
    for k in range(count):
        rng = rng_for(k)
        theta = rng.uniform(*theta_range)
        delta = rng.uniform(*delta_range)
        out.append(UserProfile.from_degrees(theta, delta))
    return out


# ---------------------------------------------------------------- scaling

@dataclass
class ScalingResult:
    kprime: np.ndarray
    beta: int
    upper_bound: np.ndarray
    prediction: np.ndarray
    trial_rates: np.ndarray  # trials x len(kprime), nats

    @property
    def mc_mean(self):
        return mean_stderr(self.trial_rates)[0]

    @property
    def mc_stderr(self):
        return mean_stderr(self.trial_rates)[1]


def scaling_setup(M: int, group_theta_deg: Sequence[float], delta_deg: float, rank: int, spacing: float = 0.5):
    """Group eigenbases (dominant ``rank`` eigenvectors of one-ring covariances,
    eigenvalues replaced by 1) and their block-diagonalizing pre-beamformers."""
    geom = SystemGeometry(M, spacing)
    bases = []
    for theta in group_theta_deg:
        cov = eigendecompose(one_ring_covariance(UserProfile.from_degrees(theta, delta_deg), geom), ("fixed", rank))
        bases.append(cov.dominant_eigvecs)
    pre = [bd_prebeamformer(bases, g, rank) for g in range(len(bases))]
    return bases, pre


def scaling_experiment(M: int, group_theta_deg, delta_deg: float, rank: int, P: float, kprime: Sequence[int],
                       trials: int, seed: int, spacing: float = 0.5) -> ScalingResult:
    """Monte Carlo GBF-ALL sum rate versus users per group, with identity
    eigenvalue surrogates and exact block diagonalization."""
    bases, pre = scaling_setup(M, group_theta_deg, delta_deg, rank, spacing)
    G = len(bases)
    rho = P / (G * rank)
    kprime = np.asarray(kprime, dtype=int)
    kmax = int(kprime.max())
    rates = np.zeros((trials, kprime.size))
    for t in range(trials):
        for g in range(G):
            rng = trial_rng(seed, t, _CHANNEL, g)
            w = (rng.standard_normal((rank, kmax)) + 1j * rng.standard_normal((rank, kmax))) / np.sqrt(2)
            table = beam_sinr_table(bases[g] @ w, pre, g, rho)
            best = np.maximum.accumulate(table, axis=0)  # best SINR per beam among the first k users
            rates[t] += np.log1p(best[kprime - 1]).sum(axis=1)
    report = theorem1_bounds(M, [np.ones(rank)] * G, P, kprime)
    prediction = np.zeros(kprime.size)
    for g in range(G):
        for m in range(rank):
            spectral = build_a_matrices(bases[g], np.ones(rank), pre, g, m, rho)
            for i, k in enumerate(kprime):
                u, _ = extreme_value_prediction(lambda x: sinr_ccdf(x, spectral), float(k))
                prediction[i] += np.log1p(u)
    return ScalingResult(kprime, report.beta, report.upper_bound, prediction, rates)


def loglog_slope(kprime, rates) -> float:
    """Least-squares slope of ``rates`` (nats) against log log K'."""
    x = np.log(np.log(np.asarray(kprime, dtype=float)))
    return float(np.polyfit(x, np.asarray(rates, dtype=float), 1)[0])


# ---------------------------------------------------------------- ccdf

@dataclass
class CcdfResult:
    rows: list  # (group, beam, x, analytic, empirical, contour, method)
    rho: float


def ccdf_setup(M: int, group_theta_deg, delta_deg: float, eta: float, P: float, spacing: float = 0.5):
    geom = SystemGeometry(M, spacing)
    covs = [eigendecompose(one_ring_covariance(UserProfile.from_degrees(t, delta_deg), geom), ("energy", eta))
            for t in group_theta_deg]
    dominant = [c.dominant_eigvecs for c in covs]
    budgets = [c.dominant_rank for c in covs]
    pre = [bd_prebeamformer(dominant, g, budgets[g]) for g in range(len(covs))]
    rho = P / sum(budgets)
    return covs, pre, rho


def ccdf_experiment(M: int, group_theta_deg, delta_deg: float, eta: float, P: float, x_grid, draws: int,
                    seed: int, spacing: float = 0.5, with_contour: bool = True) -> CcdfResult:
    covs, pre, rho = ccdf_setup(M, group_theta_deg, delta_deg, eta, P, spacing)
    rows = []
    for g, cov in enumerate(covs):
        channels = sample_channel(cov, trial_rng(seed, 0, _CHANNEL, g), size=draws)
        table = beam_sinr_table(channels, pre, g, rho)
        for m in range(pre[g].shape[1]):
            spectral = build_a_matrices(cov.eigvecs, cov.eigvals, pre, g, m, rho)
            for x in x_grid:
                value, method = sinr_ccdf(float(x), spectral, with_method=True)
                empirical = float(np.mean(table[:, m] > x))
                contour = contour_ccdf(float(x), spectral) if with_contour else float("nan")
                rows.append((g, m, float(x), value, empirical, contour, method))
    return CcdfResult(rows, rho)


# ---------------------------------------------------------------- grouping-compare

@dataclass
class UserSet:
    profiles: list
    covariances: list  # CovarianceModel per user (energy policy)


def draw_users(seed: int, trial: int, count: int, theta_range, delta_range, M: int, eta: float,
               spacing: float = 0.5, profiles: Optional[list] = None) -> UserSet:
    if profiles is None:
        profiles = random_profiles(lambda k: trial_rng(seed, trial, _PROFILE, k), count, theta_range, delta_range)
    geom = SystemGeometry(M, spacing)
    covs = [eigendecompose(one_ring_covariance(p, geom), ("energy", eta)) for p in profiles[:count]]
    return UserSet(list(profiles[:count]), covs)


def group_subspaces_for(method: str, M: int, G: int, rank: int, sector_theta, sector_delta: float,
                        spacing: float = 0.5) -> list:
    if method == "dft":
        # wrapped blocks of 2r columns with offset r = M/G tile the DFT within each pattern
        return dft_block_subspaces(M, G, max(1, M // G), "wrapped")
    if method == "sector":
        geom = SystemGeometry(M, spacing)
        return [eigendecompose(one_ring_covariance(UserProfile.from_degrees(t, sector_delta), geom),
                               ("fixed", rank)).dominant_eigvecs for t in sector_theta]
    raise InvalidParameterError(f"no fixed subspaces for grouping {method!r}")


def make_layout(method: str, users: UserSet, M: int, G: int, rank: int, cfg: dict, seed: int, trial: int) -> GroupLayout:
    dominant = [c.dominant_eigvecs for c in users.covariances]
    if method == "kmeans":
        layout = kmeans_group(dominant, G, eps=cfg.get("eps", 1e-3), max_iter=cfg.get("max_iter", 100),
                              seed=int(trial_rng(seed, trial, _GROUPING).integers(2**31)), rank=rank,
                              restarts=cfg.get("restarts", 5))
        return partition_patterns(layout, 2, "maxmin")
    subspaces = group_subspaces_for(method, M, G, rank, cfg.get("sector_theta_deg"), cfg.get("sector_delta_deg", 12.0),
                                    cfg.get("D", 0.5))
    layout = fixed_quantization_group(dominant, subspaces)
    return partition_patterns(layout, 2, cfg.get("pattern_mode", "alternating"))


def pattern_rates(layout: GroupLayout, users: UserSet, channels: np.ndarray, pattern: int, P: float,
                  policies: Sequence[str], alpha: float) -> dict:
    """Sum rate (nats) of one pattern for each JSDM policy."""
    active = layout.groups_in_pattern(pattern)
    subspaces = layout.group_subspaces
    budgets = [subspaces[g].shape[1] for g in range(layout.num_groups)]
    pre = [bd_prebeamformer(subspaces, g, budgets[g], others=active) for g in active]
    rho = P / sum(budgets[g] for g in active)
    out = {p: 0.0 for p in policies if p in ("gbf-all", "gbf-max", "zfbf-sus")}
    sus_sets = []
    for i, g in enumerate(active):
        members = list(layout.membership[g])
        H = channels[:, members]
        if "gbf-all" in out or "gbf-max" in out:
            if members:
                table = beam_sinr_table(H, pre, i, rho)
                if "gbf-all" in out:
                    out["gbf-all"] += gbf_all_select(table, g).sum_rate
                if "gbf-max" in out:
                    values, beams = max_sinr_feedback(table)
                    out["gbf-max"] += gbf_max_select(values, beams, table.shape[1], g).sum_rate
        if "zfbf-sus" in out:
            chosen = sus_select(pre[i].conj().T @ H, pre[i].shape[1], alpha) if members else []
            sus_sets.append(H[:, chosen])
    if "zfbf-sus" in out:
        stack = zf_stack(pre, sus_sets, P, normalization="column")
        total = 0.0
        for i in range(len(active)):
            if sus_sets[i].shape[1]:
                total += float(np.log1p(np.diag(zf_sinr_all(sus_sets[i], stack, i))).sum())
        out["zfbf-sus"] = total
    return out


@dataclass
class GroupingCompareResult:
    K: np.ndarray
    groupings: list
    policies: list
    se: dict  # (grouping, policy) -> trials x len(K) array in nats, NaN for excluded trials
    excluded: dict  # grouping -> count per K


def grouping_compare_experiment(cfg: dict, P: float, trials: int, seed: int,
                                population: Optional[list] = None) -> GroupingCompareResult:
    M, G, rank = cfg["M"], cfg["G"], cfg["rank"]
    Ks = np.asarray(cfg["K"], dtype=int)
    kmax = int(Ks.max()) if population is None else len(population)
    policies = list(cfg["policies"])
    groupings = list(cfg["grouping"])
    se = {(gm, p): np.full((trials, Ks.size), np.nan) for gm in groupings for p in policies}
    excluded = {gm: np.zeros(Ks.size, dtype=int) for gm in groupings}
    for t in range(trials):
        users = draw_users(seed, t, kmax, cfg["theta_range"], cfg["delta_range"], M, cfg["eta"],
                           cfg["D"], profiles=population)
        channels = np.column_stack([sample_channel(c, trial_rng(seed, t, _CHANNEL, k)).coeffs
                                    for k, c in enumerate(users.covariances)])
        for j, K in enumerate(Ks):
            subset = UserSet(users.profiles[:K], users.covariances[:K])
            for gm in groupings:
                try:
                    layout = make_layout(gm, subset, M, G, rank, cfg, seed, t)
                    if any(len(m) == 0 for m in layout.membership):
                        excluded[gm][j] += 1
                        continue
                    per_pattern = [pattern_rates(layout, subset, channels[:, :K], pat, P, policies, cfg["alpha"])
                                   for pat in (1, 2)]
                except (InfeasibleBDError, SelectionInfeasibleError):
                    excluded[gm][j] += 1
                    continue
                for p in policies:
                    if p == "zfbf-gus":
                        chosen = gus_select(channels[:, :K], M, P)
                        rates = zf_rates(channels[:, chosen], P)
                        se[(gm, p)][t, j] = float(rates.sum()) if rates is not None else 0.0
                    elif p in per_pattern[0]:
                        se[(gm, p)][t, j] = 0.5 * (per_pattern[0][p] + per_pattern[1][p])
    return GroupingCompareResult(Ks, groupings, policies, se, excluded)


# ---------------------------------------------------------------- large system

def subgroup_profiles(cfg: dict, seed: int) -> list[UserProfile]:
    """Subgroup locations: seeded uniform angles, or (layout = centered) one
    subgroup at the center of every window of the chosen pattern."""
    if cfg.get("layout", "random") == "centered":
        centers, _ = window_centers(cfg["G"], cfg.get("pattern", 1))
        delta = np.deg2rad(cfg.get("group_delta_deg", 10.0))
        D = cfg.get("D", 0.5)
        return [UserProfile(float(np.arcsin(-a / (D * np.cos(delta)))), float(delta)) for a in centers]
    return random_profiles(lambda k: trial_rng(seed, 0, _SUBGROUP, k), cfg["subgroups"],
                           cfg["theta_range"], cfg["delta_range"])


def build_problem(cfg: dict, seed: int, P: float) -> LsProblem:
    profiles = subgroup_profiles(cfg, seed)
    return LsProblem.from_profiles(profiles, cfg["M"], cfg["G"], cfg.get("pattern", 1), cfg.get("D", 0.5), P)


@dataclass
class ConvergenceRow:
    N: int
    covariance: str
    gap_m: float
    gap_sinr: float


def max_relative_gap(a, b, mask=None) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    if mask is not None:
        a, b = a[mask], b[mask]
    return float(np.max(np.abs(a - b) / np.abs(b))) if a.size else 0.0


def largesystem_experiment(problem: LsProblem, gamma: np.ndarray, N_values, covariances, nodes: int = 2048):
    """Relative gaps between finite-N and continuous deterministic equivalents."""
    limit = solve_fixed_point(problem, gamma, nodes=nodes)
    active = np.asarray(gamma) > 0
    rows = []
    for cov in covariances:
        for N in N_values:
            fin = solve_fixed_point(problem, gamma, "finite", N, covariance=cov)
            rows.append(ConvergenceRow(int(N), cov, max_relative_gap(fin.m0, limit.m0, active),
                                       max_relative_gap(fin.sinr0, limit.sinr0, active)))
    return limit, rows


def uniform_load(problem: LsProblem, load: float) -> np.ndarray:
    """Fraction ``load`` for every subgroup, capped so that each group stays
    within its budget and each subgroup below half the dimensions it occupies."""
    gamma = np.zeros(problem.num_subgroups)
    for g in range(problem.num_groups):
        members = problem.members(g)
        if members.size == 0:
            continue
        occupied = np.array([problem.M * sum(b - a for a, b in overlap_intervals(problem, k, g)) for k in members])
        share = min(load, problem.budgets[g] / members.size)
        gamma[members] = np.minimum(share, 0.5 * occupied)
    return gamma


@dataclass
class ProbSchedResult:
    gamma: np.ndarray
    sinr0: np.ndarray
    N_values: list
    mean_sinr: dict  # N -> per-subgroup mean SINR (NaN if never served)
    mean_abs_error: dict  # N -> per-subgroup mean |SINR - SINR0|
    served: dict  # N -> per-subgroup count of served streams
    dropped: dict  # N -> users dropped for rank deficiency


def prob_sched_experiment(problem: LsProblem, gamma: np.ndarray, sinr0: np.ndarray, N_values, slots: int,
                          seed: int) -> ProbSchedResult:
    """Finite-dimensional ZF SINR under probabilistic user selection."""
    K = problem.num_subgroups
    out = ProbSchedResult(np.asarray(gamma), np.asarray(sinr0), list(N_values), {}, {}, {}, {})
    for N in N_values:
        n_total = problem.M * N
        geom = SystemGeometry(n_total, problem.spacing)
        covs = [eigendecompose(one_ring_covariance(p, geom), "full") for p in problem.profiles]
        pre = [dft_columns(n_total, window_indices(problem, g, N)) for g in range(problem.num_groups)]
        total = np.zeros(K)
        abs_err = np.zeros(K)
        count = np.zeros(K, dtype=int)
        dropped = 0
        for slot in range(slots):
            channels, owners = [], []
            for g in range(problem.num_groups):
                members = problem.members(g)
                rng = trial_rng(seed, slot, _SLOT, N, g)
                assignment = probabilistic_select(gamma[members], problem.budgets[g], N, rng)
                served = members[assignment.subgroups[assignment.subgroups >= 0]]
                cols = [sample_channel(covs[k], rng).coeffs for k in served]
                channels.append(np.column_stack(cols) if cols else np.zeros((n_total, 0), complex))
                owners.append(list(served))
            # drop the weakest user of a group until its effective channel is well conditioned
            for g in range(problem.num_groups):
                while channels[g].shape[1]:
                    try:
                        zfbf_precoder(pre[g].conj().T @ channels[g])
                        break
                    except SelectionInfeasibleError:
                        weakest = int(np.argmin(np.linalg.norm(pre[g].conj().T @ channels[g], axis=0)))
                        channels[g] = np.delete(channels[g], weakest, axis=1)
                        owners[g].pop(weakest)
                        dropped += 1
            if not any(c.shape[1] for c in channels):
                continue
            stack = zf_stack(pre, channels, problem.total_power)
            for g in range(problem.num_groups):
                if not owners[g]:
                    continue
                sinr = np.diag(zf_sinr_all(channels[g], stack, g))
                for k, s in zip(owners[g], sinr):
                    total[k] += s
                    abs_err[k] += abs(s - sinr0[k])
                    count[k] += 1
        with np.errstate(invalid="ignore", divide="ignore"):
            out.mean_sinr[N] = np.where(count > 0, total / np.maximum(count, 1), np.nan)
            out.mean_abs_error[N] = np.where(count > 0, abs_err / np.maximum(count, 1), np.nan)
        out.served[N] = count
        out.dropped[N] = dropped
    return out


# ---------------------------------------------------------------- harness

@dataclass
class ResultTable:
    """Summary rows ``(sweep_point, metric, mean, stderr, trials, excluded)``
    plus run metadata and the CSV files written next to summary.csv."""

    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)  # name -> (header, rows)
    out_dir: Optional[Path] = None

    prefix: str = ""  # sweep-point prefix and file-name suffix while a P sweep runs

    def add(self, sweep_point: str, metric: str, mean: float, stderr: float = float("nan"), trials: int = 1,
            excluded: int = 0) -> None:
        if self.prefix:
            sweep_point = f"{self.prefix};{sweep_point}"
        self.rows.append((sweep_point, metric, mean, stderr, trials, excluded))

    def put(self, name: str, header: Sequence[str], rows) -> None:
        if self.prefix:
            stem, ext = name.rsplit(".", 1)
            name = f"{stem}_{self.prefix.replace('=', '')}.{ext}"
        self.files[name] = (list(header), list(rows))


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "" if not np.isfinite(value) else f"{float(value):.12g}"
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows, chash: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash: {chash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _run_scaling(cfg, table, P):
    res = scaling_experiment(cfg["M"], cfg["group_theta_deg"], cfg["group_delta_deg"], cfg["rank"], P,
                             cfg["kprime"], cfg["trials"], cfg["seed"], cfg["D"])
    mean, err = res.mc_mean, res.mc_stderr
    rows = [(int(k), res.upper_bound[i] / LOG2, res.prediction[i] / LOG2, mean[i] / LOG2, err[i] / LOG2)
            for i, k in enumerate(res.kprime)]
    table.put("scaling.csv", ["Kprime", "upper_bound", "prediction", "mc_mean", "mc_stderr"], rows)
    for i, k in enumerate(res.kprime):
        table.add(f"Kprime={k}", "gbf-all_sum_rate_bits", mean[i] / LOG2, err[i] / LOG2, cfg["trials"])
    slope = loglog_slope(res.kprime, mean)
    table.add("all", "loglog_slope_nats", slope, trials=cfg["trials"])
    table.add("all", "beta", float(res.beta))
    return res


def _run_ccdf(cfg, table, P):
    res = ccdf_experiment(cfg["M"], cfg["group_theta_deg"], cfg["group_delta_deg"], cfg["eta"], P,
                          cfg["x_grid"], cfg["mc_draws"], cfg["seed"], cfg["D"])
    table.put("ccdf.csv", ["group", "beam", "x", "analytic", "empirical", "contour", "method"],
              [(g + 1, m + 1, x, a, e, c, meth) for g, m, x, a, e, c, meth in res.rows])
    for g, m, x, a, e, c, meth in res.rows:
        table.add(f"group={g + 1};beam={m + 1};x={x:g}", "abs_error", abs(a - e), trials=cfg["mc_draws"])
    table.metadata["ccdf_methods"] = sorted({r[6] for r in res.rows})
    return res


def _run_grouping_compare(cfg, table, P):
    population = read_population(cfg["population_file"]) if "population_file" in cfg else None
    res = grouping_compare_experiment(cfg, P, cfg["trials"], cfg["seed"], population)
    rows = []
    for gm in res.groupings:
        for p in res.policies:
            data = res.se[(gm, p)]
            for j, K in enumerate(res.K):
                col = data[:, j][np.isfinite(data[:, j])] / LOG2
                m, e = (mean_stderr(col) if col.size else (np.nan, np.nan))
                rows.append((gm, p, int(K), m, e, col.size, int(res.excluded[gm][j])))
                table.add(f"K={K};grouping={gm}", p, m, e, col.size, int(res.excluded[gm][j]))
    table.put("sum_se.csv", ["grouping", "policy", "K", "mean", "stderr", "trials", "excluded"], rows)
    return res


def _run_largesystem(cfg, table, P):
    problem = build_problem(cfg, cfg["seed"], P)
    gamma = uniform_load(problem, cfg["load"])
    limit, rows = largesystem_experiment(problem, gamma, cfg["N_values"], cfg["covariance"], cfg["nodes"])
    table.put("convergence.csv", ["N", "covariance", "max_rel_gap_m", "max_rel_gap_sinr"],
              [(r.N, r.covariance, r.gap_m, r.gap_sinr) for r in rows])
    table.put("limit.csv", ["group", "subgroup", "gamma", "m0", "sinr0"],
              [(int(problem.group_of[k]) + 1, k + 1, gamma[k], limit.m0[k], limit.sinr0[k])
               for k in range(problem.num_subgroups)])
    for r in rows:
        table.add(f"N={r.N};covariance={r.covariance}", "max_rel_gap_m", r.gap_m)
        table.add(f"N={r.N};covariance={r.covariance}", "max_rel_gap_sinr", r.gap_sinr)
    return limit, rows


def _run_fractions(cfg, table, P):
    problem = build_problem(cfg, cfg["seed"], P)
    plans = {}
    for kind in cfg["utility"]:
        plan = greedy_fractions(problem, kind, cfg["delta_gamma"], cfg["with_stop"], floor=cfg["eps_floor"],
                                nodes=cfg["nodes"])
        plans[kind] = plan
        rates = plan.solution.rates / LOG2
        table.put(f"plan_{kind}.csv", ["group", "subgroup", "theta_deg", "delta_deg", "gamma", "rate_norm"],
                  [(int(problem.group_of[k]) + 1, k + 1, problem.profiles[k].aoa_deg,
                    problem.profiles[k].spread_deg, plan.gamma[k], rates[k]) for k in range(problem.num_subgroups)])
        table.put(f"trace_{kind}.csv", ["iter", "S", "objective"], plan.objective_trace)
        table.add(f"utility={kind}", "objective", plan.objective_trace[-1][2])
        table.add(f"utility={kind}", "sum_rate_bits", float(rates.sum()))
        table.add(f"utility={kind}", "subgroups_served", float(np.sum(plan.gamma > 0)))
    return problem, plans


def _run_prob_sched(cfg, table, P):
    problem = build_problem(cfg, cfg["seed"], P)
    plan = greedy_fractions(problem, cfg["utility"][0], cfg["delta_gamma"], cfg["with_stop"],
                            floor=cfg["eps_floor"], nodes=cfg["nodes"])
    res = prob_sched_experiment(problem, plan.gamma, plan.solution.sinr0, cfg["N_values"], cfg["trials"], cfg["seed"])
    header = ["group", "subgroup", "gamma", "sinr0"]
    for N in res.N_values:
        header += [f"mean_sinr_N{N}", f"mean_abs_err_N{N}", f"served_N{N}"]
    rows = []
    for k in range(problem.num_subgroups):
        row = [int(problem.group_of[k]) + 1, k + 1, res.gamma[k], res.sinr0[k]]
        for N in res.N_values:
            row += [res.mean_sinr[N][k], res.mean_abs_error[N][k], int(res.served[N][k])]
        rows.append(row)
    table.put("prob_sched.csv", header, rows)
    for N in res.N_values:
        err = res.mean_abs_error[N]
        table.add(f"N={N}", "mean_abs_sinr_error", float(np.nanmean(err)), trials=cfg["trials"],
                  excluded=int(res.dropped[N]))
    if len(res.N_values) >= 2:
        a, b = res.mean_abs_error[res.N_values[0]], res.mean_abs_error[res.N_values[1]]
        ok = np.isfinite(a) & np.isfinite(b)
        table.add(f"N={res.N_values[0]}->{res.N_values[1]}", "fraction_improved",
                  float(np.mean(b[ok] < a[ok])) if ok.any() else float("nan"), trials=int(ok.sum()))
    return res


_RUNNERS = {
    "scaling": _run_scaling,
    "ccdf": _run_ccdf,
    "grouping-compare": _run_grouping_compare,
    "largesystem": _run_largesystem,
    "fractions": _run_fractions,
    "prob-sched": _run_prob_sched,
}


def run_experiment(cfg: dict, out_root=None, defaulted: Sequence[str] = ()) -> ResultTable:
    """Run the experiment described by a validated configuration.

    With ``out_root`` the CSV files go to ``out_root/<experiment>-<hash8>/``:
    ``summary.csv`` plus experiment-specific tables, each starting with a
    ``# config_hash:`` line, and ``metadata.json`` (the only place holding
    timestamps and runtime).
    """
    chash = config_hash(cfg)
    table = ResultTable()
    started = time.perf_counter()
    exp = cfg["experiment"]
    out_dir = None
    if out_root is not None:
        out_dir = Path(out_root) / f"{exp}-{chash[:8]}"
        out_dir.mkdir(parents=True, exist_ok=True)
    runner = _RUNNERS.get(exp)
    if runner is None:
        raise InvalidParameterError(f"unknown experiment {exp!r}")
    powers = list(cfg["P_dB"])
    for p_db in powers:
        table.prefix = f"P_dB={p_db:g}" if len(powers) > 1 else ""
        runner(cfg, table, db_to_linear(p_db))
    table.prefix = ""
    table.metadata.update({
        "experiment": exp,
        "config_hash": chash,
        "seed": cfg["seed"],
        "trials": cfg.get("trials"),
        "config": cfg,
        "defaulted_keys": list(defaulted),
        "runtime_seconds": time.perf_counter() - started,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    })
    if out_dir is not None:
        table.out_dir = out_dir
        write_csv(out_dir / "summary.csv", ["sweep_point", "metric", "mean", "stderr", "trials", "excluded"],
                  table.rows, chash)
        for name, (header, rows) in table.files.items():
            write_csv(out_dir / name, header, rows, chash)
        with open(out_dir / "metadata.json", "w") as fh:
            json.dump(table.metadata, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
    return table
