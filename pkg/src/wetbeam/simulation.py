"""Monte Carlo harness: per-trial channel draws, scheme evaluation, harvesting,
summaries and parameter sweeps."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .channel import cluster_statistics, realize_channel, sample_correlation, trial_rng
from .config import ClusterConfig, ConfigError, EhCircuit, SystemConfig, cluster_angles
from .constrained import INFEASIBLE, full_problem, solve_constrained, stat_problem
from .precoding import (Scheme, build_stat_matrix, full_csit_matrix, precoder_aa, precoder_full_csit,
                        expected_terminal_powers, precoder_mp_multi, precoder_stat, received_powers)

log = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("kappa", "antennas", "angle", "rotation", "clusters")
# stream index reserved for correlation matrices held fixed across trials
_FROZEN_STREAM = 2**63


class AllInfeasibleError(ValueError):
    """Every trial of a constrained run was infeasible."""


def harvest(p_in, circuit: EhCircuit):
    """Harvested DC power for RF input ``p_in`` (scalar or array)."""
    out = _kernels.harvest(p_in, circuit.sensitivity, circuit.saturation, circuit.efficiency)
    return float(np.ravel(out)[0]) if np.ndim(p_in) == 0 else out


@dataclass
class TrialRecord:
    trial: int
    scheme: Scheme
    sum_power_rf: float
    per_cluster_rf: np.ndarray
    per_terminal_rf: np.ndarray
    sum_power_harvested: float
    status: str = "ok"
    # mean power per terminal over the fading, under the trial's statistics; None for SA
    expected_per_terminal: np.ndarray | None = field(default=None, repr=False)

    @property
    def feasible(self):
        return self.status != INFEASIBLE


@dataclass
class StatsSummary:
    mean: float
    variance: float
    count: int
    bin_edges: np.ndarray
    counts: np.ndarray
    per_cluster_mean: np.ndarray | None = None
    per_cluster_variance: np.ndarray | None = None
    harvested_mean: float | None = None
    infeasible: int = 0
    per_terminal_min: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        d = {
            "mean_w": self.mean,
            "variance_w2": self.variance,
            "count": self.count,
            "infeasible": self.infeasible,
            "histogram": {"edges_w": self.bin_edges.tolist(), "counts": self.counts.tolist()},
        }
        if self.harvested_mean is not None:
            d["harvested_mean_w"] = self.harvested_mean
        if self.per_cluster_mean is not None:
            d["per_cluster_mean_w"] = self.per_cluster_mean.tolist()
            d["per_cluster_variance_w2"] = self.per_cluster_variance.tolist()
        return d


def _frozen_correlations(cfg: SystemConfig):
    rng = trial_rng(cfg.seed, _FROZEN_STREAM)
    return [sample_correlation(c, cfg.num_antennas, min(c.num_terminals, cfg.num_antennas),
                               cfg.rotation_deg, rng, cfg.scatter_aperture_deg, cfg.element_spacing)
            for c in cfg.clusters]


def simulate_trial(cfg: SystemConfig, circuit: EhCircuit, scheme: Scheme, index, seed=None,
                   frozen=None) -> TrialRecord:
    """One channel draw evaluated under ``scheme``.

    Channel randomness is drawn before any scheme-specific randomness, so
    every scheme sees the same channel for the same ``(seed, index)``.
    """
    rng = trial_rng(cfg.seed if seed is None else seed, index)
    Px = cfg.tx_power_w
    stats = [cluster_statistics(c, cfg, rng, None if frozen is None else frozen[l])
             for l, c in enumerate(cfg.clusters)]
    reals = [realize_channel(st, rng) for st in stats]
    H = full_csit_matrix(reals)
    status = "ok"
    expected = None

    if scheme is Scheme.SA:
        slot = Px * np.abs(H) ** 2
        p = slot.mean(axis=1)
        harvested = harvest(slot, circuit).mean(axis=1)
    else:
        if scheme is Scheme.AA:
            x = precoder_aa(cfg.num_antennas, Px)
        elif scheme is Scheme.MP:
            x = precoder_mp_multi(stats, Px)
        elif scheme is Scheme.STAT_SINGLE:
            x = precoder_stat(build_stat_matrix(stats[:1]), Px, Scheme.STAT_SINGLE)
        elif scheme is Scheme.STAT_MULTI:
            x = precoder_stat(build_stat_matrix(stats), Px)
        elif scheme is Scheme.FULL_CSIT:
            x = precoder_full_csit(reals, Px)
        elif scheme in (Scheme.CONSTRAINED_STAT, Scheme.CONSTRAINED_FULL):
            lo, hi = cfg.solver.bounds(circuit)
            if scheme is Scheme.CONSTRAINED_STAT:
                problem = stat_problem(stats, Px, lo, hi, cfg.solver)
                x0 = precoder_stat(build_stat_matrix(stats), Px)
            else:
                problem = full_problem(reals, Px, lo, hi, cfg.solver)
                x0 = precoder_full_csit(reals, Px)
            sol = solve_constrained(problem, x0, rng)
            x, status = sol.x, sol.status
        else:
            raise ValueError(f"unsupported scheme {scheme}")
        p = received_powers(H, x)
        harvested = harvest(p, circuit)
        expected = expected_terminal_powers(stats, x)

    sizes = [c.num_terminals for c in cfg.clusters]
    per_cluster = np.add.reduceat(p, np.concatenate([[0], np.cumsum(sizes)[:-1]]))
    return TrialRecord(int(index), scheme, float(p.sum()), per_cluster, p,
                       float(np.sum(harvested)), status, expected)


def _run_chunk(args):
    cfg, circuit, scheme, seed, lo, hi = args
    frozen = _frozen_correlations(cfg) if cfg.freeze_correlation and cfg.correlation != "iid" else None
    return [simulate_trial(cfg, circuit, scheme, i, seed, frozen) for i in range(lo, hi)]


def run_trials(cfg: SystemConfig, circuit: EhCircuit | None = None, scheme=Scheme.STAT_MULTI,
               trials=10_000, seed=None, parallel=1):
    """Simulate ``trials`` independent channel draws.

    Output is identical for any ``parallel`` degree: trial ``i`` always uses
    the stream derived from ``(seed, i)`` and records are returned in
    trial order.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    circuit = cfg.eh if circuit is None else circuit
    scheme = Scheme.parse(scheme) if not isinstance(scheme, Scheme) else scheme
    seed = cfg.seed if seed is None else seed
    if parallel <= 1 or trials < 2 * parallel:
        return _run_chunk((cfg, circuit, scheme, seed, 0, trials))
    bounds = np.linspace(0, trials, parallel + 1).astype(int)
    jobs = [(cfg, circuit, scheme, seed, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        chunks = list(pool.map(_run_chunk, jobs))
    return [r for chunk in chunks for r in chunk]


def summarize(records, bins="fd"):
    """Mean, unbiased variance and histogram of the sum RF power.

    Accepts :class:`TrialRecord` objects or raw samples.  Infeasible
    constrained trials are dropped and counted.
    """
    records = list(records)
    if not records:
        raise ValueError("nothing to summarize")
    per_cluster = harvested = None
    infeasible = 0
    if isinstance(records[0], TrialRecord):
        kept = [r for r in records if r.feasible]
        infeasible = len(records) - len(kept)
        if not kept:
            raise AllInfeasibleError(f"all {len(records)} trials were infeasible")
        samples = np.array([r.sum_power_rf for r in kept])
        per_cluster = np.array([r.per_cluster_rf for r in kept])
        harvested = float(np.mean([r.sum_power_harvested for r in kept]))
    else:
        samples = np.asarray(records, dtype=float)
    n = samples.size
    var = float(samples.var(ddof=1)) if n > 1 else 0.0
    counts, edges = np.histogram(samples, bins=bins)
    out = StatsSummary(float(samples.mean()), var, n, edges, counts, harvested_mean=harvested,
                       infeasible=infeasible)
    if per_cluster is not None:
        out.per_cluster_mean = per_cluster.mean(axis=0)
        out.per_cluster_variance = per_cluster.var(axis=0, ddof=1) if n > 1 else np.zeros(per_cluster.shape[1])
    return out


def apply_parameter(cfg: SystemConfig, parameter, value) -> SystemConfig:
    """Return ``cfg`` with one swept parameter changed."""
    if parameter == "kappa":
        return cfg.replace(clusters=tuple(_with(c, kappa=float(value)) for c in cfg.clusters))
    if parameter == "antennas":
        M = int(value)
        if M != value:
            raise ConfigError(f"antennas must be an integer, got {value}")
        return cfg.replace(num_antennas=M)
    if parameter == "angle":
        return cfg.replace(clusters=tuple(_with(c, angle_deg=float(value)) for c in cfg.clusters))
    if parameter == "rotation":
        return cfg.replace(rotation_deg=float(value))
    if parameter == "clusters":
        L = int(value)
        if L != value or L < 1:
            raise ConfigError(f"clusters must be a positive integer, got {value}")
        base = cfg.clusters[0]
        return cfg.replace(clusters=tuple(_with(base, angle_deg=a) for a in cluster_angles(L)))
    raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {', '.join(SWEEP_PARAMETERS)}")


def _with(cluster: ClusterConfig, **changes):
    from dataclasses import replace

    return replace(cluster, **changes)


def sweep(cfg: SystemConfig, circuit=None, scheme=Scheme.STAT_MULTI, parameter="kappa", values=(),
          trials=10_000, seed=None, parallel=1):
    """One summary per value, or the error that value produced.

    Returns a list of ``(value, StatsSummary | Exception)``.
    """
    out = []
    for value in values:
        try:
            c = apply_parameter(cfg, parameter, value)
            recs = run_trials(c, circuit, scheme, trials, seed, parallel)
            out.append((value, summarize(recs)))
        except (ConfigError, ValueError) as exc:
            if parameter not in SWEEP_PARAMETERS:
                raise
            log.warning("%s=%s failed: %s", parameter, value, exc)
            out.append((value, exc))
    return out


def compare_schemes(cfg: SystemConfig, circuit=None, schemes=(Scheme.STAT_MULTI,), trials=10_000,
                    seed=None, parallel=1):
    return {Scheme.parse(s) if not isinstance(s, Scheme) else s:
            summarize(run_trials(cfg, circuit, s, trials, seed, parallel))
            for s in schemes}
