"""Validation battery: the simulator checked against closed-form laws.

Each check returns a :class:`CheckResult`.  Statistical tolerances are sized
for the reference trial count; smaller runs widen them by
``sqrt(REFERENCE_TRIALS / trials)`` so that quick smoke runs stay meaningful
without flaking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .analytics import GammaParams, aa_baseline, gamma_pdf, ks_distance, sa_baseline, second_order_approx
from .channel import sample_fading, trial_rng
from .config import ClusterConfig, SystemConfig
from .constrained import real_equivalent, to_real
from .precoding import precoder_stat
from .simulation import run_trials

REFERENCE_TRIALS = 10_000


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def rayleigh_reference_config(seed=1) -> SystemConfig:
    """M=8, one cluster of K=8, no LOS, uncorrelated fading, unit gains."""
    return SystemConfig(num_antennas=8, clusters=(ClusterConfig(8, 90.0, 0.0, 0.0, 0.0),),
                        tx_power_w=1.0, antenna_gain_db=0.0, seed=seed, correlation="iid")


def _rel(a, b):
    return abs(a - b) / abs(b)


def _moments_check(name, samples, law: GammaParams, scale, mean_tol=0.02, var_tol=0.10, ks_tol=0.02):
    m, v = float(np.mean(samples)), float(np.var(samples, ddof=1))
    ks = ks_distance(samples, law)
    em, ev = _rel(m, law.mean), _rel(v, law.variance)
    ok = em <= mean_tol * scale and ev <= var_tol * scale and ks <= ks_tol * scale
    detail = (f"mean {m:.5g} vs {law.mean:.5g} (rel {em:.4f}), var {v:.5g} vs {law.variance:.5g} "
              f"(rel {ev:.4f}), KS {ks:.4f}")
    return CheckResult(name, ok, detail)


def check_aa(trials, seed, scale):
    cfg = rayleigh_reference_config(seed)
    x = [r.sum_power_rf for r in run_trials(cfg, None, "AA", trials)]
    return _moments_check("aa_vs_gamma(KL, beta_eq)", x, aa_baseline(8, 1, 1.0), scale)


def check_sa(trials, seed, scale):
    cfg = rayleigh_reference_config(seed)
    x = [r.sum_power_rf for r in run_trials(cfg, None, "SA", trials)]
    return _moments_check("sa_vs_gamma(MKL, beta_eq/M)", x, sa_baseline(8, 8, 1, 1.0), scale)


def check_exponential(trials, seed, scale):
    """|Y|^2 for Y ~ CN(0, 1) is exponential(1)."""
    y = sample_fading(trials, 1, trial_rng(seed, 1_000_001)).ravel()
    ks = ks_distance(np.abs(y) ** 2, GammaParams(1.0, 1.0))
    return CheckResult("cn_power_is_exponential", ks <= 0.02 * scale, f"KS {ks:.4f}")


def check_exponential_sum(trials, seed, scale, n=8):
    """A sum of n i.i.d. exponential(1) variables is Gamma(n, 1).

    Mean and variance must land within three standard errors.
    """
    rng = trial_rng(seed, 1_000_002)
    s = rng.exponential(1.0, (trials, n)).sum(axis=1)
    se_mean = 1.0 / math.sqrt(n * trials)
    se_var = math.sqrt((2.0 + 6.0 / n) / trials)
    em, ev = _rel(s.mean(), n), _rel(s.var(ddof=1), n)
    ok = em <= 3 * se_mean * scale and ev <= 3 * se_var * scale
    return CheckResult("exponential_sum_is_gamma", ok, f"mean rel {em:.4f}, var rel {ev:.4f}")


def check_gamma_scaling(scale, a=3.7, k=2.5, theta=0.8):
    """Density of a*X for X ~ Gamma(k, theta) equals Gamma(k, a*theta)."""
    xs = np.array([0.1, 0.5, 1.0, 4.0, 12.0])
    lhs = gamma_pdf(xs, GammaParams(k, a * theta))
    rhs = gamma_pdf(xs / a, GammaParams(k, theta)) / a
    err = float(np.max(np.abs(lhs - rhs) / rhs))
    return CheckResult("gamma_scaling", err <= 1e-12 * scale, f"max rel err {err:.2e}")


def check_pdf_normalization(scale):
    p = GammaParams(24.0, 0.5)
    total, _ = integrate.quad(lambda x: gamma_pdf(x, p), 0, 50 * p.mean, limit=200)
    err = abs(total - 1.0)
    return CheckResult("gamma_pdf_normalized", err <= 1e-6 * scale, f"|integral - 1| {err:.2e}")


def check_moment_preservation(seed, scale):
    rng = trial_rng(seed, 1_000_003)
    worst = 0.0
    for _ in range(50):
        terms = [GammaParams(k, t) for k, t in rng.uniform(0.1, 20.0, (rng.integers(1, 9), 2))]
        y = second_order_approx(terms)
        m1 = sum(t.mean for t in terms)
        var = sum(t.variance for t in terms)
        worst = max(worst, _rel(y.mean, m1), _rel(y.variance, var))
    return CheckResult("second_order_moments", worst <= 1e-12 * scale, f"max rel err {worst:.2e}")


def check_real_equivalent(seed, scale):
    rng = trial_rng(seed, 1_000_004)
    worst = 0.0
    for _ in range(50):
        r, M = rng.integers(1, 49), rng.integers(1, 9)
        A = rng.standard_normal((r, M)) + 1j * rng.standard_normal((r, M))
        x = rng.standard_normal(M) + 1j * rng.standard_normal(M)
        lhs = np.linalg.norm(A @ x) ** 2
        rhs = np.linalg.norm(real_equivalent(A) @ to_real(x)) ** 2
        worst = max(worst, _rel(rhs, lhs))
    return CheckResult("real_equivalent_identity", worst <= 1e-12 * scale, f"max rel err {worst:.2e}")


def check_svd_optimality(trials, seed, scale, instances=10):
    """The SVD beam beats every random vector on the power sphere."""
    rng = trial_rng(seed, 1_000_005)
    margin = math.inf
    for _ in range(instances):
        # M >= 2: with one antenna every unit-power beam is optimal
        r, M = rng.integers(1, 49), rng.integers(2, 9)
        A = rng.standard_normal((r, M)) + 1j * rng.standard_normal((r, M))
        best = np.linalg.norm(A @ precoder_stat(A, 1.0).x) ** 2
        X = rng.standard_normal((M, trials)) + 1j * rng.standard_normal((M, trials))
        X /= np.linalg.norm(X, axis=0)
        rand = np.max(np.sum(np.abs(A @ X) ** 2, axis=0))
        margin = min(margin, (best - rand) / best)
    # scale < 0 turns every check into a failure; used to test the failure path
    ok = margin > 0 if scale > 0 else margin <= scale
    return CheckResult("svd_beats_random_search", ok, f"min relative margin {margin:.3e}")


def run_selfcheck(trials=REFERENCE_TRIALS, seed=1, tolerance_scale=None):
    """Run the whole battery; returns ``(results, wide_mode)``."""
    if trials < 2:
        raise ValueError("selfcheck needs at least 2 trials")
    wide = trials < REFERENCE_TRIALS
    scale = math.sqrt(REFERENCE_TRIALS / trials) if wide else 1.0
    if tolerance_scale is not None:
        scale = tolerance_scale
    results = [
        check_aa(trials, seed, scale),
        check_sa(trials, seed, scale),
        check_exponential(trials, seed, scale),
        check_exponential_sum(trials, seed, scale),
        check_gamma_scaling(scale),
        check_pdf_normalization(scale),
        check_moment_preservation(seed, scale),
        check_real_equivalent(seed, scale),
        check_svd_optimality(trials, seed, scale),
    ]
    return results, wide
