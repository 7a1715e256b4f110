"""Closed-form Gamma laws for the i.i.d. Rayleigh reference case.

Used as the oracle the Monte Carlo simulator is checked against.  All
arithmetic is in linear units; dB/dBm only in :func:`link_budget`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats


@dataclass(frozen=True)
class GammaParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError(f"Gamma parameters must be positive, got ({self.shape}, {self.scale})")

    @property
    def mean(self):
        return self.shape * self.scale

    @property
    def variance(self):
        return self.shape * self.scale**2

    @property
    def second_moment(self):
        return self.variance + self.mean**2

    def cdf(self, x):
        return stats.gamma.cdf(x, self.shape, scale=self.scale)

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, self.scale, size)


def gamma_pdf(x, p: GammaParams):
    """Density ``x^(k-1) exp(-x/theta) / (theta^k Gamma(k))``, zero for x < 0.

    Evaluated in the log domain so large shapes do not overflow.
    """
    x = np.asarray(x, dtype=float)
    k, th = p.shape, p.scale
    with np.errstate(divide="ignore", invalid="ignore"):
        logpdf = (k - 1) * np.log(x) - x / th - k * math.log(th) - special.gammaln(k)
        out = np.exp(logpdf)
    if k == 1:
        out = np.where(x == 0, 1.0 / th, out)
    out = np.where(x < 0, 0.0, out)
    return out if out.ndim else float(out)


def beta_eq(beta_linear, Px, Ga_linear):
    """Equivalent power gain ``beta / (Px * Ga)``."""
    if beta_linear <= 0 or Px <= 0 or Ga_linear <= 0:
        raise ValueError("beta, Px and Ga must be positive")
    return beta_linear / (Px * Ga_linear)


def second_order_approx(terms):
    """Moment-matched Gamma for a sum of independent Gamma variables."""
    terms = list(terms)
    if not terms:
        raise ValueError("need at least one term")
    m1 = sum(t.shape * t.scale for t in terms)
    m2 = sum(t.shape * t.scale**2 for t in terms)
    return GammaParams(m1**2 / m2, m2 / m1)


def aa_baseline(K, L, beq) -> GammaParams:
    """Sum power of K*L terminals under all-antenna transmission."""
    return second_order_approx([GammaParams(K, beq)] * L)


def sa_baseline(M, K, L, beq) -> GammaParams:
    """Sum power under switched-antenna transmission: per terminal
    Gamma(M, beq/M), aggregated over K terminals and L clusters."""
    per_terminal = GammaParams(M, beq / M)
    cluster = second_order_approx([per_terminal] * K)
    return second_order_approx([cluster] * L)


def projection_power(c, K, base: GammaParams):
    """Power law of ``c`` of the ``K`` coordinates; returns (params, second moment)."""
    if not 1 <= c <= K:
        raise ValueError(f"need 1 <= c <= K, got c={c}, K={K}")
    p = GammaParams(c / K * base.shape, base.scale)
    return p, p.second_moment


def link_budget(Px_dBm, Ga_dB, Gp_dB, beta_dB):
    """Received power in dBm; ``beta_dB`` is a gain (negative for loss)."""
    return Px_dBm + Ga_dB + Gp_dB + beta_dB


def precoding_gain_db(Pr_dBm, Px_dBm, Ga_dB, beta_dB):
    """Inverse of :func:`link_budget` for the precoder gain."""
    return Pr_dBm - Px_dBm - Ga_dB - beta_dB


def ks_distance(samples, params: GammaParams):
    """Kolmogorov-Smirnov distance between samples and a Gamma law."""
    return float(stats.kstest(np.asarray(samples), params.cdf).statistic)
