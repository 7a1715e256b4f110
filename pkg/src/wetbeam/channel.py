"""Rician MIMO channel from a ULA to clusters of single-antenna terminals.

Per cluster, the effective K x M channel is

    H_eff = a1 * H_los + a2 * G @ diag(sqrt(Lambda)) @ U^H

with ``a1 = sqrt(g*kappa/(1+kappa))``, ``a2 = sqrt(g/(1+kappa))``, ``g`` the
linear channel gain, ``(U, Lambda)`` the Karhunen-Loeve factors of the
transmit correlation ``R`` and ``G`` i.i.d. CN(0, 1).  Rows of ``H_los`` are
unit-modulus steering vectors; ``trace(R) = M`` so each row of ``H_eff`` has
mean squared norm ``g * M``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .config import ClusterConfig, SystemConfig

RANK_RTOL = 1e-12
HERMITIAN_ATOL = 1e-8


def trial_rng(master_seed, trial_index):
    """Independent generator for one Monte Carlo trial.

    Derived from ``(master_seed, trial_index)`` only, so results do not
    depend on execution order or on how trials are split across workers.
    """
    return np.random.default_rng(np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(trial_index)]))


def rician_weights(beta_linear, kappa):
    """Return ``(alpha1, alpha2)`` splitting gain ``beta_linear`` between the
    LOS and multipath parts; ``kappa = inf`` gives a pure LOS channel."""
    if beta_linear < 0 or kappa < 0:
        raise ValueError("beta_linear and kappa must be non-negative")
    if np.isinf(kappa):
        return float(np.sqrt(beta_linear)), 0.0
    return (float(np.sqrt(beta_linear * kappa / (1.0 + kappa))),
            float(np.sqrt(beta_linear / (1.0 + kappa))))


def steering_vector(phi_deg, num_antennas, spacing=0.5):
    """ULA response toward ``phi_deg`` (measured from endfire); entry ``i``
    is ``exp(j*2*pi*i*spacing*cos(phi))``."""
    return _kernels.steering_matrix([phi_deg], num_antennas, spacing)[0]


def los_matrix(cluster: ClusterConfig, num_antennas, rotation_deg=0.0, rng=None, spacing=0.5):
    """LOS rows for the cluster's terminals.

    With zero angular aperture every row is the steering vector toward the
    (rotated) cluster centre.  Otherwise each terminal gets its own angle,
    uniform in ``centre +/- aperture``.
    """
    centre = cluster.angle_deg + rotation_deg
    K = cluster.num_terminals
    if cluster.aperture_deg == 0:
        angles = np.full(K, centre)
    else:
        if rng is None:
            raise ValueError("an rng is required when aperture_deg > 0")
        angles = rng.uniform(centre - cluster.aperture_deg, centre + cluster.aperture_deg, K)
    return _kernels.steering_matrix(angles, num_antennas, spacing), angles


def scatter_rays(cluster: ClusterConfig, num_rays, rotation_deg, scatter_aperture_deg, rng):
    centre = cluster.angle_deg + rotation_deg
    return rng.uniform(centre - scatter_aperture_deg, centre + scatter_aperture_deg, num_rays)


def correlation_from_rays(rays_deg, num_antennas, spacing=0.5):
    """One-ring correlation ``R = (1/N) sum_i a(ray_i) a(ray_i)^H``; trace ``M``."""
    S = _kernels.steering_matrix(rays_deg, num_antennas, spacing)
    return S.T @ S.conj() / len(rays_deg)


def sample_correlation(cluster: ClusterConfig, num_antennas, rank_target, rotation_deg=0.0,
                       rng=None, scatter_aperture_deg=90.0, spacing=0.5):
    """Draw a transmit correlation matrix from ``rank_target`` scatterer rays."""
    if rank_target > num_antennas:
        raise ValueError(f"rank_target={rank_target} exceeds num_antennas={num_antennas}")
    if rank_target < 1:
        raise ValueError("rank_target must be >= 1")
    rays = scatter_rays(cluster, rank_target, rotation_deg, scatter_aperture_deg, rng)
    return correlation_from_rays(rays, num_antennas, spacing)


def kl_factors(R):
    """Eigen-factors of a Hermitian PSD matrix, largest first.

    Eigenvalues below ``max * 1e-12`` are dropped; returns ``(U, Lambda)``
    with ``U`` of shape (M, r).
    """
    R = np.asarray(R)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("R must be square")
    scale = max(np.abs(R).max(), 1e-300)
    if np.abs(R - R.conj().T).max() > HERMITIAN_ATOL * scale:
        raise ValueError("R is not Hermitian")
    w, V = np.linalg.eigh((R + R.conj().T) / 2)
    w, V = w[::-1], V[:, ::-1]
    r = int(np.count_nonzero(w > w[0] * RANK_RTOL)) if w[0] > 0 else 0
    if r == 0:
        raise ValueError("R has no positive eigenvalue")
    return np.ascontiguousarray(V[:, :r]), w[:r].copy()


def kl_factors_from_rays(rays_deg, num_antennas, spacing=0.5):
    """Same factors as ``kl_factors(correlation_from_rays(...))`` via a thin
    SVD of the M x N ray matrix; cheaper when N << M."""
    S = _kernels.steering_matrix(rays_deg, num_antennas, spacing).T / np.sqrt(len(rays_deg))
    U, s, _ = np.linalg.svd(S, full_matrices=False)
    w = s**2
    r = int(np.count_nonzero(w > w[0] * RANK_RTOL))
    return np.ascontiguousarray(U[:, :r]), w[:r]


def sample_fading(num_rows, rank, rng):
    """i.i.d. CN(0, 1) matrix: real and imaginary parts each N(0, 1/2)."""
    if num_rows < 1 or rank < 1:
        raise ValueError("dimensions must be >= 1")
    return (rng.standard_normal((num_rows, rank)) + 1j * rng.standard_normal((num_rows, rank))) / np.sqrt(2.0)


@dataclass(frozen=True)
class ClusterStatistics:
    """Slow channel knowledge for one cluster (what the transmitter knows)."""

    H_los: np.ndarray
    U: np.ndarray
    Lambda: np.ndarray
    alpha1: float
    alpha2: float
    terminal_angles: np.ndarray | None = None

    @property
    def num_terminals(self):
        return self.H_los.shape[0]

    @property
    def num_antennas(self):
        return self.H_los.shape[1]

    @property
    def rank(self):
        return self.U.shape[1]

    @property
    def R(self):
        return (self.U * self.Lambda) @ self.U.conj().T

    @property
    def mp_factor(self):
        """``diag(sqrt(Lambda)) @ U^H``, shape (r, M)."""
        return np.sqrt(self.Lambda)[:, None] * self.U.conj().T


@dataclass(frozen=True)
class ChannelRealization:
    G: np.ndarray
    H_eff: np.ndarray


def cluster_statistics(cluster: ClusterConfig, cfg: SystemConfig, rng, R=None):
    """Draw LOS rows and a correlation for one cluster.

    The correlation rank is the number of terminals (capped at ``M``) unless
    ``R`` is supplied.  Channel gain is pathloss times antenna gain.
    """
    M = cfg.num_antennas
    H_los, angles = los_matrix(cluster, M, cfg.rotation_deg, rng, cfg.element_spacing)
    if R is None and cfg.correlation == "iid":
        U, lam = np.eye(M, dtype=complex), np.ones(M)
    elif R is None:
        rays = scatter_rays(cluster, min(cluster.num_terminals, M), cfg.rotation_deg,
                            cfg.scatter_aperture_deg, rng)
        U, lam = kl_factors_from_rays(rays, M, cfg.element_spacing)
    else:
        U, lam = kl_factors(R)
    a1, a2 = rician_weights(cluster.pathloss_linear * cfg.antenna_gain, cluster.kappa)
    return ClusterStatistics(H_los, U, lam, a1, a2, angles)


def realize_channel(stats: ClusterStatistics, rng):
    G = sample_fading(stats.num_terminals, stats.rank, rng)
    H = stats.alpha1 * stats.H_los
    if stats.alpha2 != 0.0:
        H = H + stats.alpha2 * (G @ stats.mp_factor)
    return ChannelRealization(G, H)
