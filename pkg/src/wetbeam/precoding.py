"""Closed-form beamformers and received-power evaluation."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, ClusterStatistics

DEGENERACY_RTOL = 1e-10


class Scheme(str, enum.Enum):
    MP = "MP"
    STAT_SINGLE = "STAT_SINGLE"
    STAT_MULTI = "STAT_MULTI"
    FULL_CSIT = "FULL_CSIT"
    AA = "AA"
    SA = "SA"
    CONSTRAINED_STAT = "CONSTRAINED_STAT"
    CONSTRAINED_FULL = "CONSTRAINED_FULL"

    @classmethod
    def parse(cls, name):
        try:
            return cls(str(name).strip().upper().replace("-", "_"))
        except ValueError:
            raise ValueError(
                f"unknown scheme {name!r}; choose from {', '.join(s.value for s in cls)}"
            ) from None


class DegenerateBeamWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class BeamVector:
    x: np.ndarray
    scheme: Scheme
    degenerate: bool = False

    @property
    def power(self):
        return float(np.vdot(self.x, self.x).real)


@dataclass(frozen=True)
class StackedStatMatrix:
    """Stacked statistics matrix; ``row_map`` holds ``(cluster, "LOS"|"MP", start, stop)``."""

    A: np.ndarray
    row_map: list = field(default_factory=list)


def fix_phase(x):
    """Rotate ``x`` so its largest-magnitude entry is real and positive."""
    x = np.asarray(x, dtype=complex)
    i = int(np.argmax(np.abs(x)))
    if abs(x[i]) == 0:
        return x
    out = x * (abs(x[i]) / x[i])
    out[i] = abs(x[i])
    return out


def top_right_singular(A):
    """Dominant right singular vector of ``A`` and a degeneracy flag."""
    A = np.asarray(A)
    if not np.any(A):
        raise ValueError("matrix is identically zero")
    _, s, Vh = np.linalg.svd(A, full_matrices=False)
    degenerate = len(s) > 1 and (s[0] - s[1]) < DEGENERACY_RTOL * s[0]
    return fix_phase(Vh[0].conj()), float(s[0]), bool(degenerate)


def build_stat_matrix(stats_list) -> StackedStatMatrix:
    """Stack ``a1*H_los`` over ``sqrt(K)*a2*Lambda^(1/2) U^H`` for each cluster.

    The multipath block is scaled by ``sqrt(K)`` so that ``||A x||^2`` is the
    expected sum power over all K terminals (each terminal sees unit-variance
    fading on every KL branch).
    """
    stats_list = list(stats_list)
    if not stats_list:
        raise ValueError("need at least one cluster")
    M = stats_list[0].num_antennas
    blocks, row_map, row = [], [], 0
    for l, st in enumerate(stats_list):
        if st.num_antennas != M:
            raise ValueError("clusters disagree on the number of antennas")
        los = st.alpha1 * st.H_los
        mp = np.sqrt(st.num_terminals) * st.alpha2 * st.mp_factor
        for tag, block in (("LOS", los), ("MP", mp)):
            blocks.append(block)
            row_map.append((l, tag, row, row + block.shape[0]))
            row += block.shape[0]
    return StackedStatMatrix(np.vstack(blocks), row_map)


def _beam(A, Px, scheme):
    u, _, degenerate = top_right_singular(A)
    if degenerate:
        warnings.warn("top singular value is degenerate; returning one maximizer",
                      DegenerateBeamWarning, stacklevel=3)
    return BeamVector(np.sqrt(Px) * u, scheme, degenerate)


def precoder_mp(U, Px) -> BeamVector:
    """Transmit along the dominant correlation eigenvector."""
    U = np.asarray(U)
    if U.size == 0:
        raise ValueError("U is empty")
    return BeamVector(np.sqrt(Px) * fix_phase(U[:, 0]), Scheme.MP)


def precoder_mp_multi(stats_list, Px) -> BeamVector:
    """Multipath-only precoder for several clusters (LOS knowledge ignored).

    Reduces to :func:`precoder_mp` for a single cluster.
    """
    stats_list = list(stats_list)
    if len(stats_list) == 1:
        return precoder_mp(stats_list[0].U, Px)
    A = np.vstack([np.sqrt(st.num_terminals) * st.mp_factor for st in stats_list])
    return BeamVector(_beam(A, Px, Scheme.MP).x, Scheme.MP)


def precoder_stat(A, Px, scheme=Scheme.STAT_MULTI) -> BeamVector:
    """``sqrt(Px)`` times the dominant right singular vector of ``A``."""
    A = A.A if isinstance(A, StackedStatMatrix) else A
    return _beam(A, Px, scheme)


def full_csit_matrix(realizations) -> np.ndarray:
    return np.vstack([r.H_eff if isinstance(r, ChannelRealization) else r for r in realizations])


def precoder_full_csit(realizations, Px) -> BeamVector:
    """Beam for known instantaneous channels: dominant right singular
    vector of all clusters' realized channels stacked."""
    return _beam(full_csit_matrix(realizations), Px, Scheme.FULL_CSIT)


def precoder_aa(num_antennas, Px) -> BeamVector:
    """All antennas on, equal power and phase."""
    return BeamVector(np.full(num_antennas, np.sqrt(Px / num_antennas), dtype=complex), Scheme.AA)


def sa_received_power(H_eff, Px):
    """Per-terminal RF power averaged over M single-antenna slots."""
    H_eff = np.atleast_2d(H_eff)
    return Px * np.mean(np.abs(H_eff) ** 2, axis=1)


def received_powers(H_eff, x):
    H_eff = np.atleast_2d(H_eff)
    x = x.x if isinstance(x, BeamVector) else np.asarray(x)
    if H_eff.shape[1] != x.shape[0]:
        raise ValueError(f"channel has {H_eff.shape[1]} antennas, beam has {x.shape[0]}")
    return np.abs(H_eff @ x) ** 2


def expected_terminal_power(stats: ClusterStatistics, k, x):
    """Mean RF power at terminal ``k`` over the fading, given the statistics."""
    if not 0 <= k < stats.num_terminals:
        raise IndexError(f"terminal {k} out of range")
    x = x.x if isinstance(x, BeamVector) else np.asarray(x)
    los = abs(stats.H_los[k] @ x) ** 2
    mp = np.sum(np.abs(stats.mp_factor @ x) ** 2)
    return float(stats.alpha1**2 * los + stats.alpha2**2 * mp)


def expected_terminal_powers(stats_list, x):
    """All terminals' expected powers, cluster-major order."""
    x = x.x if isinstance(x, BeamVector) else np.asarray(x)
    out = []
    for st in stats_list:
        mp = np.sum(np.abs(st.mp_factor @ x) ** 2)
        out.append(st.alpha1**2 * np.abs(st.H_los @ x) ** 2 + st.alpha2**2 * mp)
    return np.concatenate(out)
