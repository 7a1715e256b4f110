"""EH-constrained sum-power precoder.

Maximize the (expected or instantaneous) sum RF power subject to
``||x||^2 <= Px`` and a per-terminal power window ``[lower, upper]``.  The
lower bound is what creates fairness between clusters: terminals of a starved
cluster must still reach ``lower``.

The complex problem is solved over the real-equivalent variable
``z = [Re x; Im x]`` by an augmented-Lagrangian method with projected-gradient
inner steps (see :mod:`wetbeam._kernels`), restarted from several points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .config import SolverOptions
from .precoding import BeamVector, Scheme, build_stat_matrix, full_csit_matrix, precoder_aa, top_right_singular

OPTIMAL = "optimal-feasible"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max-iterations"


def real_equivalent(A):
    """``[[Re A, -Im A], [Im A, Re A]]``, so that ``||A x|| == ||A_r [Re x; Im x]||``."""
    A = np.atleast_2d(np.asarray(A))
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def to_real(x):
    x = np.asarray(x)
    return np.concatenate([x.real, x.imag])


def to_complex(z):
    n = z.shape[0] // 2
    return z[:n] + 1j * z[n:]


@dataclass
class ConstrainedProblem:
    """``objective``: complex matrix whose squared norm is maximized.
    ``terminal_factors``: one complex matrix per terminal; terminal power
    is ``||C_t x||^2``."""

    objective: np.ndarray
    terminal_factors: list
    Px: float
    lower: float = 0.0
    upper: float = math.inf
    options: SolverOptions = field(default_factory=SolverOptions)
    scheme: Scheme = Scheme.CONSTRAINED_STAT

    def __post_init__(self):
        if not 0 <= self.lower < self.upper:
            raise ValueError("need 0 <= lower < upper")
        if self.Px <= 0:
            raise ValueError("Px must be positive")

    @property
    def num_antennas(self):
        return self.objective.shape[1]

    def terminal_powers(self, x):
        x = x.x if isinstance(x, BeamVector) else np.asarray(x)
        return np.array([np.sum(np.abs(C @ x) ** 2) for C in self.terminal_factors])

    def objective_value(self, x):
        x = x.x if isinstance(x, BeamVector) else np.asarray(x)
        return float(np.sum(np.abs(self.objective @ x) ** 2))


def stat_problem(stats_list, Px, lower=0.0, upper=math.inf, options=None):
    """Expected-power formulation from slow channel statistics."""
    stats_list = list(stats_list)
    factors = []
    for st in stats_list:
        mp = st.alpha2 * st.mp_factor
        for k in range(st.num_terminals):
            factors.append(np.vstack([st.alpha1 * st.H_los[k:k + 1], mp]))
    return ConstrainedProblem(build_stat_matrix(stats_list).A, factors, Px, lower, upper,
                              options or SolverOptions(), Scheme.CONSTRAINED_STAT)


def full_problem(realizations, Px, lower=0.0, upper=math.inf, options=None):
    """Instantaneous-power formulation for known channels."""
    B = full_csit_matrix(realizations)
    factors = [B[i:i + 1] for i in range(B.shape[0])]
    return ConstrainedProblem(B, factors, Px, lower, upper, options or SolverOptions(),
                              Scheme.CONSTRAINED_FULL)


@dataclass
class ConstrainedSolution:
    x: BeamVector
    objective_value: float
    per_terminal_powers: np.ndarray
    status: str
    constraint_violation: float
    start_index: int = -1
    iterations: int = 0
    kkt_residual: float = math.inf
    internal_powers: np.ndarray | None = None


def feasibility_report(problem: ConstrainedProblem, x):
    """Signed slack of every constraint (positive means satisfied).

    Returns a list of ``(name, slack)``: ``power_budget`` first, then
    ``lower[t]`` and ``upper[t]`` per terminal.
    """
    x = x.x if isinstance(x, BeamVector) else np.asarray(x)
    p = problem.terminal_powers(x)
    report = [("power_budget", float(problem.Px - np.vdot(x, x).real))]
    for t, pt in enumerate(p):
        report.append((f"lower[{t}]", float(pt - problem.lower)))
        report.append((f"upper[{t}]", float(problem.upper - pt)))
    return report


def _violation(problem, x, p):
    budget = max(0.0, float(np.vdot(x, x).real) - problem.Px * (1 + 1e-8))
    lo = max(0.0, float(np.max(problem.lower - p))) if problem.lower > 0 else 0.0
    hi = max(0.0, float(np.max(p - problem.upper))) if math.isfinite(problem.upper) else 0.0
    return max(budget, lo, hi)


def _dedupe(factors):
    """Group identical terminal factors; returns unique list and index map."""
    unique, index, seen = [], [], {}
    for C in factors:
        key = (C.shape, np.ascontiguousarray(C).tobytes())
        if key not in seen:
            seen[key] = len(unique)
            unique.append(C)
        index.append(seen[key])
    return unique, np.array(index)


def _starts(problem, x_init, rng):
    M = problem.num_antennas
    starts = [x_init, precoder_aa(M, problem.Px).x]
    while len(starts) < problem.options.multistart:
        g = rng.standard_normal(M) + 1j * rng.standard_normal(M)
        starts.append(np.sqrt(problem.Px) * g / np.linalg.norm(g))
    return starts[:problem.options.multistart]


def solve_constrained(problem: ConstrainedProblem, x_init=None, rng=None, use_numba=None):
    """Best local maximizer over the multistart set.

    Starts are ``x_init`` (default: the unconstrained optimum), the
    all-antennas vector, then random points on the power sphere.  Among
    feasible results the highest objective wins, ties going to the lower
    start index; if none is feasible the least-violating one is returned
    with status ``infeasible``.
    """
    opts = problem.options
    Px = problem.Px
    if rng is None:
        rng = np.random.default_rng(0)
    u_top, s_top, _ = top_right_singular(problem.objective)
    if x_init is None:
        x_init = np.sqrt(Px) * u_top
    x_init = x_init.x if isinstance(x_init, BeamVector) else np.asarray(x_init, dtype=complex)
    nrm2 = float(np.vdot(x_init, x_init).real)
    if nrm2 > Px:
        x_init = x_init * np.sqrt(Px / nrm2)

    unique, index = _dedupe(problem.terminal_factors)
    T = len(problem.terminal_factors)
    c0 = Px * s_top**2 / T  # typical per-terminal power; solver works in these units
    starts = _starts(problem, x_init, rng)

    # Terminals that cannot reach the lower bound make the problem infeasible outright.
    best_reach = np.array([Px * np.linalg.norm(C, 2) ** 2 for C in unique])
    if problem.lower > 0 and np.any(best_reach < problem.lower - opts.feas_tol):
        worst = int(np.argmin(best_reach))
        u, _, _ = top_right_singular(unique[worst])
        x = np.sqrt(Px) * u
        p = problem.terminal_powers(x)
        return ConstrainedSolution(BeamVector(x, problem.scheme), problem.objective_value(x), p,
                                   INFEASIBLE, _violation(problem, x, p))

    Q = real_equivalent(problem.objective)
    Q = Q.T @ Q / s_top**2
    rows = [real_equivalent(C) * math.sqrt(Px / c0) for C in unique]
    C = np.vstack(rows)
    start = np.concatenate([[0], np.cumsum([r.shape[0] for r in rows])])
    lo = np.full(len(unique), problem.lower / c0 if problem.lower > 0 else 0.0)
    hi = np.full(len(unique), problem.upper / c0)
    feas_tol_scaled = opts.feas_tol / c0

    results = []
    for i, x0 in enumerate(starts):
        u, iters, kkt, _ = _kernels.al_solve(
            Q, C, start, lo, hi, to_real(x0) / math.sqrt(Px),
            max_outer=opts.max_outer, max_inner=opts.max_inner, tol=opts.tol,
            feas_tol=feas_tol_scaled, use_numba=use_numba)
        x = math.sqrt(Px) * to_complex(u)
        p = problem.terminal_powers(x)
        viol = _violation(problem, x, p)
        v = C @ u
        internal = np.add.reduceat(v * v, start[:-1])[index] * c0
        results.append((i, x, p, viol, int(iters), float(kkt), internal))

    feasible = [r for r in results if r[3] <= opts.feas_tol]
    if feasible:
        i, x, p, viol, iters, kkt, internal = max(
            feasible, key=lambda r: (problem.objective_value(r[1]), -r[0]))
        status = OPTIMAL if kkt <= opts.tol else MAX_ITERATIONS
    else:
        i, x, p, viol, iters, kkt, internal = min(results, key=lambda r: (r[3], r[0]))
        status = INFEASIBLE
    return ConstrainedSolution(BeamVector(x, problem.scheme), problem.objective_value(x), p,
                               status, viol, i, iters, kkt, internal)
