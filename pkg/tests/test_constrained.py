import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from conftest import random_complex
from wetbeam.channel import cluster_statistics, realize_channel, trial_rng
from wetbeam.config import SolverOptions, operating_point_config
from wetbeam.constrained import (INFEASIBLE, OPTIMAL, ConstrainedProblem, feasibility_report, full_problem,
                                 real_equivalent, solve_constrained, stat_problem, to_complex, to_real)
from wetbeam.precoding import build_stat_matrix, expected_terminal_powers, precoder_stat, received_powers

FAIR_LO, FAIR_HI = 148.8e-6, 311e-6


def op_case(seed=0):
    cfg = operating_point_config()
    rng = trial_rng(seed, 0)
    stats = [cluster_statistics(c, cfg, rng) for c in cfg.clusters]
    return cfg, stats, rng


def random_problem(rng, lower=0.0, upper=math.inf, terminals=6, M=6, Px=1.0):
    A = random_complex(rng, terminals, M)
    return ConstrainedProblem(A, [A[i:i + 1] for i in range(terminals)], Px, lower, upper)


class TestRealEquivalent:
    def test_real_matrix(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        R = real_equivalent(A)
        np.testing.assert_array_equal(R[:2, :2], A)
        np.testing.assert_array_equal(R[2:, 2:], A)
        assert not np.any(R[:2, 2:]) and not np.any(R[2:, :2])

    def test_imaginary_unit(self):
        np.testing.assert_array_equal(real_equivalent(np.array([[1j]])), [[0, -1], [1, 0]])

    @given(st.integers(1, 12), st.integers(1, 8), st.integers(0, 2**31))
    @settings(max_examples=50)
    def test_norm_identity(self, p, M, seed):
        rng = np.random.default_rng(seed)
        A, x = random_complex(rng, p, M), random_complex(rng, M)
        lhs = np.linalg.norm(A @ x) ** 2
        assert np.linalg.norm(real_equivalent(A) @ to_real(x)) ** 2 == pytest.approx(lhs, rel=1e-12)
        np.testing.assert_array_equal(to_complex(to_real(x)), x)


class TestProblem:
    def test_bounds_validated(self, rng):
        with pytest.raises(ValueError):
            random_problem(rng, lower=2.0, upper=1.0)
        with pytest.raises(ValueError):
            random_problem(rng, Px=0.0)

    def test_stat_factors_match_expected_powers(self, rng):
        _, stats, _ = op_case()
        prob = stat_problem(stats, 10.0)
        x = random_complex(rng, 8)
        np.testing.assert_allclose(prob.terminal_powers(x), expected_terminal_powers(stats, x), rtol=1e-12)
        assert prob.objective_value(x) == pytest.approx(np.sum(expected_terminal_powers(stats, x)), rel=1e-12)

    def test_full_factors_are_channel_rows(self, rng):
        _, stats, r = op_case()
        reals = [realize_channel(s, r) for s in stats]
        prob = full_problem(reals, 10.0)
        H = np.vstack([q.H_eff for q in reals])
        x = random_complex(rng, 8)
        np.testing.assert_allclose(prob.terminal_powers(x), received_powers(H, x), rtol=1e-12)


class TestFeasibilityReport:
    def test_unconstrained_optimum_within_circuit_window(self):
        cfg, stats, _ = op_case()
        lo, hi = cfg.eh.sensitivity, cfg.eh.saturation
        prob = stat_problem(stats, cfg.tx_power_w, lo, hi)
        x = precoder_stat(build_stat_matrix(stats), cfg.tx_power_w)
        slacks = dict(feasibility_report(prob, x))
        assert all(v > 0 for k, v in slacks.items() if k != "power_budget")
        assert slacks["power_budget"] == pytest.approx(0.0, abs=1e-12)

    def test_zero_beam(self, rng):
        prob = random_problem(rng, lower=0.3)
        rep = feasibility_report(prob, np.zeros(6))
        assert [v for k, v in rep if k.startswith("lower")] == [-0.3] * 6

    def test_budget_slack(self, rng):
        prob = random_problem(rng, Px=2.0)
        x = random_complex(rng, 6)
        assert feasibility_report(prob, x)[0][1] == pytest.approx(2.0 - np.linalg.norm(x) ** 2)


class TestSolver:
    def test_unconstrained_equivalence(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            prob = random_problem(rng, terminals=rng.integers(2, 10), M=rng.integers(2, 8))
            sol = solve_constrained(prob, rng=rng)
            bound = prob.Px * np.linalg.norm(prob.objective, 2) ** 2
            assert sol.status == OPTIMAL
            assert abs(sol.objective_value - bound) / bound <= 1e-4
            assert sol.objective_value <= bound + 1e-9

    def test_unreachable_lower_bound(self, rng):
        prob = random_problem(rng)
        prob.lower = 1.1 * prob.Px * np.linalg.norm(prob.objective, 2) ** 2
        sol = solve_constrained(prob, rng=rng)
        assert sol.status == INFEASIBLE and sol.constraint_violation > 0

    def test_conflicting_lower_bounds_infeasible(self):
        # two terminals with orthogonal channels and Px = 1: each can get 1,
        # but not both at 0.6
        A = np.array([[1.0, 0.0], [0.0, 1.0]], complex)
        prob = ConstrainedProblem(A, [A[:1], A[1:]], 1.0, 0.6, math.inf)
        sol = solve_constrained(prob, rng=np.random.default_rng(0))
        assert sol.status == INFEASIBLE

    def test_init_scaled_into_ball(self, rng):
        prob = random_problem(rng)
        sol = solve_constrained(prob, x_init=10 * np.ones(6), rng=rng)
        assert sol.x.power <= prob.Px * (1 + 1e-8)

    def test_matches_slsqp_oracle(self):
        """Independent oracle: SciPy SLSQP from many starts on the same problem."""
        rng = np.random.default_rng(7)
        for _ in range(4):
            prob = random_problem(rng, terminals=5, M=4)
            s2 = np.linalg.norm(prob.objective, 2) ** 2
            prob.lower = 0.15 * s2 / 5
            prob.upper = 0.5 * s2
            Ar = real_equivalent(prob.objective)
            Cs = [real_equivalent(C) for C in prob.terminal_factors]
            Q = Ar.T @ Ar
            cons = [{"type": "ineq", "fun": lambda z: prob.Px - z @ z, "jac": lambda z: -2 * z}]
            for C in Cs:
                G = C.T @ C
                cons.append({"type": "ineq", "fun": lambda z, G=G: z @ G @ z - prob.lower,
                             "jac": lambda z, G=G: 2 * G @ z})
                cons.append({"type": "ineq", "fun": lambda z, G=G: prob.upper - z @ G @ z,
                             "jac": lambda z, G=G: -2 * G @ z})
            best = -math.inf
            for _ in range(30):
                z0 = rng.standard_normal(8)
                res = minimize(lambda z: -z @ Q @ z, z0 / np.linalg.norm(z0), jac=lambda z: -2 * Q @ z,
                               method="SLSQP", constraints=cons, options={"maxiter": 500, "ftol": 1e-12})
                viol = min(c["fun"](res.x) for c in cons)
                if res.success and viol >= -1e-9:
                    best = max(best, -res.fun)
            sol = solve_constrained(prob, rng=rng)
            assert sol.status == OPTIMAL
            assert sol.objective_value >= best * (1 - 1e-5)

    def test_optimal_solutions_satisfy_constraints(self):
        for seed in range(3):
            cfg, stats, rng = op_case(seed)
            prob = stat_problem(stats, cfg.tx_power_w, FAIR_LO, FAIR_HI)
            sol = solve_constrained(prob, precoder_stat(build_stat_matrix(stats), cfg.tx_power_w), rng)
            assert sol.status == OPTIMAL
            assert sol.x.power <= cfg.tx_power_w * (1 + 1e-8)
            p = prob.terminal_powers(sol.x)
            assert np.all(p >= FAIR_LO - 1e-9) and np.all(p <= FAIR_HI + 1e-9)
            np.testing.assert_allclose(sol.per_terminal_powers, p, rtol=1e-10)
            np.testing.assert_allclose(sol.internal_powers, p, rtol=1e-10)
            bound = cfg.tx_power_w * np.linalg.norm(prob.objective, 2) ** 2
            assert sol.objective_value <= bound + 1e-9

    def test_fairness_balances_clusters(self):
        cfg, stats, rng = op_case(1)
        x0 = precoder_stat(build_stat_matrix(stats), cfg.tx_power_w)
        sol = solve_constrained(stat_problem(stats, cfg.tx_power_w, FAIR_LO, FAIR_HI), x0, rng)
        un = expected_terminal_powers(stats, x0).reshape(3, 8).sum(axis=1)
        con = sol.per_terminal_powers.reshape(3, 8).sum(axis=1)
        assert un.max() / un.min() > 4
        assert con.max() / con.min() < 1.5

    def test_full_mode(self):
        cfg, stats, rng = op_case(2)
        reals = [realize_channel(s, rng) for s in stats]
        prob = full_problem(reals, cfg.tx_power_w, 100e-6, 1.0)
        sol = solve_constrained(prob, rng=rng)
        assert sol.status == OPTIMAL
        H = np.vstack([r.H_eff for r in reals])
        assert np.all(received_powers(H, sol.x) >= 100e-6 - 1e-9)

    def test_deterministic(self):
        cfg, stats, _ = op_case(4)
        prob = stat_problem(stats, cfg.tx_power_w, FAIR_LO, FAIR_HI)
        a = solve_constrained(prob, rng=np.random.default_rng(3))
        b = solve_constrained(prob, rng=np.random.default_rng(3))
        np.testing.assert_array_equal(a.x.x, b.x.x)
        assert a.objective_value == b.objective_value and a.start_index == b.start_index

    @pytest.mark.parametrize("use_numba", [True, False])
    def test_both_kernel_paths(self, use_numba):
        from wetbeam import _kernels

        if use_numba and not _kernels.HAVE_NUMBA:
            pytest.skip("numba unavailable")
        cfg, stats, rng = op_case(5)
        prob = stat_problem(stats, cfg.tx_power_w, FAIR_LO, FAIR_HI, SolverOptions(multistart=3))
        sol = solve_constrained(prob, rng=rng, use_numba=use_numba)
        assert sol.status == OPTIMAL
