"""The numba kernels and their numpy twins must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wetbeam import _kernels
from wetbeam.channel import cluster_statistics, trial_rng
from wetbeam.config import operating_point_config
from wetbeam.constrained import solve_constrained, stat_problem

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba unavailable or disabled")


@needs_numba
@given(st.lists(st.floats(-360, 360), min_size=1, max_size=20), st.integers(1, 64), st.floats(0.1, 2.0))
@settings(max_examples=40, deadline=None)
def test_steering_parity(angles, M, d):
    a = _kernels.steering_matrix(angles, M, d, use_numba=True)
    b = _kernels.steering_matrix(angles, M, d, use_numba=False)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_steering_matches_definition():
    phi, M, d = 37.0, 6, 0.5
    expected = np.exp(1j * 2 * np.pi * np.arange(M) * d * np.cos(np.deg2rad(phi)))
    np.testing.assert_allclose(_kernels.steering_matrix([phi], M, d, use_numba=False)[0], expected, atol=1e-14)


@needs_numba
@given(st.lists(st.floats(0, 1e-2), min_size=1, max_size=50))
@settings(max_examples=40, deadline=None)
def test_harvest_parity(p):
    a = _kernels.harvest(np.array(p), 6.3e-6, 311e-6, 0.25, use_numba=True)
    b = _kernels.harvest(np.array(p), 6.3e-6, 311e-6, 0.25, use_numba=False)
    np.testing.assert_array_equal(a, b)


def _problem(lower, index=0):
    cfg = operating_point_config()
    rng = trial_rng(cfg.seed, index)
    stats = [cluster_statistics(c, cfg, rng) for c in cfg.clusters]
    return stat_problem(stats, cfg.tx_power_w, lower, 311e-6), rng


@needs_numba
@pytest.mark.parametrize("lower", [0.0, 148.8e-6])
def test_solver_parity(lower):
    prob, _ = _problem(lower)
    a = solve_constrained(prob, rng=np.random.default_rng(0), use_numba=True)
    b = solve_constrained(prob, rng=np.random.default_rng(0), use_numba=False)
    assert a.status == b.status
    assert a.objective_value == pytest.approx(b.objective_value, rel=1e-6)


def test_env_flag_selects_numpy():
    code = "from wetbeam import _kernels; print(_kernels.USE_NUMBA)"
    env = dict(os.environ, WETBEAM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
