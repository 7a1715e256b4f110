"""Hot numeric kernels.

Every kernel has two implementations: a numba ``@njit`` version written with
explicit loops, and a vectorized numpy version.  Set the environment variable
``WETBEAM_DISABLE_NUMBA=1`` (before import) to force the numpy path; it is
also used automatically when numba is not importable.
"""
import math
import os

import numpy as np

_DISABLED = os.environ.get("WETBEAM_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def _njit(fn):
    return numba.njit(cache=True, nogil=True)(fn) if HAVE_NUMBA else fn


# -- steering matrix ----------------------------------------------------------

@_njit
def _steering_matrix_nb(angles_deg, num_antennas, spacing):
    out = np.empty((angles_deg.shape[0], num_antennas), dtype=np.complex128)
    for k in range(angles_deg.shape[0]):
        theta = 2.0 * math.pi * spacing * math.cos(math.radians(angles_deg[k]))
        for i in range(num_antennas):
            out[k, i] = complex(math.cos(theta * i), math.sin(theta * i))
    return out


def _steering_matrix_np(angles_deg, num_antennas, spacing):
    theta = 2.0 * np.pi * spacing * np.cos(np.deg2rad(angles_deg))
    return np.exp(1j * np.outer(theta, np.arange(num_antennas)))


# -- EH transfer function -----------------------------------------------------

@_njit
def _harvest_nb(p, sensitivity, saturation, efficiency):
    flat = p.ravel()
    out = np.empty(flat.shape[0])
    for i in range(flat.shape[0]):
        v = flat[i]
        if v < sensitivity:
            out[i] = 0.0
        elif v < saturation:
            out[i] = efficiency * v
        else:
            out[i] = efficiency * saturation
    return out.reshape(p.shape)


def _harvest_np(p, sensitivity, saturation, efficiency):
    return np.where(p < sensitivity, 0.0, efficiency * np.minimum(p, saturation))


# -- augmented-Lagrangian / projected-gradient solver ------------------------
#
# Real domain, unit-ball feasible set.  Inner loop is spectral projected
# gradient (Barzilai-Borwein step, nonmonotone Armijo search).  Terminal t
# owns factor rows C[start[t]:start[t+1]] and power p_t(u) = ||C_t u||^2.
# Constraints lo_t <= p_t <= hi_t (lo_t <= 0 and hi_t = inf are skipped).
# Objective is maximize u^T Q u.  PHR multipliers; the penalty rho grows when
# feasibility stalls.

_RHO0 = 10.0
_RHO_MAX = 1e8
# outer iterations tolerated at maximal penalty without reaching feasibility
_STALL_LIMIT = 3
# consecutive unconverged inner solves after which rho may grow anyway
_UNSOLVED_LIMIT = 3
# spectral projected gradient: nonmonotone memory, Armijo slope, step clamp
_NONMONOTONE = 10
_ARMIJO = 1e-4
_ALPHA_MIN = 1e-10
_ALPHA_MAX = 1e6


@_njit
def _project_nb(u):
    nrm = math.sqrt(np.dot(u, u))
    if nrm > 1.0:
        return u / nrm
    return u.copy()


@_njit
def _powers_nb(C, start, u, v, p):
    for r in range(C.shape[0]):
        acc = 0.0
        for j in range(C.shape[1]):
            acc += C[r, j] * u[j]
        v[r] = acc
    for t in range(p.shape[0]):
        acc = 0.0
        for r in range(start[t], start[t + 1]):
            acc += v[r] * v[r]
        p[t] = acc


@_njit
def _al_eval_nb(Q, C, start, lo, hi, lam_lo, lam_hi, rho, u, v, p, coef, grad):
    _powers_nb(C, start, u, v, p)
    Qu = np.dot(Q, u)
    phi = -np.dot(u, Qu)
    for t in range(p.shape[0]):
        c = 0.0
        if lo[t] > 0.0:
            m = lam_lo[t] - rho * (p[t] - lo[t])
            if m > 0.0:
                phi += (m * m - lam_lo[t] * lam_lo[t]) / (2.0 * rho)
                c -= m
            else:
                phi -= lam_lo[t] * lam_lo[t] / (2.0 * rho)
        if hi[t] < np.inf:
            m = lam_hi[t] - rho * (hi[t] - p[t])
            if m > 0.0:
                phi += (m * m - lam_hi[t] * lam_hi[t]) / (2.0 * rho)
                c += m
            else:
                phi -= lam_hi[t] * lam_hi[t] / (2.0 * rho)
        coef[t] = c
    for j in range(grad.shape[0]):
        grad[j] = -2.0 * Qu[j]
    for t in range(p.shape[0]):
        if coef[t] != 0.0:
            for r in range(start[t], start[t + 1]):
                w = 2.0 * coef[t] * v[r]
                for j in range(grad.shape[0]):
                    grad[j] += w * C[r, j]
    return phi


@_njit
def _kkt_nb(Q, C, start, lo, hi, lam_lo, lam_hi, u, v, p):
    """Stationarity of the Lagrangian (gradient mapping) and complementarity."""
    _powers_nb(C, start, u, v, p)
    g = -2.0 * np.dot(Q, u)
    comp = 0.0
    for t in range(p.shape[0]):
        c = lam_hi[t] - lam_lo[t]
        if c != 0.0:
            for r in range(start[t], start[t + 1]):
                w = 2.0 * c * v[r]
                for j in range(g.shape[0]):
                    g[j] += w * C[r, j]
        if lo[t] > 0.0:
            comp = max(comp, lam_lo[t] * abs(p[t] - lo[t]))
        if hi[t] < np.inf:
            comp = max(comp, lam_hi[t] * abs(hi[t] - p[t]))
    d = _project_nb(u - g) - u
    return max(math.sqrt(np.dot(d, d)), comp)


@_njit
def _violation_nb(lo, hi, p):
    viol = 0.0
    for t in range(p.shape[0]):
        if lo[t] > 0.0:
            viol = max(viol, lo[t] - p[t])
        if hi[t] < np.inf:
            viol = max(viol, p[t] - hi[t])
    return viol


@_njit
def _al_solve_nb(Q, C, start, lo, hi, u0, max_outer, max_inner, tol, feas_tol):
    n = u0.shape[0]
    T = start.shape[0] - 1
    v = np.empty(C.shape[0])
    p = np.empty(T)
    coef = np.empty(T)
    grad = np.empty(n)
    grad_new = np.empty(n)
    lam_lo = np.zeros(T)
    lam_hi = np.zeros(T)
    rho = _RHO0
    u = _project_nb(u0)
    inner_tol = 1e-2
    prev_viol = np.inf
    kkt = np.inf
    viol = np.inf
    stalled = 0
    unsolved = 0
    outer = 0
    hist = np.empty(_NONMONOTONE)
    for outer in range(1, max_outer + 1):
        phi = _al_eval_nb(Q, C, start, lo, hi, lam_lo, lam_hi, rho, u, v, p, coef, grad)
        hist[:] = phi
        d = _project_nb(u - grad) - u
        alpha = 1.0 / max(np.abs(d).max(), 1e-12)
        inner_done = False
        for it in range(max_inner):
            d = _project_nb(u - grad) - u
            if math.sqrt(np.dot(d, d)) <= inner_tol:
                inner_done = True
                break
            d = _project_nb(u - alpha * grad) - u
            gtd = np.dot(grad, d)
            phimax = hist.max()
            lam = 1.0
            while True:
                u_new = u + lam * d
                phi_new = _al_eval_nb(Q, C, start, lo, hi, lam_lo, lam_hi, rho, u_new, v, p,
                                      coef, grad_new)
                if phi_new <= phimax + _ARMIJO * lam * gtd or lam < 1e-20:
                    break
                lam *= 0.5
            s_vec = u_new - u
            y_vec = grad_new - grad
            sty = np.dot(s_vec, y_vec)
            alpha = min(max(np.dot(s_vec, s_vec) / sty, _ALPHA_MIN), _ALPHA_MAX) if sty > 0 else _ALPHA_MAX
            u = u_new
            phi = phi_new
            grad[:] = grad_new
            hist[(it + 1) % _NONMONOTONE] = phi
        _powers_nb(C, start, u, v, p)
        for t in range(T):
            if lo[t] > 0.0:
                lam_lo[t] = max(0.0, lam_lo[t] - rho * (p[t] - lo[t]))
            if hi[t] < np.inf:
                lam_hi[t] = max(0.0, lam_hi[t] - rho * (hi[t] - p[t]))
        viol = _violation_nb(lo, hi, p)
        kkt = _kkt_nb(Q, C, start, lo, hi, lam_lo, lam_hi, u, v, p)
        if viol <= feas_tol and kkt <= tol:
            break
        # raising rho while the subproblem is unsolved only worsens its
        # conditioning, unless it keeps failing (typical of infeasible problems)
        unsolved = 0 if inner_done else unsolved + 1
        if (inner_done or unsolved >= _UNSOLVED_LIMIT) and viol > 0.25 * prev_viol and viol > feas_tol:
            rho = min(rho * 10.0, _RHO_MAX)
        if rho >= _RHO_MAX and viol > feas_tol:
            stalled += 1
            if stalled > _STALL_LIMIT:
                break
        prev_viol = viol
        inner_tol = max(0.1 * inner_tol, 0.1 * tol)
    return u, outer, kkt, viol


def _project_np(u):
    nrm = np.linalg.norm(u)
    return u / nrm if nrm > 1.0 else u.copy()


class _NumpyAL:
    """Vectorized twin of ``_al_solve_nb``."""

    def __init__(self, Q, C, start, lo, hi):
        self.Q, self.C = Q, C
        self.seg = start[:-1]
        self.counts = np.diff(start)
        self.lo, self.hi = lo, hi
        self.has_lo = lo > 0.0
        self.has_hi = np.isfinite(hi)
        self.lo_s = np.where(self.has_lo, lo, 0.0)
        self.hi_s = np.where(self.has_hi, hi, 0.0)

    def powers(self, u):
        v = self.C @ u
        return v, np.add.reduceat(v * v, self.seg) if v.size else np.zeros(0)

    def eval(self, u, lam_lo, lam_hi, rho):
        v, p = self.powers(u)
        Qu = self.Q @ u
        m_lo = np.where(self.has_lo, lam_lo - rho * (p - self.lo_s), 0.0)
        m_hi = np.where(self.has_hi, lam_hi - rho * (self.hi_s - p), 0.0)
        pos_lo, pos_hi = m_lo > 0.0, m_hi > 0.0
        pen = (np.where(pos_lo, m_lo * m_lo, 0.0) - np.where(self.has_lo, lam_lo * lam_lo, 0.0)
               + np.where(pos_hi, m_hi * m_hi, 0.0) - np.where(self.has_hi, lam_hi * lam_hi, 0.0))
        phi = -u @ Qu + pen.sum() / (2.0 * rho)
        coef = np.where(pos_hi, m_hi, 0.0) - np.where(pos_lo, m_lo, 0.0)
        grad = -2.0 * Qu + 2.0 * self.C.T @ (np.repeat(coef, self.counts) * v)
        return phi, grad

    def violation(self, p):
        viol = np.concatenate([(self.lo_s - p)[self.has_lo], (p - self.hi_s)[self.has_hi], [0.0]])
        return max(viol.max(), 0.0)

    def kkt(self, u, lam_lo, lam_hi):
        v, p = self.powers(u)
        c = lam_hi - lam_lo
        g = -2.0 * self.Q @ u + 2.0 * self.C.T @ (np.repeat(c, self.counts) * v)
        comp = np.concatenate([(lam_lo * np.abs(p - self.lo_s))[self.has_lo],
                               (lam_hi * np.abs(self.hi_s - p))[self.has_hi], [0.0]]).max()
        return max(np.linalg.norm(_project_np(u - g) - u), comp)


def _al_solve_np(Q, C, start, lo, hi, u0, max_outer, max_inner, tol, feas_tol):
    al = _NumpyAL(Q, C, start, lo, hi)
    T = start.shape[0] - 1
    lam_lo = np.zeros(T)
    lam_hi = np.zeros(T)
    rho = _RHO0
    u = _project_np(u0)
    inner_tol = 1e-2
    prev_viol = np.inf
    kkt = viol = np.inf
    stalled = 0
    unsolved = 0
    outer = 0
    for outer in range(1, max_outer + 1):
        phi, grad = al.eval(u, lam_lo, lam_hi, rho)
        hist = np.full(_NONMONOTONE, phi)
        alpha = 1.0 / max(np.abs(_project_np(u - grad) - u).max(), 1e-12)
        inner_done = False
        for it in range(max_inner):
            d = _project_np(u - grad) - u
            if math.sqrt(d @ d) <= inner_tol:
                inner_done = True
                break
            d = _project_np(u - alpha * grad) - u
            gtd = grad @ d
            phimax = hist.max()
            lam = 1.0
            while True:
                u_new = u + lam * d
                phi_new, grad_new = al.eval(u_new, lam_lo, lam_hi, rho)
                if phi_new <= phimax + _ARMIJO * lam * gtd or lam < 1e-20:
                    break
                lam *= 0.5
            s_vec, y_vec = u_new - u, grad_new - grad
            sty = s_vec @ y_vec
            alpha = min(max(s_vec @ s_vec / sty, _ALPHA_MIN), _ALPHA_MAX) if sty > 0 else _ALPHA_MAX
            u, phi, grad = u_new, phi_new, grad_new
            hist[(it + 1) % _NONMONOTONE] = phi
        _, p = al.powers(u)
        lam_lo = np.where(al.has_lo, np.maximum(0.0, lam_lo - rho * (p - al.lo_s)), 0.0)
        lam_hi = np.where(al.has_hi, np.maximum(0.0, lam_hi - rho * (al.hi_s - p)), 0.0)
        viol = al.violation(p)
        kkt = al.kkt(u, lam_lo, lam_hi)
        if viol <= feas_tol and kkt <= tol:
            break
        # raising rho while the subproblem is unsolved only worsens its
        # conditioning, unless it keeps failing (typical of infeasible problems)
        unsolved = 0 if inner_done else unsolved + 1
        if (inner_done or unsolved >= _UNSOLVED_LIMIT) and viol > 0.25 * prev_viol and viol > feas_tol:
            rho = min(rho * 10.0, _RHO_MAX)
        if rho >= _RHO_MAX and viol > feas_tol:
            stalled += 1
            if stalled > _STALL_LIMIT:
                break
        prev_viol = viol
        inner_tol = max(0.1 * inner_tol, 0.1 * tol)
    return u, outer, kkt, viol


# -- dispatch -----------------------------------------------------------------

def steering_matrix(angles_deg, num_antennas, spacing, use_numba=None):
    angles = np.ascontiguousarray(np.atleast_1d(np.asarray(angles_deg, dtype=float)))
    if USE_NUMBA if use_numba is None else use_numba:
        return _steering_matrix_nb(angles, int(num_antennas), float(spacing))
    return _steering_matrix_np(angles, int(num_antennas), float(spacing))


def harvest(p, sensitivity, saturation, efficiency, use_numba=None):
    arr = np.ascontiguousarray(np.asarray(p, dtype=float))
    if USE_NUMBA if use_numba is None else use_numba:
        out = _harvest_nb(arr, float(sensitivity), float(saturation), float(efficiency))
    else:
        out = _harvest_np(arr, float(sensitivity), float(saturation), float(efficiency))
    return out


def al_solve(Q, C, start, lo, hi, u0, max_outer=5000, max_inner=4000, tol=1e-7,
             feas_tol=1e-9, use_numba=None):
    """Run the augmented-Lagrangian solver; returns ``(u, outer_iters, kkt, violation)``."""
    args = (
        np.ascontiguousarray(Q, dtype=float),
        np.ascontiguousarray(C, dtype=float),
        np.ascontiguousarray(start, dtype=np.int64),
        np.ascontiguousarray(lo, dtype=float),
        np.ascontiguousarray(hi, dtype=float),
        np.ascontiguousarray(u0, dtype=float),
        int(max_outer), int(max_inner), float(tol), float(feas_tol),
    )
    if USE_NUMBA if use_numba is None else use_numba:
        return _al_solve_nb(*args)
    return _al_solve_np(*args)
