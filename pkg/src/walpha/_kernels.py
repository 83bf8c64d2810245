"""Batched coordinate-descent kernels for two-norm splitting infima.

Minimize  norm1(theta * v) + t * norm2((1 - theta) * v)  over theta in
[0, 1]^N for a whole ascending t-grid at once, warm-starting each t from the
previous optimum.  Two norm families share the loop shape:

* cell family: per component l,  block_l(x) = (sum_c m_c (sum_{e on cell c}
  (a_e x_e)^q_l)^{p_l/q_l})^{1/p_l}  with a CSR map from entries to the cells
  their boxes cover; the norm is the sum of the component blocks;
* group family: norm(x) = sum_g (sum_{e in group g} (a_e x_e)^{p_g})^{1/p_g}.

Entries with v_e = 0 keep theta_e = 0.  Each entry step is a golden-section
line search on the exact one-variable restriction; incremental power sums make
a step O(cells touched), and every sweep rebuilds the sums to kill drift.

The compiled and interpreted paths run the same function bodies; the numba
build captures compiled helpers, the numpy build the plain ones.  Set
WALPHA_DISABLE_NUMBA=1 to force the interpreted path as the active one.
"""

import os

import numpy as np

GOLD_TOL = 1e-10
MAX_SWEEPS = 60
STALL = 1e-12
_INVPHI = 0.6180339887498949

_DISABLED = os.environ.get("WALPHA_DISABLE_NUMBA", "") not in ("", "0")
_numba = None
if not _DISABLED:
    try:
        import numba as _numba
    except ImportError:
        _numba = None

NUMBA_ENABLED = _numba is not None


def _identity(func):
    return func


def _make_kernels(jit):
    @jit
    def eval_cell(theta, t, v, a1, a2, mass, comp, p1c, p2c, q1c, q2c, cellidx, ptr, entcomp):
        C = mass.shape[0]
        L = p1c.shape[0]
        S1 = np.zeros(C)
        S2 = np.zeros(C)
        for e in range(v.shape[0]):
            if v[e] == 0.0:
                continue
            l = entcomp[e]
            w1 = (a1[e] * theta[e] * v[e]) ** q1c[l]
            w2 = (a2[e] * (1.0 - theta[e]) * v[e]) ** q2c[l]
            for ii in range(ptr[e], ptr[e + 1]):
                c = cellidx[ii]
                S1[c] += w1
                S2[c] += w2
        B1 = np.zeros(L)
        B2 = np.zeros(L)
        for c in range(C):
            l = comp[c]
            B1[l] += mass[c] * S1[c] ** (p1c[l] / q1c[l])
            B2[l] += mass[c] * S2[c] ** (p2c[l] / q2c[l])
        F = 0.0
        for l in range(L):
            F += B1[l] ** (1.0 / p1c[l]) + t * B2[l] ** (1.0 / p2c[l])
        return F

    @jit
    def descend_cell(theta, t, v, a1, a2, mass, comp, p1c, p2c, q1c, q2c, cellidx, ptr, entcomp):
        N = v.shape[0]
        C = mass.shape[0]
        L = p1c.shape[0]
        S1 = np.zeros(C)
        S2 = np.zeros(C)
        B1 = np.zeros(L)
        B2 = np.zeros(L)
        for e in range(N):
            if v[e] == 0.0:
                theta[e] = 0.0
        F = np.inf
        for _sweep in range(MAX_SWEEPS):
            # rebuild the power sums so per-entry updates cannot drift
            S1[:] = 0.0
            S2[:] = 0.0
            for e in range(N):
                if v[e] == 0.0:
                    continue
                l = entcomp[e]
                w1 = (a1[e] * theta[e] * v[e]) ** q1c[l]
                w2 = (a2[e] * (1.0 - theta[e]) * v[e]) ** q2c[l]
                for ii in range(ptr[e], ptr[e + 1]):
                    c = cellidx[ii]
                    S1[c] += w1
                    S2[c] += w2
            B1[:] = 0.0
            B2[:] = 0.0
            for c in range(C):
                l = comp[c]
                B1[l] += mass[c] * S1[c] ** (p1c[l] / q1c[l])
                B2[l] += mass[c] * S2[c] ** (p2c[l] / q2c[l])
            F_prev = 0.0
            for l in range(L):
                F_prev += B1[l] ** (1.0 / p1c[l]) + t * B2[l] ** (1.0 / p2c[l])
            for e in range(N):
                ve = v[e]
                if ve == 0.0:
                    continue
                l = entcomp[e]
                p1 = p1c[l]
                p2 = p2c[l]
                q1 = q1c[l]
                q2 = q2c[l]
                g1 = a1[e] * ve
                g2 = a2[e] * ve
                w1old = (g1 * theta[e]) ** q1
                w2old = (g2 * (1.0 - theta[e])) ** q2
                for ii in range(ptr[e], ptr[e + 1]):
                    c = cellidx[ii]
                    B1[l] -= mass[c] * S1[c] ** (p1 / q1)
                    B2[l] -= mass[c] * S2[c] ** (p2 / q2)
                    S1[c] = max(S1[c] - w1old, 0.0)
                    S2[c] = max(S2[c] - w2old, 0.0)
                if B1[l] < 0.0:
                    B1[l] = 0.0
                if B2[l] < 0.0:
                    B2[l] = 0.0
                out1 = 0.0
                out2 = 0.0
                for ll in range(L):
                    if ll != l:
                        out1 += B1[ll] ** (1.0 / p1c[ll])
                        out2 += B2[ll] ** (1.0 / p2c[ll])

                def phi(x):
                    u1 = (g1 * x) ** q1
                    u2 = (g2 * (1.0 - x)) ** q2
                    acc1 = B1[l]
                    acc2 = B2[l]
                    for ii in range(ptr[e], ptr[e + 1]):
                        c = cellidx[ii]
                        acc1 += mass[c] * (S1[c] + u1) ** (p1 / q1)
                        acc2 += mass[c] * (S2[c] + u2) ** (p2 / q2)
                    return out1 + acc1 ** (1.0 / p1) + t * (out2 + acc2 ** (1.0 / p2))

                lo = 0.0
                hi = 1.0
                x1 = hi - _INVPHI * (hi - lo)
                x2 = lo + _INVPHI * (hi - lo)
                f1 = phi(x1)
                f2 = phi(x2)
                it = 0
                while hi - lo > GOLD_TOL and it < 80:
                    if f1 <= f2:
                        hi = x2
                        x2 = x1
                        f2 = f1
                        x1 = hi - _INVPHI * (hi - lo)
                        f1 = phi(x1)
                    else:
                        lo = x1
                        x1 = x2
                        f1 = f2
                        x2 = lo + _INVPHI * (hi - lo)
                        f2 = phi(x2)
                    it += 1
                best = 0.5 * (lo + hi)
                fbest = phi(best)
                fedge = phi(0.0)
                if fedge < fbest:
                    best = 0.0
                    fbest = fedge
                fedge = phi(1.0)
                if fedge < fbest:
                    best = 1.0
                    fbest = fedge
                fedge = phi(theta[e])
                if fedge < fbest:
                    best = theta[e]
                    fbest = fedge
                theta[e] = best
                w1new = (g1 * best) ** q1
                w2new = (g2 * (1.0 - best)) ** q2
                for ii in range(ptr[e], ptr[e + 1]):
                    c = cellidx[ii]
                    S1[c] += w1new
                    S2[c] += w2new
                    B1[l] += mass[c] * S1[c] ** (p1 / q1)
                    B2[l] += mass[c] * S2[c] ** (p2 / q2)
            F = 0.0
            for l in range(L):
                F += B1[l] ** (1.0 / p1c[l]) + t * B2[l] ** (1.0 / p2c[l])
            if F_prev - F <= STALL * max(1.0, F):
                break
        return F

    @jit
    def kcurve_cell(ts, v, a1, a2, mass, comp, p1c, p2c, q1c, q2c, cellidx, ptr, entcomp, starts, restart_all):
        T = ts.shape[0]
        N = v.shape[0]
        S = starts.shape[0]
        K = np.empty(T)
        th_best = np.empty(N)
        cur = np.empty(N)
        for ti in range(T):
            t = ts[ti]
            if ti == 0:
                F_best = np.inf
            else:
                cur[:] = th_best
                F_best = descend_cell(cur, t, v, a1, a2, mass, comp, p1c, p2c, q1c, q2c, cellidx, ptr, entcomp)
                th_best[:] = cur
            if ti == 0 or restart_all:
                for si in range(S):
                    cur[:] = starts[si]
                    F = descend_cell(cur, t, v, a1, a2, mass, comp, p1c, p2c, q1c, q2c, cellidx, ptr, entcomp)
                    if F < F_best:
                        F_best = F
                        th_best[:] = cur
            K[ti] = F_best
        return K, th_best

    @jit
    def probe_cell(thetas, t, v, a1, a2, mass, comp, p1c, p2c, q1c, q2c, cellidx, ptr, entcomp):
        P = thetas.shape[0]
        out = np.empty(P)
        for pi in range(P):
            out[pi] = eval_cell(thetas[pi], t, v, a1, a2, mass, comp, p1c, p2c, q1c, q2c, cellidx, ptr, entcomp)
        return out

    @jit
    def eval_group(theta, t, v, a1, a2, p1g, p2g, grp):
        G = p1g.shape[0]
        S1 = np.zeros(G)
        S2 = np.zeros(G)
        for e in range(v.shape[0]):
            if v[e] == 0.0:
                continue
            g = grp[e]
            S1[g] += (a1[e] * theta[e] * v[e]) ** p1g[g]
            S2[g] += (a2[e] * (1.0 - theta[e]) * v[e]) ** p2g[g]
        F = 0.0
        for g in range(G):
            F += S1[g] ** (1.0 / p1g[g]) + t * S2[g] ** (1.0 / p2g[g])
        return F

    @jit
    def descend_group(theta, t, v, a1, a2, p1g, p2g, grp):
        N = v.shape[0]
        G = p1g.shape[0]
        S1 = np.zeros(G)
        S2 = np.zeros(G)
        for e in range(N):
            if v[e] == 0.0:
                theta[e] = 0.0
        F = np.inf
        for _sweep in range(MAX_SWEEPS):
            S1[:] = 0.0
            S2[:] = 0.0
            for e in range(N):
                if v[e] == 0.0:
                    continue
                g = grp[e]
                S1[g] += (a1[e] * theta[e] * v[e]) ** p1g[g]
                S2[g] += (a2[e] * (1.0 - theta[e]) * v[e]) ** p2g[g]
            F_prev = 0.0
            for g in range(G):
                F_prev += S1[g] ** (1.0 / p1g[g]) + t * S2[g] ** (1.0 / p2g[g])
            for e in range(N):
                ve = v[e]
                if ve == 0.0:
                    continue
                g = grp[e]
                p1 = p1g[g]
                p2 = p2g[g]
                g1 = a1[e] * ve
                g2 = a2[e] * ve
                S1[g] = max(S1[g] - (g1 * theta[e]) ** p1, 0.0)
                S2[g] = max(S2[g] - (g2 * (1.0 - theta[e])) ** p2, 0.0)
                out1 = 0.0
                out2 = 0.0
                for gg in range(G):
                    if gg != g:
                        out1 += S1[gg] ** (1.0 / p1g[gg])
                        out2 += S2[gg] ** (1.0 / p2g[gg])

                def phi(x):
                    acc1 = (S1[g] + (g1 * x) ** p1) ** (1.0 / p1)
                    acc2 = (S2[g] + (g2 * (1.0 - x)) ** p2) ** (1.0 / p2)
                    return out1 + acc1 + t * (out2 + acc2)

                lo = 0.0
                hi = 1.0
                x1 = hi - _INVPHI * (hi - lo)
                x2 = lo + _INVPHI * (hi - lo)
                f1 = phi(x1)
                f2 = phi(x2)
                it = 0
                while hi - lo > GOLD_TOL and it < 80:
                    if f1 <= f2:
                        hi = x2
                        x2 = x1
                        f2 = f1
                        x1 = hi - _INVPHI * (hi - lo)
                        f1 = phi(x1)
                    else:
                        lo = x1
                        x1 = x2
                        f1 = f2
                        x2 = lo + _INVPHI * (hi - lo)
                        f2 = phi(x2)
                    it += 1
                best = 0.5 * (lo + hi)
                fbest = phi(best)
                fedge = phi(0.0)
                if fedge < fbest:
                    best = 0.0
                    fbest = fedge
                fedge = phi(1.0)
                if fedge < fbest:
                    best = 1.0
                    fbest = fedge
                fedge = phi(theta[e])
                if fedge < fbest:
                    best = theta[e]
                    fbest = fedge
                theta[e] = best
                S1[g] += (g1 * best) ** p1
                S2[g] += (g2 * (1.0 - best)) ** p2
            F = 0.0
            for g in range(G):
                F += S1[g] ** (1.0 / p1g[g]) + t * S2[g] ** (1.0 / p2g[g])
            if F_prev - F <= STALL * max(1.0, F):
                break
        return F

    @jit
    def kcurve_group(ts, v, a1, a2, p1g, p2g, grp, starts, restart_all):
        T = ts.shape[0]
        N = v.shape[0]
        S = starts.shape[0]
        K = np.empty(T)
        th_best = np.empty(N)
        cur = np.empty(N)
        for ti in range(T):
            t = ts[ti]
            if ti == 0:
                F_best = np.inf
            else:
                cur[:] = th_best
                F_best = descend_group(cur, t, v, a1, a2, p1g, p2g, grp)
                th_best[:] = cur
            if ti == 0 or restart_all:
                for si in range(S):
                    cur[:] = starts[si]
                    F = descend_group(cur, t, v, a1, a2, p1g, p2g, grp)
                    if F < F_best:
                        F_best = F
                        th_best[:] = cur
            K[ti] = F_best
        return K, th_best

    @jit
    def probe_group(thetas, t, v, a1, a2, p1g, p2g, grp):
        P = thetas.shape[0]
        out = np.empty(P)
        for pi in range(P):
            out[pi] = eval_group(thetas[pi], t, v, a1, a2, p1g, p2g, grp)
        return out

    return {
        "eval_cell": eval_cell,
        "kcurve_cell": kcurve_cell,
        "probe_cell": probe_cell,
        "eval_group": eval_group,
        "kcurve_group": kcurve_group,
        "probe_group": probe_group,
    }


_PY = _make_kernels(_identity)

py_eval_cell = _PY["eval_cell"]
py_kcurve_cell = _PY["kcurve_cell"]
py_probe_cell = _PY["probe_cell"]
py_eval_group = _PY["eval_group"]
py_kcurve_group = _PY["kcurve_group"]
py_probe_group = _PY["probe_group"]

if NUMBA_ENABLED:
    _NB = _make_kernels(_numba.njit)
    nb_eval_cell = _NB["eval_cell"]
    nb_kcurve_cell = _NB["kcurve_cell"]
    nb_probe_cell = _NB["probe_cell"]
    nb_eval_group = _NB["eval_group"]
    nb_kcurve_group = _NB["kcurve_group"]
    nb_probe_group = _NB["probe_group"]
    _ACTIVE = _NB
else:
    nb_eval_cell = None
    nb_kcurve_cell = None
    nb_probe_cell = None
    nb_eval_group = None
    nb_kcurve_group = None
    nb_probe_group = None
    _ACTIVE = _PY

eval_cell = _ACTIVE["eval_cell"]
kcurve_cell = _ACTIVE["kcurve_cell"]
probe_cell = _ACTIVE["probe_cell"]
eval_group = _ACTIVE["eval_group"]
kcurve_group = _ACTIVE["kcurve_group"]
probe_group = _ACTIVE["probe_group"]
