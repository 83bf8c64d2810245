"""End-to-end acceptance battery.

One test per advertised guarantee, each at its stated tolerance and runtime
budget, so `pytest -v` prints a single pass/fail line per criterion.
"""

import math
import time

import numpy as np
import pytest

from walpha.dyadic import weight_mass_E
from walpha.interpolation import (
    ProductCouple,
    brute_force_k,
    certify_besov_interpolation,
    certify_seq_interpolation,
    k_curve,
    k_functional,
    op_P_A,
    op_R,
    product_k,
    seq_f_couple,
    weighted_lp_couple,
)
from walpha.seqspaces import (
    FlatSeq,
    SpaceParams,
    fqLpr_norm,
    fq_lp_norm,
    random_coeffs,
    random_flatseq,
)
from walpha.traceext import (
    CutoffFunction,
    atom_validate,
    ext_coefficients,
    ext_function,
    ext_norm_ratio,
    system_for,
    trace_function,
)
from walpha.wavelets import (
    GridSpec,
    analyze,
    build_system,
    covering_grid,
    synthesize,
)


def coeff_maxdiff(a, b):
    err = 0.0
    for key in set(a.father) | set(b.father):
        err = max(err, abs(a.father.get(key, 0.0) - b.father.get(key, 0.0)))
    for key in set(a.mother) | set(b.mother):
        err = max(err, abs(a.mother.get(key, 0.0) - b.mother.get(key, 0.0)))
    return err


def ext_grid(lam, sys, G, k, y_half=1.0):
    bg = covering_grid(lam, sys, G)
    w = int(math.ceil(y_half * 2 ** G))
    return GridSpec(
        G=G,
        lo=bg.lo + (-w,) * k,
        shape=bg.shape + (2 * w + 1,) * k,
        mid=bg.mid + (False,) * k,
    )


# (s, p, q, alpha, k, n): the extension/atom parameter sets
BOUNDEDNESS_SETS = (
    (3.0, 2.0, 2.0, 0.0, 1, 2),
    (3.0, 2.0, 2.0, 1.0, 1, 2),
    (2.5, 1.5, 1.0, 0.5, 1, 2),
    (4.0, 2.0, 2.0, 0.0, 2, 3),
)


def test_criterion_01_weight_mass_level_free():
    t0 = time.perf_counter()
    for alpha in (-0.9, -0.5, 0.0, 1.0, 2.5):
        for n, k in ((2, 1), (3, 1), (3, 2)):
            base = weight_mass_E(0, alpha, n, k)
            for j in range(31):
                ratio = weight_mass_E(j, alpha, n, k) / 2.0 ** (-j * (n + alpha))
                assert abs(ratio - base) <= 1e-12 * abs(base)
    assert time.perf_counter() - t0 < 1.0


def test_criterion_02_lorentz_diagonal_factor():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2101)
    for i in range(100):
        dim = 1 if i % 3 else 2
        J = int(rng.integers(0, 7)) if dim == 1 else int(rng.integers(0, 4))
        lam = random_flatseq(rng, dim, J)
        p = float(rng.uniform(1.0, 4.0))
        q = float(rng.choice([1.0, 2.0]))
        alpha = float(rng.uniform(-0.9, 2.0))
        lhs = fqLpr_norm(lam, p, p, q, alpha)
        rhs = p ** (-1.0 / p) * fq_lp_norm(lam, p, q, alpha)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, rhs)
    assert time.perf_counter() - t0 < 10.0


def test_criterion_03_trace_ext_roundtrip():
    t0 = time.perf_counter()
    for n, k, J, u in ((2, 1, 4, 3), (3, 1, 1, 2), (3, 2, 1, 2)):
        bd = n - k
        sysb = build_system(u, bd)
        chi = CutoffFunction(k)
        rng = np.random.RandomState(300 + 10 * n + k)
        lam = random_coeffs(rng, bd, J, density=0.5, mag=2.0)
        G = J + 6
        grid = ext_grid(lam, sysb, G, k)
        F = ext_function(lam, sysb, chi, grid, materialize=False)
        tr = trace_function(F, k)
        rec = analyze(tr, sysb, J)
        assert coeff_maxdiff(lam, rec) <= 1e-6
        direct = synthesize(lam, sysb, covering_grid(lam, sysb, G), materialize=True)
        assert np.max(np.abs(tr.materialize() - direct.values)) <= 1e-12
    assert time.perf_counter() - t0 < 300.0


def test_criterion_04_extension_boundedness():
    t0 = time.perf_counter()
    for si, (s, p, q, alpha, k, n) in enumerate(BOUNDEDNESS_SETS):
        params = SpaceParams(s=s, p=p, q=q, alpha=alpha, n=n, k=k)
        bd = n - k
        peak = {}
        for J in range(2, 9):
            worst = 0.0
            for i in range(100):
                rng = np.random.default_rng((4201, si, J, i))
                lam = random_coeffs(rng, bd, J)
                ratio = ext_norm_ratio(lam, params)[2]
                assert np.isfinite(ratio) and ratio > 0.0
                worst = max(worst, ratio)
            peak[J] = worst
        assert peak[8] <= 1.25 * peak[2], f"set {si}: {peak[8]} vs {peak[2]}"
    assert time.perf_counter() - t0 < 600.0


def test_criterion_05_atoms_certified():
    t0 = time.perf_counter()
    for si, (s, p, q, alpha, k, n) in enumerate(BOUNDEDNESS_SETS):
        params = SpaceParams(s=s, p=p, q=q, alpha=alpha, n=n, k=k)
        sysb = system_for(params)
        chi = CutoffFunction(params.k)
        b = 2 * sysb.support_radius
        bd = n - k
        checked = 0
        for J in (2, 3):
            for i in range(2):
                rng = np.random.default_rng((4301, si, J, i))
                lam = random_coeffs(rng, bd, J)
                decomp = ext_coefficients(lam, params, sys=sysb)
                for atom in decomp.all_atoms(sysb, chi):
                    rep = atom_validate(atom, params.K_min, params.L_min,
                                        params.s, params.p, b)
                    assert rep.passed, (si, J, i, atom.ell, atom.j, atom.m)
                    checked += 1
        assert checked > 0
    assert time.perf_counter() - t0 < 300.0


def test_criterion_06_k_functional_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4601)
    exps = np.linspace(-5.0, 5.0, 17)
    for trial in range(200):
        pgrid = [1.0, 1.5, 2.0]
        p1 = float(rng.choice(pgrid))
        p2 = float(rng.choice(pgrid))
        if trial % 2 == 0:
            n = int(rng.integers(1, 4))
            couple = weighted_lp_couple(rng.uniform(0.2, 1.5, n),
                                        rng.uniform(0.2, 1.5, n), p1, p2)
            v = rng.uniform(0.05, 4.0, n)
        else:
            ent = {}
            for _ in range(int(rng.integers(1, 4))):
                j = int(rng.integers(0, 3))
                m = (int(rng.integers(0, 2 ** j)),)
                ent[(j, m)] = float(rng.uniform(0.2, 4.0))
            couple = seq_f_couple(FlatSeq(1, ent), p1, p2,
                                  float(rng.choice([1.0, 2.0])),
                                  float(rng.uniform(-0.5, 1.5)))
            v = np.abs(couple.values)
        t = float(2.0 ** rng.uniform(-3, 3))
        got = k_functional(t, v, couple)
        ref = brute_force_k(t, v, couple)
        assert abs(got - ref) <= 1e-6 * max(1.0, ref), trial
        curve = k_curve(v, couple, exps)
        curve.check_shape(tol=1e-7)  # monotone K, monotone K/t, envelope
    assert time.perf_counter() - t0 < 120.0


def test_criterion_07_product_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4701)
    for _ in range(100):
        m = int(rng.integers(2, 4))
        comps, vecs = [], []
        for _c in range(m):
            n = int(rng.integers(1, 4))
            comps.append(weighted_lp_couple(
                rng.uniform(0.3, 1.5, n), rng.uniform(0.3, 1.5, n),
                float(rng.uniform(1.0, 3.0)), float(rng.uniform(1.0, 3.0))))
            vecs.append(rng.uniform(0.1, 2.0, n))
        t = float(2.0 ** rng.uniform(-2, 2))
        joint = product_k(t, vecs, ProductCouple(tuple(comps)))
        split = sum(k_functional(t, v, c) for v, c in zip(vecs, comps))
        assert abs(joint - split) <= 1e-6 * max(1.0, split)
    assert time.perf_counter() - t0 < 60.0


def test_criterion_08_retract_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4801)
    for _ in range(50):
        dim = int(rng.integers(1, 3))
        lam = random_flatseq(rng, dim, int(rng.integers(1, 4)), density=0.4)
        lifted = op_R(lam)
        for A in (0.5, 1.0, 2.0):
            back = op_P_A(lifted, A)
            assert back.entries.keys() == lam.entries.keys()
            for key, val in lam.entries.items():
                assert abs(back.entries[key] - abs(val)) <= 1e-12 * abs(val)
        p = float(rng.uniform(1.0, 4.0))
        q = float(rng.choice([1.0, 2.0, math.inf]))
        alpha = float(rng.uniform(-0.8, 2.0))
        lhs = lifted.vector_lp_norm(p, q, alpha)
        rhs = fq_lp_norm(lam, p, q, alpha)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, rhs)
    assert time.perf_counter() - t0 < 60.0


def test_criterion_09_seq_interpolation_stable():
    t0 = time.perf_counter()
    for p1, p2, theta, r, q, alpha in ((1.0, 2.0, 0.5, 1.0, 1.0, 0.0),
                                       (1.0, 2.0, 0.5, 3.0, 1.0, 1.0),
                                       (1.5, 3.0, 1.0 / 3.0, 1.0, 2.0, 0.5)):
        report = certify_seq_interpolation(p1, p2, theta, r, q, alpha,
                                           instances=25, J_values=(2, 3, 4, 5, 6))
        assert report.width(6) <= 1.5 * report.width(2), report.summary_lines()
        assert report.all_passed
    assert time.perf_counter() - t0 < 900.0


def test_criterion_10_besov_interpolation_stable():
    t0 = time.perf_counter()
    p = 4.0 / 3.0  # interpolated exponent for p1=1, p2=2 at theta=1/2
    for r in (1.0, 3.0, math.inf, p):
        report = certify_besov_interpolation(s=1.5, p1=1.0, p2=2.0, theta=0.5,
                                             r=r, alpha=0.0, k=1, instances=20,
                                             J_values=(2, 3, 4, 5, 6))
        assert report.width(6) <= 1.5 * report.width(2), report.summary_lines()
        assert report.all_passed  # includes the diagonal column when r = p
        if r == p:
            assert any(row["diag_ratio"] != "" for row in report.rows)
    assert time.perf_counter() - t0 < 900.0


def test_criterion_11_wavelet_engine():
    t0 = time.perf_counter()
    # roundtrips at G = J + 6
    for d, u, J in ((1, 2, 3), (1, 3, 4), (2, 2, 1), (2, 3, 2)):
        sysd = build_system(u, d)
        rng = np.random.RandomState(1100 + 10 * d + u)
        lam = random_coeffs(rng, d, J, density=0.4, mag=2.0)
        grid = covering_grid(lam, sysd, J + 6)
        rec = analyze(synthesize(lam, sysd, grid, materialize=False), sysd, J)
        assert coeff_maxdiff(lam, rec) <= 1e-6
    # vanishing moments
    for u in (2, 3):
        sysd = build_system(u, 1)
        for v in range(u):
            assert sysd.moment_residual(v) <= 1e-6
    # Parseval
    rng = np.random.RandomState(1104)
    sysd = build_system(3, 1)
    for _ in range(4):
        lam = random_coeffs(rng, 1, 2, density=0.6, mag=2.0)
        f = synthesize(lam, sysd, covering_grid(lam, sysd, 9))
        quad = float((f.values ** 2).sum()) * f.quadrature_weight()
        coeff = sum(v * v for v in lam.father.values()) + sum(
            v * v * 2.0 ** -j for (ell, j, m), v in lam.mother.items())
        assert abs(quad - coeff) <= 1e-4 * max(coeff, 1.0)
    assert time.perf_counter() - t0 < 300.0
