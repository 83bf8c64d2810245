"""Trace/extension tests: cutoff profile identities, coefficient lifting,
slice-exactness of the extension, roundtrips through analysis, norm-ratio
level independence, and atom certification."""

import math

import mpmath as mp
import numpy as np
import pytest

from walpha.dyadic import weight_axis_mass
from walpha.seqspaces import CoeffSeq, SpaceParams, random_coeffs
from walpha.traceext import (
    AtomicDecomp,
    CutoffFunction,
    atom_normalizer,
    atom_validate,
    ext_coefficients,
    ext_function,
    ext_norm_ratio,
    system_for,
    trace_function,
)
from walpha.wavelets import (
    GridSpec,
    SampledFunction,
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
    """Grid for the extension: boundary axes at midpoints, normal axes on the
    node lattice (so y = 0 is sampled) covering [-y_half, y_half]."""
    bg = covering_grid(lam, sys, G)
    w = int(math.ceil(y_half * 2 ** G))
    return GridSpec(
        G=G,
        lo=bg.lo + (-w,) * k,
        shape=bg.shape + (2 * w + 1,) * k,
        mid=bg.mid + (False,) * k,
    )


PARAMS_12 = SpaceParams(s=1.5, p=2, q=2, alpha=0, n=2, k=1)


def test_profile_plateau_and_support():
    chi = CutoffFunction(1)
    assert chi.profile(0.0) == 1.0  # exact, not approximate
    assert chi.profile(0.5) == 1.0
    assert chi.profile(-0.25) == 1.0
    assert chi.profile(1.0) == 0.0
    assert chi.profile(1.7) == 0.0
    v = chi.profile(0.75)
    assert 0.0 < v < 1.0
    assert chi.profile(-0.75) == v
    # k-fold product
    chi2 = CutoffFunction(2)
    assert chi2(np.array([0.0, 0.0])) == 1.0
    assert chi2(np.array([0.75, 0.0])) == v


def test_profile_derivative_table_against_mpmath():
    chi = CutoffFunction(1)

    def hmp(t):
        x = 2 - 2 * abs(t)
        if x <= 0:
            return mp.mpf(0)
        if x >= 1:
            return mp.mpf(1)
        ea = mp.e ** (-1 / x)
        return ea / (ea + mp.e ** (-1 / (1 - x)))

    for order in (1, 2, 3):
        table = chi.fd_sup(order, 11)
        grid = [mp.mpf("0.5") + (mp.mpf(i) / 256) * mp.mpf("0.5") for i in range(1, 256)]
        oracle = max(abs(mp.diff(hmp, t, order)) for t in grid)
        assert abs(table - float(oracle)) < 0.05 * float(oracle)


def test_ext_coefficients_examples():
    # single mother entry: lambda-tilde = 2^{j(s - n/p)} = 2^{3(2-1)} = 8
    p2 = SpaceParams(s=2, p=2, q=2, alpha=0, n=2, k=1)
    lam = CoeffSeq(1, 3, {}, {(2, 3, (1,)): 1.0})
    dec = ext_coefficients(lam, p2)
    assert dec.families[2][(3, (1,))] == 8.0
    assert dec.n_entries() == 1
    # zero input
    dec0 = ext_coefficients(CoeffSeq(1, 0, {}, {}), p2)
    assert dec0.n_entries() == 0
    # father-only input: family 1 mirrors it, no other families
    lamf = CoeffSeq(1, 0, {(0,): 2.5, (3,): -1.0}, {})
    decf = ext_coefficients(lamf, p2)
    assert decf.families[1] == {(0, (0,)): 2.5, (0, (3,)): -1.0}
    assert set(decf.families) == {1}


def test_ext_coefficients_guards():
    bad = SpaceParams(s=0.5, p=2, q=2, alpha=0, n=2, k=1)
    assert not bad.trace_admissible
    lam = CoeffSeq(1, 0, {(0,): 1.0}, {})
    with pytest.raises(ValueError, match="must exceed"):
        ext_coefficients(lam, bad)
    with pytest.raises(ValueError, match="boundary dimension"):
        ext_coefficients(CoeffSeq(2, 0, {(0, 0): 1.0}, {}), PARAMS_12)
    weak = build_system(1, 1)
    assert weak.u < PARAMS_12.u_min + 1  # sanity on the fixture
    strict = SpaceParams(s=3, p=2, q=2, alpha=0, n=2, k=1)
    with pytest.raises(ValueError, match="smoothness class"):
        ext_coefficients(lam, strict, sys=weak)


def test_slice_identity_exact():
    sysb = build_system(2, 1)
    chi = CutoffFunction(1)
    rng = np.random.RandomState(42)
    lam = random_coeffs(rng, 1, 2, density=0.5, mag=2.0)
    G = 8
    grid = ext_grid(lam, sysb, G, k=1)
    F = ext_function(lam, sysb, chi, grid, materialize=False)
    tr = trace_function(F, 1)
    direct = synthesize(lam, sysb, covering_grid(lam, sysb, G), materialize=True)
    assert np.max(np.abs(tr.materialize() - direct.values)) <= 1e-12


def test_slice_identity_dense_n3():
    sysb = build_system(2, 1)
    chi = CutoffFunction(2)
    lam = CoeffSeq(1, 1, {(0,): 1.0}, {(2, 1, (1,)): -0.5})
    G = 5
    grid = ext_grid(lam, sysb, G, k=2)
    F = ext_function(lam, sysb, chi, grid, materialize=True)
    tr = trace_function(F, 2)
    direct = synthesize(lam, sysb, covering_grid(lam, sysb, G), materialize=True)
    assert np.max(np.abs(tr.values - direct.values)) <= 1e-12
    # iterated single slices agree with the double slice
    tr2 = trace_function(trace_function(F, 1), 1)
    assert np.array_equal(tr2.values, tr.values)


def test_extension_vanishes_off_the_cutoff():
    sysb = build_system(2, 1)
    chi = CutoffFunction(1)
    G = 6
    # father-only: zero where |y| >= 1
    lamf = CoeffSeq(1, 0, {(0,): 1.0}, {})
    grid = ext_grid(lamf, sysb, G, k=1, y_half=2.0)
    F = ext_function(lamf, sysb, chi, grid).materialize()
    ypts = grid.axis_points(1)
    outer = np.abs(ypts) >= 1.0
    assert np.max(np.abs(F[:, outer])) == 0.0
    # level-j part: zero where |y| >= 2^-j
    lamm = CoeffSeq(1, 2, {}, {(2, 2, (0,)): 1.0})
    grid = ext_grid(lamm, sysb, G, k=1, y_half=1.0)
    F = ext_function(lamm, sysb, chi, grid).materialize()
    ypts = grid.axis_points(1)
    outer = np.abs(ypts) >= 0.25
    assert np.max(np.abs(F[:, outer])) == 0.0
    inner = np.abs(ypts) < 2.0 ** -4
    assert np.max(np.abs(F[:, inner])) > 0.0
    # zero input stays zero
    F0 = ext_function(CoeffSeq(1, 0, {}, {}), sysb, chi, grid).materialize()
    assert np.max(np.abs(F0)) == 0.0


def test_trace_guards_and_trivia():
    grid_mid = GridSpec(G=4, lo=(0, -16), shape=(16, 33), mid=True)
    f = SampledFunction(grid=grid_mid, values=np.ones(grid_mid.shape))
    with pytest.raises(ValueError, match="midpoint"):
        trace_function(f, 1)
    grid_off = GridSpec(G=4, lo=(0, 1), shape=(16, 8), mid=(True, False))
    f = SampledFunction(grid=grid_off, values=np.ones(grid_off.shape))
    with pytest.raises(ValueError, match="misses 0"):
        trace_function(f, 1)
    # constant slices to the constant
    grid = GridSpec(G=4, lo=(0, -8), shape=(16, 17), mid=(True, False))
    f = SampledFunction(grid=grid, values=np.full(grid.shape, 3.25))
    tr = trace_function(f, 1)
    assert np.all(tr.values == 3.25) and tr.grid.shape == (16,)
    # supported away from the slice traces to zero
    vals = np.zeros(grid.shape)
    vals[:, 0] = 7.0
    tr = trace_function(SampledFunction(grid=grid, values=vals), 1)
    assert np.max(np.abs(tr.values)) == 0.0


@pytest.mark.parametrize("n,k,u,J", [(2, 1, 3, 2), (3, 2, 2, 1), (3, 1, 2, 1)])
def test_trace_ext_coefficient_roundtrip(n, k, u, J):
    bd = n - k
    sysb = build_system(u, bd)
    chi = CutoffFunction(k)
    rng = np.random.RandomState(100 + 10 * n + k)
    lam = random_coeffs(rng, bd, J, density=0.5, mag=2.0)
    G = J + 6
    grid = ext_grid(lam, sysb, G, k=k)
    tr = trace_function(ext_function(lam, sysb, chi, grid, materialize=False), k)
    rec = analyze(tr, sysb, J)
    assert coeff_maxdiff(lam, rec) <= 1e-6


def test_norm_ratio_level_independent():
    for params in (
        PARAMS_12,
        SpaceParams(s=3, p=2, q=2, alpha=1, n=2, k=1),
        SpaceParams(s=2.5, p=1.5, q=1, alpha=0.5, n=2, k=1),
        SpaceParams(s=4, p=2, q=2, alpha=0, n=3, k=2),
    ):
        ratios = []
        for j in range(0, 9):
            lam = CoeffSeq(1, j, {}, {(2, j, (0,)): 1.0})
            _num, _den, ratio = ext_norm_ratio(lam, params)
            ratios.append(ratio)
        spread = (max(ratios) - min(ratios)) / ratios[0]
        assert spread <= 1e-12


def test_norm_ratio_single_entry_closed_form():
    s, p, q, alpha, n, k = 3.0, 2.0, 2.0, 1.0, 2, 1
    params = SpaceParams(s=s, p=p, q=q, alpha=alpha, n=n, k=k)
    j = 4
    lam = CoeffSeq(1, j, {}, {(2, j, (0,)): 1.0})
    num, den, ratio = ext_norm_ratio(lam, params)
    mass = 2.0 ** (-j * (n - 1)) * weight_axis_mass(-(2.0 ** (-j - 1)), 2.0 ** (-j - 1), alpha)
    want_num = 2.0 ** (j * (s - n / p)) * 2.0 ** (j * n / p) * mass ** (1.0 / p)
    want_den = 2.0 ** (j * (s - (alpha + k) / p - (n - k) / p))
    assert abs(num - want_num) <= 1e-12 * want_num
    assert abs(den - want_den) <= 1e-12 * want_den
    assert abs(ratio - want_num / want_den) <= 1e-12


def test_norm_ratio_zero_input():
    assert ext_norm_ratio(CoeffSeq(1, 0, {}, {}), PARAMS_12) == (0.0, 0.0, 1.0)


def test_norm_ratio_envelope_random():
    rng = np.random.RandomState(77)
    ratios = []
    for _ in range(20):
        lam = random_coeffs(rng, 1, 4, density=0.3, mag=4.0)
        ratios.append(ext_norm_ratio(lam, PARAMS_12)[2])
    assert all(np.isfinite(r) and r > 0 for r in ratios)
    assert max(ratios) / min(ratios) < 50.0


def test_atoms_pass_validation():
    params = SpaceParams(s=2.5, p=1.5, q=1, alpha=0.5, n=2, k=1)
    sysb = system_for(params)
    rng = np.random.RandomState(13)
    lam = random_coeffs(rng, 1, 3, density=0.5, mag=2.0)
    dec = ext_coefficients(lam, params, sys=sysb)
    b = 2 * sysb.support_radius
    count = 0
    for atom in dec.all_atoms(sysb):
        rep = atom_validate(atom, params.K_min, params.L_min, params.s, params.p, b)
        assert rep.passed, (atom.ell, atom.j, atom.m, rep)
        count += 1
    assert count == dec.n_entries()


def test_atom_scaled_by_level_fails_derivative_bound():
    params = SpaceParams(s=2.5, p=1.5, q=1, alpha=0.5, n=2, k=1)
    sysb = system_for(params)
    lam = CoeffSeq(1, 2, {}, {(2, 2, (0,)): 1.0})
    dec = ext_coefficients(lam, params, sys=sysb)
    atom = dec.atom_descriptor(2, 2, (0,), sysb)
    atom.prefactor *= 2.0 ** atom.j
    rep = atom_validate(atom, params.K_min, params.L_min, params.s, params.p, 2 * sysb.support_radius)
    assert not rep.deriv_ok and rep.max_deriv_ratio > 2.0


def test_father_atom_skips_moments():
    params = PARAMS_12
    sysb = system_for(params)
    lam = CoeffSeq(1, 0, {(0,): 1.0}, {})
    dec = ext_coefficients(lam, params, sys=sysb)
    atom = dec.atom_descriptor(1, 0, (0,), sysb)
    assert atom.moment_order == 0
    rep = atom_validate(atom, params.K_min, params.L_min, params.s, params.p, 2 * sysb.support_radius)
    assert rep.passed and rep.max_moment_rel == 0.0
    # yet the raw integral is clearly nonzero
    assert atom.axis_moment_rel(0, 0, 10) > 1e-3


def test_atom_support_and_resolution_guards():
    params = PARAMS_12
    sysb = system_for(params)
    dec = ext_coefficients(CoeffSeq(1, 1, {}, {(2, 1, (3,)): 1.0}), params, sys=sysb)
    atom = dec.atom_descriptor(2, 1, (3,), sysb)
    ok = atom_validate(atom, params.K_min, params.L_min, params.s, params.p, 2 * sysb.support_radius)
    assert ok.support_ok
    tight = atom_validate(atom, params.K_min, params.L_min, params.s, params.p, 2)
    assert not tight.support_ok
    with pytest.raises(ValueError, match="insufficient"):
        atom_validate(atom, params.K_min, params.L_min, params.s, params.p, 2 * sysb.support_radius, G=3)


def test_normalizer_monotone_in_order():
    params = PARAMS_12
    sysb = system_for(params)
    chi = CutoffFunction(1)
    vals = [atom_normalizer(("psi",), 1, K, sysb, chi) for K in range(0, 4)]
    assert all(vals[i] <= vals[i + 1] for i in range(3))
    assert vals[0] >= 1.0
