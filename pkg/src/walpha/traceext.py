"""Hyperplane trace and the explicit extension operator.

The extension of a boundary coefficient family lifts each term to the full
space by a smooth cutoff in the k normal variables, scaled to the term's
dyadic level.  At coefficient level the lift is a relabelling with an extra
2^{j(s - n/p)} factor; at function level it is a separable product, so the
restriction back to y = 0 reproduces the boundary synthesis exactly (the
cutoff profile equals 1 at the origin, in floating point as well).

All atoms produced here are certified against the support / derivative /
moment discipline by atom_validate; raw profiles are divided by a tabulated
normalization constant so the derivative bound holds with constant 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dyadic import IntBox
from .seqspaces import FlatSeq, SpaceParams, besov_seq_norm, f_seq_norm
from .wavelets import (
    GridSpec,
    SampledFunction,
    WaveletSystem,
    _axis_numerators,
    _factor_on_axis,
    _family_kinds,
    build_system,
    cascade_values,
)

__all__ = [
    "CutoffFunction",
    "AtomDescriptor",
    "AtomReport",
    "AtomicDecomp",
    "ext_coefficients",
    "ext_function",
    "trace_function",
    "ext_norm_ratio",
    "atom_validate",
    "atom_normalizer",
    "system_for",
]

_G_REF = 11  # finite-difference table resolution for normalization constants
_G_VAL = 10  # validation resolution (checks run one level coarser)
_DERIV_TOL = 0.10
_MOMENT_TOL = 1e-6


def _plateau(x):
    """exp(-1/x) / (exp(-1/x) + exp(-1/(1-x))): 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    out[x >= 1.0] = 1.0
    mid = (x > 0.0) & (x < 1.0)
    xm = x[mid]
    ea = np.exp(-1.0 / xm)
    eb = np.exp(-1.0 / (1.0 - xm))
    out[mid] = ea / (ea + eb)
    return out


@dataclass(frozen=True, eq=False)
class CutoffFunction:
    """Product of k copies of a smooth bump h with h = 1 on [-1/2, 1/2] and
    supp h inside (-1, 1); h(0) = 1 holds exactly in floating point."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("need k >= 1 normal variables")

    def profile(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        return _plateau(2.0 - 2.0 * t)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.k:
            raise ValueError("normal-variable count mismatch")
        vals = self.profile(y)
        return np.prod(vals, axis=-1)

    def profile_values(self, G):
        return _bump_values(G)

    def fd_sup(self, order, G):
        return _bump_fd_sup(int(order), int(G))


@lru_cache(maxsize=None)
def _bump_values(G):
    # profile sampled at t = i/2^G over the closed support [-1, 1]
    t = np.arange(-(1 << G), (1 << G) + 1) / float(1 << G)
    v = _plateau(2.0 - 2.0 * np.abs(t))
    v.setflags(write=False)
    return v


@lru_cache(maxsize=None)
def _bump_fd_sup(order, G):
    v = _bump_values(G)
    if order == 0:
        return float(np.max(np.abs(v)))
    d = np.diff(v, order) * float(1 << G) ** order
    return float(np.max(np.abs(d)))


@dataclass(frozen=True, eq=False)
class AtomReport:
    support_ok: bool
    deriv_ok: bool
    max_deriv_ratio: float
    moments_ok: bool
    max_moment_rel: float

    @property
    def passed(self):
        return self.support_ok and self.deriv_ok and self.moments_ok


@dataclass(eq=False)
class AtomDescriptor:
    """One atom of the extension decomposition: separable profile

        prefactor * prod_r w_r(2^j x_r - m_r) * prod_i h(2^j y_i)

    with w_r the family's wavelet kinds on the boundary axes and h the cutoff
    profile on the k normal axes.  The profile divides out `normalization`
    (the tabulated derivative-chain constant) and the matching coefficient is
    multiplied by it."""

    ell: int
    j: int
    m: tuple
    n: int
    k: int
    coeff: float
    prefactor: float
    normalization: float
    kinds: tuple
    support: IntBox
    moment_order: int
    sys: WaveletSystem
    chi: CutoffFunction

    def axis_kind(self, ax):
        return self.kinds[ax] if ax < self.n - self.k else "bump"

    def axis_values(self, ax, G):
        """Factor sampled in its own scaled variable (u = 2^j x - m or 2^j y)
        at step 2^-G over the factor's support."""
        kind = self.axis_kind(ax)
        if kind == "bump":
            return self.chi.profile_values(G)
        phi, psi = cascade_values(self.sys.N, G)
        return phi if kind == "phi" else psi

    def axis_fd_sup(self, ax, order, G):
        kind = self.axis_kind(ax)
        if kind == "bump":
            return self.chi.fd_sup(order, G)
        return self.sys.deriv_sup(kind, order, G)

    def axis_moment_rel(self, ax, order, G):
        """|centered moment| / (radius^order * L1 mass) of the axis factor."""
        vals = self.axis_values(ax, G)
        npts = len(vals)
        c = (npts - 1) / 2.0
        radius = c / float(1 << G)
        t = (np.arange(npts) - c) / float(1 << G)
        num = abs(float(np.sum(vals * t ** order)))
        den = (radius ** order) * float(np.sum(np.abs(vals)))
        return num / den if den > 0 else 0.0


def atom_normalizer(kinds, k, K, sys, chi, G=_G_REF):
    """max over |beta| <= K of the product of per-axis derivative sups; the
    constant that turns the raw separable profile into a bound-1 atom."""
    n_axes = len(kinds) + k
    sups = []
    for ax in range(n_axes):
        if ax < len(kinds):
            sups.append([sys.deriv_sup(kinds[ax], r, G) for r in range(K + 1)])
        else:
            sups.append([chi.fd_sup(r, G) for r in range(K + 1)])
    best = 0.0
    for beta in itertools.product(range(K + 1), repeat=n_axes):
        if sum(beta) > K:
            continue
        prod = 1.0
        for ax, b in enumerate(beta):
            prod *= sups[ax][b]
        best = max(best, prod)
    return best


@dataclass(eq=False)
class AtomicDecomp:
    """Extension coefficients, family by family; entries live on the boundary
    slots only (the normal offset of every nonzero entry is zero)."""

    n: int
    k: int
    params: SpaceParams
    families: dict  # ell -> {(j, m_boundary): coefficient}

    @property
    def boundary_dim(self):
        return self.n - self.k

    def n_entries(self):
        return sum(len(fam) for fam in self.families.values())

    def atom_descriptor(self, ell, j, m, sys, chi=None):
        if chi is None:
            chi = CutoffFunction(self.k)
        p = self.params
        kinds = ("phi",) * self.boundary_dim if ell == 1 else _family_kinds(ell, self.boundary_dim)
        K = p.K_min
        cstar = atom_normalizer(kinds, self.k, K, sys, chi)
        raw = self.families[ell][(j, m)]
        span = 2 * sys.N - 1  # wavelet support length on each boundary axis
        lo = tuple(2 * mr for mr in m) + (-2,) * self.k
        hi = tuple(2 * mr + 2 * span for mr in m) + (2,) * self.k
        support = IntBox(scale=j + 1, lo=lo, hi=hi)
        return AtomDescriptor(
            ell=ell,
            j=j,
            m=m,
            n=self.n,
            k=self.k,
            coeff=raw * cstar,
            prefactor=2.0 ** (-j * (p.s - self.n / p.p)) / cstar,
            normalization=cstar,
            kinds=kinds,
            support=support,
            moment_order=0 if ell == 1 else p.L_min,
            sys=sys,
            chi=chi,
        )

    def all_atoms(self, sys, chi=None):
        for ell in sorted(self.families):
            for (j, m) in sorted(self.families[ell]):
                yield self.atom_descriptor(ell, j, m, sys, chi)


def _require_admissible(params):
    if not params.trace_admissible:
        raise ValueError(f"trace inadmissible: {params.trace_condition_text()}")


def system_for(params, d=None):
    """Wavelet system of the minimal admissible smoothness class."""
    _require_admissible(params)
    return build_system(params.u_min, d if d is not None else params.n - params.k)


def ext_coefficients(lam, params, sys=None):
    """Lift boundary coefficients to the extension decomposition: family 1
    keeps the father entries at level 0; family ell >= 2 carries
    2^{j(s - n/p)} times the level-j entries."""
    _require_admissible(params)
    bd = params.n - params.k
    if lam.dim != bd:
        raise ValueError(f"expected boundary dimension {bd}, got {lam.dim}")
    if sys is not None and sys.u < params.u_min:
        raise ValueError(f"wavelet smoothness class u={sys.u} below required {params.u_min}")
    fac = params.s - params.n / params.p
    families = {1: {}}
    for m, v in lam.father.items():
        if v != 0.0:
            families[1][(0, m)] = float(v)
    for (ell, j, m), v in lam.mother.items():
        if v == 0.0:
            continue
        families.setdefault(ell, {})[(j, m)] = float(v) * 2.0 ** (j * fac)
    return AtomicDecomp(n=params.n, k=params.k, params=params, families=families)


def _bump_factor_on_axis(chi, j, grid, ax):
    # h(2^j y) sampled along one grid axis
    pts = grid.axis_points(ax) * 2.0 ** j
    return chi.profile(pts)


def ext_function(lam, sys, chi, grid, materialize="auto"):
    """Pointwise extension on an n-dimensional grid: father terms carry
    h(y_i) on the normal axes, level-j terms carry h(2^j y_i)."""
    bd = lam.dim
    n = grid.dim
    k = n - bd
    if k < 1:
        raise ValueError("grid must add at least one normal axis")
    if chi.k != k:
        raise ValueError("cutoff dimension mismatch")
    if sys.d != bd:
        raise ValueError("system dimension mismatch")
    L = sys.taps

    def covered(j, m):
        for ax in range(bd):
            a = grid.lo[ax] * 2.0 ** -grid.G
            b = (grid.lo[ax] + grid.shape[ax]) * 2.0 ** -grid.G
            if m[ax] * 2.0 ** -j < a - 1e-12 or (m[ax] + L - 1) * 2.0 ** -j > b + 1e-12:
                return False
        for ax in range(bd, n):
            a = grid.lo[ax] * 2.0 ** -grid.G
            b = (grid.lo[ax] + grid.shape[ax]) * 2.0 ** -grid.G
            if -(2.0 ** -j) < a - 1e-12 or 2.0 ** -j > b + 1e-12:
                return False
        return True

    terms = []
    for m, v in sorted(lam.father.items()):
        if v == 0.0:
            continue
        if not covered(0, m):
            raise ValueError(f"grid does not cover extension of father term m={m}")
        factors = tuple(_factor_on_axis(sys, "phi", 0, m[ax], grid, ax) for ax in range(bd)) + tuple(
            _bump_factor_on_axis(chi, 0, grid, ax) for ax in range(bd, n)
        )
        terms.append((float(v), factors))
    for (ell, j, m), v in sorted(lam.mother.items()):
        if v == 0.0:
            continue
        if not covered(j, m):
            raise ValueError(
                f"grid does not cover extension of term (ell={ell}, j={j}, m={m})"
            )
        kinds = _family_kinds(ell, bd)
        factors = tuple(
            _factor_on_axis(sys, kinds[ax], j, m[ax], grid, ax) for ax in range(bd)
        ) + tuple(_bump_factor_on_axis(chi, j, grid, ax) for ax in range(bd, n))
        terms.append((float(v), factors))
    f = SampledFunction(grid=grid, values=None, terms=terms)
    want_dense = materialize is True or (
        materialize == "auto" and grid.npoints <= (1 << 24)
    )
    if want_dense:
        f.materialize()
    return f


def trace_function(f, k):
    """Restriction to the hyperplane where the last k coordinates vanish; the
    grid must sample those coordinates at 0 exactly (no interpolation)."""
    grid = f.grid
    n = grid.dim
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < dim")
    cut = []
    for ax in range(n - k, n):
        if grid.mid[ax]:
            raise ValueError(f"slice y=0 not on grid: axis {ax} is a midpoint lattice")
        i0 = -grid.lo[ax]
        if not 0 <= i0 < grid.shape[ax]:
            raise ValueError(f"slice y=0 not on grid: axis {ax} window misses 0")
        cut.append(i0)
    sub = GridSpec(
        G=grid.G,
        lo=grid.lo[: n - k],
        shape=grid.shape[: n - k],
        mid=grid.mid[: n - k],
    )
    values = None
    terms = None
    if f.values is not None:
        idx = (slice(None),) * (n - k) + tuple(cut)
        values = f.values[idx].copy()
    if f.terms is not None:
        terms = []
        for coef, factors in f.terms:
            scale = 1.0
            for ax, i0 in zip(range(n - k, n), cut):
                scale *= float(factors[ax][i0])
            if scale != 0.0:
                terms.append((coef * scale, factors[: n - k]))
    return SampledFunction(grid=sub, values=values, terms=terms)


def _family_as_flatseq(decomp, ell):
    """Embed one family's entries on the full space for the sequence norm;
    boundary indices are padded with zeros on the normal axes."""
    pad = (0,) * decomp.k
    entries = decomp.families.get(ell, {})
    return FlatSeq(decomp.n, {(j, m + pad): v for (j, m), v in entries.items()})


def ext_norm_ratio(lam, params, sys=None, chi=None):
    """(num, den, ratio): num sums the full-space sequence norms of the
    extension families (times their atom normalization constants when a
    system is supplied); den is the boundary norm the trace theory pairs it
    with.  ratio = num/den, with 0/0 reported as 1."""
    _require_admissible(params)
    decomp = ext_coefficients(lam, params, sys=sys)
    if chi is None:
        chi = CutoffFunction(params.k)
    num = 0.0
    bd = params.n - params.k
    for ell in sorted(decomp.families):
        fam = decomp.families[ell]
        if not fam:
            continue
        if sys is None:
            cstar = 1.0
        else:
            kinds = ("phi",) * bd if ell == 1 else _family_kinds(ell, bd)
            cstar = atom_normalizer(kinds, params.k, params.K_min, sys, chi)
        num += cstar * f_seq_norm(
            _family_as_flatseq(decomp, ell), params.p, params.q, params.weight
        )
    sigma = params.s - (params.alpha + params.k) / params.p
    den = besov_seq_norm(lam, sigma, params.p, params.p)
    if num == 0.0 and den == 0.0:
        return 0.0, 0.0, 1.0
    return num, den, num / den if den > 0 else math.inf


def atom_validate(a, K, L, s, p, b, G=_G_VAL):
    """Check one atom against the support / derivative-bound / moment
    discipline.

    support: exact integer box arithmetic inside the b-dilated cube at the
    atom's slot.  derivatives: products of per-axis finite-difference sups
    against 2^{-j(s - n/p) + |beta| j} for all |beta| <= K, 10% headroom for
    the difference quotients.  moments: relative centered moments of each
    axis factor, combined multiplicatively, against 1e-6 (families >= 2)."""
    if 1 << G < 4 * (K + 1):
        raise ValueError(f"resolution 2^-{G} insufficient for order-{K} differences")
    j = a.j
    n = a.n
    # b-dilated cube centered at the slot: corners (2m - b, 2m + b) at scale j+1
    if int(b) != b:
        raise ValueError("need an integer dilation factor")
    b = int(b)
    lo = tuple(2 * mr - b for mr in a.m) + (-b,) * a.k
    hi = tuple(2 * mr + b for mr in a.m) + (b,) * a.k
    big = IntBox(scale=j + 1, lo=lo, hi=hi)
    support_ok = big.contains_box(a.support)

    bound0 = 2.0 ** (-j * (s - n / p))
    max_ratio = 0.0
    for beta in itertools.product(range(K + 1), repeat=n):
        tot = sum(beta)
        if tot > K:
            continue
        prod = a.prefactor * 2.0 ** (j * tot)
        for ax, r in enumerate(beta):
            prod *= a.axis_fd_sup(ax, r, G)
        ratio = prod / (bound0 * 2.0 ** (j * tot))
        max_ratio = max(max_ratio, ratio)
    deriv_ok = max_ratio <= 1.0 + _DERIV_TOL

    max_moment = 0.0
    if a.moment_order > 0:
        for gamma in itertools.product(range(L), repeat=n):
            if sum(gamma) >= L:
                continue
            rel = 1.0
            for ax, g in enumerate(gamma):
                rel *= a.axis_moment_rel(ax, g, G)
            max_moment = max(max_moment, rel)
    moments_ok = max_moment <= _MOMENT_TOL

    return AtomReport(
        support_ok=support_ok,
        deriv_ok=deriv_ok,
        max_deriv_ratio=max_ratio,
        moments_ok=moments_ok,
        max_moment_rel=max_moment,
    )
