"""Sequence-space norms over dyadic lattices.

Coefficient containers (father/mother families and flat (j,m)-indexed
sequences), exact weighted Lorentz norms of simple functions, Besov-type
coefficient norms, and the weighted Lebesgue/Lorentz norms built on the finite
arrangement generated by overlapping dyadic cubes.  Everything here is exact
up to float rounding: integrands are piecewise constant and all cell measures
come from closed-form integrals in walpha.dyadic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyadic import (
    DyadicCube,
    EBox,
    IntBox,
    WeightAlpha,
    weight_axis_mass,
    weight_mass_cube,
    weight_mass_E,
)

__all__ = [
    "CoeffSeq",
    "FlatSeq",
    "SimpleFunction",
    "SpaceParams",
    "Arrangement",
    "besov_seq_norm",
    "f_seq_norm",
    "fq_lp_norm",
    "fqLpr_norm",
    "equivalent_E_norm",
    "lorentz_from_pieces",
    "lorentz_norm_discrete",
    "lambda_s_build",
    "lambda_s_lorentz_fast",
    "CoeffParseError",
    "format_coeffs",
    "parse_coeffs",
    "read_coeffs",
    "write_coeffs",
    "random_coeffs",
    "random_flatseq",
]

_CELL_LIMIT = 8_000_000


def _check_exponent(name, value, allow_inf):
    v = float(value)
    if math.isinf(v):
        if not allow_inf:
            raise ValueError(f"{name} = inf is not supported here")
        return v
    if not (v > 0.0 and math.isfinite(v)):
        raise ValueError(f"{name} must be a positive real, got {value}")
    return v


def _finite(v, what):
    x = float(v)
    if not math.isfinite(x):
        raise ValueError(f"non-finite {what}: {v}")
    return x


def _lp(vals, p):
    # vals: nonnegative 1-d array
    if vals.size == 0:
        return 0.0
    if math.isinf(p):
        return float(np.max(vals))
    return float(np.sum(vals ** p) ** (1.0 / p))


@dataclass(frozen=True)
class CoeffSeq:
    """Coefficient family on R^dim: father block at level 0 plus mother
    families ell = 2..2^dim over levels 0..J.

    father: {m tuple: value}; mother: {(ell, j, m tuple): value}.
    """

    dim: int
    J: int
    father: dict
    mother: dict

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.J < 0:
            raise ValueError("J must be >= 0")
        fa = {}
        for m, v in self.father.items():
            m = tuple(int(x) for x in m)
            if len(m) != self.dim:
                raise ValueError(f"father index {m} has wrong dimension")
            fa[m] = _finite(v, "father value")
        mo = {}
        top = 1 << self.dim
        for key, v in self.mother.items():
            ell, j, m = key
            ell, j, m = int(ell), int(j), tuple(int(x) for x in m)
            if not 2 <= ell <= top:
                raise ValueError(f"mother family {ell} outside 2..{top}")
            if not 0 <= j <= self.J:
                raise ValueError(f"mother level {j} outside 0..{self.J}")
            if len(m) != self.dim:
                raise ValueError(f"mother index {m} has wrong dimension")
            mo[(ell, j, m)] = _finite(v, "mother value")
        object.__setattr__(self, "father", fa)
        object.__setattr__(self, "mother", mo)

    @property
    def n_entries(self):
        return len(self.father) + len(self.mother)

    def scaled(self, c):
        c = float(c)
        return CoeffSeq(
            self.dim,
            self.J,
            {m: c * v for m, v in self.father.items()},
            {k: c * v for k, v in self.mother.items()},
        )


@dataclass(frozen=True)
class FlatSeq:
    """Flat (j, m)-indexed sequence on R^dim, one value per dyadic cube."""

    dim: int
    entries: dict

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        en = {}
        for key, v in self.entries.items():
            j, m = key
            j, m = int(j), tuple(int(x) for x in m)
            if j < 0:
                raise ValueError("negative level")
            if len(m) != self.dim:
                raise ValueError(f"index {m} has wrong dimension")
            en[(j, m)] = _finite(v, "entry value")
        object.__setattr__(self, "entries", en)

    @property
    def n_entries(self):
        return len(self.entries)

    def max_level(self):
        return max((j for (j, _m) in self.entries), default=0)

    def scaled(self, c):
        c = float(c)
        return FlatSeq(self.dim, {k: c * v for k, v in self.entries.items()})


@dataclass(frozen=True)
class SimpleFunction:
    """Finitely many disjoint boxes with constant values."""

    dim: int
    pieces: tuple

    def __post_init__(self):
        pcs = []
        for box, v in self.pieces:
            if not isinstance(box, IntBox):
                raise TypeError("pieces must carry IntBox supports")
            if box.dim != self.dim:
                raise ValueError("piece dimension mismatch")
            pcs.append((box, _finite(v, "piece value")))
        object.__setattr__(self, "pieces", tuple(pcs))
        self._assert_disjoint()

    def _assert_disjoint(self):
        boxes = [b for b, _ in self.pieces]
        if len(boxes) < 2:
            return
        s = max(b.scale for b in boxes)
        rb = [b.rescaled(s) for b in boxes]
        order = sorted(range(len(rb)), key=lambda i: rb[i].lo[0])
        for oi in range(len(order)):
            a = rb[order[oi]]
            for oj in range(oi + 1, len(order)):
                b = rb[order[oj]]
                if b.lo[0] >= a.hi[0]:
                    break
                if not any(v <= x or u >= y for x, y, u, v in zip(a.lo, a.hi, b.lo, b.hi)):
                    raise ValueError("pieces overlap")

    def scaled(self, c):
        c = float(c)
        return SimpleFunction(self.dim, tuple((b, c * v) for b, v in self.pieces))


def _ceil_excl(val):
    # smallest integer strictly greater than val, with a guard against
    # float fuzz just below an integer
    return int(math.floor(val + 1e-12)) + 1


@dataclass(frozen=True)
class SpaceParams:
    """Parameter bundle (s, p, q, r, alpha, n, k) with admissibility helpers."""

    s: float
    p: float
    q: float
    alpha: float
    n: int
    k: int = 1
    r: float = None

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "p", _check_exponent("p", self.p, allow_inf=False))
        object.__setattr__(self, "q", _check_exponent("q", self.q, allow_inf=True))
        if self.r is not None:
            object.__setattr__(self, "r", _check_exponent("r", self.r, allow_inf=True))
        object.__setattr__(self, "alpha", float(self.alpha))
        if not self.alpha > -1.0:
            raise ValueError("alpha must exceed -1")
        if self.n < 2:
            raise ValueError("need ambient dimension n >= 2")
        if not 1 <= self.k <= self.n - 1:
            raise ValueError("codimension must satisfy 1 <= k <= n-1")

    @property
    def r0(self):
        return max(self.alpha + 1.0, 1.0)

    @property
    def weight(self):
        return WeightAlpha(self.alpha)

    @property
    def boundary_smoothness(self):
        return self.s - (self.alpha + self.k) / self.p

    @property
    def trace_threshold(self):
        return (self.n - self.k) * max(1.0 / self.p - 1.0, 0.0)

    @property
    def trace_admissible(self):
        return self.boundary_smoothness > self.trace_threshold

    def trace_condition_text(self):
        return (
            f"s - (alpha+k)/p = {self.boundary_smoothness:.6g} must exceed "
            f"(n-k)*max(1/p-1, 0) = {self.trace_threshold:.6g}"
        )

    @property
    def K_min(self):
        return int(math.floor(self.s)) + 1

    @property
    def L_min(self):
        val = self.n * max(1.0 / min(self.p / self.r0, self.q) - 1.0, 0.0)
        return _ceil_excl(val)

    @property
    def u_min(self):
        val = max(
            self.s,
            self.trace_threshold - self.s + (self.alpha + self.k) / self.p,
            self.n * max(1.0 / min(self.p / self.r0, self.q) - 1.0, 0.0) - self.s,
        )
        return _ceil_excl(val)


class Arrangement:
    """Finest partition of space generated by a finite set of integer boxes.

    Cells are the products of consecutive per-axis breakpoints; every input
    box is a union of cells, so piecewise-constant integrands built from the
    boxes are constant per cell and integrate exactly.
    """

    def __init__(self, boxes):
        if not boxes:
            raise ValueError("empty arrangement")
        dim = boxes[0].dim
        if any(b.dim != dim for b in boxes):
            raise ValueError("mixed dimensions")
        scale = max(b.scale for b in boxes)
        rb = [b.rescaled(scale) for b in boxes]
        self.dim = dim
        self.scale = scale
        self.breaks = []
        for ax in range(dim):
            pts = sorted({b.lo[ax] for b in rb} | {b.hi[ax] for b in rb})
            self.breaks.append(np.asarray(pts, dtype=np.int64))
        self.shape = tuple(len(br) - 1 for br in self.breaks)
        ncells = 1
        for w in self.shape:
            ncells *= w
        if ncells > _CELL_LIMIT:
            raise ValueError(f"arrangement too fine ({ncells} cells)")
        self.ncells = ncells
        self.spans = []
        for b in rb:
            sp = []
            for ax in range(dim):
                i0 = int(np.searchsorted(self.breaks[ax], b.lo[ax]))
                i1 = int(np.searchsorted(self.breaks[ax], b.hi[ax]))
                sp.append((i0, i1))
            self.spans.append(tuple(sp))

    def cell_masses(self, alpha=None):
        """Cell measures; weighted on the last axis when alpha is given."""
        h = 2.0 ** -self.scale
        per_axis = []
        for ax in range(self.dim):
            br = self.breaks[ax]
            if ax == self.dim - 1 and alpha is not None:
                lens = np.array(
                    [weight_axis_mass(a * h, b * h, alpha) for a, b in zip(br[:-1], br[1:])]
                )
            else:
                lens = (br[1:] - br[:-1]).astype(float) * h
            per_axis.append(lens)
        out = per_axis[0]
        for lens in per_axis[1:]:
            out = np.multiply.outer(out, lens)
        return out

    def aggregate(self, contribs, q):
        """Per-cell l_q power sum (q < inf: sum of c^q; q = inf: max)."""
        if math.isinf(q):
            agg = np.zeros(self.shape)
            for sp, c in zip(self.spans, contribs):
                sl = tuple(slice(i0, i1) for (i0, i1) in sp)
                np.maximum(agg[sl], c, out=agg[sl])
            return agg
        agg = np.zeros(self.shape)
        for sp, c in zip(self.spans, contribs):
            sl = tuple(slice(i0, i1) for (i0, i1) in sp)
            agg[sl] += c ** q
        return agg

    def entry_cell_lists(self):
        """Flat cell index array per entry (CSR-style), for kernel consumers."""
        idx = []
        ptr = [0]
        for sp in self.spans:
            grids = np.meshgrid(
                *[np.arange(i0, i1) for (i0, i1) in sp], indexing="ij"
            )
            flat = np.ravel_multi_index([g.ravel() for g in grids], self.shape)
            idx.append(flat.astype(np.int64))
            ptr.append(ptr[-1] + flat.size)
        return np.concatenate(idx) if idx else np.zeros(0, np.int64), np.asarray(ptr, np.int64)


def lorentz_from_pieces(values, masses, p, r):
    """Weighted Lorentz quasi-norm of a nonnegative simple function given as
    (value, mass) pairs over disjoint pieces.

    Distribution-function form: norm^r = (1/r) sum_i M_i^{r/p} (v_i^r - v_{i+1}^r)
    over the descending distinct values with cumulative masses M_i; the r = inf
    case is sup_i v_i M_i^{1/p}.
    """
    p = _check_exponent("p", p, allow_inf=False)
    r = _check_exponent("r", r, allow_inf=True)
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    m = np.asarray(masses, dtype=float).ravel()
    if v.shape != m.shape:
        raise ValueError("values/masses length mismatch")
    keep = (v > 0.0) & (m > 0.0)
    v, m = v[keep], m[keep]
    if v.size == 0:
        return 0.0
    order = np.argsort(-v, kind="stable")
    v, m = v[order], m[order]
    M = np.cumsum(m)
    if math.isinf(r):
        return float(np.max(v * M ** (1.0 / p)))
    vr = v ** r
    drop = vr - np.concatenate([vr[1:], [0.0]])
    total = float(np.sum(M ** (r / p) * drop)) / r
    return total ** (1.0 / r)


def lorentz_norm_discrete(f, w, p, r):
    """Exact weighted Lorentz quasi-norm of a SimpleFunction.

    w: WeightAlpha or float alpha (weight on the last axis), the string
    "counting" (unit mass per piece), or an explicit array of piece masses.
    """
    if not isinstance(f, SimpleFunction):
        raise TypeError("expected a SimpleFunction")
    if isinstance(w, str):
        if w != "counting":
            raise ValueError(f"unknown measure spec {w!r}")
        masses = np.ones(len(f.pieces))
    elif isinstance(w, np.ndarray) or isinstance(w, (list, tuple)):
        masses = np.asarray(w, dtype=float)
        if masses.shape != (len(f.pieces),):
            raise ValueError("piece-mass array length mismatch")
    else:
        alpha = w.alpha if isinstance(w, WeightAlpha) else float(w)
        masses = np.array([weight_mass_cube(b, alpha) for b, _ in f.pieces])
    values = np.array([v for _, v in f.pieces])
    return lorentz_from_pieces(values, masses, p, r)


def besov_seq_norm(lam, s, p, q):
    """Besov coefficient norm: father lp block plus, per mother family, the
    level-weighted lq-of-lp aggregate with weight 2^{j(s - dim/p)}.

    p or q may be inf (sup modification).
    """
    if not isinstance(lam, CoeffSeq):
        raise TypeError("expected a CoeffSeq")
    s = float(s)
    p = _check_exponent("p", p, allow_inf=True)
    q = _check_exponent("q", q, allow_inf=True)
    d = lam.dim
    fa = np.abs(np.array([v for v in lam.father.values() if v != 0.0], dtype=float))
    total = _lp(fa, p)
    dp = 0.0 if math.isinf(p) else d / p
    fam = {}
    for (ell, j, m), v in lam.mother.items():
        if v != 0.0:
            fam.setdefault(ell, {}).setdefault(j, []).append(abs(v))
    for ell in sorted(fam):
        terms = []
        for j in sorted(fam[ell]):
            inner = _lp(np.asarray(fam[ell][j], dtype=float), p)
            terms.append(2.0 ** (j * (s - dp)) * inner)
        total += _lp(np.asarray(terms, dtype=float), q)
    return total


def _flat_arrangement(lam):
    keys = sorted((j, m) for (j, m), v in lam.entries.items() if v != 0.0)
    if not keys:
        return None, None, None
    boxes = [DyadicCube(j, m).as_box() for j, m in keys]
    vals = np.array([abs(lam.entries[k]) for k in keys])
    return keys, boxes, vals


def f_seq_norm(lam, p, q, w):
    """Weighted Lebesgue norm of the lq aggregate of scaled cube indicators:
    entry (j, m) contributes 2^{j dim/p} |value| on its cube.
    """
    if not isinstance(lam, FlatSeq):
        raise TypeError("expected a FlatSeq")
    p = _check_exponent("p", p, allow_inf=False)
    q = _check_exponent("q", q, allow_inf=True)
    alpha = w.alpha if isinstance(w, WeightAlpha) else float(w)
    keys, boxes, vals = _flat_arrangement(lam)
    if keys is None:
        return 0.0
    fac = np.array([2.0 ** (j * lam.dim / p) for j, _m in keys])
    arr = Arrangement(boxes)
    agg = arr.aggregate(fac * vals, q)
    masses = arr.cell_masses(alpha)
    if math.isinf(q):
        integrand = agg ** p
    else:
        integrand = agg ** (p / q)
    return float(np.sum(masses * integrand) ** (1.0 / p))


def fq_lp_norm(lam, p, q, w):
    """Plain-indicator variant of f_seq_norm (no 2^{j dim/p} factor): the
    L_p(w) norm of the lq aggregate of |value| over cubes."""
    if not isinstance(lam, FlatSeq):
        raise TypeError("expected a FlatSeq")
    p = _check_exponent("p", p, allow_inf=False)
    q = _check_exponent("q", q, allow_inf=True)
    alpha = w.alpha if isinstance(w, WeightAlpha) else float(w)
    keys, boxes, vals = _flat_arrangement(lam)
    if keys is None:
        return 0.0
    arr = Arrangement(boxes)
    agg = arr.aggregate(vals, q)
    masses = arr.cell_masses(alpha)
    integrand = agg ** p if math.isinf(q) else agg ** (p / q)
    return float(np.sum(masses * integrand) ** (1.0 / p))


def fqLpr_norm(lam, p, r, q, w):
    """Weighted Lorentz norm of the lq aggregate of plain cube indicators.

    For p = r this equals p^{-1/p} times fq_lp_norm (diagonal identity of the
    distribution-form Lorentz norm), which tests pin to 1e-12.
    """
    if not isinstance(lam, FlatSeq):
        raise TypeError("expected a FlatSeq")
    p = _check_exponent("p", p, allow_inf=False)
    r = _check_exponent("r", r, allow_inf=True)
    q = _check_exponent("q", q, allow_inf=True)
    alpha = w.alpha if isinstance(w, WeightAlpha) else float(w)
    keys, boxes, vals = _flat_arrangement(lam)
    if keys is None:
        return 0.0
    arr = Arrangement(boxes)
    agg = arr.aggregate(vals, q)
    if not math.isinf(q):
        agg = agg ** (1.0 / q)
    masses = arr.cell_masses(alpha)
    return lorentz_from_pieces(agg.ravel(), masses.ravel(), p, r)


def equivalent_E_norm(lam, p, q, w, boxes, r=None, vol_lo=0.25):
    """Norm with each cube indicator replaced by the indicator of a sub-box.

    boxes: {(j, m): IntBox or EBox} for every nonzero entry; each box must lie
    inside its cube with volume ratio in [vol_lo, 1] (checked exactly).  With
    r = None the weighted-L_p form (including the 2^{j dim/p} factors) is
    returned; with r given, the weighted-Lorentz form on plain indicators.
    """
    if not isinstance(lam, FlatSeq):
        raise TypeError("expected a FlatSeq")
    p = _check_exponent("p", p, allow_inf=False)
    q = _check_exponent("q", q, allow_inf=True)
    if r is not None:
        r = _check_exponent("r", r, allow_inf=True)
    alpha = w.alpha if isinstance(w, WeightAlpha) else float(w)
    keys = sorted((j, m) for (j, m), v in lam.entries.items() if v != 0.0)
    if not keys:
        return 0.0
    sub = []
    for j, m in keys:
        try:
            box = boxes[(j, m)]
        except KeyError:
            raise ValueError(f"no substitution box for entry (j={j}, m={m})")
        if isinstance(box, EBox):
            box = box.as_box()
        cube_box = DyadicCube(j, m).as_box()
        if not cube_box.contains_box(box):
            raise ValueError(f"box for (j={j}, m={m}) escapes its cube")
        s = max(cube_box.scale, box.scale)
        vb, vq = box.int_volume_at(s), cube_box.int_volume_at(s)
        if vb / vq < vol_lo - 1e-12:
            raise ValueError(
                f"box for (j={j}, m={m}) too small: |E|/|Q| = {vb / vq:.6g} < {vol_lo}"
            )
        sub.append(box)
    vals = np.array([abs(lam.entries[k]) for k in keys])
    arr = Arrangement(sub)
    masses = arr.cell_masses(alpha)
    if r is None:
        fac = np.array([2.0 ** (j * lam.dim / p) for j, _m in keys])
        agg = arr.aggregate(fac * vals, q)
        integrand = agg ** p if math.isinf(q) else agg ** (p / q)
        return float(np.sum(masses * integrand) ** (1.0 / p))
    agg = arr.aggregate(vals, q)
    if not math.isinf(q):
        agg = agg ** (1.0 / q)
    return lorentz_from_pieces(agg.ravel(), masses.ravel(), p, r)


def _level_values(lam, s):
    """Per-(j, m) sums |father| + sum_ell 2^{js}|mother| (values add on the
    shared box of coinciding families)."""
    vals = {}
    for m, v in lam.father.items():
        if v != 0.0:
            vals[(0, m)] = vals.get((0, m), 0.0) + abs(v)
    for (_ell, j, m), v in lam.mother.items():
        if v != 0.0:
            vals[(j, m)] = vals.get((j, m), 0.0) + 2.0 ** (j * s) * abs(v)
    return vals


def lambda_s_build(lam, s, k=1):
    """Simple function with value |lambda_m| + sum_ell 2^{js}|lambda^{j,ell}_m|
    on the companion box of Q_{j,m}, living k dimensions up from lam."""
    if not isinstance(lam, CoeffSeq):
        raise TypeError("expected a CoeffSeq")
    vals = _level_values(lam, float(s))
    pieces = tuple(
        (EBox(j, m, k).as_box(), v) for (j, m), v in sorted(vals.items()) if v > 0.0
    )
    return SimpleFunction(lam.dim + k, pieces)


def _lambda_s_lorentz(lam, s, p, r, weight_exponent, k):
    # distribution assembled from per-level companion-box masses; the boxes
    # are disjoint so (value, mass) pairs feed the exact Lorentz closed form
    vals = _level_values(lam, float(s))
    if not vals:
        return 0.0
    n = lam.dim + k
    level_mass = {}
    values, masses = [], []
    for (j, m), v in sorted(vals.items()):
        if v <= 0.0:
            continue
        if j not in level_mass:
            level_mass[j] = weight_mass_E(j, weight_exponent, n, k)
        values.append(v)
        masses.append(level_mass[j])
    return lorentz_from_pieces(np.asarray(values), np.asarray(masses), p, r)


def lambda_s_lorentz_fast(lam, s, p, r, alpha):
    """Weighted Lorentz norm of the companion-box simple function, one
    dimension up, with weight exponent alpha - 1 on the trailing axis.

    Must agree with lorentz_norm_discrete(lambda_s_build(lam, s, 1), alpha-1)
    to 1e-12; this path skips the arrangement and uses the per-level mass
    constant directly.
    """
    if not isinstance(lam, CoeffSeq):
        raise TypeError("expected a CoeffSeq")
    return _lambda_s_lorentz(lam, s, p, r, float(alpha) - 1.0, 1)


class CoeffParseError(ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def format_coeffs(lam):
    """Text form. Records: `F m1..md v` (father), `M ell j m1..md v` (mother),
    `S j m1..md v` (flat sequence). Header `# dim=<d> J=<J>`."""
    lines = []
    if isinstance(lam, CoeffSeq):
        lines.append(f"# dim={lam.dim} J={lam.J}")
        for m in sorted(lam.father):
            lines.append("F " + " ".join(str(x) for x in m) + " " + repr(lam.father[m]))
        for ell, j, m in sorted(lam.mother):
            lines.append(
                f"M {ell} {j} " + " ".join(str(x) for x in m) + " " + repr(lam.mother[(ell, j, m)])
            )
    elif isinstance(lam, FlatSeq):
        J = lam.max_level()
        lines.append(f"# dim={lam.dim} J={J}")
        for j, m in sorted(lam.entries):
            lines.append(f"S {j} " + " ".join(str(x) for x in m) + " " + repr(lam.entries[(j, m)]))
    else:
        raise TypeError("expected CoeffSeq or FlatSeq")
    return "\n".join(lines) + "\n"


def parse_coeffs(text):
    """Inverse of format_coeffs; returns CoeffSeq or FlatSeq by content."""
    dim = None
    J = None
    father, mother, flat = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            for tok in body.split():
                if tok.startswith("dim="):
                    dim = int(tok[4:])
                elif tok.startswith("J="):
                    J = int(tok[2:])
            continue
        toks = line.split()
        kind = toks[0]
        try:
            if kind == "F":
                if dim is None:
                    raise ValueError("record before header")
                if len(toks) != dim + 2:
                    raise ValueError(f"expected {dim + 2} fields, got {len(toks)}")
                m = tuple(int(x) for x in toks[1 : 1 + dim])
                father[m] = float(toks[-1])
            elif kind == "M":
                if dim is None:
                    raise ValueError("record before header")
                if len(toks) != dim + 4:
                    raise ValueError(f"expected {dim + 4} fields, got {len(toks)}")
                ell, j = int(toks[1]), int(toks[2])
                m = tuple(int(x) for x in toks[3 : 3 + dim])
                mother[(ell, j, m)] = float(toks[-1])
            elif kind == "S":
                if dim is None:
                    raise ValueError("record before header")
                if len(toks) != dim + 3:
                    raise ValueError(f"expected {dim + 3} fields, got {len(toks)}")
                j = int(toks[1])
                m = tuple(int(x) for x in toks[2 : 2 + dim])
                flat[(j, m)] = float(toks[-1])
            else:
                raise ValueError(f"unknown record kind {kind!r}")
        except ValueError as exc:
            raise CoeffParseError(lineno, str(exc)) from None
    if dim is None:
        raise CoeffParseError(0, "missing `# dim=.. J=..` header")
    if flat and (father or mother):
        raise CoeffParseError(0, "mixed flat and family records")
    if flat:
        return FlatSeq(dim, flat)
    return CoeffSeq(dim, 0 if J is None else J, father, mother)


def write_coeffs(lam, path):
    with open(path, "w") as fh:
        fh.write(format_coeffs(lam))


def read_coeffs(path):
    with open(path) as fh:
        return parse_coeffs(fh.read())


def random_coeffs(rng, dim, J, density=0.25, mag=8.0, father_window=2):
    """Random CoeffSeq: father slots in {0..father_window-1}^dim, mother slots
    (ell, j, m) with m in {0..2^j-1}^dim; each slot kept with probability
    density; magnitudes log-uniform in 2^[-mag, mag] with random signs.
    Redraws until at least one entry is present."""
    for _ in range(64):
        father = {}
        for flat in range(father_window ** dim):
            m = tuple((flat // father_window ** i) % father_window for i in range(dim))
            if rng.random() < density:
                father[m] = _rand_val(rng, mag)
        mother = {}
        for ell in range(2, 2 ** dim + 1):
            for j in range(J + 1):
                side = 2 ** j
                for flat in range(side ** dim):
                    m = tuple((flat // side ** i) % side for i in range(dim))
                    if rng.random() < density:
                        mother[(ell, j, m)] = _rand_val(rng, mag)
        if father or mother:
            return CoeffSeq(dim, J, father, mother)
    raise RuntimeError("failed to draw a nonempty sequence")


def random_flatseq(rng, dim, J, density=0.25, mag=8.0):
    """Random FlatSeq over slots {(j, m): 0 <= j <= J, m in {0..2^j-1}^dim}."""
    for _ in range(64):
        entries = {}
        for j in range(J + 1):
            side = 2 ** j
            for flat in range(side ** dim):
                m = tuple((flat // side ** i) % side for i in range(dim))
                if rng.random() < density:
                    entries[(j, m)] = _rand_val(rng, mag)
        if entries:
            return FlatSeq(dim, entries)
    raise RuntimeError("failed to draw a nonempty sequence")


def _rand_val(rng, mag):
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return sign * 2.0 ** rng.uniform(-mag, mag)
