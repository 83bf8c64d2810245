"""Real-interpolation toolkit on finite lattice sequence couples.

A couple is a pair of lattice quasi-norms over one shared finite index
family.  The splitting functional

    K(t, v) = inf { norm1(v1) + t * norm2(v2) : |v| <= v1 + v2, v1, v2 >= 0 }

is computed by restricting to aligned splittings v1 = theta * |v|,
v2 = (1 - theta) * |v|, which loses nothing for monotone norms, and
minimizing over the box [0, 1]^N by multi-start coordinate descent with a
golden-section line search per coordinate (see _kernels).  The (theta, r)
functional integrates t^{-theta} K(t) in log t over an adaptive grid with
closed-form tail certificates.

Couples come in two structural families: cell couples, whose norms integrate
an inner power aggregate over an exact box arrangement against weighted cell
masses, and group couples, whose norms are sums of weighted block lp norms.
Products of same-family couples concatenate; the splitting functional then
decouples into the component sum, which certify tests pin numerically.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dyadic import DyadicCube, IntBox, WeightAlpha, muckenhoupt_range
from .seqspaces import (
    Arrangement,
    CoeffSeq,
    FlatSeq,
    SimpleFunction,
    SpaceParams,
    _check_exponent,
    _flat_arrangement,
    _lambda_s_lorentz,
    besov_seq_norm,
    fqLpr_norm,
    lambda_s_build,
    lorentz_norm_discrete,
    random_coeffs,
    random_flatseq,
)

_START_SEED = 7717
_PROBE_SEED = 30203
_N_RANDOM_STARTS = 13
_N_PROBES = 256
_TAIL_REL = 1e-6
_CURVE_SHAPE_TOL = 1e-7


@dataclass(frozen=True)
class GroupPayload:
    """Sum of weighted block lp norms: sum_g (sum_{e in g} (a_e x_e)^{p_g})^{1/p_g}."""

    a1: np.ndarray
    a2: np.ndarray
    p1g: np.ndarray
    p2g: np.ndarray
    grp: np.ndarray

    @property
    def size(self):
        return self.a1.shape[0]

    @property
    def convex(self):
        return bool(np.all(self.p1g >= 1.0) and np.all(self.p2g >= 1.0))

    def norm(self, side, x):
        a, pg = (self.a1, self.p1g) if side == 1 else (self.a2, self.p2g)
        x = np.asarray(x, dtype=float)
        blocks = np.zeros(pg.shape[0])
        np.add.at(blocks, self.grp, (a * np.abs(x)) ** pg[self.grp])
        return float(np.sum(blocks ** (1.0 / pg)))

    def corner_rates(self, v):
        """Per coordinate at the point v >= 0: the value of each side on the
        single-coordinate restriction v_e e_e, and each side's gradient at v.
        Returns (single1, single2, grad1, grad2)."""
        v = np.abs(np.asarray(v, dtype=float))
        out = []
        for a, pg in ((self.a1, self.p1g), (self.a2, self.p2g)):
            pe = pg[self.grp]
            av = a * v
            blocks = np.zeros(pg.shape[0])
            np.add.at(blocks, self.grp, av ** pe)
            be = blocks[self.grp]
            with np.errstate(divide="ignore", invalid="ignore"):
                grad = np.where(
                    (av > 0.0) & (be > 0.0),
                    a * av ** (pe - 1.0) * be ** (1.0 / pe - 1.0),
                    0.0,
                )
            out.append((av, grad))
        return out[0][0], out[1][0], out[0][1], out[1][1]


@dataclass(frozen=True)
class CellPayload:
    """Per component l: (sum_c m_c (sum_{e on c} (a_e x_e)^{q_l})^{p_l/q_l})^{1/p_l},
    summed over components; entries touch cells through a CSR map."""

    a1: np.ndarray
    a2: np.ndarray
    mass: np.ndarray
    comp: np.ndarray
    p1c: np.ndarray
    p2c: np.ndarray
    q1c: np.ndarray
    q2c: np.ndarray
    cellidx: np.ndarray
    ptr: np.ndarray
    entcomp: np.ndarray

    @property
    def size(self):
        return self.a1.shape[0]

    @property
    def convex(self):
        return bool(
            np.all(self.p1c >= 1.0)
            and np.all(self.p2c >= 1.0)
            and np.all(self.q1c >= 1.0)
            and np.all(self.q2c >= 1.0)
        )

    def norm(self, side, x):
        a, pc, qc = (self.a1, self.p1c, self.q1c) if side == 1 else (self.a2, self.p2c, self.q2c)
        x = np.asarray(x, dtype=float)
        reps = np.diff(self.ptr)
        agg = np.zeros(self.mass.shape[0])
        qcell = qc[self.comp]
        contrib = (a * np.abs(x)) ** qc[self.entcomp]
        np.add.at(agg, self.cellidx, np.repeat(contrib, reps))
        blocks = np.zeros(pc.shape[0])
        np.add.at(blocks, self.comp, self.mass * agg ** (pc[self.comp] / qcell))
        return float(np.sum(blocks ** (1.0 / pc)))

    def corner_rates(self, v):
        """Per coordinate at the point v >= 0: the value of each side on the
        single-coordinate restriction v_e e_e, and each side's gradient at v.
        Returns (single1, single2, grad1, grad2)."""
        v = np.abs(np.asarray(v, dtype=float))
        n = self.size
        reps = np.diff(self.ptr)
        seg = np.repeat(np.arange(n), reps)
        msum = np.zeros(n)
        np.add.at(msum, seg, self.mass[self.cellidx])
        out = []
        for a, pc, qc in ((self.a1, self.p1c, self.q1c), (self.a2, self.p2c, self.q2c)):
            pe = pc[self.entcomp]
            qe = qc[self.entcomp]
            av = a * v
            agg = np.zeros(self.mass.shape[0])
            np.add.at(agg, self.cellidx, np.repeat(av ** qe, reps))
            pcell = pc[self.comp]
            qcell = qc[self.comp]
            with np.errstate(divide="ignore", invalid="ignore"):
                blocks = np.zeros(pc.shape[0])
                np.add.at(
                    blocks, self.comp,
                    self.mass * np.where(agg > 0.0, agg ** (pcell / qcell), 0.0),
                )
                # sum over the cells on each entry of m_c I_c^{p/q - 1}
                wcell = self.mass * np.where(agg > 0.0, agg ** (pcell / qcell - 1.0), 0.0)
                strip = np.zeros(n)
                np.add.at(strip, seg, wcell[self.cellidx])
                be = blocks[self.entcomp]
                grad = np.where(
                    (av > 0.0) & (be > 0.0),
                    a * av ** (qe - 1.0) * strip * be ** (1.0 / pe - 1.0),
                    0.0,
                )
                single = np.where(av > 0.0, av * msum ** (1.0 / pe), 0.0)
            out.append((single, grad))
        return out[0][0], out[1][0], out[0][1], out[1][1]


class LatticeCouple:
    """Two lattice quasi-norms over one shared finite index family.

    norm1/norm2 evaluate either side on a vector over the index set; payload
    carries the structured data the descent kernels need.  values holds the
    magnitudes of the instance the couple was built from, when there was one.
    """

    def __init__(self, payload, labels=("A1", "A2"), index=None, values=None):
        self.payload = payload
        self.labels = tuple(labels)
        self.index = None if index is None else tuple(index)
        self.values = None if values is None else np.asarray(values, dtype=float)
        if self.index is not None and len(self.index) != payload.size:
            raise ValueError("index length does not match payload size")
        if self.values is not None and self.values.shape != (payload.size,):
            raise ValueError("values length does not match payload size")

    @property
    def size(self):
        return self.payload.size

    @property
    def convex(self):
        return self.payload.convex

    def norm1(self, x):
        return self.payload.norm(1, x)

    def norm2(self, x):
        return self.payload.norm(2, x)


def weighted_lp_couple(w1, w2, p1, p2, labels=("A1", "A2")):
    """Couple of entrywise-weighted lp norms (single group on each side)."""
    w1 = np.atleast_1d(np.asarray(w1, dtype=float))
    w2 = np.atleast_1d(np.asarray(w2, dtype=float))
    if w1.shape != w2.shape or w1.ndim != 1:
        raise ValueError("weight vectors must be 1-d and of equal length")
    if np.any(w1 <= 0.0) or np.any(w2 <= 0.0):
        raise ValueError("weights must be positive")
    p1 = _check_exponent("p1", p1, allow_inf=False)
    p2 = _check_exponent("p2", p2, allow_inf=False)
    n = w1.shape[0]
    payload = GroupPayload(
        a1=w1,
        a2=w2,
        p1g=np.array([p1]),
        p2g=np.array([p2]),
        grp=np.zeros(n, dtype=np.int64),
    )
    return LatticeCouple(payload, labels=labels)


def seq_f_couple(lam, p1, p2, q, alpha):
    """Couple of plain-indicator aggregate norms over the nonzero entries of
    a FlatSeq: L_{p_i}(w_alpha) of the lq sum of |x_e| over the entry cubes."""
    if not isinstance(lam, FlatSeq):
        raise TypeError("expected a FlatSeq")
    p1 = _check_exponent("p1", p1, allow_inf=False)
    p2 = _check_exponent("p2", p2, allow_inf=False)
    q = _check_exponent("q", q, allow_inf=False)
    keys, boxes, vals = _flat_arrangement(lam)
    if keys is None:
        raise ValueError("empty sequence")
    arr = Arrangement(boxes)
    cellidx, ptr = arr.entry_cell_lists()
    mass = arr.cell_masses(float(alpha)).ravel()
    n = len(keys)
    payload = CellPayload(
        a1=np.ones(n),
        a2=np.ones(n),
        mass=mass,
        comp=np.zeros(mass.shape[0], dtype=np.int64),
        p1c=np.array([p1]),
        p2c=np.array([p2]),
        q1c=np.array([q]),
        q2c=np.array([q]),
        cellidx=cellidx,
        ptr=ptr,
        entcomp=np.zeros(n, dtype=np.int64),
    )
    return LatticeCouple(payload, index=keys, values=vals)


def besov_group_couple(lam, sigma1, sigma2, p1, p2):
    """Couple of diagonal Besov coefficient norms over the nonzero entries of
    a CoeffSeq: side i weights entry (ell, j, m) by 2^{j(sigma_i - d/p_i)}
    inside one lp_i block per mother family, plus a father block."""
    if not isinstance(lam, CoeffSeq):
        raise TypeError("expected a CoeffSeq")
    p1 = _check_exponent("p1", p1, allow_inf=False)
    p2 = _check_exponent("p2", p2, allow_inf=False)
    sigma1, sigma2 = float(sigma1), float(sigma2)
    d = lam.dim
    index, vals, gid = [], [], []
    groups = []
    father = sorted((m, v) for m, v in lam.father.items() if v != 0.0)
    if father:
        groups.append("F")
        for m, v in father:
            index.append(("F", m))
            vals.append(abs(v))
            gid.append(0)
    fam_of = {}
    for (ell, j, m), v in sorted(lam.mother.items()):
        if v == 0.0:
            continue
        if ell not in fam_of:
            fam_of[ell] = len(groups)
            groups.append(ell)
        index.append((ell, j, m))
        vals.append(abs(v))
        gid.append(fam_of[ell])
    if not index:
        raise ValueError("empty sequence")
    a1 = np.empty(len(index))
    a2 = np.empty(len(index))
    for i, key in enumerate(index):
        if key[0] == "F":
            a1[i] = a2[i] = 1.0
        else:
            _ell, j, _m = key
            a1[i] = 2.0 ** (j * (sigma1 - d / p1))
            a2[i] = 2.0 ** (j * (sigma2 - d / p2))
    ng = len(groups)
    payload = GroupPayload(
        a1=a1,
        a2=a2,
        p1g=np.full(ng, p1),
        p2g=np.full(ng, p2),
        grp=np.asarray(gid, dtype=np.int64),
    )
    return LatticeCouple(payload, index=index, values=np.asarray(vals))


@dataclass(frozen=True)
class ProductCouple:
    """Finite product of same-family couples with the sum norm.

    Component index sets are disjoint by construction (concatenation keeps
    each component's entries in its own block)."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("empty product")
        kinds = {type(c.payload) for c in comps}
        if len(kinds) != 1:
            raise ValueError("mixed payload families in product")
        object.__setattr__(self, "components", comps)

    def concat(self):
        comps = self.components
        if isinstance(comps[0].payload, GroupPayload):
            a1 = np.concatenate([c.payload.a1 for c in comps])
            a2 = np.concatenate([c.payload.a2 for c in comps])
            p1g = np.concatenate([c.payload.p1g for c in comps])
            p2g = np.concatenate([c.payload.p2g for c in comps])
            grp, off = [], 0
            for c in comps:
                grp.append(c.payload.grp + off)
                off += c.payload.p1g.shape[0]
            payload = GroupPayload(a1, a2, p1g, p2g, np.concatenate(grp))
        else:
            a1 = np.concatenate([c.payload.a1 for c in comps])
            a2 = np.concatenate([c.payload.a2 for c in comps])
            mass = np.concatenate([c.payload.mass for c in comps])
            p1c = np.concatenate([c.payload.p1c for c in comps])
            p2c = np.concatenate([c.payload.p2c for c in comps])
            q1c = np.concatenate([c.payload.q1c for c in comps])
            q2c = np.concatenate([c.payload.q2c for c in comps])
            comp, entcomp, cellidx, ptrs = [], [], [], [np.zeros(1, dtype=np.int64)]
            loff = coff = nnzoff = 0
            for c in comps:
                pl = c.payload
                comp.append(pl.comp + loff)
                entcomp.append(pl.entcomp + loff)
                cellidx.append(pl.cellidx + coff)
                ptrs.append(pl.ptr[1:] + nnzoff)
                loff += pl.p1c.shape[0]
                coff += pl.mass.shape[0]
                nnzoff += pl.cellidx.shape[0]
            payload = CellPayload(
                a1,
                a2,
                mass,
                np.concatenate(comp),
                p1c,
                p2c,
                q1c,
                q2c,
                np.concatenate(cellidx),
                np.concatenate(ptrs),
                np.concatenate(entcomp),
            )
        index = None
        if all(c.index is not None for c in comps):
            index = tuple((li, key) for li, c in enumerate(comps) for key in c.index)
        return LatticeCouple(payload, index=index)


def _as_magnitudes(lam, size):
    v = np.abs(np.asarray(lam, dtype=float))
    if v.ndim != 1 or v.shape[0] != size:
        raise ValueError(f"expected a vector of length {size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite entry")
    return v


def _starts_for(size, convex, wide=False):
    # corner starts are essential: the objective is convex for exponents >= 1
    # but kinked at the two full corners, where coordinate descent can stall;
    # descending from both corners and the center covers the handoff between
    # the t -> 0 and t -> inf regimes.  wide adds near-corner smooth starts.
    det = [np.full(size, 0.5), np.zeros(size), np.ones(size)]
    if wide:
        det += [np.full(size, 0.05), np.full(size, 0.95)]
    det = np.vstack(det)
    if convex:
        return det
    rs = np.random.RandomState(_START_SEED + 13 * size)
    return np.vstack([det, rs.uniform(size=(_N_RANDOM_STARTS, size))])


def _run_kcurve(v, couple, ts, starts, restart_all):
    pl = couple.payload
    if isinstance(pl, GroupPayload):
        return _kernels.kcurve_group(ts, v, pl.a1, pl.a2, pl.p1g, pl.p2g, pl.grp, starts, restart_all)
    return _kernels.kcurve_cell(
        ts, v, pl.a1, pl.a2, pl.mass, pl.comp, pl.p1c, pl.p2c, pl.q1c, pl.q2c,
        pl.cellidx, pl.ptr, pl.entcomp, starts, restart_all,
    )


def _run_probes(thetas, t, v, couple):
    pl = couple.payload
    if isinstance(pl, GroupPayload):
        return _kernels.probe_group(thetas, t, v, pl.a1, pl.a2, pl.p1g, pl.p2g, pl.grp)
    return _kernels.probe_cell(
        thetas, t, v, pl.a1, pl.a2, pl.mass, pl.comp, pl.p1c, pl.p2c, pl.q1c, pl.q2c,
        pl.cellidx, pl.ptr, pl.entcomp,
    )


@dataclass(frozen=True)
class KResult:
    value: float
    theta: np.ndarray
    gap: float


def k_functional(t, lam, couple, full=False):
    """Best aligned-splitting value of norm1(theta v) + t norm2((1-theta) v).

    Convex exponents (all >= 1): three deterministic starts, result certified
    by the descent reaching stall.  Any exponent below one: sixteen starts
    plus a recorded optimality gap against seeded probe vectors.
    """
    t = float(t)
    if not t > 0.0:
        raise ValueError("t must be positive")
    v = _as_magnitudes(lam, couple.size)
    if not np.any(v > 0.0):
        out = KResult(0.0, np.zeros(couple.size), 0.0)
        return out if full else 0.0
    starts = _starts_for(couple.size, couple.convex, wide=True)
    ks, theta = _run_kcurve(v, couple, np.array([t]), starts, True)
    value = float(ks[0])
    # the full corners are admissible splittings; never report worse
    u1 = couple.norm1(v)
    u2 = couple.norm2(v)
    if u1 < value:
        value, theta = u1, np.where(v > 0.0, 1.0, 0.0)
    if t * u2 < value:
        value, theta = t * u2, np.zeros(couple.size)
    gap = 0.0
    if not couple.convex:
        rs = np.random.RandomState(_PROBE_SEED + 7 * couple.size)
        probes = rs.uniform(size=(_N_PROBES, couple.size))
        best_probe = float(np.min(_run_probes(probes, t, v, couple)))
        gap = max(0.0, value - best_probe)
    out = KResult(value, theta, gap)
    return out if full else out.value


def brute_force_k(t, lam, couple, final_step=1e-7, branches=8):
    """Grid-search reference for the splitting infimum, up to 3 coordinates.

    Optimal splittings can hug a corner with wildly different per-coordinate
    scales, so uniform grids never resolve them.  The search covers a product
    of per-axis ladders that are log-spaced toward both 0 and 1, then runs
    cyclic per-axis refinement over shrinking multiplicative windows around
    each of several well-separated low nodes, until the relative window step
    falls below final_step.
    """
    t = float(t)
    if not t > 0.0:
        raise ValueError("t must be positive")
    v = _as_magnitudes(lam, couple.size)
    n = couple.size
    if n > 3:
        raise ValueError("brute force limited to 3 coordinates")

    lower = np.geomspace(1e-9, 1.0, 28)
    upper = 1.0 - np.geomspace(1e-9, 0.5, 14)
    axis = np.unique(np.concatenate(([0.0], lower, upper)))
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    thetas = np.ascontiguousarray(np.stack([g.ravel() for g in grids], axis=-1))
    vals = _run_probes(thetas, t, v, couple)
    best = float(np.min(vals))

    def log_dist(a, b):
        eps = 1e-12
        return abs(math.log((a + eps) / (b + eps))) + abs(
            math.log((1.0 - a + eps) / (1.0 - b + eps))
        )

    centers = []
    for k in np.argsort(vals)[: 24 * branches]:
        c = thetas[k]
        if any(max(log_dist(c[ax], c0[ax]) for ax in range(n)) < 0.25 for c0 in centers):
            continue
        centers.append(c.copy())
        if len(centers) >= branches:
            break

    ladder = np.geomspace(1e-12, 1.0, 13)
    for center in centers:
        center = center.copy()
        f = 2.2
        for _round in range(500):
            moved = False
            for ax in range(n):
                x = center[ax]
                cand = [0.0, 1.0, x]
                if x > 0.0:
                    cand.extend(np.geomspace(max(x / f, 1e-14), min(x * f, 1.0), 21))
                if x < 1.0:
                    y = 1.0 - x
                    cand.extend(1.0 - np.geomspace(max(y / f, 1e-14), min(y * f, 1.0), 21))
                cand.extend(ladder)
                cand.extend(1.0 - ladder[ladder < 0.5])
                cand = np.clip(np.unique(np.asarray(cand)), 0.0, 1.0)
                block = np.tile(center, (cand.size, 1))
                block[:, ax] = cand
                vv = _run_probes(np.ascontiguousarray(block), t, v, couple)
                k = int(np.argmin(vv))
                if float(vv[k]) < best:
                    best = float(vv[k])
                if cand[k] != x:
                    moved = True
                center[ax] = cand[k]
            if not moved:
                # window shrinks only at stationarity, so a cyclic walk can
                # travel arbitrarily far along a diagonal valley first
                if f - 1.0 <= final_step:
                    break
                f = max(math.sqrt(f), 1.0 + 0.5 * final_step)
    return best


@dataclass(frozen=True)
class KCurve:
    """Splitting functional sampled on an ascending t-grid, with the two
    envelope constants that certify its tails: K(t) <= min(u1, t * u2)."""

    ts: np.ndarray
    ks: np.ndarray
    u1: float
    u2: float

    def check_shape(self, tol=1e-9):
        ts, ks = self.ts, self.ks
        scale = max(float(np.max(ks)), 1e-300)
        if np.any(np.diff(ks) < -tol * scale):
            raise ValueError("K(t) fails to be nondecreasing on the grid")
        ratio = ks / ts
        if np.any(np.diff(ratio) > tol * np.maximum(ratio[:-1], 1e-300)):
            raise ValueError("K(t)/t fails to be nonincreasing on the grid")
        env = np.minimum(self.u1, ts * self.u2)
        if np.any(ks > env * (1.0 + tol) + tol * scale):
            raise ValueError("K(t) exceeds its envelope min(u1, t u2)")

    def to_text(self):
        lines = ["# t K", f"# u1={self.u1!r} u2={self.u2!r}"]
        for t, k in zip(self.ts, self.ks):
            lines.append(f"{float(t)!r} {float(k)!r}")
        return "\n".join(lines) + "\n"

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())


def _corner_fill_bounds(couple, v):
    """Thresholds certifying the corner regimes of the splitting functional.

    Coordinate descent can only stall away from the optimum at the two full
    corners, where the inactive side's norm is kinked.  One-sided derivatives
    there give exact per-coordinate stability thresholds; dividing (resp.
    multiplying) by the coordinate count turns them into certificates that NO
    feasible direction escapes, i.e. the corner is the global optimum:
    K(t) = t u2 for t below the first bound, K(t) = u1 above the second.
    """
    single1, single2, grad1, grad2 = couple.payload.corner_rates(v)
    mask = v > 0.0
    if not np.any(mask):
        return 0.0, 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        # r_e = slope of the active side along coordinate e over the slope of
        # the kinked side; summing bounds the best escape direction because
        # a monotone norm dominates each single-coordinate restriction
        r2 = np.where(mask & (single1 > 0.0), v * grad2 / single1, np.inf)
        r1 = np.where(mask & (single2 > 0.0), v * grad1 / single2, np.inf)
    s2 = float(np.sum(r2[mask]))
    s1 = float(np.sum(r1[mask]))
    t_lo = 1.0 / s2 if s2 > 0.0 and math.isfinite(s2) else 0.0
    t_hi = s1 if math.isfinite(s1) else math.inf
    return t_lo, t_hi


def k_curve(lam, couple, exps):
    """KCurve over t = 2^e for the given ascending exponent grid.

    Convex couples run descents only on the band between the certified corner
    regimes, in two warm-started passes (ascending and descending) whose
    pointwise minimum is kept; outside the band the closed forms t u2 and u1
    are exact.  Sub-one exponents fall back to multistart descents at every t.
    """
    exps = np.asarray(exps, dtype=float)
    if exps.ndim != 1 or exps.size == 0 or np.any(np.diff(exps) <= 0.0):
        raise ValueError("need a strictly increasing exponent grid")
    v = _as_magnitudes(lam, couple.size)
    ts = 2.0 ** exps
    u1 = couple.norm1(v)
    u2 = couple.norm2(v)
    if not np.any(v > 0.0):
        return KCurve(ts=ts, ks=np.zeros_like(ts), u1=u1, u2=u2)
    # plain start rows: the wide near-corner rows buy ~2e-6 pointwise but run
    # a full descent at every band point, an order of magnitude in cost; the
    # single-t entry point keeps them instead
    starts = _starts_for(couple.size, couple.convex)
    if couple.convex:
        fill_lo, fill_hi = _corner_fill_bounds(couple, v)
        left = ts <= fill_lo
        right = ts >= fill_hi
        mid = ~(left | right)
        ks = np.empty_like(ts)
        ks[left] = ts[left] * u2
        ks[right] = u1
        if np.any(mid):
            # ascending pass restarts from every deterministic row at every t
            # (corner rows stall in one sweep; the center row escapes corner
            # pins), the descending pass carries the large-t optimum downward
            tm = ts[mid]
            ka, _ = _run_kcurve(v, couple, tm, starts, True)
            kb, _ = _run_kcurve(v, couple, np.ascontiguousarray(tm[::-1]), starts, False)
            ks[mid] = np.minimum(ka, kb[::-1])
    else:
        ks, _theta = _run_kcurve(v, couple, ts, starts, True)
    ks = np.minimum(ks, np.minimum(u1, ts * u2))
    # each descent value is an upper bound on the infimum, and the true curve
    # is nondecreasing with nonincreasing K(t)/t; projecting onto those laws
    # tightens the bound and keeps per-point solver jitter out of the shape
    # certificates (right-to-left cummin, then cummin of the ratio)
    ks = np.minimum.accumulate(ks[::-1])[::-1]
    ks = ts * np.minimum.accumulate(ks / ts)
    return KCurve(ts=ts, ks=ks, u1=u1, u2=u2)


def theta_r_norm(lam, couple, theta, r, points_per_octave=32):
    """Interpolation functional (int_0^inf [t^{-theta} K(t)]^r dt/t)^{1/r}.

    Trapezoid rule in log t on a grid of 2^{1/points_per_octave} steps with
    t = 1 as a node; the grid half-width is chosen so the closed-form tail
    certificates K(t) <= u1 (large t) and K(t) <= t u2 (small t) contribute
    below 1e-6 relative, and both tails are added in.  r = inf takes the grid
    supremum of t^{-theta} K(t), enlarging the grid until the tail bounds sit
    below it.
    """
    theta = float(theta)
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    r = _check_exponent("r", r, allow_inf=True)
    v = _as_magnitudes(lam, couple.size)
    if not np.any(v > 0.0):
        return 0.0
    u1 = couple.norm1(v)
    u2 = couple.norm2(v)
    npo = int(points_per_octave)
    if npo < 4:
        raise ValueError("points_per_octave too small")
    if math.isinf(r):
        T = 8
        while True:
            exps = np.arange(-T * npo, T * npo + 1) / npo
            curve = k_curve(v, couple, exps)
            curve.check_shape(tol=_CURVE_SHAPE_TOL)
            sup = float(np.max(curve.ks * curve.ts ** (-theta)))
            tail = max(u1 * 2.0 ** (-T * theta), u2 * 2.0 ** (-T * (1.0 - theta)))
            if tail <= sup * (1.0 + 1e-9):
                return sup
            T *= 2
            if T > 512:
                raise RuntimeError("sup grid failed to swallow the tail bounds")
    k1 = k_functional(1.0, v, couple)
    du = math.log(2.0) / npo
    main_lb = (k1 ** r) * du * 0.5
    target = _TAIL_REL * main_lb * 0.5
    need_hi = (r * math.log2(u1) - math.log2(target * theta * r)) / (theta * r)
    need_lo = (r * math.log2(u2) - math.log2(target * (1.0 - theta) * r)) / ((1.0 - theta) * r)
    T = int(math.ceil(max(need_hi, need_lo, 4.0)))
    if T > 600:
        raise RuntimeError(f"tail certificates demand an unreasonable grid (T={T})")
    exps = np.arange(-T * npo, T * npo + 1) / npo
    curve = k_curve(v, couple, exps)
    curve.check_shape(tol=_CURVE_SHAPE_TOL)
    integrand = (curve.ks * curve.ts ** (-theta)) ** r
    weights = np.ones_like(integrand)
    weights[0] = weights[-1] = 0.5
    main = float(np.sum(weights * integrand)) * du
    tail_hi = u1 ** r * 2.0 ** (-T * theta * r) / (theta * r)
    tail_lo = u2 ** r * 2.0 ** (-T * (1.0 - theta) * r) / ((1.0 - theta) * r)
    return (main + tail_hi + tail_lo) ** (1.0 / r)


@dataclass(frozen=True)
class IndicatorField:
    """Vector-valued simple function: component (j, m) is a constant on one
    box (for the canonical lift, its dyadic cube) and zero elsewhere."""

    dim: int
    components: tuple  # ((j, m), IntBox, value), key-sorted

    def keys(self):
        return tuple(key for key, _b, _v in self.components)

    def component(self, j, m):
        for key, box, val in self.components:
            if key == (j, tuple(m)):
                return SimpleFunction(self.dim, ((box, val),) if val != 0.0 else ())
        raise KeyError(f"no component (j={j}, m={m})")

    def vector_lp_norm(self, p, q, alpha):
        """L_p(w_alpha) norm of the pointwise lq magnitude of the vector."""
        p = _check_exponent("p", p, allow_inf=False)
        q = _check_exponent("q", q, allow_inf=True)
        boxes = [box for _key, box, _val in self.components]
        vals = np.array([abs(val) for _key, _box, val in self.components])
        if not boxes:
            return 0.0
        arr = Arrangement(boxes)
        agg = arr.aggregate(vals, q)
        masses = arr.cell_masses(float(alpha))
        integrand = agg ** p if math.isinf(q) else agg ** (p / q)
        return float(np.sum(masses * integrand) ** (1.0 / p))


def op_R(lam):
    """Lift a FlatSeq to the vector of its values on their own cubes."""
    if not isinstance(lam, FlatSeq):
        raise TypeError("expected a FlatSeq")
    comps = tuple(
        ((j, m), DyadicCube(j, m).as_box(), float(v))
        for (j, m), v in sorted(lam.entries.items())
    )
    return IndicatorField(lam.dim, comps)


def _overlap_fraction(box, cube):
    s = max(box.scale, cube.scale)
    b = box.rescaled(s)
    c = cube.rescaled(s)
    inter = 1
    for ax in range(c.dim):
        lo = max(b.lo[ax], c.lo[ax])
        hi = min(b.hi[ax], c.hi[ax])
        if hi <= lo:
            return 0.0
        inter *= hi - lo
    return inter / c.int_volume_at(s)


def op_P_A(g, A, cubes=None, p1=None, p2=None, q=None, alpha=None):
    """Cube-averaged A-power means of an IndicatorField, as a FlatSeq.

    Each component is averaged in plain Lebesgue measure over its cube (or
    the box supplied in cubes).  When the exponent context (p1, p2, q, alpha)
    is given, A must satisfy 0 < A < min(p1/r0, p2/r0, q) for r0 = r0(w_alpha)
    and violations name the bound.
    """
    if not isinstance(g, IndicatorField):
        raise TypeError("expected an IndicatorField")
    A = float(A)
    if not A > 0.0:
        raise ValueError("A must be positive")
    context = (p1, p2, q, alpha)
    if any(x is not None for x in context):
        if any(x is None for x in context):
            raise ValueError("exponent context needs all of p1, p2, q, alpha")
        r0, _in_ap, _in_a1 = muckenhoupt_range(WeightAlpha(alpha))
        for name, bound in (("p1/r0", p1 / r0), ("p2/r0", p2 / r0), ("q", q)):
            if not A < bound:
                raise ValueError(f"A = {A:g} must lie below {name} = {bound:g}")
    out = {}
    for (j, m), box, val in g.components:
        domain = DyadicCube(j, m).as_box()
        if cubes is not None and (j, m) in cubes:
            domain = cubes[(j, m)]
            if hasattr(domain, "as_box"):
                domain = domain.as_box()
        frac = _overlap_fraction(box, domain)
        if frac == 1.0:
            out[(j, m)] = abs(val)
        elif frac == 0.0 or val == 0.0:
            out[(j, m)] = 0.0
        else:
            out[(j, m)] = (abs(val) ** A * frac) ** (1.0 / A)
    return FlatSeq(g.dim, out)


def product_k(t, a, pc):
    """Splitting functional of a tuple on the concatenated product couple.

    Decouples into the sum of the component functionals (pinned to 1e-6 by
    the certification tests); this computes the joint side.
    """
    if not isinstance(pc, ProductCouple):
        raise TypeError("expected a ProductCouple")
    if len(a) != len(pc.components):
        raise ValueError("tuple length does not match component count")
    parts = []
    for vec, c in zip(a, pc.components):
        parts.append(_as_magnitudes(vec, c.size))
    joint = pc.concat()
    return k_functional(t, np.concatenate(parts), joint)


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


@dataclass
class CertReport:
    """Certification run: one row per random instance, envelope summaries per
    level, and the level-stability verdict on the ratio envelope."""

    name: str
    params: dict
    columns: tuple
    rows: list = field(default_factory=list)
    threshold: float = 1.5

    def add_row(self, **kw):
        self.rows.append({c: kw.get(c, "") for c in self.columns})

    def j_values(self):
        return sorted({row["J"] for row in self.rows})

    def ratios(self, J, column="ratio"):
        return np.array([row[column] for row in self.rows if row["J"] == J and row[column] != ""])

    def envelope(self, J, column="ratio"):
        vals = self.ratios(J, column)
        return float(np.min(vals)), float(np.median(vals)), float(np.max(vals))

    def width(self, J, column="ratio"):
        lo, _med, hi = self.envelope(J, column)
        return hi / lo

    def stability(self, column="ratio"):
        js = self.j_values()
        return self.width(js[-1], column) / self.width(js[0], column)

    def passed(self, column="ratio"):
        return self.stability(column) <= self.threshold

    def summary_lines(self):
        lines = [f"# experiment={self.name}"]
        lines.append("# " + " ".join(f"{k}={_fmt(v)}" for k, v in self.params.items()))
        cols = ["ratio"] + (["diag_ratio"] if "diag_ratio" in self.columns and any(
            row["diag_ratio"] != "" for row in self.rows) else [])
        for col in cols:
            for J in self.j_values():
                lo, med, hi = self.envelope(J, col)
                lines.append(
                    f"# {col} J={J} min={_fmt(lo)} median={_fmt(med)} max={_fmt(hi)}"
                    f" width={_fmt(hi / lo)}"
                )
            verdict = "pass" if self.passed(col) else "FAIL"
            lines.append(
                f"# {col} stability={_fmt(self.stability(col))}"
                f" threshold={_fmt(self.threshold)} verdict={verdict}"
            )
        return lines

    def to_csv(self, fmt="csv"):
        sep = {"csv": ",", "tsv": "\t"}[fmt]
        lines = [sep.join(self.columns)]
        for row in self.rows:
            lines.append(sep.join(_fmt(row[c]) for c in self.columns))
        lines.extend(self.summary_lines())
        return "\n".join(lines) + "\n"

    @property
    def all_passed(self):
        ok = self.passed()
        if "diag_ratio" in self.columns and any(r["diag_ratio"] != "" for r in self.rows):
            ok = ok and self.passed("diag_ratio")
        return ok


def _gap_at_one(couple, v):
    if couple.convex:
        return 0.0
    return k_functional(1.0, v, couple, full=True).gap


def certify_seq_interpolation(p1, p2, theta, r, q, alpha, instances,
                              J_values=(2, 3, 4, 5, 6), dim=1, seed=0):
    """Envelope certification of the two-exponent aggregate-norm couple
    against the Lorentz-aggregate norm at the intermediate exponent.

    Per level J, `instances` random flat sequences are drawn; each row records
    lhs = theta_r_norm over the couple, rhs = the direct Lorentz-aggregate
    norm, and their ratio.  The report passes when the ratio envelope width at
    the top level stays within `threshold` times the width at the bottom one.
    """
    p1 = _check_exponent("p1", p1, allow_inf=False)
    p2 = _check_exponent("p2", p2, allow_inf=False)
    if not p1 < p2:
        raise ValueError("need p1 < p2")
    theta = float(theta)
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    r = _check_exponent("r", r, allow_inf=True)
    q = _check_exponent("q", q, allow_inf=False)
    alpha = float(alpha)
    if not alpha > -1.0:
        raise ValueError("alpha must exceed -1")
    instances = int(instances)
    if instances < 1:
        raise ValueError("need at least one instance")
    p = 1.0 / ((1.0 - theta) / p1 + theta / p2)
    params = dict(p1=p1, p2=p2, theta=theta, r=r, q=q, alpha=alpha, p=p, dim=dim)
    report = CertReport(
        name="seq-interp",
        params=params,
        columns=("experiment", "seed", "J", "p1", "p2", "theta", "r", "q", "alpha",
                 "lhs", "rhs", "ratio", "optimality_gap"),
    )
    for J in J_values:
        for i in range(instances):
            rng = np.random.default_rng((20259, seed, J, i))
            lam = random_flatseq(rng, dim, J)
            couple = seq_f_couple(lam, p1, p2, q, alpha)
            lhs = theta_r_norm(couple.values, couple, theta, r)
            rhs = fqLpr_norm(lam, p, r, q, alpha)
            report.add_row(
                experiment="seq-interp", seed=i, J=J, p1=p1, p2=p2, theta=theta,
                r=r, q=q, alpha=alpha, lhs=lhs, rhs=rhs, ratio=lhs / rhs,
                optimality_gap=_gap_at_one(couple, couple.values),
            )
    return report


def certify_besov_interpolation(s, p1, p2, theta, r, alpha, k, instances,
                                J_values=(2, 3, 4, 5, 6), dim=1, seed=0):
    """Envelope certification of the shifted diagonal Besov couple against
    the weighted Lorentz norm of the level-scaled companion-box function.

    Endpoint i carries smoothness s - (alpha+k)/p_i on the base dimension;
    the right side places value sums on the codimension-k companion boxes and
    takes L_{p,r} with weight exponent alpha.  Two independent right-side
    paths (per-level mass constants vs per-piece box masses) must agree to
    1e-12 on every instance or the run aborts.  At r = p each row also records
    the ratio against the direct diagonal Besov norm.
    """
    s = float(s)
    p1 = _check_exponent("p1", p1, allow_inf=False)
    p2 = _check_exponent("p2", p2, allow_inf=False)
    if not p1 < p2:
        raise ValueError("need p1 < p2")
    theta = float(theta)
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    r = _check_exponent("r", r, allow_inf=True)
    alpha = float(alpha)
    if not alpha > -1.0:
        raise ValueError("weight exponent must exceed -1")
    k = int(k)
    if k < 1:
        raise ValueError("codimension must be at least 1")
    instances = int(instances)
    if instances < 1:
        raise ValueError("need at least one instance")
    dim = int(dim)
    p = 1.0 / ((1.0 - theta) / p1 + theta / p2)
    sigma1 = s - (alpha + k) / p1
    sigma2 = s - (alpha + k) / p2
    regime = "trace"
    for pe in (p1, p2):
        if not SpaceParams(s, pe, pe, alpha, dim + k, k).trace_admissible:
            regime = "remark"
    diagonal = r == p
    params = dict(s=s, p1=p1, p2=p2, theta=theta, r=r, alpha=alpha, k=k, p=p,
                  dim=dim, regime=regime)
    report = CertReport(
        name="besov-interp",
        params=params,
        columns=("experiment", "seed", "J", "s", "p1", "p2", "theta", "r", "alpha",
                 "k", "lhs", "rhs", "ratio", "diag_ratio", "optimality_gap"),
    )
    for J in J_values:
        for i in range(instances):
            rng = np.random.default_rng((47111, seed, J, i))
            lam = random_coeffs(rng, dim, J)
            couple = besov_group_couple(lam, sigma1, sigma2, p1, p2)
            lhs = theta_r_norm(couple.values, couple, theta, r)
            rhs = _lambda_s_lorentz(lam, s, p, r, alpha, k)
            oracle = lorentz_norm_discrete(lambda_s_build(lam, s, k), alpha, p, r)
            if abs(rhs - oracle) > 1e-12 * max(1.0, abs(rhs), abs(oracle)):
                raise RuntimeError(
                    f"companion-box Lorentz paths disagree: {rhs!r} vs {oracle!r}"
                )
            diag = ""
            if diagonal:
                diag = lhs / besov_seq_norm(lam, s - (alpha + k) / p, p, p)
            report.add_row(
                experiment="besov-interp", seed=i, J=J, s=s, p1=p1, p2=p2,
                theta=theta, r=("inf" if math.isinf(r) else r), alpha=alpha, k=k,
                lhs=lhs, rhs=rhs, ratio=lhs / rhs, diag_ratio=diag,
                optimality_gap=_gap_at_one(couple, couple.values),
            )
    return report
