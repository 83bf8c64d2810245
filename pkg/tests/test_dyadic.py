"""Geometry and weight-mass checks against independent quadrature oracles."""

import math

import mpmath as mp
import numpy as np
import pytest

from walpha.dyadic import (
    DyadicCube,
    EBox,
    IntBox,
    WeightAlpha,
    muckenhoupt_range,
    power_integral,
    weight_axis_mass,
    weight_mass_cube,
    weight_mass_E,
)


def oracle_axis_mass(a, b, alpha):
    # high precision quadrature, split at the kinks of the weight profile
    mp.mp.dps = 40
    alpha_mp = mp.mpf(alpha)

    def w(t):
        t = mp.mpf(t)
        return abs(t) ** alpha_mp if abs(t) <= 1 else mp.mpf(1)

    pts = sorted({mp.mpf(a), mp.mpf(b), *(p for p in (mp.mpf(-1), mp.mpf(0), mp.mpf(1)) if a < p < b)})
    return float(mp.quad(w, pts))


def test_power_integral_basic():
    assert power_integral(0.0, 1.0, 2.0) == pytest.approx(1.0 / 3.0, rel=1e-15)
    assert power_integral(0.25, 0.5, -1.0) == pytest.approx(math.log(2.0), rel=1e-15)
    with pytest.raises(ValueError):
        power_integral(0.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        power_integral(0.0, 1.0, -1.5)
    with pytest.raises(ValueError):
        power_integral(0.5, 0.25, 1.0)


def test_axis_mass_against_quadrature():
    rng = np.random.default_rng(1001)
    for _ in range(60):
        a = rng.uniform(-3.0, 2.5)
        b = a + rng.uniform(0.05, 3.0)
        alpha = rng.uniform(-0.9, 4.0)
        got = weight_axis_mass(a, b, alpha)
        want = oracle_axis_mass(a, b, alpha)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-13)


def test_axis_mass_segments_allow_any_exponent_off_zero():
    # away from zero the exponent may drop to -1 and below
    assert weight_axis_mass(0.25, 0.5, -1.0) == pytest.approx(math.log(2.0), rel=1e-14)
    got = weight_axis_mass(0.25, 0.5, -2.0)
    assert got == pytest.approx(oracle_axis_mass(0.25, 0.5, -2.0), rel=1e-12)
    with pytest.raises(ValueError):
        weight_axis_mass(-0.5, 0.5, -1.0)


def test_cube_box_and_membership():
    q = DyadicCube(1, (1, -2))
    box = q.as_box()
    assert box.scale == 2
    assert box.lo == (1, -5) and box.hi == (3, -3)
    assert q.contains_point((0.25, -1.25))
    # upper faces excluded, lower included
    assert not q.contains_point((0.75, -1.25))
    assert q.contains_point((0.25, -1.0 - 0.25))
    # a shared face belongs to exactly one neighbor
    left = DyadicCube(0, (0,))
    right = DyadicCube(0, (1,))
    assert right.contains_point((0.5,)) and not left.contains_point((0.5,))


def bisect_box(box, axis):
    r = box.rescaled(box.scale + 1)
    mid = (r.lo[axis] + r.hi[axis]) // 2
    lo1 = list(r.lo)
    hi1 = list(r.hi)
    hi1[axis] = mid
    lo2 = list(r.lo)
    lo2[axis] = mid
    return IntBox(r.scale, tuple(lo1), tuple(hi1)), IntBox(r.scale, tuple(lo2), tuple(r.hi))


def test_box_bisection_partitions_mass():
    rng = np.random.default_rng(1002)
    for _ in range(25):
        j = int(rng.integers(0, 4))
        d = int(rng.integers(1, 4))
        m = tuple(int(x) for x in rng.integers(-2 ** j, 2 ** j + 1, size=d))
        alpha = float(rng.uniform(-0.9, 3.0))
        box = DyadicCube(j, m).as_box()
        total = weight_mass_cube(box, alpha)
        for axis in range(d):
            a, b = bisect_box(box, axis)
            assert weight_mass_cube(a, alpha) + weight_mass_cube(b, alpha) == pytest.approx(
                total, rel=1e-12
            )


def test_cube_mass_examples():
    # unit cube straddling the hyperplane, alpha = 1: int_{-1/2}^{1/2} |t| dt = 1/4
    assert weight_mass_cube(DyadicCube(0, (0, 0)), 1.0) == pytest.approx(0.25, rel=1e-15)
    # cube with last interval [3/2, 5/2): weight constant 1 there
    assert weight_mass_cube(DyadicCube(0, (0, 2)), 1.0) == pytest.approx(1.0, rel=1e-15)
    # straddling the kink at 1: [1/2, 3/2) with alpha = 1
    got = weight_mass_cube(DyadicCube(0, (0, 1)), 1.0)
    assert got == pytest.approx((0.5 - 0.125) + 0.5, rel=1e-15)


def test_ebox_geometry_and_containment():
    e = EBox(1, (1,), k=1)
    box = e.as_box()
    assert box.scale == 3
    assert box.lo == (2, 1) and box.hi == (6, 2)
    assert e.parent_cube().as_box().contains_box(box)
    # k = 2 trailing axes
    e2 = EBox(0, (0,), k=2)
    assert e2.dim == 3
    assert e2.parent_cube().as_box().contains_box(e2.as_box())


def test_ebox_family_pairwise_disjoint():
    boxes = []
    for j in range(4):
        for m1 in range(-2, 2 ** j + 1):
            boxes.append(EBox(j, (m1,), k=1).as_box())
    for i in range(len(boxes)):
        for l in range(i + 1, len(boxes)):
            assert boxes[i].disjoint(boxes[l])


def test_ebox_mass_examples():
    # alpha = 1, n = 2, k = 1: j = 0 gives 1 * int_{1/4}^{1/2} t dt = 3/32
    assert weight_mass_E(0, 1.0, 2, 1) == pytest.approx(3.0 / 32.0, rel=1e-15)
    assert weight_mass_E(1, 1.0, 2, 1) == pytest.approx(3.0 / 256.0, rel=1e-15)
    # log branch: exponent -1 integrates to log 2 on every level
    assert weight_mass_E(0, -1.0, 2, 1) == pytest.approx(math.log(2.0), rel=1e-14)
    assert weight_mass_E(3, -1.0, 2, 1) == pytest.approx(2.0 ** -3 * math.log(2.0), rel=1e-14)


def test_ebox_mass_ratio_is_level_free():
    rng = np.random.default_rng(1003)
    for _ in range(40):
        alpha = float(rng.uniform(-0.9, 4.0))
        n = int(rng.integers(1, 5))
        k = int(rng.integers(1, n + 1))
        ratio0 = None
        for j in range(0, 7):
            r = weight_mass_E(j + 1, alpha, n, k) / weight_mass_E(j, alpha, n, k)
            if ratio0 is None:
                ratio0 = r
            assert r == pytest.approx(ratio0, rel=1e-12)
        assert ratio0 == pytest.approx(2.0 ** -(n + alpha), rel=1e-12)


def test_ebox_mass_against_direct_product():
    rng = np.random.default_rng(1004)
    for _ in range(30):
        alpha = float(rng.uniform(-0.9, 3.0))
        n = int(rng.integers(2, 4))
        k = int(rng.integers(1, n))
        j = int(rng.integers(0, 5))
        m = tuple(int(x) for x in rng.integers(0, 2 ** j, size=n - k))
        box = EBox(j, m, k=k).as_box()
        # direct: product of plain edge lengths times weighted last edge
        edges = box.edges_float()
        direct = 1.0
        for lo, hi in edges[:-1]:
            direct *= hi - lo
        a, b = edges[-1]
        direct *= weight_axis_mass(a, b, alpha)
        assert weight_mass_E(j, alpha, n, k) == pytest.approx(direct, rel=1e-12)


def test_weight_call_profile():
    w = WeightAlpha(0.5)
    vals = w(np.array([-2.0, -1.0, -0.25, 0.25, 1.0, 3.0]))
    assert vals == pytest.approx([1.0, 1.0, 0.5, 0.5, 1.0, 1.0])
    with pytest.raises(ValueError):
        WeightAlpha(-1.0)


def test_muckenhoupt_predicates():
    r0, in_ap, in_a1 = muckenhoupt_range(WeightAlpha(1.0))
    assert r0 == 2.0
    assert not in_ap(2.0) and in_ap(2.5) and not in_ap(1.0)
    assert not in_a1
    r0, in_ap, in_a1 = muckenhoupt_range(-0.5)
    assert r0 == 1.0
    assert in_ap(1.5) and in_a1
    _, _, a1_edge = muckenhoupt_range(0.0)
    assert a1_edge
    with pytest.raises(ValueError):
        muckenhoupt_range(-1.0)


def test_intbox_exact_predicates():
    a = IntBox(1, (0, 0), (2, 2))
    b = IntBox(2, (1, 1), (3, 3))
    assert a.contains_box(b)
    assert not b.contains_box(a)
    c = IntBox(2, (4, 0), (6, 2))
    assert a.disjoint(c)  # touching faces only
    assert a.int_volume_at(2) == 16
    with pytest.raises(ValueError):
        IntBox(0, (0,), (0,))
    with pytest.raises(ValueError):
        b.rescaled(1)
