"""Dyadic geometry and power weights.

Cubes Q_{j,m} = 2^-j m + 2^-(j+1) (-1,1)^d, their off-hyperplane companion
boxes E_{j,m}, and the weight w_alpha(x) = |x_n|^alpha for |x_n| <= 1 and 1
otherwise (last coordinate carries the weight).  Box corners are dyadic
rationals stored as integer mantissas at a binary scale, so containment and
disjointness predicates are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "IntBox",
    "DyadicCube",
    "EBox",
    "WeightAlpha",
    "muckenhoupt_range",
    "power_integral",
    "weight_axis_mass",
    "weight_mass_cube",
    "weight_mass_E",
]


@dataclass(frozen=True)
class IntBox:
    """Half-open box prod_i [lo_i, hi_i) * 2^-scale with integer corners."""

    scale: int
    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(int(a) for a in self.lo))
        object.__setattr__(self, "hi", tuple(int(b) for b in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("corner length mismatch")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("empty box")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def rescaled(self, scale: int) -> "IntBox":
        # refining only: coarsening would lose exactness
        if scale < self.scale:
            raise ValueError("cannot coarsen an integer box exactly")
        f = 1 << (scale - self.scale)
        return IntBox(scale, tuple(a * f for a in self.lo), tuple(b * f for b in self.hi))

    def edges_float(self) -> list:
        h = 2.0 ** -self.scale
        return [(a * h, b * h) for a, b in zip(self.lo, self.hi)]

    def int_volume_at(self, scale: int) -> int:
        r = self.rescaled(scale)
        n = 1
        for a, b in zip(r.lo, r.hi):
            n *= b - a
        return n

    def volume(self) -> float:
        return self.int_volume_at(self.scale) * (2.0 ** -self.scale) ** self.dim

    def contains_box(self, other: "IntBox") -> bool:
        s = max(self.scale, other.scale)
        a, b = self.rescaled(s), other.rescaled(s)
        return all(x <= u and v <= y for x, y, u, v in zip(a.lo, a.hi, b.lo, b.hi))

    def disjoint(self, other: "IntBox") -> bool:
        s = max(self.scale, other.scale)
        a, b = self.rescaled(s), other.rescaled(s)
        return any(v <= x or u >= y for x, y, u, v in zip(a.lo, a.hi, b.lo, b.hi))

    def contains_point(self, x) -> bool:
        h = 2.0 ** -self.scale
        return all(a * h <= xi < b * h for a, b, xi in zip(self.lo, self.hi, x))


@dataclass(frozen=True)
class DyadicCube:
    """Q_{j,m}: center 2^-j m, side 2^-j, half-open on the upper faces."""

    j: int
    m: tuple

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("level must be nonnegative")
        object.__setattr__(self, "m", tuple(int(x) for x in self.m))

    @property
    def dim(self) -> int:
        return len(self.m)

    @property
    def side(self) -> float:
        return 2.0 ** -self.j

    @property
    def center(self) -> tuple:
        return tuple(mi * 2.0 ** -self.j for mi in self.m)

    def as_box(self) -> IntBox:
        s = self.j + 1
        return IntBox(
            s,
            tuple(2 * mi - 1 for mi in self.m),
            tuple(2 * mi + 1 for mi in self.m),
        )

    def contains_point(self, x) -> bool:
        return self.as_box().contains_point(x)


@dataclass(frozen=True)
class EBox:
    """Companion box of the cube Q_{j,m} x {0}^k.

    Leading n-k axes: the cube itself.  Each trailing axis: the interval
    [2^-(j+2), 2^-(j+1)), strictly off the hyperplane.  The family is pairwise
    disjoint over (j, m) because the trailing intervals at distinct levels are
    disjoint and same-level cubes are disjoint.
    """

    j: int
    m: tuple
    k: int = 1

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("level must be nonnegative")
        if self.k < 1:
            raise ValueError("need at least one trailing axis")
        object.__setattr__(self, "m", tuple(int(x) for x in self.m))

    @property
    def dim(self) -> int:
        return len(self.m) + self.k

    def as_box(self) -> IntBox:
        s = self.j + 2
        lo = tuple(4 * mi - 2 for mi in self.m) + (1,) * self.k
        hi = tuple(4 * mi + 2 for mi in self.m) + (2,) * self.k
        return IntBox(s, lo, hi)

    def parent_cube(self) -> DyadicCube:
        return DyadicCube(self.j, self.m + (0,) * self.k)


@dataclass(frozen=True)
class WeightAlpha:
    """w(x) = |x_n|^alpha if |x_n| <= 1 else 1, acting on the last axis."""

    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        if not self.alpha > -1.0:
            raise ValueError("need alpha > -1 for local integrability")

    def __call__(self, last_coord):
        t = np.abs(np.asarray(last_coord, dtype=float))
        with np.errstate(divide="ignore"):
            return np.where(t <= 1.0, t ** self.alpha, 1.0)


def muckenhoupt_range(w):
    """Return (r0, in_ap, in_a1) for the power weight.

    r0 is the infimum of r with w locally r'-integrable scaling, here
    max(alpha + 1, 1).  in_ap(p) tests membership in the Muckenhoupt class
    A_p (p > 1), in_a1 is the A_1 flag.
    """
    alpha = w.alpha if isinstance(w, WeightAlpha) else float(w)
    if not alpha > -1.0:
        raise ValueError("alpha must exceed -1")
    r0 = max(alpha + 1.0, 1.0)

    def in_ap(p: float) -> bool:
        return p > 1.0 and -1.0 < alpha < p - 1.0

    in_a1 = -1.0 < alpha <= 0.0
    return r0, in_ap, in_a1


def power_integral(a: float, b: float, beta: float) -> float:
    """Integral of t^beta over [a, b] with 0 <= a < b; log branch at beta = -1."""
    a, b, beta = float(a), float(b), float(beta)
    if not 0.0 <= a < b:
        raise ValueError("need 0 <= a < b")
    if beta == -1.0:
        if a == 0.0:
            raise ValueError("integral diverges at 0 for exponent -1")
        return math.log(b / a)
    e = beta + 1.0
    if a == 0.0:
        if e <= 0.0:
            raise ValueError("integral diverges at 0 for exponent <= -1")
        return b ** e / e
    return (b ** e - a ** e) / e


def weight_axis_mass(a: float, b: float, alpha: float) -> float:
    """Exact integral of the weight profile over [a, b) on the weighted axis.

    Profile: |t|^alpha on [-1, 1], constant 1 outside.  Splits at -1, 0, 1 and
    uses the closed-form power integral on each piece.  alpha <= -1 is allowed
    only when [a, b) stays away from 0.
    """
    a, b = float(a), float(b)
    if a >= b:
        raise ValueError("need a < b")
    total = 0.0
    if a < -1.0:
        total += min(b, -1.0) - a
    if b > 1.0:
        total += b - max(a, 1.0)
    lo, hi = max(a, -1.0), min(b, 1.0)
    if lo < hi:
        if hi <= 0.0:
            total += power_integral(-hi, -lo, alpha)
        elif lo >= 0.0:
            total += power_integral(lo, hi, alpha)
        else:
            total += power_integral(0.0, -lo, alpha) + power_integral(0.0, hi, alpha)
    return total


def _as_box(cube) -> IntBox:
    if isinstance(cube, IntBox):
        return cube
    if isinstance(cube, (DyadicCube, EBox)):
        return cube.as_box()
    raise TypeError("expected DyadicCube, EBox or IntBox")


def _alpha_of(w) -> float:
    return w.alpha if isinstance(w, WeightAlpha) else float(w)


def weight_mass_cube(cube, w) -> float:
    """Weighted volume of a box: plain lengths times the weighted last axis."""
    box = _as_box(cube)
    alpha = _alpha_of(w)
    edges = box.edges_float()
    mass = 1.0
    for lo, hi in edges[:-1]:
        mass *= hi - lo
    a, b = edges[-1]
    return mass * weight_axis_mass(a, b, alpha)


def weight_mass_E(j: int, w, n: int, k: int = 1) -> float:
    """Weighted volume of the level-j companion box in R^n with k trailing axes.

    Closed form: 2^{-j(n-k)} (2^{-j-2})^{k-1} * int_{2^-(j+2)}^{2^-(j+1)} t^alpha dt.
    The trailing window avoids 0, so any real exponent is admitted (log branch
    at alpha = -1).
    """
    if j < 0:
        raise ValueError("level must be nonnegative")
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    alpha = w.alpha if isinstance(w, WeightAlpha) else float(w)
    lead = 2.0 ** (-j * (n - k))
    trail_plain = (2.0 ** (-j - 2)) ** (k - 1)
    return lead * trail_plain * power_integral(2.0 ** (-j - 2), 2.0 ** (-j - 1), alpha)
