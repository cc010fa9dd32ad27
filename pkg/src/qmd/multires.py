"""Greedy nested nets and the multiresolution ball family."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .dyadic import GridGeometry, GridPoint
from .errors import DomainError


@dataclass(frozen=True)
class NestedNets:
    """Per-level net point indices (dictionary-order flat indices).

    ``levels[k]`` lists N_k in admission order: N_{k-1} first, then the
    points added at level k.
    """

    geometry: GridGeometry
    levels: tuple[np.ndarray, ...]

    def coords(self, k: int) -> np.ndarray:
        idx = self.levels[k]
        return np.stack(np.unravel_index(idx, self.geometry.shape, order="F"), axis=1)

    def points(self, k: int) -> list[GridPoint]:
        return [GridPoint(tuple(int(v) for v in row)) for row in self.coords(k)]

    def to_dict(self) -> dict:
        return {
            "dimension": self.geometry.d,
            "level": self.geometry.L,
            "levels": [[int(i) for i in lev] for lev in self.levels],
        }


def _disc_offsets(radius_sq_strict: int, d: int) -> tuple[np.ndarray, int]:
    """Boolean stamp of offsets v with |v|^2 < radius_sq_strict, and its half-width."""
    h = math.isqrt(max(radius_sq_strict - 1, 0))
    ax = np.arange(-h, h + 1)
    sq = np.zeros((2 * h + 1,) * d, dtype=np.int64)
    for i in range(d):
        shp = [1] * d
        shp[i] = -1
        sq = sq + (ax.reshape(shp)) ** 2
    return sq < radius_sq_strict, h


def build_nets(geometry: GridGeometry, L: int | None = None) -> NestedNets:
    """Greedy nested 2^-k nets on the grid points, coarse to fine.

    Each level starts from the previous one and then admits, in dictionary
    order, every grid point at distance >= 2^-k from all admitted points.
    A greedy maximal separated set on a finite point set is automatically a
    net for that point set.
    """
    L = geometry.L if L is None else L
    if L != geometry.L:
        raise DomainError("net depth must equal the geometry level")
    d, n = geometry.d, geometry.n
    levels: list[np.ndarray] = []
    admitted: list[int] = []
    for k in range(L + 1):
        s = 1 << (L - k)
        stamp, h = _disc_offsets(s * s, d)
        forbidden = np.zeros(geometry.shape, dtype=bool, order="F")
        flat = forbidden.ravel(order="K")  # F-contiguous, so this is a view
        assert np.shares_memory(flat, forbidden)

        def mark(idx: int):
            c = geometry.coords_of(idx)
            dst, src = [], []
            for ci in c:
                lo, hi = ci - h, ci + h + 1
                dst.append(slice(max(lo, 0), min(hi, n)))
                src.append(slice(max(lo, 0) - lo, 2 * h + 1 - (hi - min(hi, n))))
            forbidden[tuple(dst)] |= stamp[tuple(src)]

        for idx in admitted:
            mark(idx)
        if s == 1:
            # separation of one cell: every remaining point qualifies
            new = np.flatnonzero(~flat)
            admitted.extend(int(i) for i in new)
        else:
            for idx in np.flatnonzero(~flat):
                if not flat[idx]:
                    admitted.append(int(idx))
                    mark(int(idx))
        levels.append(np.asarray(admitted, dtype=np.int64))
    return NestedNets(geometry, tuple(levels))


def audit_nets(nets: NestedNets) -> dict:
    """Exhaustive check of nesting, separation and covering on grid points."""
    g = nets.geometry
    allpts = g.all_coords()
    report = {"nested": True, "separated": True, "covering": True, "min_sep_sq": {}, "max_cover_sq": {}}
    for k, lev in enumerate(nets.levels):
        s2 = 1 << (2 * (g.L - k))
        if k > 0 and not np.isin(nets.levels[k - 1], lev).all():
            report["nested"] = False
        pts = nets.coords(k)
        if len(pts) > 1:
            diff = pts[:, None, :] - pts[None, :, :]
            sq = (diff * diff).sum(axis=2)
            np.fill_diagonal(sq, np.iinfo(np.int64).max)
            m = int(sq.min())
            report["min_sep_sq"][k] = m
            if m < s2:
                report["separated"] = False
        cover = 0
        for chunk in range(0, len(allpts), 4096):
            a = allpts[chunk : chunk + 4096]
            diff = a[:, None, :] - pts[None, :, :]
            cover = max(cover, int((diff * diff).sum(axis=2).min(axis=1).max()))
        report["max_cover_sq"][k] = cover
        if cover >= s2:
            report["covering"] = False
    # continuum covering adds at most half a cell diagonal
    report["off_lattice_defect"] = math.sqrt(g.d) / 2 / g.n
    return report


@dataclass(frozen=True)
class Ball:
    """Closed ball B(center, A * 2^-k); ``A2`` is the exact square of A."""

    center: GridPoint
    level: int
    A2: Fraction

    def radius_sq_cells(self, L: int) -> Fraction:
        return self.A2 * (1 << (2 * (L - self.level)))

    @property
    def radius(self) -> float:
        return math.sqrt(self.A2) / (1 << self.level)

    def contains(self, p: GridPoint, L: int) -> bool:
        sq = sum((a - b) ** 2 for a, b in zip(p.coords, self.center.coords))
        return sq <= self.radius_sq_cells(L)


def as_A2(A=None, A2=None) -> Fraction:
    if A2 is not None:
        v = Fraction(A2)
    elif A is not None:
        v = Fraction(str(A)) ** 2 if isinstance(A, float) else Fraction(A) ** 2
    else:
        v = Fraction(1)
    if v <= 0:
        raise DomainError("scale constant A must be positive")
    return v


@dataclass(frozen=True)
class MultiresFamily:
    nets: NestedNets
    A2: Fraction = Fraction(1)

    @property
    def geometry(self) -> GridGeometry:
        return self.nets.geometry

    @property
    def A(self) -> float:
        return math.sqrt(self.A2)

    def levels(self) -> range:
        return range(self.geometry.L + 1)

    def centers(self, k: int) -> np.ndarray:
        return self.nets.coords(k)

    def balls(self, k: int) -> list[Ball]:
        return [Ball(p, k, self.A2) for p in self.nets.points(k)]

    def all_balls(self):
        for k in self.levels():
            yield from self.balls(k)

    def radius_sq_cells(self, k: int) -> Fraction:
        return self.A2 * (1 << (2 * (self.geometry.L - k)))

    def window(self, k: int) -> tuple[int, np.ndarray]:
        """Half-width R and boolean ball mask of shape (2R+1,)*d at level k."""
        return ball_mask(self.radius_sq_cells(k), self.geometry.d)


@lru_cache(maxsize=256)
def _ball_mask_cached(num: int, den: int, d: int):
    R = math.isqrt(num // den)
    ax = np.arange(-R, R + 1, dtype=np.int64)
    sq = np.zeros((2 * R + 1,) * d, dtype=np.int64)
    for i in range(d):
        shp = [1] * d
        shp[i] = -1
        sq = sq + ax.reshape(shp) ** 2
    mask = sq * den <= num
    mask.setflags(write=False)
    return R, mask


def ball_mask(radius_sq: Fraction, d: int) -> tuple[int, np.ndarray]:
    return _ball_mask_cached(radius_sq.numerator, radius_sq.denominator, d)


def family(nets: NestedNets, A=None, A2=None) -> MultiresFamily:
    """The ball family {B(x, A 2^-k): x in N_k}. ``A2`` takes A^2 exactly (e.g. 49*d)."""
    a2 = as_A2(A, A2)
    if a2 < 1:
        raise DomainError("multiresolution families need A >= 1")
    return MultiresFamily(nets, a2)


def overlap_count(fam: MultiresFamily, x: GridPoint, k: int) -> int:
    pts = fam.centers(k)
    sq = ((pts - np.asarray(x.coords)) ** 2).sum(axis=1)
    r2 = fam.radius_sq_cells(k)
    return int((sq * r2.denominator <= r2.numerator).sum())


def overlap_counts(fam: MultiresFamily, k: int) -> np.ndarray:
    """Overlap count at every grid point for level k, shaped like the grid."""
    g = fam.geometry
    R, mask = fam.window(k)
    counts = np.zeros(tuple(n + 2 * R for n in g.shape), dtype=np.int64)
    for c in fam.centers(k):
        counts[tuple(slice(ci, ci + 2 * R + 1) for ci in c)] += mask
    return counts[tuple(slice(R, R + g.n) for _ in range(g.d))]


@lru_cache(maxsize=None)
def doubling_number(d: int) -> int:
    """Upper bound on how many radius-1 balls cover a radius-2 ball in R^d.

    Tile space with cubes of side 2/sqrt(d) (each inscribed in a unit ball)
    and count those meeting the radius-2 ball; the lattice offset is chosen
    from {0, 1/2}^d to minimise the count. All tests are exact: in units of
    the cube side the ball has radius sqrt(d). Cubes that only touch the
    sphere can be dropped, since every boundary point also lies in a cube
    meeting the open ball.
    """
    best = None
    lim = math.isqrt(d) + 2
    for offset in itertools.product((Fraction(0), Fraction(1, 2)), repeat=d):
        count = 0
        for j in itertools.product(range(-lim - 1, lim + 1), repeat=d):
            sq = Fraction(0)
            for ji, o in zip(j, offset):
                lo, hi = ji + o, ji + o + 1
                if lo > 0:
                    sq += lo * lo
                elif hi < 0:
                    sq += hi * hi
            if sq < d:
                count += 1
        best = count if best is None else min(best, count)
    return best


def overlap_exponent(A2: Fraction) -> int:
    """Smallest p with 2^-p * A <= 1/4, i.e. 4^p >= 16 A^2."""
    p = 0
    while Fraction(4) ** p < 16 * A2:
        p += 1
    return p


def theoretical_overlap_bound(d: int, A=None, A2=None) -> int:
    """M = N^p: cover a ball by doubling p times down to radius 1/4."""
    a2 = as_A2(A, A2)
    return doubling_number(d) ** overlap_exponent(a2)


def packing_bound(d: int, k: int) -> int:
    """Max number of 2^-k separated points in [0,1]^d by a volume argument.

    Disjoint balls of radius 2^-(k+1) sit in the cube enlarged by 2^-(k+1).
    """
    omega = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return math.floor(((1 << k) + 1) ** d * 2**d / omega)
