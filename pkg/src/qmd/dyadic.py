"""Exact dyadic cube arithmetic on the ``2^-L`` lattice of ``[0,1]^d``.

Coordinates are kept as integers throughout. A grid point is the center of a
lattice cell and is stored as its integer cell index ``c``; its position is
``(c + 1/2) * 2^-L``. A dyadic cube at level ``k`` with corner ``a`` spans
``[a * s, (a + 1) * s)`` in cell units, where ``s = 2^(L - k)``.

The flat ("dictionary") order of cells has ``x_1`` varying fastest, so cell 2
of a tripled cube is the neighbour of cell 1 in the ``x_1`` direction.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import GeometryError, LevelOverflowError, PointOutsideRegionError

MAX_LOG2_CELLS = 20
MAX_DIM = 4
FACTORS = (1, 3, 5, 7)


@dataclass(frozen=True)
class GridGeometry:
    d: int
    L: int

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or not 1 <= self.d <= MAX_DIM:
            raise GeometryError(f"dimension must be in [1, {MAX_DIM}], got {self.d!r}")
        if not isinstance(self.L, (int, np.integer)) or self.L < 0:
            raise GeometryError(f"level must be a non-negative integer, got {self.L!r}")
        if self.L * self.d > MAX_LOG2_CELLS:
            raise GeometryError(
                f"2^(L*d) = 2^{self.L * self.d} cells exceeds the cap 2^{MAX_LOG2_CELLS}"
            )

    @property
    def n(self) -> int:
        """Cells per side."""
        return 1 << self.L

    @property
    def ncells(self) -> int:
        return 1 << (self.L * self.d)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    def flat_index(self, coords: Sequence[int]) -> int:
        idx = 0
        for c in reversed(tuple(coords)):
            idx = idx * self.n + int(c)
        return idx

    def coords_of(self, index: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.d):
            index, c = divmod(int(index), self.n)
            out.append(c)
        return tuple(out)

    def point(self, *coords: int) -> "GridPoint":
        if len(coords) == 1 and isinstance(coords[0], (tuple, list)):
            coords = tuple(coords[0])
        if len(coords) != self.d:
            raise GeometryError(f"expected {self.d} coordinates, got {len(coords)}")
        if any(not 0 <= c < self.n for c in coords):
            raise GeometryError(f"grid point {coords} outside [0, {self.n})^{self.d}")
        return GridPoint(tuple(int(c) for c in coords))

    def points(self) -> Iterable["GridPoint"]:
        """All grid points in dictionary order."""
        for idx in range(self.ncells):
            yield GridPoint(self.coords_of(idx))

    def all_coords(self) -> np.ndarray:
        """(ncells, d) array of cell indices in dictionary order."""
        grids = np.meshgrid(*([np.arange(self.n)] * self.d), indexing="ij")
        return np.stack([g.ravel(order="F") for g in grids], axis=1)


@dataclass(frozen=True, order=True)
class GridPoint:
    coords: tuple[int, ...]

    @property
    def d(self) -> int:
        return len(self.coords)

    def center(self, L: int) -> tuple[Fraction, ...]:
        return tuple(Fraction(2 * c + 1, 1 << (L + 1)) for c in self.coords)

    def __str__(self):
        return "(" + ",".join(map(str, self.coords)) + ")"


def sqdist(p: GridPoint, q: GridPoint) -> int:
    """Squared center distance in cell units (multiply by 4^-L for [0,1]^d units)."""
    return sum((a - b) ** 2 for a, b in zip(p.coords, q.coords))


@dataclass(frozen=True, order=True)
class DyadicCube:
    level: int
    corner: tuple[int, ...]

    @property
    def d(self) -> int:
        return len(self.corner)

    @property
    def side(self) -> Fraction:
        return Fraction(1, 1 << self.level)

    @property
    def inside(self) -> bool:
        """True when the cube lies in [0,1]^d (always so for members of Delta)."""
        return all(0 <= a < (1 << self.level) for a in self.corner)

    def bounds(self) -> tuple[tuple[Fraction, Fraction], ...]:
        s = self.side
        return tuple((a * s, (a + 1) * s) for a in self.corner)

    def __str__(self):
        return f"{self.level}:(" + ",".join(map(str, self.corner)) + ")"


_CUBE_RE = re.compile(r"^\s*(\d+)\s*:\s*\(\s*(-?\d+(?:\s*,\s*-?\d+)*)\s*,?\s*\)\s*$")


def parse_cube(text: str) -> DyadicCube:
    """Parse the ``"k:(a1,...,ad)"`` literal."""
    m = _CUBE_RE.match(text)
    if not m:
        raise ValueError(f"not a cube literal: {text!r}")
    corner = tuple(int(t) for t in m.group(2).split(","))
    return DyadicCube(int(m.group(1)), corner)


def cube(level: int, *corner: int) -> DyadicCube:
    if len(corner) == 1 and isinstance(corner[0], (tuple, list)):
        corner = tuple(corner[0])
    return DyadicCube(int(level), tuple(int(a) for a in corner))


@dataclass(frozen=True)
class Region:
    """The concentric expansion ``factor * Q``, optionally clipped to [0,1]^d."""

    cube: DyadicCube
    factor: int = 1
    clip: bool = True

    @property
    def side(self) -> Fraction:
        """Side of the unclipped expansion."""
        return self.factor * self.cube.side

    def bounds(self) -> tuple[tuple[Fraction, Fraction], ...]:
        h = (self.factor - 1) // 2
        s = self.cube.side
        out = []
        for a in self.cube.corner:
            lo, hi = (a - h) * s, (a + h + 1) * s
            if self.clip:
                lo, hi = max(lo, Fraction(0)), min(hi, Fraction(1))
            out.append((lo, hi))
        return tuple(out)

    def cell_bounds(self, L: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Half-open box ``[lo, hi)`` of lattice cells whose centers lie in the region."""
        k = self.cube.level
        if k > L:
            raise LevelOverflowError(f"cube level {k} finer than grid level {L}")
        s = 1 << (L - k)
        h = (self.factor - 1) // 2
        lo = [(a - h) * s for a in self.cube.corner]
        hi = [(a + h + 1) * s for a in self.cube.corner]
        if self.clip:
            n = 1 << L
            lo = [max(v, 0) for v in lo]
            hi = [min(v, n) for v in hi]
        return tuple(lo), tuple(hi)

    def contains(self, p: GridPoint, L: int) -> bool:
        lo, hi = self.cell_bounds(L)
        return all(a <= c < b for c, a, b in zip(p.coords, lo, hi))

    def __str__(self):
        return f"{self.factor}*{self.cube}" + ("" if self.clip else "[unclipped]")


def region_of(q: DyadicCube, factor: int, clip: bool = True) -> Region:
    if factor not in FACTORS:
        raise GeometryError(f"expansion factor must be one of {FACTORS}, got {factor}")
    return Region(q, factor, bool(clip))


def regions_intersect(r1: Region, r2: Region) -> bool:
    return all(
        max(a[0], b[0]) < min(a[1], b[1]) for a, b in zip(r1.bounds(), r2.bounds())
    )


def region_subset(r1: Region, r2: Region) -> bool:
    """Whether ``r1`` is contained in ``r2`` (as half-open boxes)."""
    return all(b[0] <= a[0] and a[1] <= b[1] for a, b in zip(r1.bounds(), r2.bounds()))


def children(q: DyadicCube, geom: GridGeometry) -> list[DyadicCube]:
    if q.level >= geom.L:
        raise LevelOverflowError(f"cube {q} is at the finest level {geom.L}")
    out = []
    for t in _offsets(q.d, 2):
        out.append(DyadicCube(q.level + 1, tuple(2 * a + o for a, o in zip(q.corner, t))))
    return out


def _offsets(d: int, m: int) -> list[tuple[int, ...]]:
    # x_1 varies fastest
    return [tuple(reversed(t)) for t in itertools.product(range(m), repeat=d)]


def cells_of_3Q(q: DyadicCube) -> list[DyadicCube]:
    """The 3^d level-k cells of the unclipped 3Q, in dictionary order.

    Cells that fall outside [0,1]^d are returned with their signed corner;
    check ``cell.inside``.
    """
    return [
        DyadicCube(q.level, tuple(a - 1 + o for a, o in zip(q.corner, t)))
        for t in _offsets(q.d, 3)
    ]


def cell_label(x: GridPoint, q: DyadicCube, L: int) -> int:
    """1-based index of the cell of 3Q containing ``x``."""
    s = 1 << (L - q.level)
    label, weight = 1, 1
    for c, a in zip(x.coords, q.corner):
        t = c // s - (a - 1)
        if not 0 <= t <= 2:
            raise PointOutsideRegionError(f"point {x} is not in 3*{q}")
        label += t * weight
        weight *= 3
    return label


def minimal_common_cube(x: GridPoint, y: GridPoint, L: int) -> DyadicCube:
    """Smallest dyadic Q with x, y in the unclipped 3Q; ties go to the
    lexicographically smallest corner."""
    levels, corners = minimal_common_cubes(
        np.asarray([x.coords]), np.asarray([y.coords]), L
    )
    return DyadicCube(int(levels[0]), tuple(int(a) for a in corners[0]))


def minimal_common_cubes(
    xs: np.ndarray, ys: np.ndarray, L: int
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`minimal_common_cube` over rows of ``xs`` and ``ys``.

    At level ``k`` both points lie in some 3Q iff their level-k block indices
    differ by at most 2 in every coordinate; this is monotone in ``k``, so the
    answer is the finest level where it holds.
    """
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    levels = np.zeros(len(xs), dtype=np.int64)
    corners = np.zeros_like(xs)
    done = np.zeros(len(xs), dtype=bool)
    for k in range(L, -1, -1):
        sh = L - k
        bx, by = xs >> sh, ys >> sh
        ok = (np.abs(bx - by) <= 2).all(axis=1) & ~done
        if ok.any():
            levels[ok] = k
            corners[ok] = np.maximum(np.maximum(bx[ok], by[ok]) - 1, 0)
            done |= ok
        if done.all():
            break
    return levels, corners


def label_block(d: int) -> np.ndarray:
    """Array of shape (3,)*d holding the 1-based cell labels of 3Q."""
    t = np.indices((3,) * d)
    weights = 3 ** np.arange(d)
    return (1 + np.tensordot(weights, t, axes=1)).astype(np.int16)
