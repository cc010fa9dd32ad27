"""Finite-resolution subsets of the unit cube.

A :class:`GridSet` is a boolean occupancy array over the ``2^(L*d)`` lattice
cells. Measures are exact dyadic rationals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .dyadic import GridGeometry, GridPoint, Region
from .errors import GeometryError, InvalidSpecError, ResolutionTooCoarseError

ENCODINGS = ("cell-list", "hex-bitset")


class GridSet:
    """Immutable union of lattice cells. ``occupied[c_1, ..., c_d]``."""

    __slots__ = ("geometry", "occupied", "_hash")

    def __init__(self, geometry: GridGeometry, occupied: np.ndarray):
        occ = np.array(occupied, dtype=bool, copy=True)
        if occ.shape != geometry.shape:
            raise GeometryError(f"occupancy shape {occ.shape} != {geometry.shape}")
        occ.setflags(write=False)
        self.geometry = geometry
        self.occupied = occ
        self._hash = None

    @classmethod
    def empty(cls, geometry: GridGeometry) -> "GridSet":
        return cls(geometry, np.zeros(geometry.shape, dtype=bool))

    @classmethod
    def from_indices(cls, geometry: GridGeometry, indices: Sequence[int]) -> "GridSet":
        flat = np.zeros(geometry.ncells, dtype=bool)
        idx = np.asarray(list(indices), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= geometry.ncells):
            raise InvalidSpecError("cell index out of range")
        flat[idx] = True
        return cls(geometry, flat.reshape(geometry.shape, order="F"))

    @property
    def d(self) -> int:
        return self.geometry.d

    @property
    def L(self) -> int:
        return self.geometry.L

    def count(self) -> int:
        return int(self.occupied.sum())

    def is_empty(self) -> bool:
        return not self.occupied.any()

    def indices(self) -> np.ndarray:
        """Occupied cell indices in dictionary order."""
        return np.flatnonzero(self.occupied.ravel(order="F"))

    def coords(self) -> np.ndarray:
        """(count, d) cell coordinates in dictionary order."""
        idx = self.indices()
        return np.stack(np.unravel_index(idx, self.geometry.shape, order="F"), axis=1)

    def points(self) -> list[GridPoint]:
        return [GridPoint(tuple(int(v) for v in row)) for row in self.coords()]

    def __contains__(self, p: GridPoint) -> bool:
        return bool(self.occupied[tuple(p.coords)])

    def __eq__(self, other):
        if not isinstance(other, GridSet):
            return NotImplemented
        return self.geometry == other.geometry and np.array_equal(
            self.occupied, other.occupied
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.geometry, self.occupied.tobytes()))
        return self._hash

    def __repr__(self):
        return f"GridSet(d={self.d}, L={self.L}, count={self.count()})"

    def _combine(self, other: "GridSet", op) -> "GridSet":
        if other.geometry != self.geometry:
            raise GeometryError("geometries differ")
        return GridSet(self.geometry, op(self.occupied, other.occupied))

    def __or__(self, other):
        return self._combine(other, np.logical_or)

    def __and__(self, other):
        return self._combine(other, np.logical_and)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a & ~b)

    def complement(self) -> "GridSet":
        return GridSet(self.geometry, ~self.occupied)

    def issubset(self, other: "GridSet") -> bool:
        return self.geometry == other.geometry and not (self.occupied & ~other.occupied).any()


def measure(e: GridSet) -> Fraction:
    return Fraction(e.count(), e.geometry.ncells)


# -- generators ---------------------------------------------------------------


def gen_counterexample(k: int, L: int) -> GridSet:
    """Grid version of the alternating-interval set ``E_k`` in [0,1].

    ``E_k`` is the union of the open intervals ``(2j * 2^-(k+2), (2j+1) * 2^-(k+2))``;
    at level ``L`` each becomes a block of ``2^(L-k-2)`` occupied cells.
    """
    if k < 0:
        raise InvalidSpecError(f"k must be non-negative, got {k}")
    if L < k + 2:
        raise ResolutionTooCoarseError(f"level {L} too coarse for E_{k}; need L >= {k + 2}")
    geom = GridGeometry(1, L)
    block = 1 << (L - k - 2)
    occ = (np.arange(geom.n) // block) % 2 == 0
    return GridSet(geom, occ)


def gen_full(geom: GridGeometry) -> GridSet:
    return GridSet(geom, np.ones(geom.shape, dtype=bool))


def rng_from_seed(seed: int) -> np.random.Generator:
    """Counter-based generator; every random draw in the package goes through here."""
    return np.random.Generator(np.random.Philox(int(seed)))


def gen_bernoulli(geom: GridGeometry, p: float, seed: int = 0) -> GridSet:
    if not 0 <= p <= 1:
        raise InvalidSpecError(f"bernoulli p must be in [0, 1], got {p}")
    u = rng_from_seed(seed).random(geom.ncells)
    return GridSet(geom, (u < p).reshape(geom.shape, order="F"))


def gen_cantor(geom: GridGeometry, depth: int) -> GridSet:
    """Product Cantor set: each step keeps the outer quarters of every interval.

    Depth 1 in one dimension leaves ``[0,1/4) U [3/4,1)``.
    """
    if depth < 0:
        raise InvalidSpecError(f"cantor depth must be non-negative, got {depth}")
    if 2 * depth > geom.L:
        raise ResolutionTooCoarseError(f"cantor depth {depth} needs L >= {2 * depth}")
    keep = np.ones(geom.n, dtype=bool)
    c = np.arange(geom.n)
    for j in range(depth):
        # base-4 digit j (most significant first) must be 0 or 3
        digit = (c >> (geom.L - 2 * (j + 1))) & 3
        keep &= (digit == 0) | (digit == 3)
    occ = keep
    for _ in range(geom.d - 1):
        occ = np.multiply.outer(occ, keep)
    return GridSet(geom, occ.reshape(geom.shape))


def gen_ball_union(geom: GridGeometry, balls: Sequence[tuple[Sequence[float], float]]) -> GridSet:
    """Cells whose centers lie in the union of closed Euclidean balls.

    Centers and radii are taken as exact rationals (``Fraction(str(v))``).
    """
    occ = np.zeros(geom.shape, dtype=bool)
    scale = 1 << (geom.L + 1)
    grids = np.indices(geom.shape)
    for center, radius in balls:
        if len(center) != geom.d:
            raise InvalidSpecError(f"ball center {center} has wrong dimension")
        r = Fraction(str(radius))
        if r < 0:
            raise InvalidSpecError(f"negative radius {radius}")
        cs = [Fraction(str(c)) for c in center]
        # work in half-cell units with common denominator q
        q = 1
        for v in cs + [r]:
            q = q * v.denominator // np.gcd(q, v.denominator)
        sq = np.zeros(geom.shape, dtype=object)
        for axis, c in enumerate(cs):
            diff = (2 * grids[axis] + 1).astype(object) * q - int(c * scale * q)
            sq = sq + diff * diff
        occ |= (sq <= int(r * scale * q) ** 2).astype(bool)
    return GridSet(geom, occ)


def gen_family(kind: str, geom: GridGeometry, **params: Any) -> GridSet:
    """Dispatch generator by name: full, bernoulli, cantor, ball-union, counterexample."""
    if kind == "full":
        return gen_full(geom)
    if kind == "bernoulli":
        return gen_bernoulli(geom, float(params.get("p", 0.5)), int(params.get("seed", 0)))
    if kind == "cantor":
        return gen_cantor(geom, int(params.get("depth", 1)))
    if kind == "ball-union":
        balls = params.get("balls")
        if not balls:
            raise InvalidSpecError("ball-union needs a non-empty 'balls' list")
        return gen_ball_union(geom, balls)
    if kind == "counterexample":
        if geom.d != 1:
            raise InvalidSpecError("the counterexample family lives in dimension 1")
        return gen_counterexample(int(params.get("k", 0)), geom.L)
    raise InvalidSpecError(f"unknown set kind {kind!r}")


def parse_balls(text: str) -> list[tuple[list[float], float]]:
    """Parse ``"x,y:r;x,y:r"`` into a ball list."""
    out = []
    for chunk in filter(None, (t.strip() for t in text.split(";"))):
        try:
            c, r = chunk.split(":")
            out.append(([float(v) for v in c.split(",")], float(r)))
        except ValueError as exc:
            raise InvalidSpecError(f"bad ball spec {chunk!r}") from exc
    return out


# -- distance queries ----------------------------------------------------------


def dist_to_set_within(x: GridPoint, e: GridSet, r: Region | None = None) -> int | None:
    """Squared distance (cell units) from ``x`` to the nearest occupied center in ``r``.

    ``None`` when ``E`` has no cell in the region. ``r=None`` means all of E.
    """
    occ = e.occupied
    if r is None:
        pts = e.coords()
    else:
        lo, hi = r.cell_bounds(e.L)
        lo_c = [max(v, 0) for v in lo]
        hi_c = [min(v, e.geometry.n) for v in hi]
        if any(a >= b for a, b in zip(lo_c, hi_c)):
            return None
        sub = occ[tuple(slice(a, b) for a, b in zip(lo_c, hi_c))]
        pts = np.argwhere(sub) + np.asarray(lo_c)
    if len(pts) == 0:
        return None
    diff = pts - np.asarray(x.coords)
    return int((diff * diff).sum(axis=1).min())


def nearest_in_set(x: GridPoint, e: GridSet, r: Region | None = None) -> GridPoint | None:
    """Nearest occupied center, ties broken by smallest dictionary index."""
    geom = e.geometry
    mask = e.occupied
    if r is not None:
        lo, hi = r.cell_bounds(e.L)
        box = np.zeros(geom.shape, dtype=bool)
        box[tuple(slice(max(a, 0), max(min(b, geom.n), 0)) for a, b in zip(lo, hi))] = True
        mask = mask & box
    idx = np.flatnonzero(mask.ravel(order="F"))
    if idx.size == 0:
        return None
    pts = np.stack(np.unravel_index(idx, geom.shape, order="F"), axis=1)
    sq = ((pts - np.asarray(x.coords)) ** 2).sum(axis=1)
    best = int(np.argmin(sq))  # first minimum = smallest index
    return GridPoint(tuple(int(v) for v in pts[best]))


# -- persistence ----------------------------------------------------------------


def to_setfile(e: GridSet, encoding: str = "cell-list") -> dict:
    out: dict[str, Any] = {"dimension": e.d, "level": e.L, "encoding": encoding}
    if encoding == "cell-list":
        out["cells"] = [int(i) for i in e.indices()]
    elif encoding == "hex-bitset":
        bits = np.packbits(e.occupied.ravel(order="F"), bitorder="little")
        out["bits"] = bits.tobytes().hex()
    else:
        raise InvalidSpecError(f"unknown encoding {encoding!r}")
    return out


def from_setfile(data: dict) -> GridSet:
    try:
        geom = GridGeometry(int(data["dimension"]), int(data["level"]))
        encoding = data.get("encoding", "cell-list")
        if encoding == "cell-list":
            return GridSet.from_indices(geom, data["cells"])
        if encoding == "hex-bitset":
            raw = np.frombuffer(bytes.fromhex(data["bits"]), dtype=np.uint8)
            flat = np.unpackbits(raw, bitorder="little")
            if flat.size < geom.ncells or flat[geom.ncells:].any():
                raise InvalidSpecError("bitset length does not match geometry")
            return GridSet(geom, flat[: geom.ncells].astype(bool).reshape(geom.shape, order="F"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidSpecError):
            raise
        raise InvalidSpecError(f"malformed set file: {exc}") from exc
    raise InvalidSpecError(f"unknown encoding {encoding!r}")


def save(e: GridSet, path: str | Path, encoding: str = "cell-list", extra: dict | None = None) -> None:
    data = to_setfile(e, encoding)
    if extra:
        data.update(extra)
    Path(path).write_text(json.dumps(data, sort_keys=True) + "\n")


def load(path: str | Path) -> GridSet:
    return from_setfile(json.loads(Path(path).read_text()))
