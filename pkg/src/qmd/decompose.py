"""Well-connected decompositions of grid sets.

Pipeline: bad cubes at the chain-quality threshold eps, a garbage set Z of
points covered by too many bad 7Q regions, a first-fit packing of the
remaining bad cubes into N collections with pairwise disjoint 3Q, a word per
point recording which cell of which 3Q it sits in, and chains that certify
each word class is well connected through E.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, getcontext
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import dijkstra

from . import density
from ._windows import parallel_map
from .dyadic import DyadicCube, GridGeometry, GridPoint, label_block, minimal_common_cubes
from .errors import AssignmentFailure, DomainError, EmptyRegionError
from .gridset import GridSet, measure, rng_from_seed, to_setfile

PAIR_LIMIT = 10_000
SEARCH_RADIUS = 2
GRAPH_CAP = 3000
getcontext().prec = 60


def pipeline_constants(delta) -> tuple[int, Fraction]:
    """Smallest P with 1/P <= 3 delta / 4 and P > 1 + 1/delta; eps = delta / (28 P)."""
    delta = density.as_fraction(delta)
    if not 0 < delta < Fraction(1, 2):
        raise DomainError(f"delta must lie in (0, 1/2), got {delta}")
    p1 = density._ceil_int(Fraction(4) / (3 * delta))
    p2 = math.floor(1 + 1 / delta) + 1
    P = max(p1, p2)
    return P, delta / (28 * P)


def theoretical_N(eps, alpha, d: int) -> int:
    """Smallest N with 7^d K~ / N < alpha."""
    bound = Fraction(7**d) * density.ktilde_of(eps, d) / density.as_fraction(alpha)
    return math.floor(bound) + 1


def empirical_N(counts: np.ndarray, alpha) -> int:
    """Smallest N >= 1 with lambda({count >= N}) < alpha (binary search; Z_N shrinks in N)."""
    alpha = density.as_fraction(alpha)
    flat = np.sort(counts.ravel())
    total = flat.size

    def small_enough(N):
        return Fraction(total - int(np.searchsorted(flat, N, side="left")), total) < alpha

    lo, hi = 1, int(flat[-1]) + 1 if total else 1
    while lo < hi:
        mid = (lo + hi) // 2
        if small_enough(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def choose_N(e: GridSet, eps, alpha, mode: str = "empirical", counts: np.ndarray | None = None) -> int:
    if density.as_fraction(alpha) <= 0:
        raise DomainError("alpha must be positive")
    if mode == "theoretical":
        return theoretical_N(eps, alpha, e.d)
    if mode != "empirical":
        raise DomainError(f"unknown mode {mode!r}")
    if counts is None:
        counts = density.z_counts(density.bad_cubes(e, eps), e.L, e.d)
    return empirical_N(counts, alpha)


# -- bad cubes and their packing -----------------------------------------------------


@dataclass
class BadCubeSet:
    """Bad cubes as per-level masks; iteration is coarse to fine, then by corner."""

    geometry: GridGeometry
    masks: list[np.ndarray]

    @classmethod
    def from_levels(cls, geometry: GridGeometry, levels: list, restrict: GridSet | None = None) -> "BadCubeSet":
        masks = []
        for lev in levels:
            m = lev.bad
            if restrict is not None:
                m = m & density.touches_3Q(restrict.occupied, lev.k)
            masks.append(m)
        return cls(geometry, masks)

    def corners(self, k: int) -> np.ndarray:
        return np.argwhere(self.masks[k])

    def cubes(self) -> list[DyadicCube]:
        return [
            DyadicCube(k, tuple(int(v) for v in a)) for k in range(len(self.masks)) for a in self.corners(k)
        ]

    def __len__(self) -> int:
        return int(sum(int(m.sum()) for m in self.masks))

    def __contains__(self, q: DyadicCube) -> bool:
        if not q.inside or q.level >= len(self.masks):
            return False
        return bool(self.masks[q.level][q.corner])

    def contains_many(self, levels: np.ndarray, corners: np.ndarray) -> np.ndarray:
        out = np.zeros(len(levels), dtype=bool)
        for k in np.unique(levels):
            sel = levels == k
            out[sel] = self.masks[int(k)][tuple(corners[sel].T)]
        return out


@dataclass
class CollectionAssignment:
    """Which collection each bad cube went to, plus every collection's label map.

    ``labels[i]`` holds, per grid cell, the 1-based label of the cell of 3Q
    containing it for the unique Q of collection i whose 3Q covers it, or 0.
    """

    geometry: GridGeometry
    N: int
    bins: list[np.ndarray]  # per level, collection index (0-based) of each corner in order
    corners: list[np.ndarray]
    labels: np.ndarray  # (used, n, ..., n) int8

    @property
    def used(self) -> int:
        return int(self.labels.shape[0])

    def collection_of(self, q: DyadicCube) -> int | None:
        hit = np.flatnonzero((self.corners[q.level] == np.asarray(q.corner)).all(axis=1))
        return int(self.bins[q.level][hit[0]]) + 1 if hit.size else None

    def members(self, i: int) -> list[DyadicCube]:
        out = []
        for k, (c, b) in enumerate(zip(self.corners, self.bins)):
            out.extend(DyadicCube(k, tuple(int(v) for v in a)) for a in c[b == i - 1])
        return out


def _grow(labels: np.ndarray, cap: int) -> np.ndarray:
    new = np.zeros((cap,) + labels.shape[1:], dtype=labels.dtype)
    new[: labels.shape[0]] = labels
    return new


def assign_collections(b: BadCubeSet, N: int, g: GridSet | None = None) -> CollectionAssignment:
    """First-fit packing of the bad cubes into at most N collections with disjoint 3Q."""
    geom = b.geometry
    d, L = geom.d, geom.L
    block = label_block(d).astype(np.int8)
    labels = np.zeros((4,) + (1,) * d, dtype=np.int8)
    used = 0
    all_bins, all_corners = [], []
    for k in range(L + 1):
        if k:
            for ax in range(1, d + 1):
                labels = np.repeat(labels, 2, axis=ax)
        m = 1 << k
        corners = b.corners(k)
        bins = np.empty(len(corners), dtype=np.int64)
        for j, a in enumerate(corners):
            lo = np.maximum(a - 1, 0)
            hi = np.minimum(a + 2, m)
            win = tuple(slice(int(l), int(h)) for l, h in zip(lo, hi))
            busy = labels[(slice(0, used),) + win].reshape(used, -1).any(axis=1) if used else np.zeros(0, bool)
            free = np.flatnonzero(~busy)
            if free.size:
                i = int(free[0])
            elif used < N:
                if used == labels.shape[0]:
                    labels = _grow(labels, 2 * used)
                i = used
                used += 1
            else:
                raise AssignmentFailure(
                    f"no collection can take cube {DyadicCube(k, tuple(int(v) for v in a))}",
                    _assignment_witness(k, a, geom, g, N),
                )
            src = tuple(slice(int(l - (ai - 1)), int(h - (ai - 1))) for l, h, ai in zip(lo, hi, a))
            labels[(i,) + win] = block[src]
            bins[j] = i
        all_bins.append(bins)
        all_corners.append(corners)
    labels = np.ascontiguousarray(labels[:used])
    return CollectionAssignment(geom, N, all_bins, all_corners, labels)


def _assignment_witness(k, a, geom, g, N) -> dict:
    # every earlier cube blocking Q has 3Q inside its 7R, so each point of 3Q
    # lies in at least N + 1 bad 7R regions
    s = 1 << (geom.L - k)
    lo = [max((int(v) - 1) * s, 0) for v in a]
    hi = [min((int(v) + 2) * s, geom.n) for v in a]
    point = lo
    if g is not None:
        sub = np.argwhere(g.occupied[tuple(slice(l, h) for l, h in zip(lo, hi))])
        if len(sub):
            point = [int(v) + l for v, l in zip(sub[0], lo)]
    return {"cube": f"{k}:(" + ",".join(str(int(v)) for v in a) + ")", "point": list(map(int, point)), "minCount": N + 1}


@dataclass(frozen=True)
class Word:
    """Letters of the used collections; letters past ``len(letters)`` are 0."""

    letters: tuple[int, ...]
    length: int

    def __str__(self):
        return ".".join(map(str, self.letters)) if self.letters else "0"


def word_of(x: GridPoint, assignment: CollectionAssignment) -> Word:
    letters = assignment.labels[(slice(None),) + tuple(x.coords)]
    return Word(tuple(int(v) for v in letters), assignment.N)


@dataclass
class CodingPartition:
    """Word classes of G in lexicographic word order; ``members[j]`` holds the
    dictionary indices of the cells whose word is ``words[j]``."""

    geometry: GridGeometry
    words: list[Word]
    members: list[np.ndarray]
    assignment: CollectionAssignment

    @property
    def pieces(self) -> list[GridSet]:
        return [GridSet.from_indices(self.geometry, m) for m in self.members]

    def __len__(self) -> int:
        return len(self.members)

    def class_count_ok(self) -> bool:
        """Number of classes is at most (3^d + 1)^N."""
        d = self.assignment.geometry.d
        N = self.assignment.N
        if N * math.log2(3**d + 1) > 64:
            return True
        return len(self.members) <= (3**d + 1) ** N


def coding_partition(g: GridSet, b: BadCubeSet, N: int) -> CodingPartition:
    assignment = assign_collections(b, N, g)
    geom = g.geometry
    if g.is_empty():
        return CodingPartition(geom, [], [], assignment)
    idx = g.indices()
    coords = np.stack(np.unravel_index(idx, geom.shape, order="F"), axis=1)
    rows = assignment.labels[(slice(None),) + tuple(coords.T)].T  # (points, used)
    if rows.shape[1] == 0:
        return CodingPartition(geom, [Word((), N)], [idx], assignment)
    uniq, inv = np.unique(rows, axis=0, return_inverse=True)
    order = np.argsort(inv.ravel(), kind="stable")
    bounds = np.cumsum(np.bincount(inv.ravel(), minlength=len(uniq)))[:-1]
    members = np.split(idx[order], bounds)
    words = [Word(tuple(int(v) for v in w), N) for w in uniq]
    return CodingPartition(geom, words, members, assignment)


# -- chains ----------------------------------------------------------------------------


def _flat(coords: np.ndarray, n: int) -> np.ndarray:
    w = n ** np.arange(coords.shape[-1], dtype=np.int64)
    return (coords * w).sum(axis=-1)


def chain_points(xs: np.ndarray, ys: np.ndarray, e: GridSet, P: int, qs=None) -> np.ndarray:
    """Chains z_0..z_P for every pair; z_i is the occupied center nearest to the
    segment point x + (i/P)(y - x) within the clipped 7Q of the pair's minimal
    common cube, ties to the smallest dictionary index.

    Coordinates are cell indices. Returns (pairs, P + 1, d).
    """
    xs = np.asarray(xs, dtype=np.int64).reshape(-1, e.d)
    ys = np.asarray(ys, dtype=np.int64).reshape(-1, e.d)
    npairs, d, n, L = len(xs), e.d, e.geometry.n, e.L
    if qs is None:
        levels, corners = minimal_common_cubes(xs, ys, L)
    else:
        levels, corners = qs
    s = (1 << (L - levels))[:, None]
    box_lo = np.maximum((corners - 3) * s, 0)
    box_hi = np.minimum((corners + 4) * s, n)
    out = np.empty((npairs, P + 1, d), dtype=np.int64)
    out[:, 0], out[:, P] = xs, ys
    if P < 2 or npairs == 0:
        return out
    i = np.arange(1, P)[None, :, None]
    target = P * xs[:, None, :] + i * (ys - xs)[:, None, :]  # units of 1/P cell
    base = (2 * target + P) // (2 * P)
    R = SEARCH_RADIUS
    offs = np.stack(np.meshgrid(*([np.arange(-R, R + 1)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    cand = base[:, :, None, :] + offs[None, None, :, :]
    ok = ((cand >= box_lo[:, None, None, :]) & (cand < box_hi[:, None, None, :])).all(axis=-1)
    safe = np.clip(cand, 0, n - 1)
    ok &= e.occupied[tuple(np.moveaxis(safe, -1, 0))]
    sq = ((P * cand - target[:, :, None, :]) ** 2).sum(axis=-1)
    key = np.where(ok, sq * (n**d) + _flat(safe, n), np.iinfo(np.int64).max)
    best = key.argmin(axis=2)
    chosen = np.take_along_axis(cand, best[:, :, None, None], axis=2)[:, :, 0, :]
    best_sq = np.take_along_axis(np.where(ok, sq, -1), best[:, :, None], axis=2)[:, :, 0]
    # any center outside the window is at least R + 1/2 cells from the target
    found = (best_sq >= 0) & (4 * best_sq < ((2 * R + 1) * P) ** 2)
    out[:, 1:P] = chosen
    for p, j in zip(*np.nonzero(~found)):
        out[p, j + 1] = _nearest_in_box(target[p, j], P, e, box_lo[p], box_hi[p])
    return out


def _nearest_in_box(target: np.ndarray, P: int, e: GridSet, lo, hi) -> np.ndarray:
    sub = e.occupied[tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))]
    pts = np.argwhere(sub) + np.asarray(lo)
    if len(pts) == 0:
        raise EmptyRegionError("E does not meet the 7Q region of the pair")
    sq = ((P * pts - target) ** 2).sum(axis=1)
    order = np.lexsort((_flat(pts, e.geometry.n), sq))
    return pts[int(order[0])]


def _le_sqrt_sum(lhs_sq: Sequence[int], rhs: Sequence[tuple[Fraction, int]], strict: bool = False) -> bool:
    """sum sqrt(lhs_sq) <= (or <) sum c * sqrt(r) for rhs terms (c, r); float with a
    high-precision recheck on near ties."""
    a = math.fsum(math.sqrt(v) for v in lhs_sq)
    b = math.fsum(float(c) * math.sqrt(r) for c, r in rhs)
    if abs(a - b) > 1e-9 * max(1.0, abs(b)):
        return a < b if strict else a <= b
    A = sum((Decimal(int(v)).sqrt() for v in lhs_sq), Decimal(0))
    B = sum((Decimal(c.numerator) / Decimal(c.denominator) * Decimal(int(r)).sqrt() for c, r in rhs), Decimal(0))
    return A < B if strict else A <= B


@dataclass
class Chain:
    points: np.ndarray  # (P + 1, d) cell indices
    cube: DyadicCube
    n: int

    @property
    def dxy_sq(self) -> int:
        v = self.points[-1] - self.points[0]
        return int((v * v).sum())

    @property
    def steps_sq(self) -> list[int]:
        diff = np.diff(self.points, axis=0)
        return [int(v) for v in (diff * diff).sum(axis=1)]

    @property
    def length(self) -> float:
        return math.fsum(math.sqrt(v) for v in self.steps_sq) / self.n

    @property
    def max_step(self) -> float:
        return math.sqrt(max(self.steps_sq, default=0)) / self.n

    def step_ok(self, delta, slack_cells: Fraction | float = 0) -> bool:
        delta = density.as_fraction(delta)
        m = max(self.steps_sq, default=0)
        if not slack_cells:
            return m * delta.denominator**2 < delta.numerator**2 * self.dxy_sq
        d = self.points.shape[1]
        return _le_sqrt_sum([m], [(delta, self.dxy_sq), (Fraction(2), d)], strict=True)

    def length_ok(self, delta, slack_cells: bool = False) -> bool:
        delta = density.as_fraction(delta)
        rhs = [(1 + delta, self.dxy_sq)]
        if slack_cells:
            rhs.append((Fraction(2), self.points.shape[1]))
        return _le_sqrt_sum(self.steps_sq, rhs)

    def passes(self, delta, slack: bool = False) -> bool:
        return self.step_ok(delta, slack) and self.length_ok(delta, slack)

    def to_dict(self, delta=None) -> dict:
        out = {
            "x": self.points[0].tolist(),
            "y": self.points[-1].tolist(),
            "cube": str(self.cube),
            "steps": self.points.tolist(),
            "length": self.length,
            "distance": math.sqrt(self.dxy_sq) / self.n,
            "maxStep": self.max_step,
        }
        if delta is not None:
            out["pass"] = self.passes(delta, slack=False)
            out["passSlack"] = self.passes(delta, slack=True)
        return out


def build_chain(x: GridPoint, y: GridPoint, e: GridSet, q: DyadicCube, P: int, eps=None) -> Chain:
    """Chain from x to y through E following the segment, inside the clipped 7Q."""
    pts = chain_points(
        np.asarray([x.coords]), np.asarray([y.coords]), e, P, (np.asarray([q.level]), np.asarray([q.corner]))
    )[0]
    return Chain(pts, q, e.geometry.n)


def build_chains(xs: np.ndarray, ys: np.ndarray, e: GridSet, P: int) -> list[Chain]:
    levels, corners = minimal_common_cubes(xs, ys, e.L)
    pts = chain_points(xs, ys, e, P, (levels, corners))
    return [
        Chain(pts[i], DyadicCube(int(levels[i]), tuple(int(v) for v in corners[i])), e.geometry.n)
        for i in range(len(pts))
    ]


# -- pair sampling --------------------------------------------------------------------------


def sample_pairs(
    pieces: Sequence[np.ndarray], geom: GridGeometry, limit: int = PAIR_LIMIT, seed: int = 0
) -> list[tuple[int, int, int]]:
    """Same-class pairs (class, i, j) with i < j as flat indices.

    Exhaustive when there are at most ``limit`` pairs; otherwise a seeded
    sample stratified by the decade of |x - y|.
    """
    sizes = np.asarray([len(p) for p in pieces], dtype=np.int64)
    npairs = sizes * (sizes - 1) // 2
    total = int(npairs.sum())
    if total == 0:
        return []
    if total <= limit:
        out = []
        for c, p in enumerate(pieces):
            a, b = np.triu_indices(len(p), k=1)
            out.extend(zip([c] * len(a), p[a].tolist(), p[b].tolist()))
        return out
    rng = rng_from_seed(seed)
    draw = 4 * limit
    cls = rng.choice(len(pieces), size=draw, p=npairs / total)
    u = rng.random((draw, 2))
    ia = (u[:, 0] * sizes[cls]).astype(np.int64)
    ib = (u[:, 1] * (sizes[cls] - 1)).astype(np.int64)
    ib = ib + (ib >= ia)
    n, shape = geom.n, geom.shape
    seen, buckets = set(), {}
    for c, a, b in zip(cls.tolist(), ia.tolist(), ib.tolist()):
        i, j = pieces[c][a], pieces[c][b]
        i, j = (int(i), int(j)) if i < j else (int(j), int(i))
        if (i, j) in seen:
            continue
        seen.add((i, j))
        ci, cj = np.unravel_index(i, shape, order="F"), np.unravel_index(j, shape, order="F")
        dist = math.sqrt(sum((p - q) ** 2 for p, q in zip(ci, cj))) / n
        dec = math.floor(math.log10(dist))
        buckets.setdefault(dec, []).append((c, i, j))
    keys = sorted(buckets)
    quota = limit // len(keys)
    chosen, spare = [], []
    for kk in keys:
        chosen.extend(buckets[kk][:quota])
        spare.extend(buckets[kk][quota:])
    chosen.extend(spare[: limit - len(chosen)])
    return chosen


def _coords_of(indices: Sequence[int], geom: GridGeometry) -> np.ndarray:
    return np.stack(np.unravel_index(np.asarray(indices, dtype=np.int64), geom.shape, order="F"), axis=1)


# -- decomposition ------------------------------------------------------------------------


@dataclass
class Decomposition:
    e: GridSet
    alpha: Fraction
    delta: Fraction
    mode: str
    P: int
    eps: Fraction
    N: int
    partition: CodingPartition
    garbage: GridSet
    bad: BadCubeSet
    certificates: list[tuple[int, Chain]] = field(default_factory=list)
    pairs_total: int = 0

    @property
    def pieces(self) -> list[GridSet]:
        return self.partition.pieces

    @property
    def piece_count(self) -> int:
        return len(self.partition)

    @property
    def M(self) -> str:
        return f"{3**self.e.d + 1}^{self.N}"

    def is_partition(self) -> bool:
        acc = np.zeros(self.e.geometry.ncells, dtype=np.int64)
        for m in self.partition.members:
            np.add.at(acc, m, 1)
        acc[self.garbage.indices()] += 1
        return bool((acc == self.e.occupied.ravel(order="F")).all())

    def pass_rate(self, slack: bool = True) -> float:
        if not self.certificates:
            return 1.0
        return sum(c.passes(self.delta, slack) for _, c in self.certificates) / len(self.certificates)

    def to_dict(self) -> dict:
        pieces = []
        g = self.e.geometry
        for w, m in zip(self.partition.words, self.partition.members):
            pieces.append(
                {"dimension": g.d, "level": g.L, "encoding": "cell-list", "cells": [int(i) for i in m], "word": str(w)}
            )
        certs = []
        for c, ch in self.certificates:
            row = ch.to_dict(self.delta)
            row["class"] = str(self.partition.words[c])
            certs.append(row)
        return {
            "params": {
                "alpha": str(self.alpha),
                "delta": str(self.delta),
                "P": self.P,
                "epsilon": str(self.eps),
                "N": self.N,
                "M": self.M,
                "mode": self.mode,
            },
            "pieces": pieces,
            "garbage": to_setfile(self.garbage),
            "certificates": certs,
            "summary": {
                "lambdaZ": str(measure(self.garbage)),
                "pieceCount": self.piece_count,
                "badCubes": len(self.bad),
                "collectionsUsed": self.partition.assignment.used,
                "partition": self.is_partition(),
                "pairsTotal": self.pairs_total,
                "certificatesChecked": len(self.certificates),
                "passRate": self.pass_rate(slack=False),
                "passRateSlack": self.pass_rate(slack=True),
            },
        }


def decompose(
    e: GridSet,
    alpha,
    delta,
    mode: str = "empirical",
    seed: int = 0,
    pair_limit: int = PAIR_LIMIT,
    threads: int | None = None,
) -> Decomposition:
    if e.is_empty():
        raise DomainError("E must be nonempty")
    alpha = density.as_fraction(alpha)
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    delta = density.as_fraction(delta)
    P, eps = pipeline_constants(delta)
    levels = density.bad_cubes(e, eps, clip=True, threads=threads)
    counts = density.z_counts(levels, e.L, e.d)
    N = choose_N(e, eps, alpha, mode, counts)
    garbage = GridSet(e.geometry, (counts >= N) & e.occupied)
    g = e - garbage
    bad = BadCubeSet.from_levels(e.geometry, levels, restrict=g)
    partition = coding_partition(g, bad, N)
    flat_pieces = partition.members
    sizes = [len(p) for p in flat_pieces]
    total = sum(s * (s - 1) // 2 for s in sizes)
    pairs = sample_pairs(flat_pieces, e.geometry, pair_limit, seed)
    certs: list[tuple[int, Chain]] = []
    if pairs:
        cls = [c for c, _, _ in pairs]
        xs = _coords_of([i for _, i, _ in pairs], e.geometry)
        ys = _coords_of([j for _, _, j in pairs], e.geometry)
        chunks = [(s, min(s + 2048, len(pairs))) for s in range(0, len(pairs), 2048)]
        built = parallel_map(lambda r: build_chains(xs[r[0] : r[1]], ys[r[0] : r[1]], e, P), chunks, threads)
        chains = [c for part in built for c in part]
        certs = list(zip(cls, chains))
    return Decomposition(e, alpha, delta, mode, P, eps, N, partition, garbage, bad, certs, total)


# -- verification -------------------------------------------------------------------------


def graph_chain_exists(x: np.ndarray, y: np.ndarray, e: GridSet, delta, slack: bool = True) -> bool | None:
    """Shortest-path search over E cells for a qualifying chain; None if too large to search."""
    delta = float(density.as_fraction(delta))
    dxy = math.dist(x, y)
    extra = 2 * math.sqrt(e.d) if slack else 0.0
    budget = (1 + delta) * dxy + extra
    hop = delta * dxy + extra
    lo = np.maximum(np.minimum(x, y) - int(budget) - 1, 0)
    hi = np.minimum(np.maximum(x, y) + int(budget) + 2, e.geometry.n)
    pts = np.argwhere(e.occupied[tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))]) + lo
    fx = np.linalg.norm(pts - x, axis=1)
    fy = np.linalg.norm(pts - y, axis=1)
    pts = pts[fx + fy <= budget + 1e-9]
    if len(pts) > GRAPH_CAP:
        return None
    src = np.flatnonzero((pts == x).all(axis=1))
    dst = np.flatnonzero((pts == y).all(axis=1))
    if not src.size or not dst.size:
        return False
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    w = np.where(dist < hop, dist, 0.0)
    best = dijkstra(w, directed=False, indices=int(src[0]))[int(dst[0])]
    return bool(best <= budget + 1e-9)


@dataclass
class Verdict:
    passed: bool
    checked: int
    failures: list[dict]
    fallback_used: int = 0

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "checked": self.checked,
            "failures": self.failures,
            "fallbackUsed": self.fallback_used,
        }


def verify_well_connected(
    f: GridSet,
    e: GridSet,
    delta,
    pairs: str | int = "exhaustive",
    seed: int = 0,
    slack: bool = True,
    P: int | None = None,
) -> Verdict:
    """Check that every sampled pair of F joins through E by a qualifying chain."""
    if not f.issubset(e):
        outside = (f - e).coords()[0].tolist()
        return Verdict(False, 0, [{"reason": "piece-outside-set", "x": outside}])
    if P is None:
        P, _ = pipeline_constants(delta)
    idx = f.indices()
    limit = len(idx) * (len(idx) - 1) // 2 if pairs == "exhaustive" else int(pairs)
    chosen = sample_pairs([idx], f.geometry, max(limit, 1), seed)
    if not chosen:
        return Verdict(True, 0, [])
    xs = _coords_of([i for _, i, _ in chosen], f.geometry)
    ys = _coords_of([j for _, _, j in chosen], f.geometry)
    chains = build_chains(xs, ys, e, P)
    failures, fallback = [], 0
    for x, y, ch in zip(xs, ys, chains):
        if ch.passes(delta, slack):
            continue
        fallback += 1
        found = graph_chain_exists(x, y, e, delta, slack)
        if not found:
            failures.append(
                {"reason": "no-chain" if found is False else "search-cap", "x": x.tolist(), "y": y.tolist()}
            )
    return Verdict(not failures, len(chosen), failures, fallback)


def verify_decomposition(
    data: dict, e: GridSet, pairs: str | int = "exhaustive", seed: int = 0, slack: bool = True
) -> Verdict:
    """Re-check a serialized decomposition against E: cell partition, garbage
    measure, and well-connectedness of every piece."""
    from .gridset import from_setfile

    params = data["params"]
    alpha, delta = Fraction(params["alpha"]), Fraction(params["delta"])
    P = int(params["P"])
    pieces = [from_setfile(p) for p in data["pieces"]]
    garbage = from_setfile(data["garbage"])
    failures: list[dict] = []
    acc = np.zeros(e.geometry.shape, dtype=np.int64)
    for p in pieces + [garbage]:
        if p.geometry != e.geometry:
            return Verdict(False, 0, [{"reason": "geometry-mismatch"}])
        acc += p.occupied
    for c in np.argwhere(acc > 1)[:20]:
        failures.append({"reason": "cell-in-two-parts", "x": c.tolist()})
    for c in np.argwhere((acc > 0) & ~e.occupied)[:20]:
        failures.append({"reason": "piece-outside-set", "x": c.tolist()})
    for c in np.argwhere((acc == 0) & e.occupied)[:20]:
        failures.append({"reason": "cell-not-covered", "x": c.tolist()})
    if not measure(garbage) < alpha:
        failures.append({"reason": "garbage-too-large", "lambdaZ": str(measure(garbage))})
    if failures:
        return Verdict(False, 0, failures)
    checked, fallback = 0, 0
    if pairs == "exhaustive":
        per_piece = [pairs] * len(pieces)
    else:
        flat = [p.indices() for p in pieces]
        chosen = sample_pairs(flat, e.geometry, int(pairs), seed)
        per_piece = [0] * len(pieces)
        for c, _, _ in chosen:
            per_piece[c] += 1
    for i, (p, budget) in enumerate(zip(pieces, per_piece)):
        if budget == 0 or p.count() < 2:
            continue
        v = verify_well_connected(p, e, delta, budget, seed + i, slack, P)
        checked += v.checked
        fallback += v.fallback_used
        for f in v.failures:
            f["piece"] = i
        failures.extend(v.failures)
    return Verdict(not failures, checked, failures, fallback)
