"""Slow reference implementations by direct enumeration.

Everything here is written straight from the defining formulas with plain
loops over lattice points, in half-cell integer units (the center of cell
``c`` sits at ``2c + 1``). Only the domain value types are shared with the
rest of the package, so agreement between the two is meaningful evidence.
"""

from __future__ import annotations

import itertools
import math
from decimal import Decimal, localcontext
from fractions import Fraction

from .dyadic import DyadicCube, GridPoint, Region
from .errors import CapExceededError
from .gridset import GridSet
from .multires import Ball

MAX_D = 2
MAX_L = 6
MAX_FAMILY = 100_000


def _check(e_or_d, L=None):
    if isinstance(e_or_d, GridSet):
        d, L = e_or_d.d, e_or_d.L
    else:
        d = e_or_d
    if d > MAX_D or L > MAX_L:
        raise CapExceededError(f"oracle caps are d <= {MAX_D}, L <= {MAX_L}; got d={d}, L={L}")


def _lattice(d: int, lo: int, hi: int):
    return itertools.product(range(lo, hi), repeat=d)


def _occupied(e: GridSet) -> list[tuple[int, ...]]:
    n = e.geometry.n
    return [c for c in _lattice(e.d, 0, n) if e.occupied[c]]


def _half(c) -> tuple[int, ...]:
    return tuple(2 * v + 1 for v in c)


def _sq(p, q) -> int:
    return sum((a - b) ** 2 for a, b in zip(p, q))


def _region_box_half(region: Region, L: int) -> list[tuple[int, int]]:
    """Half-open box of the region in half-cell units."""
    q = region.cube
    side = 2 << (L - q.level)
    h = (region.factor - 1) // 2
    out = []
    for a in q.corner:
        lo, hi = (a - h) * side, (a + h + 1) * side
        if region.clip:
            lo, hi = max(lo, 0), min(hi, 2 << L)
        out.append((lo, hi))
    return out


def _points_in_region(region: Region, d: int, L: int) -> list[tuple[int, ...]]:
    """Cell indices (possibly outside the grid when unclipped) with centers in the region."""
    box = _region_box_half(region, L)
    n = 1 << L
    reach = 3 * n
    pts = []
    for c in _lattice(d, -reach, n + reach):
        hc = _half(c)
        if all(lo <= v < hi for v, (lo, hi) in zip(hc, box)):
            pts.append(c)
    return pts


def _points_in_ball(ball: Ball, d: int, L: int) -> list[tuple[int, ...]]:
    n = 1 << L
    r2 = 4 * ball.A2 * (1 << (2 * (L - ball.level)))  # half-cell units
    ctr = _half(ball.center.coords)
    return [c for c in _lattice(d, 0, n) if _sq(_half(c), ctr) <= r2]


def _sup_min(domain, targets) -> int | None:
    if not targets:
        return None
    worst = 0
    for p in domain:
        hp = _half(p)
        best = min(_sq(hp, _half(t)) for t in targets)
        worst = max(worst, best)
    return worst


def oracle_sparsity(e: GridSet, region) -> Fraction | None:
    """Squared sparsity (exact rational) of E in a Region or Ball; None if undefined."""
    _check(e)
    L = e.L
    occ = set(_occupied(e))
    if isinstance(region, Ball):
        dom = _points_in_ball(region, e.d, L)
        scale_sq = 4 * region.A2 * (1 << (2 * (L - region.level)))
    else:
        dom = _points_in_region(region, e.d, L)
        side = region.factor * (2 << (L - region.cube.level))
        scale_sq = side * side
    inside = [p for p in dom if p in occ]
    sup = _sup_min(dom, inside)
    if sup is None:
        return None
    return Fraction(sup) / scale_sq


def oracle_avg_dist(e: GridSet, ball: Ball) -> float:
    """Mean over lattice points of B of dist(x, E) / r, with distance to all of E."""
    _check(e)
    pts = _points_in_ball(ball, e.d, e.L)
    occ = _occupied(e)
    r = math.sqrt(4 * ball.A2 * (1 << (2 * (e.L - ball.level))))
    total = math.fsum(math.sqrt(min(_sq(_half(p), _half(t)) for t in occ)) for p in pts)
    return total / len(pts) / r


def oracle_nets(d: int, L: int) -> list[list[tuple[int, ...]]]:
    """Greedy nested nets: level k adds, in dictionary order (x_1 fastest), each
    point at distance >= 2^-k from everything already chosen."""
    _check(d, L)
    n = 1 << L
    order = [tuple(reversed(t)) for t in itertools.product(range(n), repeat=d)]
    chosen: list[tuple[int, ...]] = []
    levels = []
    for k in range(L + 1):
        s2 = 4 << (2 * (L - k))
        for p in order:
            if all(_sq(_half(p), _half(q)) >= s2 for q in chosen):
                chosen.append(p)
        levels.append(list(chosen))
    return levels


def oracle_cubes(d: int, L: int):
    for k in range(L + 1):
        for a in itertools.product(range(1 << k), repeat=d):
            yield DyadicCube(k, a)


def oracle_bad_cubes(e: GridSet, eps, clip: bool = True) -> set[DyadicCube]:
    _check(e)
    eps = Fraction(eps)
    occ = set(_occupied(e))
    out = set()
    for q in oracle_cubes(e.d, e.L):
        three = _points_in_region(Region(q, 3, True), e.d, e.L)
        if not any(p in occ for p in three):
            continue
        s = oracle_sparsity(e, Region(q, 7, clip))
        if s is not None and s >= eps * eps:
            out.add(q)
    return out


def oracle_carleson_cubes(e: GridSet, eps, clip: bool = True) -> Fraction:
    return sum((Fraction(1, 1 << (q.level * e.d)) for q in oracle_bad_cubes(e, eps, clip)), Fraction(0))


def oracle_carleson_balls(e: GridSet, eps, balls) -> Fraction:
    """Sum of mu(B cap [0,1]^d) over balls meeting E with sparsity >= eps."""
    _check(e)
    balls = list(balls)
    if len(balls) > MAX_FAMILY:
        raise CapExceededError("family too large for the oracle")
    eps = Fraction(eps)
    total = Fraction(0)
    for b in balls:
        s = oracle_sparsity(e, b)
        if s is not None and s >= eps * eps:
            total += Fraction(len(_points_in_ball(b, e.d, e.L)), 1 << (e.L * e.d))
    return total


def oracle_z_counts(e: GridSet, eps, clip: bool = True) -> dict[tuple[int, ...], int]:
    """Per cell, the number of bad Q whose (unclipped) 7Q contains the cell center."""
    bad = oracle_bad_cubes(e, eps, clip)
    counts = {c: 0 for c in _lattice(e.d, 0, e.geometry.n)}
    for q in bad:
        box = _region_box_half(Region(q, 7, False), e.L)
        for c in counts:
            if all(lo <= v < hi for v, (lo, hi) in zip(_half(c), box)):
                counts[c] += 1
    return counts


def oracle_min_cube(x: GridPoint, y: GridPoint, L: int) -> DyadicCube:
    """Finest level with a cube whose unclipped 3Q holds both points; first corner
    in lexicographic order."""
    _check(len(x.coords), L)
    d = len(x.coords)
    for k in range(L, -1, -1):
        for a in itertools.product(range(1 << k), repeat=d):
            box = _region_box_half(Region(DyadicCube(k, a), 3, False), L)
            if all(lo <= v < hi for v, (lo, hi) in zip(_half(x.coords), box)) and all(
                lo <= v < hi for v, (lo, hi) in zip(_half(y.coords), box)
            ):
                return DyadicCube(k, a)
    raise AssertionError("level 0 always contains both points")


def oracle_cell_label(x: GridPoint, q: DyadicCube, L: int) -> int:
    """1-based position of x's cell among the 3^d cells of 3Q, x_1 fastest."""
    d = len(x.coords)
    offsets = [tuple(reversed(t)) for t in itertools.product(range(3), repeat=d)]
    s = 2 << (L - q.level)
    for i, t in enumerate(offsets, start=1):
        lo = [(a - 1 + o) * s for a, o in zip(q.corner, t)]
        if all(l <= v < l + s for v, l in zip(_half(x.coords), lo)):
            return i
    raise ValueError("point not in 3Q")


def oracle_chain_check(points, e: GridSet, delta) -> dict:
    """Verdict for a chain of cell indices: all points in E, every step
    < delta |x - y|, and total length <= (1 + delta) |x - y|."""
    delta = Fraction(delta)
    pts = [tuple(int(v) for v in p) for p in points]
    in_e = all(e.occupied[p] for p in pts)
    dxy = _sq(pts[0], pts[-1])
    steps = [_sq(a, b) for a, b in zip(pts, pts[1:])]
    step_ok = all(Fraction(s) < delta * delta * dxy for s in steps)
    with localcontext() as ctx:
        ctx.prec = 80
        length = sum((Decimal(s).sqrt() for s in steps), Decimal(0))
        bound = (Decimal(delta.numerator) / Decimal(delta.denominator) + 1) * Decimal(dxy).sqrt()
        length_ok = length <= bound
    return {"inE": in_e, "stepOk": step_ok, "lengthOk": length_ok, "pass": in_e and step_ok and length_ok}


def oracle_counterexample_density(k: int, L: int) -> Fraction:
    """Max of |E_k cap [x-r, x+r] cap [0,1]| / |[x-r, x+r] cap [0,1]| over grid
    lines x and grid radii r >= 2^-k, by counting cells one at a time."""
    if L > 10:
        raise CapExceededError("counterexample oracle capped at L <= 10")
    n = 1 << L
    block = 1 << (L - k - 2)
    occ = [(c // block) % 2 == 0 for c in range(n)]
    best = Fraction(0)
    for r in range(1 << (L - k), n + 1):
        for x in range(n + 1):
            lo, hi = max(x - r, 0), min(x + r, n)
            best = max(best, Fraction(sum(occ[lo:hi]), hi - lo))
    return best
