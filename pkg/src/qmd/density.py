"""Metric density functionals: sparsity, averaged distance, Carleson packing
sums, dense-scale search, the Z_N sets, and the interval counterexample audit.

Suprema and averages run over lattice cell centers. Every threshold test of
the form ``sparse >= eps`` is decided exactly by comparing integer squared
distances (cell units) with ``eps^2 * scale^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
from scipy import ndimage

from . import _windows
from .dyadic import DyadicCube, GridPoint, Region, region_of
from .errors import DomainError, EmptyBallError, ResolutionTooCoarseError
from .gridset import GridSet, gen_counterexample, measure
from .multires import (
    Ball,
    MultiresFamily,
    as_A2,
    ball_mask,
    theoretical_overlap_bound,
)

BAD_SAMPLE_CAP = 50


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


def _ceil_int(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


# -- values -------------------------------------------------------------------


@dataclass(frozen=True)
class SparsityValue:
    """``sqrt(sup_sq) / scale`` with both pieces kept exact (cell units)."""

    sup_sq: int
    scale_sq: Fraction
    d: int

    @property
    def value(self) -> float:
        return math.sqrt(self.sup_sq / self.scale_sq)

    @property
    def slack(self) -> float:
        """Continuum discretization bound sqrt(d) * 2^-L / scale."""
        return math.sqrt(self.d / self.scale_sq)

    def at_least(self, eps) -> bool:
        eps = as_fraction(eps)
        return self.sup_sq >= eps * eps * self.scale_sq

    def below(self, eps) -> bool:
        return not self.at_least(eps)

    def __float__(self):
        return self.value


def sparsity_region(e: GridSet, region: Region, scale_sq: Fraction | None = None) -> SparsityValue | None:
    """Sparsity of E in a cube expansion, normalized by the unclipped side."""
    L = e.L
    lo, hi = region.cell_bounds(L)
    shape = tuple(b - a for a, b in zip(lo, hi))
    if any(s <= 0 for s in shape):
        return None
    win = _windows.LatticeWindows(e.occupied)
    sq, touches, _ = win.evaluate(np.asarray([lo]), shape, None, inside_only=region.clip)
    if not touches[0]:
        return None
    if scale_sq is None:
        side = region.factor << (L - region.cube.level)
        scale_sq = Fraction(side * side)
    return SparsityValue(int(sq[0]), scale_sq, e.d)


def sparsity_7Q(e: GridSet, q: DyadicCube, clip: bool = True) -> SparsityValue | None:
    return sparsity_region(e, region_of(q, 7, clip))


def sparsity_ball(e: GridSet, b: Ball) -> SparsityValue | None:
    """sup over lattice points of B of dist(x, E cap B) / radius; None if E misses B."""
    r2 = b.radius_sq_cells(e.L)
    R, mask = ball_mask(r2, e.d)
    win = _windows.LatticeWindows(e.occupied)
    low = np.asarray(b.center.coords) - R
    sq, touches, _ = win.evaluate(low[None, :], mask.shape, mask, inside_only=True)
    if not touches[0]:
        return None
    return SparsityValue(int(sq[0]), r2, e.d)


def sq_dist_to_set(e: GridSet) -> np.ndarray:
    """Exact squared distance (cell units) from every grid point to E."""
    if e.is_empty():
        raise DomainError("distance to the empty set is undefined")
    occ = e.occupied
    if occ.all():
        return np.zeros(occ.shape, dtype=np.int64)
    idx = ndimage.distance_transform_edt(~occ, return_distances=False, return_indices=True)
    grid = np.indices(occ.shape)
    return ((idx.astype(np.int64) - grid) ** 2).sum(axis=0)


def avg_dist(e: GridSet, b: Ball, dist_sq: np.ndarray | None = None) -> float:
    """Mean over lattice points of B of dist(x, E) / radius (distance to all of E)."""
    if dist_sq is None:
        dist_sq = sq_dist_to_set(e)
    s, c = _ball_root_sums(dist_sq, b.center.coords, b.radius_sq_cells(e.L), e.d)
    if c == 0:
        raise EmptyBallError(f"ball at {b.center} level {b.level} has no grid point")
    return s / c / math.sqrt(b.radius_sq_cells(e.L))


def _ball_root_sums(dist_sq, center, r2: Fraction, d: int) -> tuple[float, int]:
    R, mask = ball_mask(r2, d)
    n = dist_sq.shape[0]
    low = np.asarray(center) - R
    clo = np.maximum(low, 0)
    chi = np.minimum(low + 2 * R + 1, n)
    sub = dist_sq[tuple(slice(a, b) for a, b in zip(clo, chi))]
    m = mask[tuple(slice(a - l, b - l) for a, b, l in zip(clo, chi, low))]
    vals = np.sqrt(sub[m].astype(np.float64))
    return math.fsum(vals), int(m.sum())


# -- level sweeps ---------------------------------------------------------------


@dataclass
class BallLevel:
    k: int
    centers: np.ndarray
    sq: np.ndarray  # max-min squared distance, -1 where E misses the ball
    touches: np.ndarray
    counts: np.ndarray  # lattice points of B cap [0,1]^d
    radius_sq: Fraction

    def bad(self, eps) -> np.ndarray:
        eps = as_fraction(eps)
        thr = _ceil_int(eps * eps * self.radius_sq)
        return self.touches & (self.sq >= thr)


def ball_level(e: GridSet, fam: MultiresFamily, k: int) -> BallLevel:
    centers = fam.centers(k)
    r2 = fam.radius_sq_cells(k)
    R, mask = ball_mask(r2, e.d)
    win = _windows.LatticeWindows(e.occupied)
    sq, touches, counts = win.evaluate(centers - R, mask.shape, mask, inside_only=True)
    return BallLevel(k, centers, sq, touches, counts, r2)


def ball_levels(e: GridSet, fam: MultiresFamily, threads: int | None = None) -> list[BallLevel]:
    return _windows.parallel_map(lambda k: ball_level(e, fam, k), list(fam.levels()), threads)


@dataclass
class CubeLevel:
    k: int
    touch3: np.ndarray  # 3Q meets E, shape (2^k,)*d
    sq: np.ndarray  # sup squared distance over 7Q, -1 where not evaluated/undefined
    scale_sq: int  # side(7Q)^2 in cell units
    bad: np.ndarray


def block_counts(occ: np.ndarray, k: int) -> np.ndarray:
    """Occupied cells per level-k dyadic cube."""
    d = occ.ndim
    L = int(math.log2(occ.shape[0])) if occ.shape[0] > 1 else 0
    s = 1 << (L - k)
    m = 1 << k
    shp = []
    for _ in range(d):
        shp += [m, s]
    return occ.reshape(shp).sum(axis=tuple(range(1, 2 * d, 2)))


def touches_3Q(occ: np.ndarray, k: int) -> np.ndarray:
    present = block_counts(occ, k) > 0
    return ndimage.maximum_filter(present, size=3, mode="constant", cval=False)


def cube_level(e: GridSet, k: int, eps, clip: bool = True) -> CubeLevel:
    eps = as_fraction(eps)
    L = e.L
    s = 1 << (L - k)
    touch3 = touches_3Q(e.occupied, k)
    corners = np.argwhere(touch3)
    sq = np.full(touch3.shape, -1, dtype=np.int64)
    if len(corners):
        win = _windows.LatticeWindows(e.occupied)
        vals, _, _ = win.evaluate((corners - 3) * s, (7 * s,) * e.d, None, inside_only=clip)
        sq[tuple(corners.T)] = vals
    scale_sq = 49 * s * s
    thr = _ceil_int(eps * eps * scale_sq)
    bad = touch3 & (sq >= thr)
    return CubeLevel(k, touch3, sq, scale_sq, bad)


def bad_cubes(e: GridSet, eps, clip: bool = True, threads: int | None = None) -> list[CubeLevel]:
    """Per-level maps of {Q : 3Q cap E != {}, sparse(E, 7Q) >= eps}."""
    if e.is_empty():
        raise DomainError("E must be nonempty")
    return _windows.parallel_map(lambda k: cube_level(e, k, eps, clip), list(range(e.L + 1)), threads)


# -- theoretical constants ---------------------------------------------------------


def delta_of(eps, C) -> Fraction:
    """Average-distance threshold below which sparsity is < eps (C-doubling measure)."""
    eps, C = as_fraction(eps), as_fraction(C)
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if C < 1:
        raise DomainError(f"doubling constant must be >= 1, got {C}")
    N = 0
    while (1 << N) * eps < 16:
        N += 1
    return eps / 8 / C**N


def doubling_constant(d: int) -> int:
    """Doubling constant of Lebesgue measure restricted to the convex set [0,1]^d."""
    return 2**d


def cx_of(d: int, A=None, A2=None) -> int:
    return 4 * theoretical_overlap_bound(d, A, A2)


def k_of(eps, d: int, A=None, A2=None) -> Fraction:
    """Packing constant K = C_X / delta for the ball family with constant A."""
    return Fraction(cx_of(d, A, A2)) / delta_of(eps, doubling_constant(d))


def sqrt_upper(n: int, digits: int = 6) -> Fraction:
    """Rational upper bound for sqrt(n), exact when n is a square."""
    r = math.isqrt(n)
    if r * r == n:
        return Fraction(r)
    scale = 10**digits
    return Fraction(math.isqrt(n * scale * scale) + 1, scale)


def cube_multiplicity(d: int) -> int:
    """Bound on how many level-k cubes Q can share one enclosing ball B_Q.

    B_Q is picked among net points within 3.5 sqrt(d) 2^-k of Q's center, so
    the cube centers served by one ball sit in a ball of that radius; a
    volume count of the (Z + 1/2)^d lattice gives the bound.
    """
    omega = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    # nudge so float error cannot round an integral volume down
    return math.floor(omega * (4 * math.sqrt(d)) ** d + 1e-9)


def ktilde_of(eps, d: int) -> Fraction:
    """Cube packing constant: D * K(7 eps / (A (d+1))) with A = 7 sqrt(d).

    A is irrational for non-square d; sqrt(d) is replaced by a rational upper
    bound, which lowers the rescaled eps and so only enlarges the constant.
    """
    eps = as_fraction(eps)
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    eps_ball = eps / (sqrt_upper(d) * (d + 1))
    return cube_multiplicity(d) * k_of(eps_ball, d, A2=49 * d)


def z_bound(eps, d: int, N: int) -> Fraction:
    return Fraction(7**d) * ktilde_of(eps, d) / N


# -- Carleson packing sums -------------------------------------------------------------


@dataclass
class CarlesonReport:
    epsilon: Fraction
    family: str
    per_level: list[dict]
    total: Fraction
    unfiltered_total: Fraction
    theoretical_bound: Fraction | None
    slack: float
    bad_sample: list[str]
    bad_overflow: int
    A2: Fraction | None = None
    clip: bool | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "epsilon": str(self.epsilon),
            "family": self.family,
            "perLevel": self.per_level,
            "total": str(self.total),
            "totalFloat": float(self.total),
            "unfilteredTotal": str(self.unfiltered_total),
            "theoreticalBound": None if self.theoretical_bound is None else str(self.theoretical_bound),
            "withinBound": self.theoretical_bound is None or self.total <= self.theoretical_bound,
            "slack": self.slack,
            "badSample": self.bad_sample,
            "badOverflow": self.bad_overflow,
        }
        if self.A2 is not None:
            out["A2"] = str(self.A2)
        if self.clip is not None:
            out["clip"] = self.clip
        out.update(self.extras)
        return out


def _level_row(k, count, s, u) -> dict:
    return {"k": k, "count": int(count), "sum": str(s), "unfilteredSum": str(u)}


def carleson_sum_balls(
    e: GridSet, eps, fam: MultiresFamily, threads: int | None = None, levels: list[BallLevel] | None = None
) -> CarlesonReport:
    """Sum of mu(B cap [0,1]^d) over balls touching E with sparsity >= eps."""
    if e.is_empty():
        raise DomainError("E must be nonempty")
    eps = as_fraction(eps)
    if levels is None:
        levels = ball_levels(e, fam, threads)
    cell = Fraction(1, e.geometry.ncells)
    rows, total, unfiltered = [], Fraction(0), Fraction(0)
    sample: list[str] = []
    overflow = 0
    for lev in levels:
        bad = lev.bad(eps)
        s = cell * int(lev.counts[bad].sum())
        u = cell * int(lev.counts[lev.touches].sum())
        total += s
        unfiltered += u
        rows.append(_level_row(lev.k, bad.sum(), s, u))
        for i in np.flatnonzero(bad):
            if len(sample) < BAD_SAMPLE_CAP:
                sample.append(f"B({','.join(map(str, lev.centers[i]))};k={lev.k})")
            else:
                overflow += 1
    bound = k_of(eps, e.d, A2=fam.A2) if 0 < eps < 1 else None
    slack = math.sqrt(e.d / fam.A2) * 2.0**-e.L / 2.0**-e.L  # sqrt(d)/A at level L, in units of r
    return CarlesonReport(eps, "balls", rows, total, unfiltered, bound, slack, sample, overflow, A2=fam.A2)


def carleson_sum_cubes(
    e: GridSet, eps, clip: bool = True, threads: int | None = None, levels: list[CubeLevel] | None = None
) -> CarlesonReport:
    """Sum of lambda(Q) over {Q : 3Q cap E != {}, sparse(E, 7Q) >= eps}."""
    if e.is_empty():
        raise DomainError("E must be nonempty")
    eps = as_fraction(eps)
    if levels is None:
        levels = bad_cubes(e, eps, clip, threads)
    rows, total, unfiltered = [], Fraction(0), Fraction(0)
    sample: list[str] = []
    overflow = 0
    for lev in levels:
        vol = Fraction(1, 1 << (lev.k * e.d))
        nb = int(lev.bad.sum())
        s, u = vol * nb, vol * int(lev.touch3.sum())
        total += s
        unfiltered += u
        rows.append(_level_row(lev.k, nb, s, u))
        for a in np.argwhere(lev.bad):
            if len(sample) < BAD_SAMPLE_CAP:
                sample.append(f"{lev.k}:(" + ",".join(map(str, a)) + ")")
            else:
                overflow += 1
    bound = ktilde_of(eps, e.d) if 0 < eps < 1 else None
    slack = math.sqrt(e.d) / 7  # sqrt(d) 2^-L / side(7Q) at the finest level
    return CarlesonReport(eps, "cubes-7Q", rows, total, unfiltered, bound, slack, sample, overflow, clip=clip)


def recheck_bad_sample(report: dict, e: GridSet, fam: MultiresFamily | None = None) -> list[str]:
    """Re-evaluate every listed bad region; return those that are not bad."""
    from .dyadic import parse_cube

    eps = Fraction(report["epsilon"])
    wrong = []
    for item in report["badSample"]:
        if report["family"] == "cubes-7Q":
            q = parse_cube(item)
            v = sparsity_7Q(e, q, bool(report.get("clip", True)))
            from .dyadic import region_of as _r

            lo, hi = _r(q, 3, True).cell_bounds(e.L)
            touch = e.occupied[tuple(slice(a, b) for a, b in zip(lo, hi))].any()
            if v is None or not touch or not v.at_least(eps):
                wrong.append(item)
        else:
            body = item[2:-1]
            cpart, kpart = body.split(";k=")
            center = GridPoint(tuple(int(t) for t in cpart.split(",")))
            b = Ball(center, int(kpart), Fraction(report.get("A2", "1")))
            v = sparsity_ball(e, b)
            if v is None or not v.at_least(eps):
                wrong.append(item)
    return wrong


# -- dense scale search -------------------------------------------------------------------


@dataclass
class DenseScale:
    ball: Ball
    level: int
    sparsity: SparsityValue
    r0_log2: float

    def to_dict(self) -> dict:
        return {
            "center": list(self.ball.center.coords),
            "level": self.level,
            "sparsity": self.sparsity.value,
            "r0Log2": self.r0_log2,
        }


def dense_scale_search(e: GridSet, eps, fam: MultiresFamily) -> DenseScale | None:
    """Coarsest level with a ball touching E whose sparsity is below eps."""
    if e.is_empty():
        return None
    eps = as_fraction(eps)
    alpha = measure(e)
    if 0 < eps < 1:
        K = k_of(eps, e.d, A2=fam.A2)
        r0_log2 = 0.5 * math.log2(fam.A2) - float(K / alpha)
    else:
        r0_log2 = float("nan")
    for k in fam.levels():
        lev = ball_level(e, fam, k)
        good = lev.touches & ~lev.bad(eps)
        hits = np.flatnonzero(good)
        if hits.size:
            i = int(hits[0])
            ball = Ball(GridPoint(tuple(int(v) for v in lev.centers[i])), k, fam.A2)
            return DenseScale(ball, k, SparsityValue(int(lev.sq[i]), lev.radius_sq, e.d), r0_log2)
    return None


# -- Z_N ------------------------------------------------------------------------------


def upsample(arr: np.ndarray, factor: int) -> np.ndarray:
    for ax in range(arr.ndim):
        arr = np.repeat(arr, factor, axis=ax)
    return arr


def z_counts(levels: list[CubeLevel], L: int, d: int, mask_levels: list[np.ndarray] | None = None) -> np.ndarray:
    """Per grid cell, number of bad cubes Q whose 7Q contains the cell center."""
    counts = np.zeros((1 << L,) * d, dtype=np.int64)
    for i, lev in enumerate(levels):
        bad = lev.bad if mask_levels is None else mask_levels[i]
        if not bad.any():
            continue
        c = ndimage.correlate(bad.astype(np.int64), np.ones((7,) * d, dtype=np.int64), mode="constant", cval=0)
        counts += upsample(c, 1 << (L - lev.k))
    return counts


@dataclass
class ZReport:
    epsilon: Fraction
    N: int
    z: GridSet
    measure: Fraction
    bound: Fraction | None

    def to_dict(self) -> dict:
        return {
            "epsilon": str(self.epsilon),
            "N": self.N,
            "lambdaZ": str(self.measure),
            "bound": None if self.bound is None else str(self.bound),
        }


def z_set(e: GridSet, eps, N: int, clip: bool = True, counts: np.ndarray | None = None) -> ZReport:
    if N < 1:
        raise DomainError("N must be >= 1")
    eps = as_fraction(eps)
    if counts is None:
        counts = z_counts(bad_cubes(e, eps, clip), e.L, e.d)
    z = GridSet(e.geometry, counts >= N)
    bound = z_bound(eps, e.d, N) if 0 < eps < 1 else None
    return ZReport(eps, N, z, measure(z), bound)


# -- empirical audits of the proof inequalities ------------------------------------------


def average_distance_violations(e: GridSet, eps, fam: MultiresFamily, levels: list[BallLevel] | None = None) -> dict:
    """Balls touching E with d_E(B) < delta(eps, C) but sparsity >= eps + slack."""
    eps = as_fraction(eps)
    delta = delta_of(eps, doubling_constant(e.d))
    if levels is None:
        levels = ball_levels(e, fam)
    dist_sq = sq_dist_to_set(e)
    checked, violations, contrapositive_fail = 0, [], 0
    for lev in levels:
        r = math.sqrt(lev.radius_sq)
        slack = math.sqrt(e.d) / r
        for i in np.flatnonzero(lev.touches):
            checked += 1
            s, c = _ball_root_sums(dist_sq, lev.centers[i], lev.radius_sq, e.d)
            de = s / c / r
            sp = math.sqrt(lev.sq[i] / lev.radius_sq)
            if de < delta and sp >= float(eps) + slack:
                violations.append({"k": lev.k, "center": lev.centers[i].tolist(), "dE": de, "sparsity": sp})
            if sp >= float(eps) and de < float(delta) - slack:
                contrapositive_fail += 1
    return {"checked": checked, "delta": delta, "violations": violations, "contrapositiveFailures": contrapositive_fail}


def avg_dist_packing_sum(e: GridSet, fam: MultiresFamily, levels: list[BallLevel] | None = None) -> list[float]:
    """Cumulative sum over levels of d_E(B) mu(B) for balls touching E."""
    if levels is None:
        levels = ball_levels(e, fam)
    dist_sq = sq_dist_to_set(e)
    cell = 1.0 / e.geometry.ncells
    out, acc = [], 0.0
    for lev in levels:
        r = math.sqrt(lev.radius_sq)
        parts = []
        for i in np.flatnonzero(lev.touches):
            s, _ = _ball_root_sums(dist_sq, lev.centers[i], lev.radius_sq, e.d)
            parts.append(s / r * cell)
        acc += math.fsum(parts)
        out.append(acc)
    return out


def enclosing_ball_centers(fam: MultiresFamily, k: int) -> np.ndarray:
    """For every level-k cube, the first net point within 3.5 sqrt(d) 2^-k of its
    center (so that 7Q sits inside the ball of radius 7 sqrt(d) 2^-k).

    Returns an array (2^k,)*d + (d,) of centers; -1 rows where none exists.
    """
    g = fam.geometry
    s = 1 << (g.L - k)
    pts = fam.centers(k)
    half = 2 * pts + 1
    m = 1 << k
    corners = np.stack(np.meshgrid(*([np.arange(m)] * g.d), indexing="ij"), axis=-1).reshape(-1, g.d)
    ctr = (2 * corners + 1) * s
    lim = 49 * g.d * s * s
    out = np.full((len(corners), g.d), -1, dtype=np.int64)
    for start in range(0, len(corners), 512):
        c = ctr[start : start + 512]
        sq = ((c[:, None, :] - half[None, :, :]) ** 2).sum(axis=2)
        ok = sq <= lim
        has = ok.any(axis=1)
        first = ok.argmax(axis=1)
        out[start : start + 512][has] = pts[first[has]]
    return out.reshape((m,) * g.d + (g.d,))


# -- the interval counterexample ---------------------------------------------------------


@dataclass
class CounterexampleReport:
    k: int
    L: int
    epsilon: Fraction
    r0: Fraction
    max_density: Fraction
    argmax: tuple[Fraction, Fraction]
    bound: Fraction
    dyadic_ok: bool
    dyadic_checked: int
    below_r0_max_density: Fraction | None
    rows: list[tuple[Fraction, Fraction]]

    @property
    def passed(self) -> bool:
        return self.max_density <= self.bound and self.bound < 1 - self.epsilon and self.dyadic_ok

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "level": self.L,
            "epsilon": str(self.epsilon),
            "r0": str(self.r0),
            "maxDensity": str(self.max_density),
            "argmax": {"x": str(self.argmax[0]), "r": str(self.argmax[1])},
            "bound": str(self.bound),
            "dyadicOk": self.dyadic_ok,
            "dyadicChecked": self.dyadic_checked,
            "belowR0MaxDensity": None if self.below_r0_max_density is None else str(self.below_r0_max_density),
            "pass": self.passed,
        }


def _max_fraction(num: np.ndarray, den: np.ndarray) -> tuple[Fraction, int]:
    f = num / den
    top = f.max()
    cand = np.flatnonzero(f >= top - 1e-9)
    best, arg = None, -1
    for i in cand:
        v = Fraction(int(num.flat[i]), int(den.flat[i]))
        if best is None or v > best:
            best, arg = v, int(i)
    return best, arg


def counterexample_audit(k: int, L: int, eps=Fraction(1, 10)) -> CounterexampleReport:
    """Measure density of E_k in every grid-aligned interval [x-r, x+r] cap [0,1]
    with r >= 2^-k, plus the half-density check on dyadic intervals."""
    if L < k + 2:
        raise ResolutionTooCoarseError(f"level {L} too coarse for E_{k}")
    eps = as_fraction(eps)
    e = gen_counterexample(k, L)
    n = e.geometry.n
    prefix = np.concatenate([[0], np.cumsum(e.occupied.astype(np.int64))])
    x = np.arange(n + 1)
    r_min = 1 << (L - k)

    def sweep(radii):
        lo = np.maximum(x[None, :] - radii[:, None], 0)
        hi = np.minimum(x[None, :] + radii[:, None], n)
        return prefix[hi] - prefix[lo], hi - lo

    radii = np.arange(r_min, n + 1)
    num, den = sweep(radii)
    best, arg = _max_fraction(num, den)
    ri, xi = np.unravel_index(arg, num.shape)
    rows = []
    for i, r in enumerate(radii):
        v, _ = _max_fraction(num[i], den[i])
        rows.append((Fraction(int(r), n), v))
    below = None
    if r_min > 1:
        nb, db = sweep(np.arange(1, r_min))
        below, _ = _max_fraction(nb, db)
    dyadic_ok, checked = True, 0
    for j in range(0, k + 2):
        side = 1 << (L - j)
        blocks = e.occupied.reshape(1 << j, side).sum(axis=1)
        checked += blocks.size
        if not (2 * blocks == side).all():
            dyadic_ok = False
    return CounterexampleReport(
        k,
        L,
        eps,
        Fraction(1, 1 << k),
        best,
        (Fraction(int(x[xi]), n), Fraction(int(radii[ri]), n)),
        Fraction(7, 8),
        dyadic_ok,
        checked,
        below,
        rows,
    )


def enclosing_ball_audit(e: GridSet, nets, clip: bool = True, slack_cells: float | None = None) -> dict:
    """Compare sparse(E, 7Q) with (A (d+1) / 7) * sparse(E, B_Q), A = 7 sqrt(d),
    for every cube with E cap 7Q nonempty; B_Q from :func:`enclosing_ball_centers`.

    Returns the worst excess ratio and the violations beyond the slack
    (default (d + 1) sqrt(d) cells, measured against side(7Q)).
    """
    d, L = e.d, e.L
    fam = MultiresFamily(nets, Fraction(49 * d))
    factor = math.sqrt(d) * (d + 1)
    if slack_cells is None:
        slack_cells = (d + 1) * math.sqrt(d)
    win = _windows.LatticeWindows(e.occupied)
    checked, violations, worst = 0, [], -math.inf
    for k in range(L + 1):
        s = 1 << (L - k)
        m = 1 << k
        corners = np.argwhere(np.ones((m,) * d, dtype=bool))
        sq7, touch7, _ = win.evaluate((corners - 3) * s, (7 * s,) * d, None, inside_only=clip)
        centers = enclosing_ball_centers(fam, k).reshape(-1, d)
        r2 = fam.radius_sq_cells(k)
        R, mask = ball_mask(r2, d)
        sqb, touchb, _ = win.evaluate(centers - R, mask.shape, mask, inside_only=True)
        for i in np.flatnonzero(touch7):
            checked += 1
            lhs = math.sqrt(sq7[i]) / (7 * s)
            rhs = factor * math.sqrt(max(sqb[i], 0) / r2) + slack_cells / (7 * s)
            worst = max(worst, lhs - factor * math.sqrt(max(sqb[i], 0) / r2))
            if (centers[i] < 0).any() or lhs > rhs:
                violations.append({"k": k, "corner": corners[i].tolist(), "lhs": lhs, "rhs": rhs})
    return {"checked": checked, "violations": violations, "worstExcess": worst}
