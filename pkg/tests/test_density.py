import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmd import density as D
from qmd.dyadic import DyadicCube, GridGeometry, GridPoint, Region, cube
from qmd.errors import DomainError, ResolutionTooCoarseError
from qmd.gridset import GridSet, gen_bernoulli, gen_counterexample, gen_full, measure
from qmd.multires import Ball, build_nets, family
from qmd.oracle import (
    oracle_avg_dist,
    oracle_bad_cubes,
    oracle_carleson_balls,
    oracle_carleson_cubes,
    oracle_sparsity,
    oracle_z_counts,
)


def fam_for(e, A=1, A2=None):
    return family(build_nets(e.geometry), A=A, A2=A2)


def random_set(d, L, seed, p=0.5):
    e = gen_bernoulli(GridGeometry(d, L), p, seed)
    if e.is_empty():
        e = GridSet.from_indices(e.geometry, [seed % e.geometry.ncells])
    return e


# -- sparsity ---------------------------------------------------------------------


def test_sparsity_of_full_set_is_zero():
    e = gen_full(GridGeometry(2, 4))
    assert D.sparsity_ball(e, Ball(GridPoint((3, 7)), 1, Fraction(1))).sup_sq == 0
    assert D.sparsity_7Q(e, cube(2, 1, 3)).value == 0


def test_sparsity_of_single_point_in_unit_ball():
    # E is one cell at the ball's center; the farthest center is a radius away
    g = GridGeometry(1, 4)
    e = GridSet.from_indices(g, [8])
    v = D.sparsity_ball(e, Ball(GridPoint((8,)), 1, Fraction(1)))
    assert v.value == 1
    assert v.slack == pytest.approx(1 / 8)


def test_sparsity_of_alternating_set_in_unit_ball():
    # the last gap of E_1 leaves a center 1/8 from E against radius 1/2
    for L in (6, 8):
        e = gen_counterexample(1, L)
        c = (1 << (L - 1)) - 1
        v = D.sparsity_ball(e, Ball(GridPoint((c,)), 1, Fraction(1)))
        assert v.sup_sq / v.scale_sq == Fraction(1, 16)


def test_sparsity_undefined_when_region_misses_set():
    g = GridGeometry(1, 5)
    e = GridSet.from_indices(g, [0])
    assert D.sparsity_7Q(e, cube(5, 20)) is None
    assert D.sparsity_ball(e, Ball(GridPoint((20,)), 4, Fraction(1))) is None


def test_sparsity_threshold_is_exact():
    v = D.SparsityValue(sup_sq=1, scale_sq=Fraction(4), d=1)  # exactly 1/2
    assert v.at_least(Fraction(1, 2))
    assert not v.at_least(Fraction(1, 2) + Fraction(1, 10**12))


@given(st.integers(0, 10**6), st.integers(0, 3), st.data(), st.booleans())
def test_sparsity_7Q_matches_oracle_2d(seed, k, data, clip):
    e = random_set(2, 4, seed, p=data.draw(st.sampled_from([0.1, 0.5, 0.9])))
    a = tuple(data.draw(st.integers(0, (1 << k) - 1)) for _ in range(2))
    q = DyadicCube(k, a)
    got = D.sparsity_7Q(e, q, clip)
    ref = oracle_sparsity(e, Region(q, 7, clip))
    if ref is None:
        assert got is None
    else:
        assert Fraction(got.sup_sq) / got.scale_sq == ref


@given(st.integers(1, 2), st.integers(0, 10**6), st.data())
def test_sparsity_ball_matches_oracle(d, seed, data):
    L = 5 if d == 1 else 3
    e = random_set(d, L, seed)
    k = data.draw(st.integers(0, L))
    c = tuple(data.draw(st.integers(0, (1 << L) - 1)) for _ in range(d))
    A2 = data.draw(st.sampled_from([Fraction(1), Fraction(2), Fraction(9, 4)]))
    b = Ball(GridPoint(c), k, A2)
    got = D.sparsity_ball(e, b)
    ref = oracle_sparsity(e, b)
    assert (got is None) == (ref is None)
    if got is not None:
        assert Fraction(got.sup_sq) / got.scale_sq == ref
        assert got.value <= 2


# -- average distance -------------------------------------------------------------------


def test_avg_dist_full_is_zero():
    e = gen_full(GridGeometry(2, 3))
    assert D.avg_dist(e, Ball(GridPoint((2, 2)), 1, Fraction(1))) == 0


def test_avg_dist_alternating_set_reference_value():
    e = gen_counterexample(1, 5)
    b = Ball(GridPoint((15,)), 1, Fraction(1))
    # direct summation over the 32 centers
    assert D.avg_dist(e, b) == pytest.approx(0.0546875, rel=1e-12)


@given(st.integers(1, 2), st.integers(0, 10**6), st.data())
def test_avg_dist_matches_oracle_and_bounds(d, seed, data):
    L = 5 if d == 1 else 3
    e = random_set(d, L, seed, p=0.3)
    k = data.draw(st.integers(0, L))
    c = tuple(data.draw(st.integers(0, (1 << L) - 1)) for _ in range(d))
    b = Ball(GridPoint(c), k, Fraction(1))
    v = D.avg_dist(e, b)
    assert v == pytest.approx(oracle_avg_dist(e, b), rel=1e-12, abs=1e-15)
    if D.sparsity_ball(e, b) is not None:
        assert 0 <= v <= 2


# -- Carleson sums -----------------------------------------------------------------------


def test_carleson_full_set_has_no_bad_regions():
    e = gen_full(GridGeometry(2, 5))
    assert D.carleson_sum_balls(e, Fraction(1, 10), fam_for(e)).total == 0
    assert D.carleson_sum_cubes(e, Fraction(1, 10)).total == 0


def test_carleson_cubes_single_cell():
    e = GridSet.from_indices(GridGeometry(1, 4), [5])
    rep = D.carleson_sum_cubes(e, Fraction(1, 2))
    assert rep.total == Fraction(1, 4)
    assert sorted(rep.bad_sample) == ["3:(3)", "4:(4)", "4:(6)"]
    assert rep.total == oracle_carleson_cubes(e, Fraction(1, 2))


def test_carleson_report_schema_and_recheck():
    e = gen_counterexample(2, 7)
    rep = D.carleson_sum_cubes(e, Fraction(1, 4)).to_dict()
    assert {"epsilon", "family", "perLevel", "total", "theoreticalBound", "slack", "badSample"} <= rep.keys()
    assert Fraction(rep["total"]) == sum(Fraction(r["sum"]) for r in rep["perLevel"])
    assert D.recheck_bad_sample(rep, e) == []
    fam = fam_for(e)
    rb = D.carleson_sum_balls(e, Fraction(1, 4), fam).to_dict()
    assert D.recheck_bad_sample(rb, e, fam) == []


def test_recheck_catches_forged_entries():
    e = gen_full(GridGeometry(1, 4))
    rep = D.carleson_sum_cubes(gen_counterexample(1, 4), Fraction(1, 4)).to_dict()
    assert D.recheck_bad_sample(rep, e) == rep["badSample"]


@given(st.integers(1, 2), st.integers(0, 10**6), st.sampled_from([Fraction(1, 10), Fraction(1, 4), Fraction(1, 2)]))
def test_carleson_sums_match_oracle(d, seed, eps):
    L = 4 if d == 1 else 2
    e = random_set(d, L, seed)
    assert D.carleson_sum_cubes(e, eps).total == oracle_carleson_cubes(e, eps)
    assert D.carleson_sum_cubes(e, eps, clip=False).total == oracle_carleson_cubes(e, eps, clip=False)
    fam = fam_for(e, A=2)
    assert D.carleson_sum_balls(e, eps, fam).total == oracle_carleson_balls(e, eps, list(fam.all_balls()))


@given(st.integers(1, 2), st.integers(0, 10**6))
def test_carleson_monotone_in_eps_and_order_free(d, seed):
    L = 6 if d == 1 else 4
    e = random_set(d, L, seed, p=0.6)
    totals = [D.carleson_sum_cubes(e, Fraction(j, 20)).total for j in range(1, 20)]
    assert all(a >= b for a, b in zip(totals, totals[1:]))
    fam = fam_for(e)
    levels = D.ball_levels(e, fam)
    forward = D.carleson_sum_balls(e, Fraction(1, 4), fam, levels=levels).total
    backward = D.carleson_sum_balls(e, Fraction(1, 4), fam, levels=levels[::-1]).total
    threaded = D.carleson_sum_balls(e, Fraction(1, 4), fam, threads=3).total
    assert forward == backward == threaded


def test_unfiltered_sum_grows_with_depth():
    for L in (4, 6, 8):
        e = gen_counterexample(1, L)
        rep = D.carleson_sum_balls(e, Fraction(1, 4), fam_for(e))
        assert rep.unfiltered_total >= (L + 1) * measure(e)
        assert rep.total <= rep.theoretical_bound


# -- constants ----------------------------------------------------------------------------


def test_delta_reference_value():
    assert D.delta_of(Fraction(1, 2), 2) == Fraction(1, 512)


@given(st.fractions(Fraction(1, 1000), Fraction(999, 1000)), st.fractions(Fraction(1, 1000), Fraction(999, 1000)), st.integers(1, 16), st.integers(1, 16))
def test_delta_monotone(e1, e2, c1, c2):
    lo, hi = sorted((e1, e2))
    assert D.delta_of(lo, c1) <= D.delta_of(hi, c1)
    a, b = sorted((c1, c2))
    assert D.delta_of(e1, a) >= D.delta_of(e1, b)


def test_constant_domain_errors():
    for bad in (0, 1, Fraction(3, 2), -1):
        with pytest.raises(DomainError):
            D.delta_of(bad, 2)
    with pytest.raises(DomainError):
        D.delta_of(Fraction(1, 2), Fraction(1, 2))
    with pytest.raises(DomainError):
        D.ktilde_of(1, 2)


def test_cx_and_ktilde():
    from qmd.multires import theoretical_overlap_bound

    assert D.cx_of(1, A=1) == 4 * theoretical_overlap_bound(1, A=1) == 16
    assert D.k_of(Fraction(1, 2), 1) == 16 * 512
    assert D.cube_multiplicity(1) == 8
    assert D.ktilde_of(Fraction(1, 4), 2) >= D.ktilde_of(Fraction(1, 2), 2) > 0
    # a rational upper bound for sqrt(d) keeps the constant conservative
    assert D.sqrt_upper(2) ** 2 > 2 and D.sqrt_upper(4) == 2


# -- dense scale --------------------------------------------------------------------------


def test_dense_scale_full_set_level_zero():
    e = gen_full(GridGeometry(2, 4))
    assert D.dense_scale_search(e, Fraction(1, 10), fam_for(e)).level == 0


def test_dense_scale_on_alternating_sets():
    # coarse blocks: the witness sits inside a solid block a few levels down
    e = gen_counterexample(1, 8)
    hit = D.dense_scale_search(e, Fraction(1, 10), fam_for(e))
    assert hit.level == 3 and hit.sparsity.value == 1 / 32
    # fine alternation: dense at the top scale with sparsity 2^-(k+2)
    for k in (3, 4, 5, 6):
        e = gen_counterexample(k, 8)
        hit = D.dense_scale_search(e, Fraction(1, 10), fam_for(e))
        assert hit.level == 0 and hit.sparsity.value == 2.0 ** -(k + 2)
        assert hit.r0_log2 < 0


# -- Z sets -------------------------------------------------------------------------------


def test_z_set_of_full_set_is_empty():
    e = gen_full(GridGeometry(2, 4))
    for N in (1, 2, 5):
        assert D.z_set(e, Fraction(1, 4), N).z.is_empty()


@given(st.integers(1, 2), st.integers(0, 10**6))
def test_z_counts_match_oracle(d, seed):
    L = 4 if d == 1 else 2
    e = random_set(d, L, seed)
    counts = D.z_counts(D.bad_cubes(e, Fraction(1, 4)), L, d)
    ref = oracle_z_counts(e, Fraction(1, 4))
    assert all(counts[c] == v for c, v in ref.items())


@given(st.integers(1, 2), st.integers(0, 10**6))
def test_z_sets_nested_and_bounded(d, seed):
    L = 6 if d == 1 else 4
    e = random_set(d, L, seed)
    eps = Fraction(1, 4)
    counts = D.z_counts(D.bad_cubes(e, eps), L, d)
    prev = None
    for N in range(1, int(counts.max()) + 3):
        z = D.z_set(e, eps, N, counts=counts)
        assert z.measure <= z.bound
        if prev is not None:
            assert z.z.issubset(prev)
        prev = z.z


# -- counterexample -----------------------------------------------------------------------


def test_counterexample_reference_values():
    rep = D.counterexample_audit(1, 5)
    assert rep.max_density == Fraction(3, 5) <= Fraction(7, 8)
    assert rep.dyadic_ok and rep.passed
    assert rep.below_r0_max_density == 1  # a solid block inside a small interval
    assert rep.bound < 1 - rep.epsilon


def test_counterexample_matches_oracle():
    from qmd.oracle import oracle_counterexample_density

    for k in range(0, 4):
        for L in range(k + 2, k + 5):
            assert D.counterexample_audit(k, L).max_density == oracle_counterexample_density(k, L)


def test_counterexample_resolution_check():
    with pytest.raises(ResolutionTooCoarseError):
        D.counterexample_audit(3, 4)


# -- inequality audits --------------------------------------------------------------------


@given(st.integers(1, 2), st.integers(0, 10**6), st.sampled_from([Fraction(1, 2), Fraction(1, 4), Fraction(1, 10)]))
def test_small_average_distance_forces_small_sparsity(d, seed, eps):
    L = 6 if d == 1 else 4
    e = random_set(d, L, seed, p=0.7)
    rep = D.average_distance_violations(e, eps, fam_for(e))
    assert rep["violations"] == [] and rep["contrapositiveFailures"] == 0


@given(st.integers(1, 2), st.integers(0, 10**6))
def test_weighted_average_distance_sum_bounded(d, seed):
    L = 6 if d == 1 else 4
    e = random_set(d, L, seed, p=0.4)
    sums = D.avg_dist_packing_sum(e, fam_for(e))
    assert max(sums) <= D.cx_of(d, A=1)


@given(st.integers(1, 2), st.integers(0, 10**6))
def test_cube_sparsity_controlled_by_enclosing_ball(d, seed):
    L = 5 if d == 1 else 4
    e = random_set(d, L, seed, p=0.5)
    rep = D.enclosing_ball_audit(e, build_nets(e.geometry))
    assert rep["violations"] == []


def test_enclosing_balls_exist_and_are_close():
    e = gen_full(GridGeometry(2, 4))
    fam = family(build_nets(e.geometry), A2=98)
    for k in range(5):
        s = 1 << (4 - k)
        c = D.enclosing_ball_centers(fam, k)
        assert (c >= 0).all()
        for a in np.ndindex(*c.shape[:-1]):
            half = 2 * c[a] + 1
            ctr = (2 * np.asarray(a) + 1) * s
            assert ((half - ctr) ** 2).sum() <= 49 * 2 * s * s
