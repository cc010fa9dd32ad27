from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmd.dyadic import GridGeometry, GridPoint
from qmd.errors import DomainError
from qmd.multires import (
    Ball,
    audit_nets,
    build_nets,
    doubling_number,
    family,
    overlap_count,
    overlap_counts,
    overlap_exponent,
    packing_bound,
    theoretical_overlap_bound,
)
from qmd.oracle import oracle_nets


def test_coarsest_net_at_level_one():
    nets = build_nets(GridGeometry(1, 1))
    # centers 1/4 and 3/4 are 1/2 apart, less than the level-0 separation 1
    assert nets.levels[0].tolist() == [0]
    assert nets.levels[1].tolist() == [0, 1]


@pytest.mark.parametrize("d,L", [(1, 1), (1, 3), (1, 5), (2, 1), (2, 3), (2, 5)])
def test_nets_are_nested_separated_covering(d, L):
    rep = audit_nets(build_nets(GridGeometry(d, L)))
    assert rep["nested"] and rep["separated"] and rep["covering"]
    assert rep["off_lattice_defect"] == pytest.approx(np.sqrt(d) / 2 / 2**L)


@pytest.mark.parametrize("d,L", [(1, 4), (2, 3), (2, 4)])
def test_nets_match_oracle(d, L):
    nets = build_nets(GridGeometry(d, L))
    ref = oracle_nets(d, L)
    for k in range(L + 1):
        got = [tuple(int(v) for v in row) for row in nets.coords(k)]
        assert got == ref[k]


def test_nets_deterministic():
    g = GridGeometry(2, 4)
    a, b = build_nets(g), build_nets(g)
    assert all((x == y).all() for x, y in zip(a.levels, b.levels))


def test_level_counts_within_volume_bound():
    for d, L in [(1, 6), (2, 5), (3, 3)]:
        nets = build_nets(GridGeometry(d, L))
        for k, lev in enumerate(nets.levels):
            assert len(lev) <= packing_bound(d, k)


def test_doubling_numbers():
    # an interval of length 4 needs two of length 2; a disc of radius 2 needs
    # at most the 3 x 3 arrangement of squares inscribed in unit discs
    assert doubling_number(1) == 2
    assert doubling_number(2) == 9


def test_overlap_exponent_and_bound():
    assert overlap_exponent(Fraction(1)) == 2
    assert theoretical_overlap_bound(1, A=1) == doubling_number(1) ** 2
    assert theoretical_overlap_bound(2, A2=98) == 9 ** overlap_exponent(Fraction(98))
    bounds = [theoretical_overlap_bound(2, A=a) for a in (1, 2, 3, 5, 8)]
    assert bounds == sorted(bounds)


def test_family_requires_A_at_least_one():
    nets = build_nets(GridGeometry(1, 3))
    with pytest.raises(DomainError):
        family(nets, A=Fraction(1, 2))
    assert family(nets, A2=18).A2 == 18


def test_single_coarse_ball_covers_interval():
    fam = family(build_nets(GridGeometry(1, 5)), A=1)
    assert len(fam.balls(0)) == 1
    b = fam.balls(0)[0]
    assert all(b.contains(GridPoint((c,)), 5) for c in range(32))


def test_one_dimensional_overlap_at_most_five():
    for L in range(1, 7):
        fam = family(build_nets(GridGeometry(1, L)), A=1)
        for k in fam.levels():
            c = overlap_counts(fam, k)
            assert c.min() >= 1 and c.max() <= 5


@given(st.integers(1, 2), st.integers(1, 4), st.sampled_from([1, 2, 3]), st.data())
def test_overlap_counts_bounded_and_monotone(d, L, A, data):
    nets = build_nets(GridGeometry(d, L))
    small, big = family(nets, A=A), family(nets, A=A + 1)
    k = data.draw(st.integers(0, L))
    cs, cb = overlap_counts(small, k), overlap_counts(big, k)
    assert cs.min() >= 1
    assert cs.max() <= theoretical_overlap_bound(d, A=A)
    assert (cb >= cs).all()
    x = GridPoint(tuple(data.draw(st.integers(0, (1 << L) - 1)) for _ in range(d)))
    assert overlap_count(small, x, k) == cs[x.coords]


def test_ball_membership_is_exact_with_irrational_radius():
    b = Ball(GridPoint((0, 0)), 0, Fraction(2))  # radius sqrt(2), L = 0 cells of side 1
    assert b.contains(GridPoint((1, 1)), 0)
    assert not b.contains(GridPoint((1, 2)), 0)
