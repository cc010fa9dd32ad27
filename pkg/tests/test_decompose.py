import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmd import density
from qmd.decompose import (
    BadCubeSet,
    Word,
    assign_collections,
    build_chain,
    build_chains,
    choose_N,
    coding_partition,
    decompose,
    empirical_N,
    pipeline_constants,
    sample_pairs,
    theoretical_N,
    verify_decomposition,
    verify_well_connected,
    word_of,
)
from qmd.dyadic import GridGeometry, GridPoint, Region, cube, minimal_common_cube
from qmd.errors import AssignmentFailure, DomainError
from qmd.gridset import GridSet, gen_bernoulli, gen_counterexample, gen_full, measure
from qmd.oracle import oracle_cell_label, oracle_chain_check


def bad_set(e, eps, restrict=None):
    return BadCubeSet.from_levels(e.geometry, density.bad_cubes(e, eps), restrict=restrict)


def random_set(d, L, seed, p=0.5):
    e = gen_bernoulli(GridGeometry(d, L), p, seed)
    if e.is_empty():
        e = GridSet.from_indices(e.geometry, [seed % e.geometry.ncells])
    return e


def test_pipeline_constants_examples():
    assert pipeline_constants(Fraction(2, 5)) == (4, Fraction(1, 280))
    assert pipeline_constants(Fraction(1, 5)) == (7, Fraction(1, 980))
    assert pipeline_constants(Fraction(1, 10)) == (14, Fraction(1, 3920))
    for bad in (Fraction(1, 2), 0, 1):
        with pytest.raises(DomainError):
            pipeline_constants(bad)


@given(st.fractions(Fraction(1, 100), Fraction(49, 100)))
def test_pipeline_constants_constraints(delta):
    P, eps = pipeline_constants(delta)
    assert Fraction(1, P) <= Fraction(3, 4) * delta
    assert P > 1 + 1 / delta
    assert eps == delta / (28 * P)


def test_choose_N_full_set_is_one():
    e = gen_full(GridGeometry(2, 4))
    assert choose_N(e, Fraction(1, 4), Fraction(1, 10)) == 1


@given(st.integers(1, 2), st.integers(0, 10**6), st.sampled_from([Fraction(1, 100), Fraction(1, 10), Fraction(1, 2)]))
def test_empirical_N_minimal_and_below_theory(d, seed, alpha):
    L = 6 if d == 1 else 4
    e = random_set(d, L, seed)
    eps = Fraction(1, 4)
    counts = density.z_counts(density.bad_cubes(e, eps), L, d)
    N = empirical_N(counts, alpha)
    assert Fraction(int((counts >= N).sum()), counts.size) < alpha
    if N > 1:
        assert Fraction(int((counts >= N - 1).sum()), counts.size) >= alpha
    assert theoretical_N(eps, alpha, d) >= N


def test_assignment_of_empty_and_single():
    g = GridGeometry(1, 3)
    empty = BadCubeSet(g, [np.zeros((1 << k,), bool) for k in range(4)])
    a = assign_collections(empty, 3)
    assert a.used == 0
    one = BadCubeSet(g, [np.zeros((1 << k,), bool) for k in range(4)])
    one.masks[2][1] = True
    a = assign_collections(one, 3)
    assert a.used == 1 and a.collection_of(cube(2, 1)) == 1
    assert a.labels[0].tolist() == [1, 1, 2, 2, 3, 3, 0, 0]


@given(st.integers(1, 2), st.integers(0, 10**6))
def test_collections_have_disjoint_3Q(d, seed):
    L = 4 if d == 1 else 3
    e = random_set(d, L, seed, p=0.4)
    b = bad_set(e, Fraction(1, 4))
    a = assign_collections(b, 10**6)
    for i in range(1, a.used + 1):
        for q1, q2 in itertools.combinations(a.members(i), 2):
            r1 = Region(q1, 3, True).cell_bounds(L)
            r2 = Region(q2, 3, True).cell_bounds(L)
            overlap = all(max(l1, l2) < min(h1, h2) for (l1, h1), (l2, h2) in zip(zip(*r1), zip(*r2)))
            assert not overlap
    assert sum(len(a.members(i)) for i in range(1, a.used + 1)) == len(b)


def test_assignment_failure_names_a_witness():
    e = GridSet.from_indices(GridGeometry(1, 4), [5])
    eps = Fraction(1, 2)
    levels = density.bad_cubes(e, eps)
    b = BadCubeSet.from_levels(e.geometry, levels)
    with pytest.raises(AssignmentFailure) as info:
        assign_collections(b, 1, e)
    w = info.value.witness
    assert w["cube"] == "4:(4)" and w["point"] == [5]
    counts = density.z_counts(levels, 4, 1)
    assert counts[tuple(w["point"])] >= w["minCount"]


@given(st.integers(1, 2), st.integers(0, 10**6))
def test_words_match_brute_force(d, seed):
    L = 4 if d == 1 else 3
    e = random_set(d, L, seed, p=0.4)
    a = assign_collections(bad_set(e, Fraction(1, 4)), 10**6)
    for c in e.geometry.all_coords()[:: max(1, e.geometry.ncells // 40)]:
        x = GridPoint(tuple(int(v) for v in c))
        letters = []
        for i in range(1, a.used + 1):
            hits = [q for q in a.members(i) if Region(q, 3, True).contains(x, L)]
            assert len(hits) <= 1
            letters.append(oracle_cell_label(x, hits[0], L) if hits else 0)
        assert word_of(x, a).letters == tuple(letters)


@pytest.mark.parametrize("L", [3, 4, 5])
def test_same_word_pairs_have_good_minimal_cube(L):
    # exhaustive over Bernoulli sets in one dimension
    for seed in range(6):
        e = random_set(1, L, seed, p=0.6)
        b = bad_set(e, Fraction(1, 4), restrict=e)
        part = coding_partition(e, b, 10**6)
        for m in part.members:
            for i, j in itertools.combinations(m.tolist(), 2):
                q = minimal_common_cube(GridPoint((i,)), GridPoint((j,)), L)
                assert q not in b
        assert part.class_count_ok()
        assert sum(len(m) for m in part.members) == e.count()


def test_word_rendering():
    assert str(Word((), 3)) == "0"
    assert str(Word((1, 0, 9), 3)) == "1.0.9"


def test_chain_on_full_set_follows_segment():
    e = gen_full(GridGeometry(2, 5))
    x, y = GridPoint((0, 0)), GridPoint((31, 20))
    P, _ = pipeline_constants(Fraction(1, 5))
    ch = build_chain(x, y, e, minimal_common_cube(x, y, 5), P)
    assert ch.points[0].tolist() == [0, 0] and ch.points[-1].tolist() == [31, 20]
    assert len(ch.points) == P + 1
    assert ch.passes(Fraction(1, 5))
    assert ch.to_dict(Fraction(1, 5))["pass"]


@given(st.integers(1, 2), st.integers(0, 10**6), st.sampled_from([Fraction(1, 10), Fraction(1, 5), Fraction(2, 5)]))
def test_chain_verdicts_match_oracle(d, seed, delta):
    L = 6 if d == 1 else 4
    e = random_set(d, L, seed, p=0.8)
    idx = e.indices()
    rng = np.random.default_rng(seed)
    pick = rng.choice(idx, size=(10, 2))
    pick = pick[pick[:, 0] != pick[:, 1]]
    if not len(pick):
        return
    shape = e.geometry.shape
    xs = np.stack(np.unravel_index(pick[:, 0], shape, order="F"), axis=1)
    ys = np.stack(np.unravel_index(pick[:, 1], shape, order="F"), axis=1)
    P, _ = pipeline_constants(delta)
    for ch in build_chains(xs, ys, e, P):
        ref = oracle_chain_check(ch.points, e, delta)
        assert ref["inE"]
        assert ref["pass"] == ch.passes(delta)


def test_decompose_full_set():
    e = gen_full(GridGeometry(2, 4))
    dec = decompose(e, Fraction(1, 10), Fraction(1, 5))
    assert dec.piece_count == 1 and dec.garbage.is_empty()
    assert dec.is_partition()
    assert dec.pass_rate(slack=True) == 1.0
    assert verify_decomposition(dec.to_dict(), e, pairs=200).passed


@given(st.integers(0, 10**6))
def test_decompose_is_partition_and_deterministic(seed):
    e = random_set(2, 4, seed, p=0.8)
    a = decompose(e, Fraction(1, 4), Fraction(1, 5), seed=3)
    b = decompose(e, Fraction(1, 4), Fraction(1, 5), seed=3, threads=2)
    assert a.is_partition() and measure(a.garbage) < Fraction(1, 4)
    assert a.to_dict() == b.to_dict()
    assert a.partition.class_count_ok()


def test_theoretical_mode_uses_more_collections():
    e = gen_counterexample(2, 6)
    emp = decompose(e, Fraction(1, 10), Fraction(2, 5))
    theo = decompose(e, Fraction(1, 10), Fraction(2, 5), mode="theoretical")
    assert theo.N >= emp.N
    assert theo.is_partition() and theo.garbage.is_empty()


def test_isolated_cells_are_not_well_connected():
    e = GridSet.from_indices(GridGeometry(1, 4), [0, 15])
    v = verify_well_connected(e, e, Fraction(1, 4))
    assert not v.passed and v.failures[0]["reason"] == "no-chain"
    inner = GridSet.from_indices(e.geometry, [3])
    v = verify_well_connected(inner, e, Fraction(1, 4))
    assert not v.passed and v.failures[0]["reason"] == "piece-outside-set"


def test_verify_rejects_tampered_decompositions():
    e = gen_counterexample(1, 6)
    data = decompose(e, Fraction(1, 4), Fraction(1, 5)).to_dict()
    assert verify_decomposition(data, e).passed
    piece = data["pieces"][0]
    moved = dict(piece, cells=piece["cells"][:-1] + [e.geometry.ncells - 1])
    bad = dict(data, pieces=[moved] + data["pieces"][1:])
    v = verify_decomposition(bad, e)
    assert not v.passed
    assert {f["reason"] for f in v.failures} >= {"piece-outside-set", "cell-not-covered"}


def test_sample_pairs_exhaustive_and_sampled():
    g = GridGeometry(1, 8)
    pieces = [np.arange(0, 100), np.arange(100, 256)]
    small = sample_pairs([np.arange(10)], g, limit=100)
    assert len(small) == 45
    big = sample_pairs(pieces, g, limit=500, seed=1)
    assert len(big) == 500 and len(set(big)) == 500
    assert big == sample_pairs(pieces, g, limit=500, seed=1)
    for c, i, j in big:
        assert i < j and i in pieces[c] and j in pieces[c]
