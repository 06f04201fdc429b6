import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfspec.errors import InadmissibleWord, NotPrimitive
from mfspec.sft import (
    Sft,
    check_primitive,
    cycle_mean_hull,
    enumerate_words,
    format_word,
    max_mean_cycle,
    min_mean_cycle,
    parse_word,
)


@st.composite
def primitive_matrices(draw, m_max=4):
    m = draw(st.integers(2, m_max))
    bits = draw(st.lists(st.booleans(), min_size=m * m, max_size=m * m))
    A = np.array(bits, dtype=int).reshape(m, m)
    try:
        check_primitive(A)
    except NotPrimitive:
        A = np.ones((m, m), dtype=int)
    return A


def test_golden_mean_connecting_word(golden):
    assert golden.p0 == 2
    assert format_word(golden.W[(1, 1)]) == "11"
    assert golden.is_admissible((1,) + golden.W[(1, 1)] + (1,))


def test_golden_mean_counts(golden):
    assert golden.count_words(3) == 5
    assert golden.count_words(5) == 13
    assert len(list(enumerate_words(golden, 5))) == 13


def test_not_primitive():
    with pytest.raises(NotPrimitive):
        Sft.from_matrix([[0, 1], [1, 0]])
    with pytest.raises(NotPrimitive):
        Sft.from_matrix([[1, 1], [0, 1]])


def test_inadmissible(golden):
    with pytest.raises(InadmissibleWord):
        golden.require((1, 1))


def test_word_roundtrip():
    assert parse_word("212") == (1, 0, 1)
    assert format_word((1, 0, 1)) == "212"
    assert parse_word("10,2,1", m=10) == (9, 1, 0)


@given(primitive_matrices())
def test_connecting_words_are_admissible_and_uniform(A):
    sft = Sft.from_matrix(A)
    for (i, j), w in sft.W.items():
        assert len(w) == sft.p0
        assert sft.is_admissible((i,) + w + (j,))


@given(primitive_matrices())
def test_connecting_word_is_lexicographically_smallest(A):
    sft = Sft.from_matrix(A)
    if sft.m ** sft.p0 > 4096:
        return
    for (i, j), w in sft.W.items():
        cands = [c for c in itertools.product(range(sft.m), repeat=sft.p0) if sft.is_admissible((i,) + c + (j,))]
        assert w == min(cands)


@given(primitive_matrices(), st.integers(1, 6))
def test_count_matches_enumeration(A, n):
    sft = Sft.from_matrix(A)
    words = list(enumerate_words(sft, n))
    assert len(words) == sft.count_words(n)
    assert words == sorted(words)


def test_golden_hull(golden):
    from mfspec.potentials import LocallyConstant

    hull = cycle_mean_hull(golden, LocallyConstant.digit(golden))
    lo, hi = hull.interval
    assert lo == pytest.approx(0.0, abs=1e-12)
    assert hi == pytest.approx(0.5, abs=1e-12)


@given(primitive_matrices(m_max=3), st.integers(1, 2), st.integers(0, 10**6))
def test_mean_cycle_against_enumeration(A, k, seed):
    sft = Sft.from_matrix(A)
    block = sft.block(k)
    w = np.random.default_rng(seed).normal(size=block.n)
    G = nx.DiGraph()
    G.add_edges_from(zip(block.src.tolist(), block.dst.tolist()))
    means = [np.mean(w[c]) for c in nx.simple_cycles(G)]
    hi, cyc_hi = max_mean_cycle(block, w)
    lo, cyc_lo = min_mean_cycle(block, w)
    assert hi == pytest.approx(max(means), abs=1e-10)
    assert lo == pytest.approx(min(means), abs=1e-10)
    assert np.mean(w[cyc_hi]) == pytest.approx(hi, abs=1e-10)
    assert np.mean(w[cyc_lo]) == pytest.approx(lo, abs=1e-10)


def test_karp_and_howard_agree():
    sft = Sft.full(3)
    block = sft.block(3)
    w = np.random.default_rng(1).normal(size=block.n)
    a, _ = max_mean_cycle(block, w, method="karp")
    b, _ = max_mean_cycle(block, w, method="howard")
    assert a == pytest.approx(b, abs=1e-12)


def test_two_dimensional_hull_contains_cycle_means(full2):
    table = np.array([[0.0, 1.0], [1.0, 0.0], [0.5, 0.9], [2.0, -1.0]])
    hull = cycle_mean_hull(full2, table, k=2)
    enum = cycle_mean_hull(full2, table, k=2, method="enumerate")
    assert hull.dim == 2
    for v in enum.vertices:
        assert hull.contains(v)
    for v in hull.vertices:
        assert enum.contains(v)
