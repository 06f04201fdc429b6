import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfspec.errors import ModelError
from mfspec.potentials import (
    LocallyConstant,
    MatrixCocycle,
    discretize,
    dumps,
    function_variation,
    load_potential,
    variation,
)
from mfspec.sft import Sft, parse_word


def _random_extension(sft, w, extra, rng):
    x = list(w)
    for _ in range(extra):
        succ = sft.successors[x[-1]]
        x.append(int(succ[rng.integers(len(succ))]))
    return tuple(x)


def test_digit_counts_twos(full2, digit):
    w = parse_word("21221")
    lo, hi = digit.eval_on_cylinder(w)
    assert lo[0] == hi[0] == 3.0
    assert digit.C[0] == 0.0
    assert digit.phi_max[0] == 1.0 and digit.phi_min[0] == 0.0
    assert all(variation(digit, n) == 0.0 for n in range(1, 6))


def test_constant_potential(full2):
    p = LocallyConstant.constant(full2, -np.log(3))
    assert p.phi_max[0] == p.phi_min[0] == pytest.approx(-np.log(3))


def test_all_ones_cocycle(full2):
    c = MatrixCocycle(full2, [np.ones((2, 2)), np.ones((2, 2))])
    for n in (1, 4, 9):
        w = tuple(np.random.default_rng(n).integers(0, 2, size=n))
        assert c.log_norm(w) == pytest.approx(n * np.log(2), rel=1e-14)
    assert c.phi_max[0] >= np.log(2) >= c.phi_min[0]


def test_cocycle_needs_positive_entries(full2):
    with pytest.raises(ModelError):
        MatrixCocycle(full2, [np.eye(2), np.ones((2, 2))])


@given(st.integers(1, 3), st.integers(1, 2), st.integers(1, 8), st.integers(0, 10**6))
def test_cylinder_interval_contains_pointwise_values(k, d, n, seed):
    rng = np.random.default_rng(seed)
    sft = Sft.from_matrix([[1, 1], [1, 0]]) if seed % 2 else Sft.full(3)
    pot = LocallyConstant(sft, k, rng.normal(size=(sft.block(k).n, d)))
    w = _random_extension(sft, (int(rng.integers(sft.m)),), n - 1, rng)
    lo, hi = pot.eval_on_cylinder(w)
    for _ in range(5):
        x = _random_extension(sft, w, k - 1, rng)
        v = pot.birkhoff(x, n)
        assert np.all(lo - 1e-12 <= v) and np.all(v <= hi + 1e-12)
    assert np.all(n * pot.phi_min - 1e-12 <= lo) and np.all(hi <= n * pot.phi_max + 1e-12)


@given(st.integers(0, 10**6), st.integers(1, 12), st.integers(1, 12))
def test_cocycle_almost_additive(seed, n, m):
    rng = np.random.default_rng(seed)
    sft = Sft.full(2)
    c = MatrixCocycle(sft, [rng.uniform(0.1, 3.0, size=(2, 2)) for _ in range(2)])
    w = tuple(rng.integers(0, 2, size=n + m))
    whole = c.log_norm(w)
    parts = c.log_norm(w[:n]) + c.log_norm(w[n:])
    assert parts - c.C[0] - 1e-9 <= whole <= parts + 1e-9


@given(st.integers(0, 10**6), st.integers(2, 4))
def test_discretization_error_bound(seed, k):
    rng = np.random.default_rng(seed)
    sft = Sft.full(2)
    c = MatrixCocycle(sft, [rng.uniform(0.2, 2.0, size=(2, 2)) for _ in range(2)])
    approx = discretize(c, k)
    for n in (k, 3 * k, 10):
        x = tuple(rng.integers(0, 2, size=n + k))
        err = abs(c.log_norm(x[:n]) - approx.birkhoff(x, n)[0])
        assert err <= approx.error_bound(n) + 1e-9


def test_discretize_is_identity_for_short_windows(full2, digit):
    assert discretize(digit, 3) is digit


def test_variation_of_window_two(full2):
    p = LocallyConstant.from_function(full2, 2, lambda w: [float(w[0] == w[1])])
    assert variation(p, 3) == pytest.approx(1.0)
    assert function_variation(p, 1) == pytest.approx(1.0)
    assert function_variation(p, 2) == 0.0


def test_json_roundtrip(golden):
    rng = np.random.default_rng(0)
    p = LocallyConstant(golden, 2, rng.normal(size=(golden.block(2).n, 2)))
    q = load_potential(json.loads(dumps(p)), golden)
    assert np.array_equal(p.table, q.table)
    c = load_potential({"kind": "cocycle", "matrices": {"1": [[2, 1], [1, 1]], "2": [[1, 1], [1, 2]]}}, golden)
    assert isinstance(c, MatrixCocycle)


def test_missing_table_entry(full2):
    with pytest.raises(ModelError):
        load_potential({"kind": "locally_constant", "k": 2, "table": {"11": [0]}}, full2)
