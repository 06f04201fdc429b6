import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfspec.errors import BudgetExceeded, ModelError
from mfspec.gibbs_metric import (
    WeakGibbsMetric,
    ball_cover,
    bowen_root,
    cover_classes,
    cover_count,
    cylinder_diameter,
    full_dimension,
)
from mfspec.potentials import LocallyConstant
from mfspec.sft import Sft, parse_word


def test_standard_diameters(full2, standard):
    assert cylinder_diameter(standard, (0, 1, 1)) == pytest.approx(1 / 8)
    three = WeakGibbsMetric.standard(Sft.full(3))
    assert cylinder_diameter(three, (0, 2, 1, 1)) == pytest.approx(3.0 ** -4)


def test_per_symbol_diameter(nonuniform):
    assert cylinder_diameter(nonuniform, parse_word("122")) == pytest.approx(1 / 32)


def test_metric_needs_negative_potential(full2):
    with pytest.raises(ModelError):
        WeakGibbsMetric(LocallyConstant.per_symbol(full2, [-1.0, 0.0]))


def test_cover_counts(full2, golden):
    words = ball_cover(WeakGibbsMetric.standard(full2), 7)
    assert len(words) == 2048 and {len(w) for w in words} == {11}
    gm = WeakGibbsMetric(LocallyConstant.constant(golden, -np.log(2)))
    words = ball_cover(gm, 3)
    assert len(words) == 13 and {len(w) for w in words} == {5}
    assert cover_count(gm, 3) == 13


def test_cover_budget(full2, standard):
    with pytest.raises(BudgetExceeded):
        ball_cover(standard, 7, cap=100)


@st.composite
def metric_instances(draw):
    seed = draw(st.integers(0, 10**6))
    rng = np.random.default_rng(seed)
    sft = Sft.from_matrix([[1, 1], [1, 0]]) if seed % 3 == 0 else Sft.full(2 + seed % 2)
    k = draw(st.integers(1, 3))
    psi = LocallyConstant(sft, k, -rng.uniform(0.3, 1.6, size=sft.block(k).n))
    return sft, WeakGibbsMetric(psi), draw(st.integers(1, 7)), rng


@given(metric_instances())
def test_cover_is_disjoint_partition_within_bounds(inst):
    sft, metric, n, rng = inst
    words = ball_cover(metric, n)
    ws = set(words)
    depth = max(map(len, words))
    for _ in range(30):
        x = [int(rng.integers(sft.m))]
        while len(x) < depth:
            succ = sft.successors[x[-1]]
            x.append(int(succ[rng.integers(len(succ))]))
        assert sum(tuple(x[:j]) in ws for j in range(1, depth + 1)) == 1
    for w in words:
        assert metric.C1 * n - 1e-9 <= len(w) <= metric.C2 * n + 1e-9
        assert metric.log_diameter(w) <= -n + 1e-9
        assert metric.log_diameter(w[:-1]) > -n if len(w) > 1 else True


@given(metric_instances())
def test_classes_match_explicit_cover(inst):
    sft, metric, n, rng = inst
    k = int(rng.integers(1, 3))
    phi = LocallyConstant(sft, k, rng.normal(size=(sft.block(k).n, 1)))
    words = ball_cover(metric, n)
    cls = cover_classes(metric, n, phi)
    assert cls.total == len(words)
    alpha = rng.uniform(phi.phi_min, phi.phi_max)
    eps = float(rng.uniform(0.05, 0.8))
    direct = 0
    for w in words:
        lo, hi = phi.eval_on_cylinder(w)
        gap = np.maximum(lo / len(w) - alpha, 0) + np.maximum(alpha - hi / len(w), 0)
        direct += np.linalg.norm(gap) < eps - 1e-12
    assert cls.count_near(alpha[None, :], eps)[0] == direct


def test_bowen_roots(full2, standard, nonuniform):
    assert bowen_root(standard) == pytest.approx(1.0, abs=1e-12)
    assert bowen_root(nonuniform) == pytest.approx(np.log2(2 / (np.sqrt(5) - 1)), abs=1e-12)
    r = 0.3
    m = WeakGibbsMetric(LocallyConstant.constant(Sft.full(3), np.log(r)))
    assert bowen_root(m) == pytest.approx(np.log(3) / -np.log(r), abs=1e-12)


def test_full_dimension_estimates(standard, nonuniform):
    for metric in (standard, nonuniform):
        res = full_dimension(metric, 24)
        assert abs(res["D_hat"] - res["bowen_root"]) <= 0.05
        assert res["D_hat"] <= res["upper_bound"]
