import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfspec.errors import Infeasible
from mfspec.gibbs_metric import WeakGibbsMetric, bowen_root
from mfspec.potentials import LocallyConstant
from mfspec.sft import Sft
from mfspec.spectrum import (
    SpectralProblem,
    alpha_grid,
    auto_eps,
    binary_entropy,
    counting_spectrum,
    primal_spectrum,
    refine_grid_max,
    spectrum_grid,
    spectrum_maximum,
    variational_spectrum,
    weak_concavity_check,
)


@pytest.fixture(scope="module")
def binary(full2, standard, digit):
    return SpectralProblem(full2, standard, digit, 1)


@pytest.mark.parametrize("a", [0.05, 0.2, 0.37, 0.5, 0.81, 0.95])
def test_binary_closed_form(binary, a):
    pt = variational_spectrum(binary, [a])
    assert pt.e_hat == pytest.approx(binary_entropy(a) / np.log(2), abs=1e-9)
    assert pt.witness_gap <= 1e-8
    assert pt.in_riL


def test_outside_hull(binary):
    with pytest.raises(Infeasible):
        variational_spectrum(binary, [1.2])


def test_maximum_is_bowen_root(full2, nonuniform, digit):
    prob = SpectralProblem(full2, nonuniform, digit, 1)
    t, amax = spectrum_maximum(prob)
    assert t == pytest.approx(bowen_root(nonuniform), abs=1e-12)
    assert variational_spectrum(prob, amax).e_hat == pytest.approx(t, abs=1e-9)
    assert amax[0] == pytest.approx((3 - np.sqrt(5)) / 2, abs=1e-9)


def test_golden_mean_dual_equals_primal(golden):
    phi = LocallyConstant.digit(golden)
    metric = WeakGibbsMetric.standard(golden)
    for k in (1, 3):
        prob = SpectralProblem(golden, metric, phi, k)
        dual = variational_spectrum(prob, [0.25]).e_hat
        primal = primal_spectrum(prob, [0.25])["value"]
        assert dual == pytest.approx(primal, abs=1e-8)


@given(st.integers(0, 10**6), st.floats(0.05, 0.95))
def test_dual_dominates_primal(seed, u):
    rng = np.random.default_rng(seed)
    sft = Sft.from_matrix([[1, 1], [1, 0]]) if seed % 2 else Sft.full(2)
    phi = LocallyConstant(sft, 2, rng.normal(size=sft.block(2).n))
    metric = WeakGibbsMetric(LocallyConstant.per_symbol(sft, -rng.uniform(0.3, 1.5, size=2)))
    prob = SpectralProblem(sft, metric, phi, 2)
    lo, hi = prob.hull.interval
    a = lo + u * (hi - lo)
    dual = variational_spectrum(prob, [a]).e_hat
    primal = primal_spectrum(prob, [a], restarts=2)["value"]
    assert primal <= dual + 1e-6
    assert dual <= spectrum_maximum(prob)[0] + 1e-9


@given(st.floats(-5, 5), st.floats(0.05, 0.95))
def test_weak_duality_for_every_q(q, a):
    sft = Sft.full(2)
    prob = SpectralProblem(sft, WeakGibbsMetric.standard(sft), LocallyConstant.digit(sft), 1)
    T, _, _ = prob.solve_T(np.array([q]), np.array([a]))
    assert T >= binary_entropy(a) / np.log(2) - 1e-9


def test_two_dimensional_separable(full2):
    sft = Sft.full(4)
    phi = LocallyConstant(sft, 1, [[0, 0], [1, 0], [0, 1], [1, 1]])
    prob = SpectralProblem(sft, WeakGibbsMetric.standard(sft), phi, 1)
    a = np.array([0.3, 0.6])
    expect = (binary_entropy(0.3) + binary_entropy(0.6)) / np.log(4)
    assert variational_spectrum(prob, a).e_hat == pytest.approx(expect, abs=1e-8)


def test_counting_spectrum_is_bounded_by_cover(full2, standard, digit):
    f, lam = counting_spectrum(full2, standard, digit, [0.5], 16)
    assert 0 < f <= 2 ** 24
    assert lam <= 24 * np.log(2) / 16 + 1e-12
    assert auto_eps(standard, digit, 24) == pytest.approx(1 / 35)


def test_grid_outputs(full2, standard, digit):
    prob = SpectralProblem(full2, standard, digit, 1)
    grid = spectrum_grid(full2, standard, digit, alpha_grid(prob.hull, 11), n=12, k=1)
    rows = list(csv.DictReader(io.StringIO(grid.to_csv())))
    assert len(rows) == 11
    assert float(rows[5]["e_hat"]) == pytest.approx(1.0, abs=1e-9)
    doc = json.loads(grid.to_json())
    assert doc["meta"]["bowen_root"] == pytest.approx(1.0)
    assert grid.alphas[grid.argmax()][0] == pytest.approx(0.5)
    threaded = spectrum_grid(full2, standard, digit, alpha_grid(prob.hull, 11), n=12, k=1, threads=3)
    assert threaded.to_csv() == grid.to_csv()


def test_refined_grid_max(full2, nonuniform, digit):
    prob = SpectralProblem(full2, nonuniform, digit, 1)
    a = alpha_grid(prob.hull, 21)
    vals = [variational_spectrum(prob, [x], strict=False).e_hat for x in a]
    _, best = refine_grid_max(prob, a, vals)
    assert best == pytest.approx(bowen_root(nonuniform), abs=1e-9)


def test_weak_concavity_on_entropy_and_dip():
    a = np.linspace(0, 1, 41)
    good = weak_concavity_check(a, binary_entropy(a) / np.log(2))
    assert good["quasi_concave"]["pass"] and good["monotone_from_max"]["pass"]
    dipped = binary_entropy(a) / np.log(2) - 0.3 * np.exp(-((a - 0.5) / 0.05) ** 2)
    bad = weak_concavity_check(a, dipped)
    assert not bad["quasi_concave"]["pass"]
    i, j, l = bad["quasi_concave"]["witness"]
    assert i < j < l


def test_counting_examples(full2, standard, digit):
    f, _ = counting_spectrum(full2, standard, digit, [0.5], 2.5, eps=0.05)
    assert f == 6  # cover words of length 4 with two 2s
    f, _ = counting_spectrum(full2, standard, digit, [1.3], 10, eps=0.05)
    assert f == 0
    f, _ = counting_spectrum(full2, standard, digit, [0.3], 10, eps=2.0)
    assert f == 2 ** 15


def test_lambda_estimate_schedule(full2, standard, digit):
    from mfspec.spectrum import lambda_estimate

    rep = lambda_estimate(full2, standard, digit, [0.5])
    assert [r["n"] for r in rep["table"]] == [8, 12, 16, 20, 24]
    assert abs(rep["lambda_hat"] - 1.0) <= 0.05
    rep0 = lambda_estimate(full2, standard, digit, [0.0], schedule=[(16, 0.01)])
    assert rep0["lambda_hat"] == 0.0
