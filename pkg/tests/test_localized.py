import csv
import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfspec.errors import EmptyIntersection
from mfspec.geometry import carpet_catalog, identity_potential, times_m
from mfspec.localized import (
    LocalizedTarget,
    fixed_point_set_dimension,
    localized_dimension,
    moran_batch,
    moran_sampler,
)
from mfspec.spectrum import SpectralProblem, binary_entropy, variational_spectrum


def test_constant_target_reduces_to_level_set(full2, standard, digit):
    for a in (0.1, 0.3, 0.5):
        res = localized_dimension(full2, standard, digit, LocalizedTarget.constant(full2, [a]), 1)
        direct = variational_spectrum(SpectralProblem(full2, standard, digit, 1), [a]).e_hat
        assert res["value"] == pytest.approx(direct, abs=1e-12)


def test_interval_image(full2, standard, digit):
    xi = LocalizedTarget.from_function(full2, 4, lambda w: [0.6 + 0.3 * sum(w) / len(w)], interval_image=True)
    res = localized_dimension(full2, standard, digit, xi, 1)
    assert res["value"] == pytest.approx(binary_entropy(0.6) / np.log(2), abs=1e-9)
    assert res["hypothesis_verified"]


@given(st.integers(0, 10**6), st.integers(2, 4))
def test_value_dominates_every_image_point(seed, N):
    rng = np.random.default_rng(seed)
    from mfspec.sft import Sft
    from mfspec.gibbs_metric import WeakGibbsMetric
    from mfspec.potentials import LocallyConstant

    sft = Sft.full(2)
    metric = WeakGibbsMetric.standard(sft)
    phi = LocallyConstant.digit(sft)
    table = rng.uniform(0.02, 0.98, size=(sft.block(N).n, 1))
    target = LocalizedTarget(sft, N, table)
    res = localized_dimension(sft, metric, phi, target, 1)
    prob = SpectralProblem(sft, metric, phi, 1)
    best = max(variational_spectrum(prob, a).e_hat for a in table)
    assert res["value"] >= best - 1e-9


def test_empty_intersection(full2, standard, digit):
    with pytest.raises(EmptyIntersection):
        localized_dimension(full2, standard, digit, LocalizedTarget.constant(full2, [1.5]), 1)


def test_times3_identity():
    ifs = times_m(3)
    target = LocalizedTarget.from_ifs(ifs, 3)
    res = localized_dimension(ifs.sft, ifs.metric, identity_potential(ifs, 1), target, 1)
    assert res["value"] == pytest.approx(1.0, abs=1e-6)


def test_fixed_point_sets():
    s2 = fixed_point_set_dimension(carpet_catalog("s2"), k=4, depth=6)
    assert s2["value"] == pytest.approx(np.log(5) / np.log(3), abs=1e-9)
    assert s2["is_full"]
    s1 = fixed_point_set_dimension(carpet_catalog("s1"), k=4, depth=6)
    assert s1["value"] < np.log(4) / np.log(3) - 0.01
    assert s1["value"] <= s1["upper"] + 1e-12
    assert not s1["is_full"]
    full = fixed_point_set_dimension(carpet_catalog("s0_3x3"), k=2, depth=3)
    assert full["value"] == pytest.approx(2.0, abs=1e-9)


def test_fixed_point_set_without_reduction_agrees():
    ifs = carpet_catalog("s1")
    a = fixed_point_set_dimension(ifs, k=2, depth=4)
    b = fixed_point_set_dimension(ifs, k=2, depth=4, reduce=False)
    assert a["value"] == pytest.approx(b["value"], abs=1e-9)


def test_moran_constant_target(full2, digit):
    target = LocalizedTarget.constant(full2, [0.3])
    rep = moran_sampler(full2, digit, target, [1000, 2000, 4000, 8000], seed=7)
    assert rep.mass_error <= 1e-9
    assert rep.records[-1]["deviation"] <= 0.05
    assert [r["n"] for r in rep.records] == rep.boundaries[1:]
    local = rep.records[-1]["local_dim"]
    assert local == pytest.approx(binary_entropy(0.3) / np.log(2), abs=0.05)
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert list(rows[0]) == ["n", "deviation", "log_rho", "log_diam", "local_dim"]


def test_moran_is_reproducible(full2, digit):
    target = LocalizedTarget.constant(full2, [0.4])
    a = moran_sampler(full2, digit, target, [500, 1000], seed=3)
    b = moran_sampler(full2, digit, target, [500, 1000], seed=3)
    assert a.to_csv() == b.to_csv()
    assert np.array_equal(a.sequence, b.sequence)
    c = moran_batch(full2, digit, target, [500, 1000], [3, 4], threads=2)
    assert c[0].to_csv() == a.to_csv()


def test_moran_flags_fast_schedule(full2, digit):
    rep = moran_sampler(full2, digit, LocalizedTarget.constant(full2, [0.3]), [1] * 20, seed=0)
    assert "schedule_too_fast" in rep.flags


def test_moran_nonconstant_target_trend(full2, digit):
    xi = LocalizedTarget.from_function(full2, 3, lambda w: [0.25 + 0.5 * sum(w) / len(w)])
    rep = moran_sampler(full2, digit, xi, [1000 * 2 ** j for j in range(6)], seed=3)
    dev = [r["deviation"] for r in rep.records]
    assert dev[-1] < dev[0]
    assert dev[-1] <= 0.02
