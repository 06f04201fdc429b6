import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfspec.errors import ModelError, UnknownCatalogEntry
from mfspec.geometry import (
    BROOKS15,
    CATALOG,
    IfsSpec,
    carpet_catalog,
    cell_points,
    coding_map,
    gibbs_reparametrize,
    gibbs_unparametrize,
    identity_potential,
    load_ifs,
    normalized_gibbs_potential,
    periodic_point,
    reparametrize_interval,
    times_m,
)
from mfspec.potentials import LocallyConstant
from mfspec.pressure import pressure_exact
from mfspec.spectrum import SpectralProblem, binary_entropy, spectrum_maximum, variational_spectrum


def test_catalog_loads():
    for name in CATALOG:
        ifs = carpet_catalog(name)
        assert ifs.sosc
    with pytest.raises(UnknownCatalogEntry):
        carpet_catalog("menger")
    with pytest.raises(ModelError):
        times_m(2, 3)


def test_brooks_tiling():
    side = 37
    grid = np.zeros((side, side), dtype=int)
    for x, y, s in BROOKS15:
        grid[x:x + s, y:y + s] += 1
    assert (grid == 1).all()
    assert len(BROOKS15) == 15
    assert carpet_catalog("brooks15").similarity_dimension == pytest.approx(2.0, abs=1e-12)


def test_coding_map_cells():
    ifs = carpet_catalog("s0_3x3")
    p, diam = coding_map(ifs, (4, 4), anchor="first")
    assert diam == pytest.approx(np.sqrt(2) / 9)
    assert np.all(p >= 0) and np.all(p <= 1)
    q, _ = coding_map(ifs, (4, 4), anchor="tail")
    assert np.allclose(q, [0.5, 0.5])


@given(st.lists(st.integers(0, 2), min_size=1, max_size=12))
def test_times3_conjugacy(w):
    ifs = times_m(3)
    x = periodic_point(ifs, w)
    shifted = periodic_point(ifs, w[1:] + w[:1])
    assert np.allclose((3 * x) % 1.0, shifted, atol=1e-12) or np.allclose(x, 1.0)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=6), st.integers(1, 4))
def test_identity_potential_periodic_averages(period, k):
    """Cycle means of the window table equal averages of the exact coding map."""
    ifs = carpet_catalog("s2")
    chi = identity_potential(ifs, k)
    p = len(period)
    orbit = [periodic_point(ifs, period[t:] + period[:t]) for t in range(p)]
    exact = np.mean(orbit, axis=0)
    x = tuple(period * (k + 1))
    table_mean = chi.birkhoff(x, p) / p
    assert np.allclose(table_mean, exact, atol=1e-12)


def test_cell_points_are_on_attractor():
    ifs = carpet_catalog("s1")
    _, pts = cell_points(ifs, 3)
    assert pts.shape == (64, 2)

    def in_cantor(y, depth=8):
        for _ in range(depth):
            if y <= 1 / 3 + 1e-9:
                y = 3 * y
            elif y >= 2 / 3 - 1e-9:
                y = 3 * y - 2
            else:
                return False
        return True

    assert all(in_cantor(c) for c in pts.ravel())


def test_s2_and_s1_spectra():
    s2 = carpet_catalog("s2")
    prob = SpectralProblem(s2.sft, s2.metric, identity_potential(s2, 1), 1)
    t, amax = spectrum_maximum(prob)
    assert t == pytest.approx(np.log(5) / np.log(3), abs=1e-12)
    assert np.allclose(amax, [0.5, 0.5])
    s1 = carpet_catalog("s1")
    prob = SpectralProblem(s1.sft, s1.metric, identity_potential(s1, 1), 1)
    vals = [variational_spectrum(prob, np.array(p)).e_hat for p in itertools.product((1 / 3, 2 / 3), repeat=2)]
    assert max(vals) - min(vals) < 1e-9
    assert vals[0] == pytest.approx(2 * binary_entropy(1 / 3) / np.log(3), abs=1e-9)


def test_load_ifs_matches_catalog():
    doc = {"maps": [{"rho": 1 / 3, "c": [j / 3]} for j in range(3)], "sosc": True}
    ifs = load_ifs(doc)
    assert ifs.homogeneous and ifs.similarity_dimension == pytest.approx(1.0)
    assert load_ifs({"catalog": "s2"}).N == 5
    with pytest.raises(ModelError):
        IfsSpec(np.array([1.2]), np.zeros((1, 1)))


def test_reparametrization_roundtrip():
    rho = 1 / 3
    a = np.linspace(-2, -0.1, 7)
    assert np.allclose(gibbs_unparametrize(gibbs_reparametrize(a, rho), rho), a)
    lo, hi = reparametrize_interval(-np.log(3) * 0.2, -np.log(3) * 0.1, rho)
    assert (lo, hi) == pytest.approx((0.1, 0.2))


def test_bernoulli_dimension_spectrum():
    """Local dimensions of a Bernoulli measure on the middle-thirds set via the level-set spectrum."""
    ifs = load_ifs({"maps": [{"rho": 1 / 3, "c": [0.0]}, {"rho": 1 / 3, "c": [2 / 3]}]})
    sft = ifs.sft
    p = 0.3
    phi = normalized_gibbs_potential(sft, LocallyConstant.per_symbol(sft, np.log([p, 1 - p])))
    assert pressure_exact(sft, phi) == pytest.approx(0.0, abs=1e-13)
    prob = SpectralProblem(sft, ifs.metric, phi, 1)
    for t in (0.2, 0.5, 0.8):
        alpha = t * np.log(p) + (1 - t) * np.log(1 - p)
        local_dim = gibbs_reparametrize(alpha, 1 / 3)
        assert local_dim == pytest.approx(-alpha / np.log(3))
        e = variational_spectrum(prob, [alpha]).e_hat
        assert e == pytest.approx(binary_entropy(t) / np.log(3), abs=1e-9)
