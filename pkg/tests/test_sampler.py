import numpy as np
import pytest
from scipy import integrate, stats

from ranwls import sampler
from ranwls.errors import ParameterError, SamplingError
from ranwls.rng import substream
from ranwls.sampler import SampleSet, SamplingDensity, density_eval, draw_nodes, validate_density
from ranwls.spectral import ProblemInstance, WeightFamily, eval_basis
from ranwls.wls import assemble

ALG = WeightFamily("algebraic", alpha=1.0)


def instance(kind, d=1, M=20):
    return ProblemInstance.create(kind, ALG, d, M)


def test_fourier_density_is_flat():
    dens = SamplingDensity(instance("fourier", 2), 7)
    x = np.random.default_rng(1).random((40, 2))
    np.testing.assert_allclose(dens.h(x), 1.0, atol=1e-13)
    np.testing.assert_allclose(dens(x), 1.0, atol=1e-13)


def test_cosine_density_closed_form():
    dens = SamplingDensity(instance("cosine"), 2)
    x = np.linspace(0, 1, 11)[:, None]
    expected = (1.0 + 2.0 * np.cos(np.pi * x[:, 0]) ** 2) / 2.0
    np.testing.assert_allclose(dens.h(x), expected, rtol=1e-13)


def test_legendre_density_closed_form():
    dens = SamplingDensity(instance("legendre"), 2)
    x = np.array([[-1.0], [0.0], [0.5], [1.0]])
    np.testing.assert_allclose(density_eval(dens, x), (1.0 + 3.0 * x[:, 0] ** 2) / 4.0, rtol=1e-13)


@pytest.mark.parametrize("kind", ["fourier", "legendre", "cosine"])
@pytest.mark.parametrize("d,m", [(1, 1), (1, 5), (2, 8), (3, 10)])
def test_density_integrates_to_one(kind, d, m):
    res = 64 if d == 3 else 128
    report = validate_density(SamplingDensity(instance(kind, d, 30), m), resolution=res)
    assert report.deviation < 1e-10


def test_m_bounds():
    with pytest.raises(ParameterError):
        SamplingDensity(instance("cosine", M=5), 6)
    with pytest.raises(ParameterError):
        SamplingDensity(instance("cosine", M=5), 0)


def test_fourier_nodes_uniform():
    X = draw_nodes(SamplingDensity(instance("fourier", 2), 9), 5000, 3)
    for coord in range(2):
        assert stats.kstest(X.nodes[:, coord], "uniform").pvalue > 1e-3


def _mixture_cdf_quad(dens, lo, hi, cells=400):
    # adaptive quadrature per cell, interpolated linearly in between
    grid = np.linspace(lo, hi, cells + 1)
    pieces = [integrate.quad(lambda s: dens(np.array([[s]]))[0], a, b)[0] for a, b in zip(grid, grid[1:])]
    table = np.concatenate([[0.0], np.cumsum(pieces)])
    return lambda t: np.interp(t, grid, table)


@pytest.mark.parametrize("kind,lo", [("cosine", 0.0), ("legendre", -1.0)])
def test_univariate_ks_against_quadrature_cdf(kind, lo):
    dens = SamplingDensity(instance(kind), 5)
    X = draw_nodes(dens, 4000, 11)
    assert stats.kstest(X.nodes[:, 0], _mixture_cdf_quad(dens, lo, 1.0)).pvalue > 1e-3


@pytest.mark.parametrize("kind", ["legendre", "cosine"])
def test_weighted_moments(kind):
    # E_omega[g / h] equals the rho-integral of g, here of eta_j^2 which is one
    inst = instance(kind, 2, 20)
    dens = SamplingDensity(inst, 6)
    n = 100_000
    X = draw_nodes(dens, n, 5)
    vals = np.abs(eval_basis(inst.basis, np.arange(1, 7), X.nodes)) ** 2 / X.h_values[:, None]
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(n)
    assert np.all(np.abs(mean - 1.0) <= 3.0 * se + 1e-12)


def test_expected_gram_is_identity():
    inst = instance("cosine", 1, 10)
    m, n, R = 4, 32, 500
    Hs = np.array([assemble(inst, m, draw_nodes(SamplingDensity(inst, m), n, substream(7, r))).H for r in range(R)])
    mean = Hs.mean(axis=0)
    se = Hs.std(axis=0, ddof=1) / np.sqrt(R)
    se[se == 0] = 1e-15
    assert np.all(np.abs(mean - np.eye(m)) <= 4.0 * se + 1e-12)


def test_determinism():
    dens = SamplingDensity(instance("legendre", 2), 6)
    a = draw_nodes(dens, 300, substream(42, 3))
    b = draw_nodes(dens, 300, substream(42, 3))
    assert np.array_equal(a.nodes, b.nodes)
    c = draw_nodes(dens, 300, substream(42, 4))
    assert not np.array_equal(a.nodes, c.nodes)


def test_nodes_in_domain():
    for kind, lo in [("legendre", -1.0), ("cosine", 0.0), ("fourier", 0.0)]:
        X = draw_nodes(SamplingDensity(instance(kind, 2), 10), 2000, 0)
        assert X.nodes.min() >= lo and X.nodes.max() <= 1.0
        assert np.all(X.h_values > 0)


def test_sample_set_json_round_trip():
    inst = instance("legendre", 2)
    X = draw_nodes(SamplingDensity(inst, 5), 50, 9)
    Y = SampleSet.from_json(X.to_json(), inst)
    assert np.array_equal(X.nodes, Y.nodes)
    np.testing.assert_allclose(X.h_values, Y.h_values, rtol=1e-15)
    assert Y.seed == 9 and Y.m == 5


def test_sample_set_is_read_only():
    X = draw_nodes(SamplingDensity(instance("cosine"), 3), 10, 0)
    with pytest.raises(ValueError):
        X.nodes[0, 0] = 0.5


def test_rejection_cap(monkeypatch):
    monkeypatch.setattr(sampler, "MAX_REJECTION_ATTEMPTS", 0)
    with pytest.raises(SamplingError) as info:
        draw_nodes(SamplingDensity(instance("legendre"), 3), 20, 1)
    assert info.value.component["degree"] >= 1
    assert info.value.exit_code == 3
