import math

import mpmath
import numpy as np
import pytest
from conftest import CATALOG
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import direct_sum

from kls import (
    BrownianMotion,
    InvalidArgument,
    NumericError,
    SpectralDecomposition,
    build_uniform,
    decompose,
    fit_decay,
    fourier_coeffs,
    gram,
    power_kernel,
    power_norm,
    summability,
    synthesize_path,
)


def test_fourier_coeffs_of_eigenfunctions(bm512):
    for i in (0, 3, 40):
        z = fourier_coeffs(bm512.efuns[i], bm512)
        expected = np.zeros(bm512.rank)
        expected[i] = 1.0
        np.testing.assert_allclose(z, expected, atol=1e-10)
    np.testing.assert_array_equal(fourier_coeffs(np.zeros(512), bm512), 0.0)


def test_fourier_coeffs_round_trip(bm512, rng):
    c = rng.normal(size=bm512.rank)
    path = c @ bm512.efuns
    np.testing.assert_allclose(fourier_coeffs(path, bm512), c, atol=1e-10)
    stack = rng.normal(size=(3, bm512.rank))
    np.testing.assert_allclose(fourier_coeffs(stack @ bm512.efuns, bm512), stack, atol=1e-10)


def test_fourier_coeffs_length_mismatch(bm512):
    with pytest.raises(InvalidArgument):
        fourier_coeffs(np.ones(10), bm512)


def test_power_norm_examples(bm512):
    z = np.zeros(bm512.rank)
    z[0] = math.sqrt(bm512.mu[0])
    assert power_norm(z, bm512, 1.0) == pytest.approx(1.0, rel=1e-14)
    z1 = fourier_coeffs(bm512.efuns[0], bm512)
    assert power_norm(z1, bm512, 1.0) == pytest.approx(bm512.mu[0] ** -0.5, rel=1e-9)


def test_power_norm_synthetic_sum():
    r = 10**4
    mu = 1.0 / np.arange(1, r + 1) ** 2
    dec = SpectralDecomposition.from_spectrum(mu)
    # oracle: zeta(2) minus the integral tail bound of the omitted terms
    expected = math.sqrt(math.pi**2 / 6 - 1.0 / (r + 0.5))
    assert expected == pytest.approx(1.28255, abs=1e-4)
    assert power_norm(mu, dec, 1.0) == pytest.approx(expected, abs=1e-4)


def test_power_norm_rejects_bad_gamma_and_overflow(bm512):
    z = np.ones(bm512.rank)
    for g in (0.0, -0.5, 1.5):
        with pytest.raises(InvalidArgument):
            power_norm(z, bm512, g)
    tiny = SpectralDecomposition.from_spectrum([1.0, 1e-310])
    with pytest.raises(NumericError):
        power_norm([1.0, 1.0], tiny, 1.0)


def test_power_kernel_examples(bm512):
    nodes = bm512.grid.nodes[::64]
    s, t = np.meshgrid(nodes, nodes)
    k1 = power_kernel(bm512, None, 1.0, s, t)
    np.testing.assert_allclose(k1, np.minimum(s, t), atol=1e-8 * bm512.mu[0])
    for gamma in (0.3, 0.7, 1.0):
        assert power_kernel(bm512, BrownianMotion(), gamma, 0.41, 0.41) >= 0
    assert power_kernel(bm512.truncate(200), BrownianMotion(), 1.0, 0.3, 0.7) == pytest.approx(0.3, abs=5e-3)


def test_power_kernel_diagonal_defect_monotone_in_rank(bm512):
    t = bm512.grid.nodes[::50]
    prev = None
    for m in (1, 2, 5, 10, 50, 200, bm512.rank):
        defect = t - power_kernel(bm512.truncate(m), None, 1.0, t, t)
        assert np.all(defect >= -1e-12)
        if prev is not None:
            assert np.all(defect <= prev + 1e-14)
        prev = defect


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_power_kernel_gamma1_is_gram(catalog_decs, name):
    k, dec = catalog_decs[name, 64]
    nodes = dec.grid.nodes
    s, t = np.meshgrid(nodes, nodes, indexing="ij")
    np.testing.assert_allclose(power_kernel(dec, k, 1.0, s, t), gram(k, dec.grid), atol=1e-8 * dec.mu[0])


def _synthetic(alpha=2.0, r=10**4):
    return SpectralDecomposition.from_spectrum(np.arange(1, r + 1, dtype=float) ** -alpha)


def test_summability_finite_synthetic():
    dec = _synthetic()
    res = summability(dec, 0.6, fit_decay(dec))
    assert res.verdict == "finite"
    zeta = float(mpmath.zeta(1.2))
    # second route: direct summation to 10^8 plus the integral bound on what is left
    n = 10**8
    direct = direct_sum(lambda i: i**-1.2, 1, n, chunk=10**7) + n**-0.2 / 0.2
    assert direct == pytest.approx(zeta, rel=1e-6)
    assert zeta == pytest.approx(5.591, rel=1e-3)
    assert res.partial + res.tail_high == pytest.approx(zeta, rel=1e-2)
    assert res.partial + res.tail_low <= zeta <= res.partial + res.tail_high


def test_summability_infinite_synthetic():
    dec = _synthetic()
    res = summability(dec, 0.4, fit_decay(dec))
    assert res.verdict == "infinite"
    assert math.isinf(res.tail_high)


def test_summability_brownian_motion(bm1024):
    fit = fit_decay(bm1024)
    assert summability(bm1024, 0.75, fit).verdict == "finite"
    assert summability(bm1024, 0.4, fit).verdict == "infinite"
    # nuclear dominance of the power kernel with exponent 0.2 needs sum mu^(0.8) < inf
    assert summability(bm1024, 1 - 0.2, fit).verdict == "finite"


def test_summability_indeterminate_when_interval_straddles_one():
    from kls.analysis import DecayFit

    fit = DecayFit(2.0, 0.0, (5, 100), 0.1, (1.8, 2.2))
    dec = _synthetic(r=200)
    assert summability(dec, 0.52, fit).verdict == "indeterminate"
    assert summability(dec, 0.6, fit).verdict == "finite"
    with pytest.raises(InvalidArgument):
        summability(dec, 0.0, fit)


@pytest.mark.parametrize("name", ["bm", "bridge", "ou", "matern05", "matern15", "matern_general"])
def test_summability_verdicts_monotone_in_beta(catalog_decs, name):
    _, dec = catalog_decs[name, 256]
    fit = fit_decay(dec)
    order = {"infinite": 0, "indeterminate": 1, "finite": 2}
    verdicts = [order[summability(dec, b, fit).verdict] for b in np.linspace(0.05, 1.0, 40)]
    assert verdicts == sorted(verdicts)
    assert verdicts[-1] == 2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=8, max_size=8),
       st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_power_norm_parseval_and_gamma_monotonicity(z, g1, g2):
    dec = SpectralDecomposition.from_spectrum(0.9 / np.arange(1, 9) ** 2)
    z = np.array(z)
    n1 = power_norm(z, dec, g1)
    assert n1**2 == pytest.approx(np.sum((dec.mu ** (-g1 / 2) * z) ** 2), rel=1e-12, abs=1e-300)
    lo, hi = sorted((g1, g2))
    assert power_norm(z, dec, lo) <= power_norm(z, dec, hi) * (1 + 1e-12)


def test_path_norm_through_synthesis(bm512, rng):
    z = np.sqrt(bm512.mu) * rng.normal(size=bm512.rank)
    path = synthesize_path(bm512, z)
    back = fourier_coeffs(path.values, bm512)
    assert power_norm(back, bm512, 0.25) == pytest.approx(power_norm(z, bm512, 0.25), rel=1e-8)


def test_coarse_grid_decomposition_power_kernel_offgrid():
    dec = decompose(BrownianMotion(), build_uniform(0, 1, 128))
    v = power_kernel(dec, BrownianMotion(), 1.0, np.array([0.2, 0.6]), np.array([0.5, 0.9]))
    np.testing.assert_allclose(v, [0.2, 0.6], atol=5e-3)
