import math

import numpy as np
import pytest
from conftest import CATALOG
from hypothesis import given, settings
from hypothesis import strategies as st

from kls import (
    CoefficientLaw,
    InvalidArgument,
    gram,
    sample_batch,
    sample_coefficients,
    synthesize_path,
)
from kls.exceptions import Unsupported
from kls.sampling import map_replicates, replicate_stream, resolve_threads, standardized_block
from kls.spectral import SpectralDecomposition

LAWS = [CoefficientLaw("Gaussian"), CoefficientLaw("Rademacher"), CoefficientLaw("StudentT", 7.0)]


def test_rademacher_squares_are_eigenvalues(bm512):
    z = sample_coefficients(bm512, "Rademacher", replicate_stream(3, 0))
    np.testing.assert_allclose(z**2, bm512.mu, rtol=1e-15)


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.name)
def test_standardized_moments(law):
    n = 20_000
    xi = standardized_block(law, 2, seed=11, lo=0, hi=n)
    # variance of xi^2 is E xi^4 - 1
    se_var = math.sqrt((law.fourth_moment - 1) / n)
    assert abs(np.mean(xi[:, 0] ** 2) - 1) <= 4 * se_var + 1e-15
    assert abs(np.mean(xi[:, 0])) < 4 / math.sqrt(n)
    assert abs(np.mean(xi[:, 0] * xi[:, 1])) < 4 / math.sqrt(n)


def test_gaussian_first_coefficient_variance(bm512):
    n = 10_000
    z1 = np.array([sample_coefficients(bm512, "Gaussian", replicate_stream(5, r))[0] for r in range(n)])
    se = bm512.mu[0] * math.sqrt(2 / n)
    assert abs(np.var(z1) - bm512.mu[0]) < 3 * se


@pytest.mark.parametrize("dof", [1.0, 3.0, 4.0, None])
def test_student_t_needs_finite_fourth_moment(dof):
    with pytest.raises(InvalidArgument):
        CoefficientLaw("StudentT", dof)


def test_law_parsing():
    assert CoefficientLaw.parse("Rademacher").name == "Rademacher"
    assert CoefficientLaw.parse({"name": "StudentT", "dof": 6}).dof == 6
    with pytest.raises(InvalidArgument):
        CoefficientLaw.parse("Cauchy")
    with pytest.raises(InvalidArgument):
        CoefficientLaw.parse(3)


def test_synthesize_examples(bm512):
    z = np.zeros(bm512.rank)
    np.testing.assert_array_equal(synthesize_path(bm512, z).values, 0.0)
    z[0] = 1.0
    np.testing.assert_allclose(synthesize_path(bm512, z, m=1).values, bm512.efuns[0], rtol=1e-15)
    np.testing.assert_array_equal(synthesize_path(bm512, np.ones(bm512.rank), m=0).values, 0.0)


def test_synthesize_errors(bm512):
    for m in (-1, bm512.rank + 1):
        with pytest.raises(InvalidArgument):
            synthesize_path(bm512, np.ones(bm512.rank), m=m)
    with pytest.raises(InvalidArgument):
        synthesize_path(bm512, np.ones(3))
    with pytest.raises(Unsupported):
        synthesize_path(SpectralDecomposition.from_spectrum([1.0, 0.5]), [1.0, 1.0])


def test_truncated_path_is_partial_sum(bm512, rng):
    z = rng.normal(size=bm512.rank) * np.sqrt(bm512.mu)
    full = synthesize_path(bm512, z).values
    part = synthesize_path(bm512, z, m=30).values
    np.testing.assert_allclose(full - part, z[30:] @ bm512.efuns[30:], atol=1e-13)


def test_batch_determinism_and_offsets(bm512):
    a = sample_batch(bm512, "Gaussian", None, 1200, seed=42)
    b = sample_batch(bm512, "Gaussian", None, 1200, seed=42)
    for p, q in zip(a, b):
        np.testing.assert_array_equal(p.values, q.values)
    tail = sample_batch(bm512, "Gaussian", None, 200, seed=42, start=1000)
    for k, p in enumerate(tail):
        assert p.replicate_index == 1000 + k
        np.testing.assert_array_equal(p.values, a[1000 + k].values)
    other = sample_batch(bm512, "Gaussian", None, 5, seed=43)
    assert not np.allclose(other[0].values, a[0].values)


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.name)
def test_thread_count_independence(bm512, law):
    one = sample_batch(bm512, law, 40, 1500, seed=9, n_jobs=1)
    many = sample_batch(bm512, law, 40, 1500, seed=9, n_jobs=8)
    for p, q in zip(one, many):
        np.testing.assert_array_equal(p.values, q.values)
        np.testing.assert_array_equal(p.coeffs, q.coeffs)


def test_thread_env_fallback(monkeypatch):
    monkeypatch.setenv("KLS_THREADS", "6")
    assert resolve_threads(None) == 6
    assert resolve_threads(2) == 2
    monkeypatch.delenv("KLS_THREADS")
    assert resolve_threads(None) == 1


def test_map_replicates_chunk_order():
    out = map_replicates(lambda lo, hi: (lo, hi), 3, 1200, n_jobs=4, chunk=500)
    assert out == [(3, 503), (503, 1003), (1003, 1200)]


def test_batch_rejects_bad_counts(bm512):
    with pytest.raises(InvalidArgument):
        sample_batch(bm512, "Gaussian", None, 0, seed=1)
    with pytest.raises(InvalidArgument):
        sample_batch(bm512, "Gaussian", bm512.rank + 1, 3, seed=1)


def test_brownian_moments(bm512):
    R = 4000
    paths = np.array([p.values for p in sample_batch(bm512, "Gaussian", None, R, seed=2024)])
    w = bm512.grid.weights
    sq = paths**2 @ w
    assert abs(sq.mean() - 0.5) < 3 * sq.std(ddof=1) / math.sqrt(R)
    # the nodes nearest 0.3 and 0.7 on the 512-point midpoint grid
    i, j = 153, 358
    s, t = bm512.grid.nodes[i], bm512.grid.nodes[j]
    assert abs(s - 0.3) < 1e-3 and abs(t - 0.7) < 1e-3
    prod = paths[:, i] * paths[:, j]
    assert abs(prod.mean() - s) < 3 * prod.std(ddof=1) / math.sqrt(R)


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.name)
@pytest.mark.parametrize("name", sorted(CATALOG))
def test_covariance_reproduction(catalog_decs, name, law):
    k, dec = catalog_decs[name, 64]
    R = 3000
    paths = np.array([p.values for p in sample_batch(dec, law, None, R, seed=77)])
    G = gram(k, dec.grid)
    probes = [2, 17, 31, 48, 61]
    for a in probes:
        for b in probes:
            prod = paths[:, a] * paths[:, b]
            se = prod.std(ddof=1) / math.sqrt(R)
            assert abs(prod.mean() - G[a, b]) < 4 * se + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 10**6))
def test_replicate_stream_is_a_pure_function(seed, r):
    a = replicate_stream(seed, r).standard_normal(4)
    b = replicate_stream(seed, r).standard_normal(4)
    np.testing.assert_array_equal(a, b)
