"""Structural properties of the decomposition over the whole kernel catalog."""
import numpy as np
import pytest
from conftest import CATALOG
from hypothesis import given, settings
from hypothesis import strategies as st
from properties import (
    check_beta_monotonicity,
    check_eigen_relation,
    check_orthonormality,
    check_parseval,
    check_permutation,
    check_scaling,
)

from kls import InsufficientRank, SpectralDecomposition, build_gauss, build_uniform, decompose, summability

kernels = st.sampled_from(sorted(CATALOG))
grids = st.builds(lambda rule, n: (build_gauss if rule else build_uniform)(0.0, 1.0, n),
                  st.booleans(), st.integers(8, 96))


@settings(max_examples=40, deadline=None)
@given(kernels, grids)
def test_orthonormality_and_eigen_relation(name, grid):
    k = CATALOG[name]
    dec = decompose(k, grid)
    check_orthonormality(dec)
    check_eigen_relation(k, dec)


@settings(max_examples=25, deadline=None)
@given(kernels, grids, st.floats(0.1, 10.0))
def test_covariance_scaling(name, grid, c):
    check_scaling(CATALOG[name], grid, c)


@settings(max_examples=25, deadline=None)
@given(kernels, grids, st.integers(0, 2**32 - 1))
def test_permutation_invariance(name, grid, seed):
    check_permutation(CATALOG[name], grid, np.random.default_rng(seed))


@settings(max_examples=25, deadline=None)
@given(kernels, grids, st.integers(0, 2**32 - 1))
def test_parseval_round_trip(name, grid, seed):
    check_parseval(decompose(CATALOG[name], grid), np.random.default_rng(seed))


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_beta_monotonicity_catalog(catalog_decs, name):
    check_beta_monotonicity(catalog_decs[name, 256][1])


def test_finite_rank_spectrum_is_summable(catalog_decs):
    dec = catalog_decs["constant", 256][1]
    res = summability(dec, 0.01)
    assert res.verdict == "finite" and res.tail_high == 0.0
    with pytest.raises(InsufficientRank):
        summability(SpectralDecomposition.from_spectrum([1.0, 0.5, 0.2]), 0.5)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.2, 6.0), st.floats(0.05, 1.0))
def test_summability_verdict_matches_exponent(alpha, beta):
    mu = np.arange(1, 2001, dtype=float) ** -alpha
    res = summability(SpectralDecomposition.from_spectrum(mu), beta)
    if alpha * beta > 1.06:
        assert res.verdict == "finite"
    elif alpha * beta < 0.94:
        assert res.verdict == "infinite"
