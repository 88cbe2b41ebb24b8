import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.linear_model import Ridge
from sklearn.pipeline import Pipeline

from kls import BrownianMotion, InvalidArgument, KarhunenLoeve, OrnsteinUhlenbeck, build_uniform


@pytest.fixture(scope="module")
def kl():
    return KarhunenLoeve(kernel=BrownianMotion(), grid=build_uniform(0, 1, 128)).fit()


def test_params_and_clone():
    est = KarhunenLoeve(kernel=OrnsteinUhlenbeck(2.0, 1.0), n_components=10)
    params = est.get_params()
    assert params["n_components"] == 10 and params["drop_tol"] == 1e-12
    twin = clone(est)
    assert twin.get_params()["kernel"] == est.kernel
    est.set_params(n_components=5)
    assert est.n_components == 5


def test_fitted_attributes(kl):
    assert kl.n_components_ == kl.eigenvalues_.size == kl.eigenfunctions_.shape[0]
    assert kl.n_features_in_ == 128
    assert kl.eigenvalues_[0] == pytest.approx(4 / np.pi**2, rel=1e-3)
    np.testing.assert_array_equal(kl.mean_, 0.0)
    assert kl.explained_variance_ratio().sum() == pytest.approx(1.0, rel=1e-10)


def test_transform_round_trip(kl):
    X = kl.sample(20, seed=3)
    Z = kl.transform(X)
    assert Z.shape == (20, kl.n_components_)
    np.testing.assert_allclose(kl.inverse_transform(Z), X, atol=1e-10)
    np.testing.assert_allclose(kl.fit_transform(X), Z, atol=1e-12)


def test_sample_is_seeded(kl):
    np.testing.assert_array_equal(kl.sample(5, seed=1), kl.sample(5, seed=1))
    assert kl.sample(5, seed=1, n_components=3).shape == (5, 128)


def test_power_norm_matches_coefficients(kl):
    X = kl.sample(4, seed=2)
    Z = kl.transform(X)
    np.testing.assert_allclose(kl.power_norm(X, 1.0), np.linalg.norm(Z, axis=1), rtol=1e-12)
    expected = np.sqrt(np.sum(kl.eigenvalues_ ** -0.5 * Z**2, axis=1))
    np.testing.assert_allclose(kl.power_norm(X, 0.5), expected, rtol=1e-10)


def test_fit_from_data_recovers_leading_eigenvalues(kl):
    X = kl.sample(4000, seed=11)
    est = KarhunenLoeve(n_components=5).fit(X)
    assert est.n_components_ == 5
    np.testing.assert_allclose(est.eigenvalues_[:3], kl.eigenvalues_[:3], rtol=0.1)
    assert np.all(np.abs(est.mean_) < 0.1)


def test_pipeline():
    ref = KarhunenLoeve(kernel=BrownianMotion(), grid=build_uniform(0, 1, 64)).fit()
    X = ref.sample(200, seed=5)
    y = X[:, -1]
    pipe = Pipeline([("kl", KarhunenLoeve(kernel=BrownianMotion(), n_components=20)),
                     ("ridge", Ridge(alpha=1e-6))]).fit(X, y)
    assert pipe.score(X, y) > 0.99


def test_validation_errors(kl):
    with pytest.raises(NotFittedError):
        KarhunenLoeve(kernel=BrownianMotion()).transform(np.ones((1, 4)))
    with pytest.raises(InvalidArgument):
        kl.transform(np.ones((2, 5)))
    with pytest.raises(InvalidArgument):
        KarhunenLoeve().fit()
    with pytest.raises(InvalidArgument):
        KarhunenLoeve(kernel=BrownianMotion(), grid=build_uniform(0, 1, 8)).fit(np.ones((3, 9)))
    with pytest.raises(ValueError):
        kl.transform(np.full((1, 128), np.nan))


def test_dict_kernel_and_grid():
    est = KarhunenLoeve(kernel={"variant": "OrnsteinUhlenbeck", "a": 1.0, "sigma": 1.0},
                        grid={"rule": "gauss", "a": 0, "b": 1, "n": 32}).fit()
    assert est.grid_.rule_tag.startswith("gauss")
