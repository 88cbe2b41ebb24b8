"""scikit-learn style front end to the KL decomposition.

:class:`KarhunenLoeve` learns the eigenpairs of a covariance operator on a
grid, then maps sampled paths (rows of ``X``, one column per grid node) to
their KL coefficients and back.  It composes with ``Pipeline``,
``clone`` and ``GridSearchCV`` like any other transformer.

Example
-------
>>> from kls import KarhunenLoeve, BrownianMotion, build_uniform
>>> kl = KarhunenLoeve(kernel=BrownianMotion(), grid=build_uniform(0, 1, 256)).fit()
>>> X = kl.sample(10, seed=1)
>>> Z = kl.transform(X)              # (10, n_components_)
>>> X_back = kl.inverse_transform(Z)
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidArgument
from .grid import Grid, build_uniform, from_config
from .kernels import KernelSpec, Tabulated, kernel_from_dict
from .powerspace import power_norm
from .sampling import CoefficientLaw, sample_batch
from .spectral import decompose


class KarhunenLoeve(TransformerMixin, BaseEstimator):
    """Karhunen-Loeve decomposition of a covariance kernel on a quadrature grid.

    Parameters
    ----------
    kernel : KernelSpec, dict or None
        Covariance kernel.  ``None`` estimates the covariance from the paths
        passed to :meth:`fit` (centered sample second moment).
    grid : Grid, dict or None
        Quadrature grid, or a ``{"rule", "a", "b", "n"}`` dict.  ``None`` uses a
        midpoint grid on ``[0, 1]`` with one node per column of ``X``.
    n_components : int or None
        Maximum number of retained eigenpairs.
    drop_tol : float
        Relative eigenvalue cutoff.

    Attributes
    ----------
    decomposition_ : SpectralDecomposition
    eigenvalues_ : ndarray of shape (n_components_,)
    eigenfunctions_ : ndarray of shape (n_components_, n_features_in_)
    mean_ : ndarray of shape (n_features_in_,)
        Zero unless the covariance was estimated from data.
    """

    def __init__(self, kernel=None, grid=None, n_components=None, drop_tol=1e-12):
        self.kernel = kernel
        self.grid = grid
        self.n_components = n_components
        self.drop_tol = drop_tol

    def _resolve_grid(self, n_features):
        if isinstance(self.grid, Grid):
            return self.grid
        if isinstance(self.grid, dict):
            return from_config(self.grid)
        if self.grid is None and n_features is not None:
            return build_uniform(0.0, 1.0, n_features)
        raise InvalidArgument("a grid is required when no data is given")

    def fit(self, X=None, y=None):
        n_features = None
        if X is not None:
            X = check_array(X, ensure_min_samples=2 if self.kernel is None else 1)
            n_features = X.shape[1]
        grid = self._resolve_grid(n_features)
        if n_features is not None and n_features != grid.n:
            raise InvalidArgument(f"X has {n_features} columns but the grid has {grid.n} nodes")
        if self.kernel is None:
            if X is None:
                raise InvalidArgument("fitting without a kernel needs sample paths X")
            mean = X.mean(axis=0)
            kernel = Tabulated(grid, np.cov(X, rowvar=False, ddof=1).reshape(grid.n, grid.n))
        else:
            kernel = self.kernel if isinstance(self.kernel, KernelSpec) else kernel_from_dict(self.kernel)
            mean = np.zeros(grid.n)
        dec = decompose(kernel, grid, max_rank=self.n_components, drop_tol=self.drop_tol)
        self.grid_ = grid
        self.kernel_ = kernel
        self.mean_ = mean
        self.decomposition_ = dec
        self.eigenvalues_ = dec.mu
        self.eigenfunctions_ = dec.efuns
        self.n_components_ = dec.rank
        self.n_features_in_ = grid.n
        return self

    def _check_X(self, X):
        check_is_fitted(self, "decomposition_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise InvalidArgument(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return X

    def transform(self, X):
        """KL coefficients of each row of ``X``, shape ``(n_samples, n_components_)``."""
        X = self._check_X(X)
        return ((X - self.mean_) * self.grid_.weights) @ self.eigenfunctions_.T

    def inverse_transform(self, Z):
        check_is_fitted(self, "decomposition_")
        Z = check_array(Z)
        if Z.shape[1] > self.n_components_:
            raise InvalidArgument(f"at most {self.n_components_} coefficients per row")
        k = Z.shape[1]
        return Z @ self.eigenfunctions_[:k] + self.mean_

    def sample(self, n_samples=1, law="Gaussian", seed=0, n_components=None, n_jobs=1):
        """Draw ``n_samples`` paths on the grid from the KL expansion."""
        check_is_fitted(self, "decomposition_")
        paths = sample_batch(self.decomposition_, CoefficientLaw.parse(law), n_components,
                             n_samples, seed, n_jobs=n_jobs)
        return np.stack([p.values for p in paths]) + self.mean_

    def power_norm(self, X, beta):
        """Norm of each path of ``X`` in the power space of exponent ``1 - beta``."""
        Z = self.transform(X)
        if beta == 1:
            return np.sqrt(np.sum(Z * Z, axis=1))
        return power_norm(Z, self.decomposition_, 1.0 - beta)

    def explained_variance_ratio(self):
        check_is_fitted(self, "decomposition_")
        total = self.decomposition_.trace or self.eigenvalues_.sum()
        return self.eigenvalues_ / total
