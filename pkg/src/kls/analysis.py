"""Monte Carlo and analytic studies on top of a spectral decomposition.

* truncation error of the KL expansion in L2 and in power norms,
* pointwise residual variance of a truncated expansion,
* power-law fits of the eigenvalue decay and the Besov smoothness range they imply,
* small-ball exponents of power norms,
* the zero-one behaviour of the random series ``sum_i mu_i^(beta-1) Z_i^2``.

All Monte Carlo loops run over replicate chunks (see
:func:`kls.sampling.map_replicates`), so results are fixed by the seed alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .exceptions import HypothesisViolated, InsufficientData, InsufficientRank, InvalidArgument
from .io import format_table
from .powerspace import power_weights
from .sampling import GAUSSIAN, CoefficientLaw, map_replicates, standardized_block
from .spectral import SpectralDecomposition, efun_values

# eigenvalues below this fraction of mu_1 are too close to round-off to fit
FIT_NOISE_FLOOR = 1e-11
# relative half-width floor of the decay-exponent interval; the regression
# standard error ignores the systematic bias of discretized eigenvalues, which
# moves the Brownian-motion fit by about 2% between 256 and 2048 nodes
FIT_REL_SYSTEMATIC = 0.025


# ---------------------------------------------------------------- decay fits


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit ``log mu_i = log_c_hat - alpha_hat log i`` over ``fit_range`` (1-based, inclusive)."""

    alpha_hat: float
    log_c_hat: float
    fit_range: tuple[int, int]
    rms_residual: float
    alpha_ci: tuple[float, float]
    slope_stderr: float = 0.0

    def to_dict(self) -> dict:
        return {"alpha_hat": self.alpha_hat, "log_c_hat": self.log_c_hat,
                "fit_range": list(self.fit_range), "rms_residual": self.rms_residual,
                "alpha_ci": list(self.alpha_ci), "slope_stderr": self.slope_stderr}


def default_fit_range(dec: SpectralDecomposition) -> tuple[int, int]:
    """Indices clear of both the pre-asymptotic head and the discretization-polluted tail.

    Uses ``[max(5, n/50), min(n/5, last index with mu_i > 1e-11 mu_1)]`` where
    ``n`` is the grid size.  Discretized eigenvalues follow the continuous
    ones only while ``i`` is small against ``n``.
    """
    n = dec.n_nodes
    lo = max(5, math.ceil(n / 50))
    reliable = int(np.count_nonzero(dec.mu > FIT_NOISE_FLOOR * dec.mu[0]))
    hi = min(n // 5, reliable, dec.rank)
    return lo, hi


def fit_decay(dec: SpectralDecomposition, fit_range: tuple[int, int] | None = None) -> DecayFit:
    """Fit the power law ``mu_i ~ C i^(-alpha)`` to the retained eigenvalues.

    ``alpha_ci`` is ``alpha_hat +- max(2 se, FIT_REL_SYSTEMATIC * alpha_hat)``
    where ``se`` is the standard error of the least-squares slope.
    """
    lo, hi = default_fit_range(dec) if fit_range is None else (int(fit_range[0]), int(fit_range[1]))
    if lo < 1 or hi > dec.rank or hi - lo + 1 < 5:
        raise InvalidArgument(
            f"fit range [{lo}, {hi}] needs at least 5 indices within the retained rank {dec.rank}")
    i = np.arange(lo, hi + 1, dtype=float)
    x = np.log(i)
    y = np.log(dec.mu[lo - 1:hi])
    xm = x.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - y.mean())) / sxx
    intercept = y.mean() - slope * xm
    res = y - (intercept + slope * x)
    rms = float(np.sqrt(np.mean(res**2)))
    se = float(np.sqrt(np.sum(res**2) / (x.size - 2) / sxx))
    alpha = float(-slope)
    half = max(2 * se, FIT_REL_SYSTEMATIC * abs(alpha))
    return DecayFit(alpha, float(intercept), (lo, hi), rms, (alpha - half, alpha + half), se)


# ---------------------------------------------------------- smoothness


@dataclass(frozen=True)
class SmoothnessCertificate:
    m_hat: float
    d: int
    certified_range: tuple[float, float] | None
    basis: str
    excluded_endpoint: float | None = None

    def describe(self) -> str:
        if self.certified_range is None:
            return (f"estimated Sobolev order m = {self.m_hat:.4g} <= d/2 = {self.d / 2:g}: "
                    "no Besov smoothness certified")
        lo, hi = self.certified_range
        return (f"paths lie in B^s_(2,2) for every s in ({lo:g}, {hi:.4g}); "
                f"s = {hi:.4g} itself is excluded for Gaussian processes")

    def to_dict(self) -> dict:
        return {"m_hat": self.m_hat, "d": self.d,
                "certified_range": None if self.certified_range is None else list(self.certified_range),
                "excluded_endpoint": self.excluded_endpoint, "basis": self.basis}


def smoothness_certificate(fit: DecayFit, d: int = 1) -> SmoothnessCertificate:
    """Translate a decay exponent into the Besov range of almost all sample paths.

    An RKHS equivalent to the Sobolev space ``W^m`` on a ``d``-dimensional
    domain has eigenvalues decaying like ``i^(-2m/d)``, so ``m = alpha d / 2``
    and paths lie in ``B^s_(2,2)`` for ``0 < s < m - d/2``.
    """
    if int(d) != d or d < 1:
        raise InvalidArgument("d must be a positive integer")
    m_hat = fit.alpha_hat * d / 2.0
    upper = m_hat - d / 2.0
    basis = (f"mu_i ~ i^-{fit.alpha_hat:.4g} over indices {fit.fit_range[0]}..{fit.fit_range[1]}"
             f" -> RKHS ~ W^m with m = alpha*d/2 = {m_hat:.4g}"
             f" -> paths in B^s_(2,2) for 0 < s < m - d/2")
    if upper <= 0:
        return SmoothnessCertificate(m_hat, int(d), None, basis, None)
    return SmoothnessCertificate(m_hat, int(d), (0.0, upper), basis, upper)


# ---------------------------------------------------------- truncation error


@dataclass
class TruncationReport:
    truncations: np.ndarray
    empirical_mse: np.ndarray
    std_error: np.ndarray
    predicted_tail: np.ndarray
    replicates: int
    norm_tag: str
    beta: float | None = None
    seed: int | None = None
    law: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        return format_table(["m", "empirical_mse", "std_error", "predicted_tail"],
                            [self.truncations, self.empirical_mse, self.std_error, self.predicted_tail])

    def to_dict(self) -> dict:
        return {"truncations": self.truncations, "empirical_mse": self.empirical_mse,
                "std_error": self.std_error, "predicted_tail": self.predicted_tail,
                "replicates": self.replicates, "norm": self.norm_tag, "beta": self.beta,
                "seed": self.seed, "law": self.law}


def _norm_weights(dec, norm: str, beta: float | None):
    if norm == "L2":
        return np.ones(dec.rank), dec.mu
    if norm != "power":
        raise InvalidArgument(f"norm must be 'L2' or 'power', got {norm!r}")
    if beta is None or not 0 < beta <= 1:
        raise InvalidArgument("power norm needs beta in (0, 1]")
    if beta == 1:
        return np.ones(dec.rank), dec.mu
    # squared [H]^(1-beta) norm weights mu^(beta-1); expected tail sum mu^beta
    return power_weights(dec.mu, 1.0 - beta), dec.mu**beta


def truncation_error_curve(dec: SpectralDecomposition, law=GAUSSIAN, truncations=None,
                           replicates: int = 10_000, seed: int = 0, norm: str = "L2",
                           beta: float | None = None, n_jobs: int | None = 1) -> TruncationReport:
    """Mean squared norm of the truncation error ``sum_{i>m} Z_i e_i`` for each ``m``.

    In L2 the prediction is ``sum_{i>m} mu_i``; in the power norm of
    exponent ``1 - beta`` it is ``sum_{i>m} mu_i^beta``.  Both are exact in
    expectation for the sampled finite-rank process.  Norms are evaluated in
    coefficient space, where they equal the quadrature norms of the error
    paths by orthonormality.
    """
    law = CoefficientLaw.parse(law)
    if replicates < 100:
        raise InvalidArgument("need at least 100 replicates")
    r = dec.rank
    if truncations is None:
        truncations = np.unique(np.linspace(0, r, 11).astype(int))
    t = np.asarray([r if m == "full" else m for m in truncations], dtype=int)
    if np.any(t < 0) or np.any(t > r):
        raise InvalidArgument(f"truncations must lie in [0, {r}]")
    w, expected_terms = _norm_weights(dec, norm, beta)
    tails_pred = np.concatenate([np.cumsum(expected_terms[::-1])[::-1], [0.0]])
    sq = np.sqrt(dec.mu)

    def work(lo, hi):
        z = standardized_block(law, r, seed, lo, hi) * sq
        terms = w * z * z
        tails = np.concatenate([np.cumsum(terms[:, ::-1], axis=1)[:, ::-1],
                                np.zeros((hi - lo, 1))], axis=1)
        return tails[:, t]

    samples = np.concatenate(map_replicates(work, 0, replicates, n_jobs), axis=0)
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(replicates)
    return TruncationReport(t, mean, se, tails_pred[t], replicates,
                            "L2" if norm == "L2" else f"power(1-beta), beta={beta}",
                            beta, seed, law.to_dict())


def pointwise_variance_residual(dec: SpectralDecomposition, spec, m: int, t):
    """``k(t, t) - sum_{j<=m} mu_j e_j(t)^2``: the variance of the truncation error at ``t``."""
    if not 0 <= m <= dec.rank:
        raise InvalidArgument(f"truncation {m} outside [0, {dec.rank}]")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    kd = np.asarray(spec(t_arr, t_arr), dtype=float)
    if m > 0:
        e = efun_values(dec.truncate(m), spec, t_arr)
        kd = kd - np.sum(dec.mu[:m, None] * e * e, axis=0)
    return float(kd[0]) if np.ndim(t) == 0 else kd


# ---------------------------------------------------------- small balls


@dataclass
class SmallBallReport:
    beta: float
    epsilons: np.ndarray
    survival: np.ndarray
    log_survival: np.ndarray
    hits: np.ndarray
    fitted_exponent: float
    predicted_exponent: float
    replicates: int
    used: np.ndarray
    method: str = "plain"
    alpha_hat: float = float("nan")
    seed: int | None = None

    def to_csv(self) -> str:
        return format_table(["epsilon", "survival", "log_survival", "hits", "used"],
                            [self.epsilons, self.survival, self.log_survival,
                             self.hits.astype(np.int64), self.used.astype(np.int64)])

    def to_dict(self) -> dict:
        return {"beta": self.beta, "epsilons": self.epsilons, "survival": self.survival,
                "log_survival": self.log_survival, "hits": self.hits,
                "fitted_exponent": self.fitted_exponent,
                "predicted_exponent": self.predicted_exponent, "replicates": self.replicates,
                "used": self.used, "method": self.method, "alpha_hat": self.alpha_hat,
                "seed": self.seed}


def _tilt_parameter(lam: np.ndarray, r2: float) -> float:
    # theta >= 0 with sum lam / (1 + 2 theta lam) = r2; the tilted mean of S equals the radius
    f = lambda th: np.sum(lam / (1.0 + 2.0 * th * lam)) - r2
    if f(0.0) <= 0:
        return 0.0
    hi = 1.0
    while f(hi) > 0:
        hi *= 4.0
    return optimize.brentq(f, 0.0, hi, xtol=1e-14 * hi, rtol=1e-13)


def small_ball_estimate(dec: SpectralDecomposition, beta: float, epsilons, replicates: int = 100_000,
                        seed: int = 0, law=GAUSSIAN, fit: DecayFit | None = None,
                        method: str = "plain", n_jobs: int | None = 1) -> SmallBallReport:
    """Estimate ``P(||X||_{1-beta} <= eps)`` and the exponent of ``-log P ~ eps^(-p)``.

    The squared norm is ``sum_i mu_i^(beta-1) Z_i^2 = sum_i mu_i^beta xi_i^2``.
    ``fitted_exponent`` is minus the least-squares slope of
    ``log(-log P)`` against ``log eps`` over the usable epsilons (those with
    ``0 < P < 1``); ``predicted_exponent`` is ``2 / (alpha beta - 1)``.

    ``method="plain"`` counts the fraction of replicates inside the ball.
    ``method="tilted"`` (Gaussian law only) draws ``xi_i`` with variance
    ``1 / (1 + 2 theta mu_i^beta)``, with ``theta`` chosen so the tilted mean
    of the squared norm is ``eps^2``, and reweights by the likelihood ratio.
    It estimates the same probability with far smaller relative error
    deep in the tail.

    Raises
    ------
    HypothesisViolated
        If ``alpha beta <= 1`` or the fit cannot exclude it (lower confidence bound).
    InsufficientData
        If fewer than 3 epsilons give ``0 < P < 1``.
    """
    law = CoefficientLaw.parse(law)
    beta = float(beta)
    if not 0 < beta <= 1:
        raise InvalidArgument("beta must lie in (0, 1]")
    eps = np.asarray(epsilons, dtype=float)
    if eps.ndim != 1 or eps.size < 4 or np.any(eps <= 0) or eps.max() / eps.min() < 4:
        raise InvalidArgument("need at least 4 positive epsilons spanning a factor of 4")
    if replicates < 10_000:
        raise InvalidArgument("small-ball estimates need at least 10^4 replicates")
    if method not in ("plain", "tilted"):
        raise InvalidArgument(f"unknown method {method!r}")
    if method == "tilted" and law.name != "Gaussian":
        raise InvalidArgument("the tilted estimator is only available for the Gaussian law")
    fit = fit_decay(dec) if fit is None else fit
    ab = fit.alpha_hat * beta
    if ab <= 1 or fit.alpha_ci[0] * beta <= 1:
        raise HypothesisViolated(
            f"alpha*beta = {ab:.4g} (lower bound {fit.alpha_ci[0] * beta:.4g}) must exceed 1")
    predicted = 2.0 / (ab - 1.0)
    lam = dec.mu**beta
    r = dec.rank
    r2 = eps**2

    if method == "plain":
        def work(lo, hi):
            xi = standardized_block(law, r, seed, lo, hi)
            s = (xi * xi) @ lam
            return (s[:, None] <= r2[None, :]).sum(axis=0)

        hits = np.sum(map_replicates(work, 0, replicates, n_jobs), axis=0)
        survival = hits / replicates
        with np.errstate(divide="ignore"):
            log_surv = np.log(survival)
    else:
        thetas = np.array([_tilt_parameter(lam, v) for v in r2])
        scales = 1.0 / np.sqrt(1.0 + 2.0 * thetas[:, None] * lam[None, :])
        log_norm = np.sum(np.log(scales), axis=1)

        def work(lo, hi):
            xi2 = standardized_block(law, r, seed, lo, hi) ** 2
            # (chunk, n_eps): S under each tilt
            s = xi2 @ (lam[None, :] * scales**2).T
            inside = s <= r2[None, :]
            logw = np.where(inside, log_norm[None, :] + thetas[None, :] * s, -np.inf)
            return inside.sum(axis=0), special.logsumexp(logw, axis=0)

        parts = map_replicates(work, 0, replicates, n_jobs)
        hits = np.sum([p[0] for p in parts], axis=0)
        log_surv = special.logsumexp(np.stack([p[1] for p in parts]), axis=0) - math.log(replicates)
        log_surv = np.minimum(log_surv, 0.0)
        survival = np.exp(log_surv)

    used = (hits > 0) & (log_surv < 0) & np.isfinite(log_surv)
    if used.sum() < 3:
        raise InsufficientData(
            f"only {int(used.sum())} epsilons have a survival estimate strictly between 0 and 1")
    slope = np.polyfit(np.log(eps[used]), np.log(-log_surv[used]), 1)[0]
    return SmallBallReport(beta, eps, survival, log_surv, hits, float(-slope), predicted,
                           replicates, used, method, fit.alpha_hat, seed)


# ---------------------------------------------------------- dichotomy


@dataclass
class DichotomyReport:
    beta: float
    converged_fraction: float
    mean_partial_sums: np.ndarray
    replicates: int
    window: float
    threshold: float
    seed: int | None = None

    def to_csv(self) -> str:
        m = np.arange(1, self.mean_partial_sums.size + 1)
        return format_table(["m", "mean_partial_sum"], [m, self.mean_partial_sums])

    def to_dict(self) -> dict:
        return {"beta": self.beta, "converged_fraction": self.converged_fraction,
                "replicates": self.replicates, "window": self.window,
                "threshold": self.threshold, "seed": self.seed,
                "final_mean_partial_sum": float(self.mean_partial_sums[-1])}


def dichotomy_probe(dec: SpectralDecomposition, law=GAUSSIAN, beta: float = 0.75,
                    replicates: int = 1000, seed: int = 0, window: float = 0.9,
                    threshold: float = 0.01, n_jobs: int | None = 1) -> DichotomyReport:
    """Fraction of replicates whose series ``S_m = sum_{i<=m} mu_i^(beta-1) Z_i^2`` looks convergent.

    A replicate counts as converged when the increment over the last stretch
    of indices, ``S_r - S_{floor(window r)}``, is below ``threshold * S_r``.
    """
    law = CoefficientLaw.parse(law)
    if dec.rank < 50:
        raise InsufficientRank(f"rank {dec.rank} < 50 is too small to probe convergence")
    if replicates < 100:
        raise InvalidArgument("need at least 100 replicates")
    if not 0 < beta <= 1:
        raise InvalidArgument("beta must lie in (0, 1]")
    r = dec.rank
    cut = int(math.floor(window * r))
    w = dec.mu**beta  # mu^(beta-1) Z^2 = mu^beta xi^2

    def work(lo, hi):
        xi = standardized_block(law, r, seed, lo, hi)
        s = np.cumsum(w * xi * xi, axis=1)
        conv = (s[:, -1] - s[:, cut - 1]) < threshold * s[:, -1]
        return int(conv.sum()), s.sum(axis=0)

    parts = map_replicates(work, 0, replicates, n_jobs)
    n_conv = sum(p[0] for p in parts)
    mean_s = np.sum([p[1] for p in parts], axis=0) / replicates
    return DichotomyReport(beta, n_conv / replicates, mean_s, replicates, window, threshold, seed)
