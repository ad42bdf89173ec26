"""Stationary Gaussian-process regression baseline.

Matern-5/2 kernel with anisotropic per-dimension lengthscales, a constant
prior mean, and a fitted nugget. Hyperparameters are maximum-likelihood
estimates found by gradient-free Nelder-Mead in log space with restarts;
the constant mean and signal variance are profiled out in closed form, so
the search runs over (log lengthscales, log nugget/signal ratio) only.

Dense Cholesky algebra throughout: training size is hard-capped. The
separate squared-exponential kernel is used by the piecewise-surface
benchmark generator and follows the convention that the lengthscale
divides the squared distance directly, k = v * exp(-||x - x'||^2 / ell).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.stats import norm

from .exceptions import CapacityError, ConditioningError
from .rng import SeededRng

__all__ = [
    "matern52_kernel",
    "se_kernel",
    "GpConfig",
    "GpModel",
    "log_marginal_likelihood",
    "fit_gp",
    "gp_prior_sample",
]

TRAIN_SIZE_CAP = 4000


def _as_2d(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("inputs must be (n, d) arrays")
    return x


def matern52_kernel(x1, x2, lengthscales, variance=1.0):
    """Matern-5/2 covariance with per-dimension lengthscales.

    k(r) = variance * (1 + sqrt(5) r + 5 r^2 / 3) exp(-sqrt(5) r) where
    r is the euclidean distance after dividing each coordinate by its
    lengthscale.
    """
    x1 = _as_2d(x1)
    x2 = _as_2d(x2)
    ls = np.broadcast_to(np.asarray(lengthscales, dtype=np.float64),
                         (x1.shape[1],))
    if np.any(ls <= 0) or variance <= 0:
        raise ValueError("lengthscales and variance must be positive")
    r = cdist(x1 / ls, x2 / ls)
    sq5r = math.sqrt(5.0) * r
    return variance * (1.0 + sq5r + (5.0 / 3.0) * r * r) * np.exp(-sq5r)


def se_kernel(x1, x2, lengthscale, variance=1.0):
    """Isotropic squared-exponential covariance.

    k = variance * exp(-||x - x'||^2 / lengthscale); note the lengthscale
    divides the squared distance (no factor 2, not squared itself).
    """
    if lengthscale <= 0 or variance <= 0:
        raise ValueError("lengthscale and variance must be positive")
    d2 = cdist(_as_2d(x1), _as_2d(x2), "sqeuclidean")
    return variance * np.exp(-d2 / lengthscale)


@dataclass
class GpConfig:
    """Hyperparameter-search settings for one GP fit.

    anisotropic=False stops after the shared-lengthscale search stage,
    returning a constant lengthscale vector. That is the reference
    comparator configuration for the benchmark suite; per-dimension
    refinement is noticeably stronger on screening-style problems with
    inert inputs and is available for standalone use.
    """

    restarts: int = 5
    max_iterations: int = 300
    nugget_floor_factor: float = 1e-6
    train_size_cap: int = TRAIN_SIZE_CAP
    anisotropic: bool = True

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iterations < 10:
            raise ValueError("max_iterations must be >= 10")
        if not 0 < self.nugget_floor_factor < 1:
            raise ValueError("nugget_floor_factor must lie in (0, 1)")


def log_marginal_likelihood(x, y, lengthscales, signal_variance, nugget,
                            mean=None):
    """Gaussian log marginal likelihood via Cholesky factorization.

    mean defaults to the sample mean of y. Kept separate from the fit path
    so it can be cross-checked against the dense-inverse formula.
    """
    x = _as_2d(x)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if nugget < 0:
        raise ValueError("nugget must be >= 0")
    n = y.shape[0]
    mu = float(np.mean(y)) if mean is None else float(mean)
    k = matern52_kernel(x, x, lengthscales, signal_variance)
    k[np.diag_indices_from(k)] += nugget
    try:
        low = cholesky(k, lower=True)
    except np.linalg.LinAlgError as err:
        raise ConditioningError(f"covariance not positive definite: {err}") from err
    resid = y - mu
    alpha = cho_solve((low, True), resid)
    return float(
        -0.5 * resid @ alpha
        - np.sum(np.log(np.diag(low)))
        - 0.5 * n * math.log(2.0 * math.pi)
    )


class GpModel:
    """A fitted GP: hyperparameters plus cached training factorization."""

    def __init__(self, x_train, y_train, lengthscales, signal_variance,
                 nugget, mean, lml, config):
        self.x_train = x_train
        self.y_train = y_train
        self.lengthscales = np.asarray(lengthscales, dtype=np.float64)
        self.signal_variance = float(signal_variance)
        self.nugget = float(nugget)
        self.mean = float(mean)
        self.lml = float(lml)
        self.config = config
        k = matern52_kernel(x_train, x_train, self.lengthscales,
                            self.signal_variance)
        k[np.diag_indices_from(k)] += self.nugget
        self._low = cholesky(k, lower=True)
        self._alpha = cho_solve((self._low, True), y_train - self.mean)

    def predict(self, x):
        """Posterior mean and variance at new inputs.

        The returned variance includes the fitted nugget, so intervals
        cover noisy observations; far from the data it approaches
        signal_variance + nugget, and at a training input with a tiny
        nugget the mean interpolates.
        """
        x = _as_2d(x)
        k_star = matern52_kernel(self.x_train, x, self.lengthscales,
                                 self.signal_variance)
        mean = self.mean + k_star.T @ self._alpha
        v = solve_triangular(self._low, k_star, lower=True)
        var = self.signal_variance + self.nugget - np.einsum("ij,ij->j", v, v)
        return mean, np.maximum(var, 0.0)

    def predict_quantiles(self, x, levels):
        """Gaussian quantiles mean + z(level) * sd, matching the
        predictor protocol used by evaluate()."""
        levels = np.asarray(levels, dtype=np.float64).reshape(-1)
        if levels.size == 0:
            raise ValueError("levels must be non-empty")
        if np.any(levels <= 0) or np.any(levels >= 1):
            raise ValueError("levels must lie strictly inside (0, 1)")
        if np.any(np.diff(levels) < 0):
            raise ValueError("levels must be sorted ascending")
        mean, var = self.predict(x)
        sd = np.sqrt(var)
        return mean[:, None] + sd[:, None] * norm.ppf(levels)[None, :]

    def point(self, x):
        """Kriging mean, the point prediction used for RMSE."""
        return self.predict(x)[0]


_LOG_BOX = (-12.0, 8.0)


def _clip_theta(theta, d, ls_lo):
    lo = np.full(d + 1, _LOG_BOX[0])
    lo[:d] = ls_lo
    return np.clip(theta, lo, _LOG_BOX[1])


def _profiled_nll(theta, x, y, d, ls_lo=_LOG_BOX[0]):
    """Negative reduced log likelihood at theta = (log ls_1..d, log ratio).

    Mean and signal variance are profiled out analytically. Returns
    (nll, mean, signal_variance, ratio) so the best evaluation can be
    reused without refactorizing. ls_lo is a data-derived lower bound on
    log lengthscales: below the observed point spacing, a short-scale
    signal is indistinguishable from noise and the likelihood goes flat
    in the signal/nugget split.
    """
    n = y.shape[0]
    clipped = _clip_theta(theta, d, ls_lo)
    penalty = 1e5 * float(np.sum((theta - clipped) ** 2))
    ls = np.exp(clipped[:d])
    ratio = math.exp(clipped[d])
    r = cdist(x / ls, x / ls)
    sq5r = math.sqrt(5.0) * r
    corr = (1.0 + sq5r + (5.0 / 3.0) * r * r) * np.exp(-sq5r)
    corr[np.diag_indices_from(corr)] += ratio
    try:
        low = cholesky(corr, lower=True)
    except np.linalg.LinAlgError:
        return 1e12 + penalty, 0.0, 1.0, ratio
    ones = np.ones(n)
    a_y = cho_solve((low, True), y)
    a_1 = cho_solve((low, True), ones)
    denom = float(ones @ a_1)
    mu = float(ones @ a_y) / denom
    resid_alpha = a_y - mu * a_1
    sigma2 = float((y - mu * ones) @ resid_alpha) / n
    sigma2 = max(sigma2, 1e-12 * float(np.var(y)) + 1e-300)
    nll = n * math.log(sigma2) + 2.0 * float(np.sum(np.log(np.diag(low))))
    return nll + penalty, mu, sigma2, ratio


def fit_gp(x, y, config=None, seed=0):
    """Maximum-likelihood GP fit; deterministic given (data, config, seed).

    Search runs in two Nelder-Mead stages, both in log space: a cheap
    isotropic pass (shared lengthscale + noise ratio, multi-start with
    `restarts` starts) followed by a per-dimension refinement seeded at
    the isotropic optimum. The refinement can only improve the reduced
    likelihood because Nelder-Mead keeps its best vertex.

    Raises CapacityError above the dense-algebra training cap.
    """
    config = config or GpConfig()
    x = _as_2d(x)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n, d = x.shape
    if n != y.shape[0]:
        raise ValueError("x and y row counts differ")
    if n < 3:
        raise ValueError("GP fit needs at least 3 points")
    if n > config.train_size_cap:
        raise CapacityError(
            f"n={n} exceeds the dense GP training cap of {config.train_size_cap}; "
            "subsample or use the quantile-network surrogate"
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    rng = seed if isinstance(seed, SeededRng) else SeededRng(seed)

    # per-dimension median absolute difference as the lengthscale anchor
    sub = x if n <= 400 else x[rng.choice(n, size=400, replace=False)]
    anchors = np.empty(d)
    for k in range(d):
        diffs = np.abs(sub[:, k, None] - sub[None, :, k])
        med = np.median(diffs[np.triu_indices_from(diffs, k=1)])
        anchors[k] = med if med > 0 else max(np.ptp(x[:, k]), 1e-3)
    var_y = float(np.var(y))
    log_anchor = float(np.mean(np.log(anchors)))

    # lengthscale lower bound: median nearest-neighbor distance
    nn = cKDTree(x).query(x, k=2)[0][:, 1]
    nn = nn[nn > 0]
    ls_lo = float(np.log(np.median(nn))) if nn.size else _LOG_BOX[0]
    ls_lo = max(ls_lo, _LOG_BOX[0])

    def iso_objective(t2):
        theta = np.concatenate([np.full(d, t2[0]), [t2[1]]])
        return _profiled_nll(theta, x, y, d, ls_lo)[0]

    starts = [np.array([log_anchor, math.log(0.05)])]
    for _ in range(config.restarts - 1):
        starts.append(np.array([
            log_anchor + rng.uniform(-1.0, 1.0) * math.log(10.0),
            rng.uniform(math.log(1e-5), math.log(0.5)),
        ]))
    best = None
    for t0 in starts:
        res = minimize(iso_objective, t0, method="Nelder-Mead",
                       options={"maxiter": 150, "xatol": 1e-3, "fatol": 1e-3})
        if best is None or res.fun < best.fun:
            best = res

    theta0 = np.concatenate([np.full(d, best.x[0]), [best.x[1]]])
    if d > 1 and config.anisotropic:
        res = minimize(
            lambda t: _profiled_nll(t, x, y, d, ls_lo)[0],
            theta0,
            method="Nelder-Mead",
            options={
                "maxiter": config.max_iterations,
                "xatol": 1e-3,
                "fatol": 1e-3,
                "adaptive": d > 4,
            },
        )
        theta = res.x if res.fun <= best.fun else theta0
    else:
        theta = theta0

    theta = _clip_theta(theta, d, ls_lo)
    _, mu, sigma2, ratio = _profiled_nll(theta, x, y, d, ls_lo)
    ls = np.exp(theta[:d])
    nugget = ratio * sigma2
    floor = config.nugget_floor_factor * var_y
    if nugget < floor and var_y > 0:
        # re-profile with the floored noise ratio
        theta = theta.copy()
        theta[d] = math.log(floor / sigma2)
        _, mu, sigma2, ratio = _profiled_nll(theta, x, y, d, ls_lo)
        nugget = ratio * sigma2
    lml = log_marginal_likelihood(x, y, ls, sigma2, nugget, mean=mu)
    return GpModel(x, y, ls, sigma2, nugget, mu, lml, config)


def gp_prior_sample(x, rng, lengthscales=None, variance=1.0, mean=0.0,
                    kernel="matern52", n_draws=1, se_lengthscale=None):
    """Draw functions from a GP prior at fixed inputs.

    Jitter escalates (1e-8, 1e-6, 1e-4 relative to the signal variance)
    before giving up with ConditioningError. Returns (n_draws, n) draws,
    or (n,) when n_draws == 1.
    """
    x = _as_2d(x)
    rng = rng if isinstance(rng, SeededRng) else SeededRng(rng)
    if kernel == "matern52":
        if lengthscales is None:
            raise ValueError("matern52 prior needs lengthscales")
        k = matern52_kernel(x, x, lengthscales, variance)
    elif kernel == "se":
        ell = se_lengthscale if se_lengthscale is not None else lengthscales
        if ell is None:
            raise ValueError("se prior needs a lengthscale")
        k = se_kernel(x, x, float(ell), variance)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    low = None
    for jitter in (1e-8, 1e-6, 1e-4):
        try:
            low = cholesky(k + jitter * variance * np.eye(x.shape[0]), lower=True)
            break
        except np.linalg.LinAlgError:
            continue
    if low is None:
        raise ConditioningError(
            "prior covariance stayed non-positive-definite at jitter 1e-4"
        )
    z = rng.standard_normal((n_draws, x.shape[0]))
    draws = mean + z @ low.T
    return draws[0] if n_draws == 1 else draws
