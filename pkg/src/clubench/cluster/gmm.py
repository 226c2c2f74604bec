"""Gaussian mixture fitted by EM (full or spherical covariances)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, solve_triangular
from scipy.special import logsumexp

from .geometry import ClusteringError
from .kmeans import kmeans, kmeans_plusplus, point_costs

REG_COVAR = 1e-6
TOL = 1e-6
MAX_ITER = 200
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class GMMResult:
    labels: np.ndarray
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    history: list = field(default_factory=list)
    converged: bool = False


def _m_step(X, resp, covariance_type):
    n, m = X.shape
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / n
    means = (resp.T @ X) / nk[:, None]
    K = resp.shape[1]
    if covariance_type == "full":
        covs = np.empty((K, m, m))
        for k in range(K):
            diff = X - means[k]
            covs[k] = (resp[:, k, None] * diff).T @ diff / nk[k]
            covs[k].flat[:: m + 1] += REG_COVAR
    elif covariance_type == "spherical":
        sq = (resp.T @ (X * X)) / nk[:, None] - 2.0 * means * (resp.T @ X) / nk[:, None] + means ** 2
        covs = np.maximum(sq.mean(axis=1), 0.0) + REG_COVAR
    else:
        raise ValueError(f"unknown covariance_type {covariance_type!r}")
    return weights, means, covs


def _log_gauss(X, means, covs, covariance_type):
    n, m = X.shape
    K = means.shape[0]
    out = np.empty((n, K))
    for k in range(K):
        diff = X - means[k]
        if covariance_type == "full":
            try:
                c, lower = cho_factor(covs[k], lower=True, check_finite=True)
            except (LinAlgError, ValueError) as exc:
                raise ClusteringError(f"singular covariance in component {k}") from exc
            z = solve_triangular(c, diff.T, lower=True, check_finite=False)
            maha = (z * z).sum(axis=0)
            logdet = 2.0 * np.log(np.diag(c)).sum()
        else:
            maha = (diff * diff).sum(axis=1) / covs[k]
            logdet = m * np.log(covs[k])
        out[:, k] = -0.5 * (m * _LOG_2PI + logdet + maha)
    return out


def _e_step(X, weights, means, covs, covariance_type):
    weighted = _log_gauss(X, means, covs, covariance_type) + np.log(weights)
    norm = logsumexp(weighted, axis=1)
    return float(norm.mean()), np.exp(weighted - norm[:, None])


def _initial_resp(X, K, init_params, rng):
    n = X.shape[0]
    resp = np.zeros((n, K))
    if init_params == "kmeans":
        labels = kmeans(X, K, init="kmeans++", n_init=1, seed=int(rng.integers(2**31))).labels
        resp[np.arange(n), labels] = 1.0
    elif init_params == "kmeans++":
        idx = kmeans_plusplus(X, K, rng)
        labels = point_costs(X, X[idx], "euclidean").argmin(axis=1)
        resp[np.arange(n), labels] = 1.0
    elif init_params == "random":
        resp = rng.uniform(size=(n, K))
        resp /= resp.sum(axis=1, keepdims=True)
    else:
        raise ValueError(f"unknown init_params {init_params!r}")
    return resp


def gmm(X, K, covariance_type="full", init_params="kmeans", seed=0, max_iter=MAX_ITER, tol=TOL):
    X = np.asarray(X, dtype=np.float64)
    if K < 1 or K > X.shape[0]:
        raise ClusteringError(f"cannot fit {K} components to {X.shape[0]} samples")
    rng = np.random.default_rng(seed)
    resp = _initial_resp(X, K, init_params, rng)
    weights, means, covs = _m_step(X, resp, covariance_type)
    history = []
    converged = False
    for _ in range(max_iter):
        ll, resp = _e_step(X, weights, means, covs, covariance_type)
        if not np.isfinite(ll):
            raise ClusteringError("log-likelihood is not finite")
        history.append(ll)
        if len(history) > 1 and abs(history[-1] - history[-2]) < tol:
            converged = True
            break
        weights, means, covs = _m_step(X, resp, covariance_type)
    labels = resp.argmax(axis=1)
    return GMMResult(labels=labels, weights=weights, means=means, covariances=covs,
                     history=history, converged=converged)
