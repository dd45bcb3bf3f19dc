"""Gaussian kernels over ball or Euclidean distances, and the hyperbolic KDE."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidArgument, NumericDegenerate
from .geometry import MAX_ATANH_ARG, log_map, dist


@dataclass(frozen=True)
class KernelMatrix:
    raw: np.ndarray
    normalized: np.ndarray
    bandwidth: float


def _check_sigma(sigma):
    if not (np.isfinite(sigma) and sigma > 0):
        raise InvalidArgument(f"bandwidth sigma must be positive, got {sigma}")


def pairwise_sq_dist(points, c):
    """Dense (N, N) matrix of squared hyperbolic distances.

    Uses ``|-x ⊕ y|^2 = |x - y|^2 / (1 + 2c<x,y> + c^2|x|^2|y|^2)``, so the
    cost is a Gram matrix, a cdist call and elementwise work.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise InvalidArgument("expected a non-empty (N, p) array of points")
    sq = np.sum(x * x, axis=1)
    gram = x @ x.T
    diff = cdist(x, x, "sqeuclidean")
    den = 1.0 + 2.0 * c * gram + c * c * sq[:, None] * sq[None, :]
    arg = np.sqrt(-c * diff / den)
    if np.any(arg >= MAX_ATANH_ARG):
        bad = np.argwhere(arg >= MAX_ATANH_ARG)
        raise NumericDegenerate("pairwise distance reached the ball boundary", indices=bad)
    d = 2.0 / np.sqrt(-c) * np.arctanh(arg)
    d2 = d * d
    # exact symmetry and zero diagonal regardless of rounding in the Gram matrix
    d2 = np.triu(d2, 1)
    return d2 + d2.T


def pairwise_sq_euclidean(points):
    x = np.asarray(points, dtype=np.float64)
    d2 = np.triu(cdist(x, x, "sqeuclidean"), 1)
    return d2 + d2.T


def gaussian_weights(sq_dists, sigma) -> KernelMatrix:
    """``w_ij = exp(-d_ij^2 / (2 sigma^2))`` and its row-stochastic form."""
    _check_sigma(sigma)
    raw = np.exp(-np.asarray(sq_dists, dtype=np.float64) / (2.0 * sigma * sigma))
    normalized = raw / raw.sum(axis=1, keepdims=True)
    return KernelMatrix(raw=raw, normalized=normalized, bandwidth=float(sigma))


def _check_data(data):
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or len(data) == 0:
        raise InvalidArgument("kde needs a non-empty (N, p) data array")
    return data


def kde(x, data, sigma, c):
    """Mean Gaussian kernel value of ``x`` against ``data``; lies in (0, 1]."""
    _check_sigma(sigma)
    data = _check_data(data)
    d = dist(np.asarray(x, dtype=np.float64), data, c)
    return float(np.mean(np.exp(-d * d / (2.0 * sigma * sigma))))


def kde_gradient(x, data, sigma, c):
    """Riemannian gradient ``(1/(N sigma^2)) sum_j K(x, x_j) log_x(x_j)``.

    The result is in ambient coordinates. Directional derivatives along a
    tangent ``u`` are ``lambda_x^2 * <grad, u>``.
    """
    _check_sigma(sigma)
    data = _check_data(data)
    x = np.asarray(x, dtype=np.float64)
    d = dist(x, data, c)
    k = np.exp(-d * d / (2.0 * sigma * sigma))
    return k @ log_map(x, data, c) / (len(data) * sigma * sigma)
