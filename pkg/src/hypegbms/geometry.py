"""Poincaré ball primitives for curvature ``c < 0``.

Points are plain float64 arrays whose last axis holds the ball coordinates;
every function broadcasts over leading axes. The ball radius is
``1 / sqrt(-c)``. Tangent vectors are expressed in the same ambient
coordinates as the points.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, InvalidArgument, InvalidData, NumericDegenerate

# Points never get closer to the boundary than this fraction of the radius.
BOUNDARY_EPS = 1e-5
# Denominators / atanh arguments beyond these limits are treated as degenerate.
MIN_DENOM = 1e-15
MAX_ATANH_ARG = 1.0 - 1e-15


@dataclass(frozen=True)
class Curvature:
    """Sectional curvature ``c`` of the ball (strictly negative)."""

    c: float

    def __post_init__(self):
        validate_curvature(self.c)

    @property
    def kappa(self) -> float:
        return -self.c

    @property
    def radius(self) -> float:
        return 1.0 / np.sqrt(-self.c)


def validate_curvature(c) -> float:
    c = float(c)
    if not np.isfinite(c) or c >= 0.0:
        raise InvalidArgument(f"curvature must be a finite negative number, got {c}")
    return c


def _as_points(x):
    return np.asarray(x, dtype=np.float64)


def _check_dims(*arrays):
    dims = {a.shape[-1] if a.ndim else None for a in arrays}
    if None in dims or len(dims) != 1:
        raise InvalidArgument(
            f"dimension mismatch: {[a.shape for a in arrays]}"
        )


def _sqnorm(x):
    return np.sum(x * x, axis=-1, keepdims=True)


def _norm(x):
    return np.sqrt(_sqnorm(x))


def max_norm(c) -> float:
    """Largest coordinate norm allowed after clipping."""
    return (1.0 - BOUNDARY_EPS) / np.sqrt(-c)


def in_ball(x, c) -> np.ndarray:
    """Boolean mask of strict ball membership, ``-c * |x|^2 < 1``."""
    x = _as_points(x)
    return (-c * np.sum(x * x, axis=-1)) < 1.0


def check_in_ball(x, c):
    mask = in_ball(x, c)
    if not np.all(mask):
        bad = np.flatnonzero(~np.atleast_1d(mask))
        raise InvalidArgument(f"points outside the ball at indices {bad.tolist()}")


def clip_to_ball(x, c):
    """Radially pull points with norm >= (1 - 1e-5) * radius back to that norm."""
    x = _as_points(x)
    limit = max_norm(c)
    n = _norm(x)
    scale = np.where(n >= limit, limit / np.maximum(n, MIN_DENOM), 1.0)
    return x * scale


def conformal_factor(x, c):
    """``lambda_x = 2 / (1 + c |x|^2)``, keepdims over the coordinate axis."""
    return 2.0 / (1.0 + c * _sqnorm(_as_points(x)))


def _mobius_add_unclipped(v, w, c):
    v = _as_points(v)
    w = _as_points(w)
    _check_dims(v, w)
    vw = np.sum(v * w, axis=-1, keepdims=True)
    vv = _sqnorm(v)
    ww = _sqnorm(w)
    num = (1.0 - 2.0 * c * vw - c * ww) * v + (1.0 + c * vv) * w
    den = 1.0 - 2.0 * c * vw + c * c * vv * ww
    if np.any(den < MIN_DENOM):
        raise NumericDegenerate("Möbius addition denominator vanished (antipodal boundary points)")
    return num / den


def mobius_add(v, w, c):
    """Möbius (gyrovector) addition ``v ⊕_c w``, clipped to stay inside the ball."""
    return clip_to_ball(_mobius_add_unclipped(v, w, c), c)


def mobius_scalar_mul(r, v, c):
    """Möbius scalar multiplication ``r ⊗_c v``; ``r`` broadcasts against ``v[..., 0]``."""
    v = _as_points(v)
    r = np.asarray(r, dtype=np.float64)[..., None]
    sk = np.sqrt(-c)
    n = _norm(v)
    safe = np.maximum(n, MIN_DENOM)
    arg = np.minimum(sk * n, MAX_ATANH_ARG)
    out = np.tanh(r * np.arctanh(arg)) * v / (sk * safe)
    out = np.where(n > 0.0, out, 0.0)
    return clip_to_ball(out, c)


def _atanh_checked(arg):
    if np.any(arg >= MAX_ATANH_ARG):
        bad = np.argwhere(np.atleast_1d(arg >= MAX_ATANH_ARG))
        raise NumericDegenerate("distance argument reached the ball boundary", indices=bad)
    return np.arctanh(arg)


def dist(x, y, c):
    """Hyperbolic distance ``(2/sqrt(-c)) * atanh(sqrt(-c) * |-x ⊕ y|)``."""
    x = _as_points(x)
    y = _as_points(y)
    sk = np.sqrt(-c)
    # unclipped, so points near the boundary raise instead of saturating
    n = np.linalg.norm(_mobius_add_unclipped(-x, y, c), axis=-1)
    return 2.0 / sk * _atanh_checked(sk * n)


def dist_cosh(x, y, c=-1.0):
    """Unit-curvature distance via ``acosh(1 + 2|x-y|^2 / ((1-|x|^2)(1-|y|^2)))``."""
    if c != -1.0:
        raise InvalidArgument("dist_cosh is only defined for c = -1")
    x = _as_points(x)
    y = _as_points(y)
    _check_dims(x, y)
    diff = np.sum((x - y) ** 2, axis=-1)
    den = (1.0 - np.sum(x * x, axis=-1)) * (1.0 - np.sum(y * y, axis=-1))
    return np.arccosh(1.0 + 2.0 * diff / den)


def to_hyperboloid(x, c=-1.0):
    """Isometry from the unit ball onto the upper sheet of the hyperboloid."""
    if c != -1.0:
        raise InvalidArgument("to_hyperboloid is only defined for c = -1")
    x = _as_points(x)
    sq = _sqnorm(x)
    den = 1.0 - sq
    return np.concatenate([(1.0 + sq) / den, 2.0 * x / den], axis=-1)


def minkowski_inner(u, v):
    u = _as_points(u)
    v = _as_points(v)
    return -u[..., 0] * v[..., 0] + np.sum(u[..., 1:] * v[..., 1:], axis=-1)


def hyperboloid_dist(u, v):
    # -<u,v> >= 1 analytically; rounding can dip just below
    return np.arccosh(np.maximum(-minkowski_inner(u, v), 1.0))


def exp_map(x, v, c):
    """Exponential map at ``x``; a zero tangent returns ``x`` unchanged."""
    x = _as_points(x)
    v = _as_points(v)
    _check_dims(x, v)
    sk = np.sqrt(-c)
    n = _norm(v)
    safe = np.maximum(n, MIN_DENOM)
    step = np.tanh(conformal_factor(x, c) * sk * n / 2.0) * v / (sk * safe)
    out = mobius_add(x, step, c)
    return np.where(n > 0.0, out, np.broadcast_to(x, out.shape))


def log_map(x, y, c):
    """Logarithmic map at ``x``; returns exact zeros where ``y == x``."""
    x = _as_points(x)
    y = _as_points(y)
    sk = np.sqrt(-c)
    u = _mobius_add_unclipped(-x, y, c)
    n = _norm(u)
    safe = np.maximum(n, MIN_DENOM)
    lam = conformal_factor(x, c)
    out = 2.0 / (lam * sk) * _atanh_checked(sk * n) * u / safe
    return np.where(n > 0.0, out, 0.0)


def _check_weights(points, weights):
    if points.ndim != 2 or points.shape[0] == 0:
        raise InvalidArgument("expected a non-empty (N, p) array of points")
    if weights.shape != (points.shape[0],):
        raise InvalidArgument(f"need {points.shape[0]} weights, got shape {weights.shape}")
    if np.any(weights < 0):
        raise InvalidArgument("weights must be non-negative")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise InvalidArgument(f"weights must sum to 1, got {weights.sum()!r}")


def mobius_weighted_mean(points, weights, c):
    """Left fold ``(((w_0 ⊗ x_0) ⊕ (w_1 ⊗ x_1)) ⊕ ...)`` in index order.

    Möbius addition is neither associative nor commutative, so the fold
    order is part of the definition.
    """
    points = _as_points(points)
    weights = np.asarray(weights, dtype=np.float64)
    _check_weights(points, weights)
    scaled = mobius_scalar_mul(weights, points, c)
    acc = scaled[0]
    for term in scaled[1:]:
        acc = mobius_add(acc, term, c)
    return acc


def tangent_weighted_mean(basepoint, points, weights, c):
    """``exp_b(sum_j w_j log_b(x_j))``: an order-free cross-check for the Möbius mean."""
    points = _as_points(points)
    weights = np.asarray(weights, dtype=np.float64)
    _check_weights(points, weights)
    basepoint = _as_points(basepoint)
    v = weights @ log_map(basepoint, points, c)
    return exp_map(basepoint, v, c)


def frechet_mean(points, weights, c, tol=1e-10, max_iter=1000, step=0.5):
    """Weighted Fréchet mean by damped Karcher fixed-point iteration.

    Iterates ``z <- exp_z(step * sum_j w_j log_z(x_j))`` from the heaviest
    point until the tangent residual norm drops to ``tol``.

    Raises
    ------
    ConvergenceFailure
        If ``max_iter`` iterations pass without reaching ``tol``; the exception
        carries the last iterate and its residual.
    """
    points = _as_points(points)
    weights = np.asarray(weights, dtype=np.float64)
    _check_weights(points, weights)
    z = points[int(np.argmax(weights))].copy()
    residual = np.inf
    for _ in range(max_iter + 1):
        g = weights @ log_map(z, points, c)
        residual = float(np.linalg.norm(g))
        if residual <= tol:
            return z
        z = exp_map(z, step * g, c)
    raise ConvergenceFailure(
        f"Fréchet mean did not reach tol={tol} in {max_iter} iterations (residual {residual:.3e})",
        last_iterate=z,
        residual=residual,
    )


def standardize(raw, scale=1.0):
    """Column z-score then global rescale so the largest row norm equals ``scale``.

    Constant columns become zero. A matrix that is zero after centering is
    returned as zeros.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise InvalidArgument(f"expected a 2-D matrix, got shape {raw.shape}")
    if not scale > 0:
        raise InvalidArgument(f"scale must be positive, got {scale}")
    finite = np.isfinite(raw).all(axis=1)
    if not finite.all():
        row = int(np.flatnonzero(~finite)[0])
        raise InvalidData(f"non-finite value in row {row}", row=row)
    centered = raw - raw.mean(axis=0)
    std = raw.std(axis=0)
    z = np.divide(centered, std, out=np.zeros_like(centered), where=std > 0)
    biggest = np.linalg.norm(z, axis=1).max() if len(z) else 0.0
    if biggest == 0.0:
        return z
    return z * (scale / biggest)


def project_to_ball(raw, c, scale=1.0):
    """Standardize ``raw`` and map every row into the ball with ``exp_0``."""
    c = validate_curvature(c)
    z = standardize(raw, scale)
    return exp_map(np.zeros(z.shape[1]), z, c)
