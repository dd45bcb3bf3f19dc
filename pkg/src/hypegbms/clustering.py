"""Gaussian blurring mean shift, in the Poincaré ball and in flat space.

Both loops share preprocessing (column standardization + rescale), stopping
rules and the final connected-component assignment, so they differ only in
the geometry used for distances, means and movements.
"""

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numba
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import geometry as geo
from .errors import InvalidArgument, NumericDegenerate
from .kernel import gaussian_weights, pairwise_sq_dist, pairwise_sq_euclidean

logger = logging.getLogger(__name__)


class StopReason(str, enum.Enum):
    MOVEMENT = "movement"
    ENTROPY = "entropy"
    MAX_ITER = "max_iter"


@dataclass
class RunConfig:
    """Hyperparameters for one clustering run.

    ``delta=None`` selects 0.1 x the median pairwise distance of the
    preprocessed input. ``curvature`` is ignored by the flat-space loop.
    """

    sigma: float
    curvature: float = -1.0
    epsilon: float = 1e-5
    delta: Optional[float] = None
    gamma: float = 1e-4
    max_iter: int = 200
    scale: float = 1.0
    entropy_bins_fraction: float = 0.9
    seed: int = 42

    def __post_init__(self):
        for name in ("sigma", "epsilon", "gamma", "scale"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise InvalidArgument(f"{name} must be a positive number, got {value!r}")
        if self.delta is not None and not (math.isfinite(self.delta) and self.delta > 0):
            raise InvalidArgument(f"delta must be positive, got {self.delta!r}")
        geo.validate_curvature(self.curvature)
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidArgument(f"max_iter must be an integer >= 1, got {self.max_iter!r}")
        if not 0.0 < self.entropy_bins_fraction <= 1.0:
            raise InvalidArgument("entropy_bins_fraction must lie in (0, 1]")


@dataclass
class IterationTrace:
    iteration: int
    avg_movement: float
    entropy: float
    # mean KDE value of the configuration after this iteration's update
    mean_density: float


@dataclass
class ClusterResult:
    labels: np.ndarray
    modes: np.ndarray
    num_clusters: int
    trace: List[IterationTrace]
    converged: bool
    stop_reason: StopReason
    points: np.ndarray
    delta: float
    initial_density: float = field(default=float("nan"))

    @property
    def iterations(self) -> int:
        return len(self.trace)


# --- single steps -----------------------------------------------------------


@numba.njit(cache=True)
def _fold_kernel(x, wbar, c, limit, max_arg, min_denom, out):
    n, p = x.shape
    sk = math.sqrt(-c)
    a = np.empty(n)
    u = np.zeros((n, p))
    uu = np.zeros(n)
    for j in range(n):
        sq = 0.0
        for d in range(p):
            sq += x[j, d] * x[j, d]
        nrm = math.sqrt(sq)
        a[j] = math.atanh(min(sk * nrm, max_arg))
        if nrm > 0.0:
            for d in range(p):
                u[j, d] = x[j, d] / (sk * nrm)
                uu[j] += u[j, d] * u[j, d]
    for i in range(n):
        acc = out[i]
        acc_sq = 0.0
        for j in range(n):
            t = math.tanh(wbar[i, j] * a[j])
            dot = 0.0
            for d in range(p):
                dot += acc[d] * u[j, d]
            vw = t * dot
            ww = t * t * uu[j]
            coef_v = 1.0 - 2.0 * c * vw - c * ww
            coef_w = (1.0 + c * acc_sq) * t
            den = 1.0 - 2.0 * c * vw + c * c * acc_sq * ww
            if den < min_denom:
                return i
            sq = 0.0
            for d in range(p):
                acc[d] = (coef_v * acc[d] + coef_w * u[j, d]) / den
                sq += acc[d] * acc[d]
            acc_sq = sq
            if acc_sq >= limit * limit:
                f = limit / math.sqrt(acc_sq)
                for d in range(p):
                    acc[d] *= f
                acc_sq = limit * limit
    return -1


def _fold_mobius_rows(x, wbar, c):
    """Row-wise Möbius weighted means ``⊕_j wbar[i, j] ⊗ x_j`` for every ``i``.

    The left fold runs over ``j`` in ascending order. Each term
    ``wbar[i, j] ⊗ x_j`` equals ``tanh(wbar[i, j] a_j) u_j`` with
    ``a_j = atanh(sqrt(k) |x_j|)`` and ``u_j = x_j / (sqrt(k) |x_j|)``, so the
    atanh and the direction are computed once per column. Starting the fold
    from 0 is exact because ``0 ⊕ v = v``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    wbar = np.ascontiguousarray(wbar, dtype=np.float64)
    out = np.zeros_like(x)
    bad = _fold_kernel(x, wbar, float(c), geo.max_norm(c), geo.MAX_ATANH_ARG, geo.MIN_DENOM, out)
    if bad >= 0:
        raise NumericDegenerate(f"Möbius mean degenerate for row {bad}", indices=[bad])
    return out


def hypegbms_step(points, sigma, c, weights=None):
    """One blurring update in the ball.

    Returns ``(new_points, avg_movement, movements)`` where ``movements[i]``
    is ``|log_{x_i}(x_i')|``. ``weights`` may pass a precomputed
    :class:`KernelMatrix` for ``points``.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise InvalidArgument("expected a non-empty (N, p) array of points")
    if weights is None:
        weights = gaussian_weights(pairwise_sq_dist(x, c), sigma)
    new = _fold_mobius_rows(x, weights.normalized, c)
    moves = np.linalg.norm(geo.log_map(x, new, c), axis=1)
    return new, float(moves.mean()), moves


def gbms_step(points, sigma, weights=None):
    """One flat-space blurring update; same return shape as :func:`hypegbms_step`."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise InvalidArgument("expected a non-empty (N, p) array of points")
    if weights is None:
        weights = gaussian_weights(pairwise_sq_euclidean(x), sigma)
    new = weights.normalized @ x
    moves = np.linalg.norm(new - x, axis=1)
    return new, float(moves.mean()), moves


# --- stopping -----------------------------------------------------------------


def entropy_bin_count(n, bins_fraction):
    # small slack so that e.g. 0.9 * 10 is not floored to 8
    return max(1, int(math.floor(bins_fraction * n + 1e-9)))


def movement_entropy(movements, bins_fraction=0.9):
    """Shannon entropy of the histogram of per-point movements.

    Uses ``floor(bins_fraction * N)`` equal-width bins spanning
    ``[0, max(movements)]``; empty bins contribute nothing.
    """
    m = np.asarray(movements, dtype=np.float64)
    if m.ndim != 1 or len(m) < 2:
        raise InvalidArgument("movement entropy needs at least two movements")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise InvalidArgument("movements must be finite and non-negative")
    top = m.max()
    if top == 0.0:
        return 0.0
    n_bins = entropy_bin_count(len(m), bins_fraction)
    counts, _ = np.histogram(m, bins=n_bins, range=(0.0, top))
    p = counts[counts > 0] / len(m)
    return float(max(0.0, -np.sum(p * np.log(p))))


def should_stop(delta_t, entropy_prev, entropy_curr, cfg):
    """Combined rule: movement below epsilon, or entropy change below gamma.

    ``entropy_prev=None`` (first iteration) disables the entropy branch.
    Returns ``(stop, reason)`` with ``reason=None`` when not stopping.
    """
    if delta_t < cfg.epsilon:
        return True, StopReason.MOVEMENT
    if entropy_prev is not None and abs(entropy_curr - entropy_prev) < cfg.gamma:
        return True, StopReason.ENTROPY
    return False, None


# --- assignment ---------------------------------------------------------------


def first_seen_labels(labels):
    """Relabel so ids appear in order of first occurrence (0, 1, 2, ...)."""
    labels = np.asarray(labels)
    mapping = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels.tolist()):
        out[i] = mapping.setdefault(lab, len(mapping))
    return out


def components_from_distances(distances, delta):
    """Connected components of the graph ``d_ij <= delta``, first-seen order."""
    adjacency = csr_matrix(np.asarray(distances) <= delta)
    _, raw = connected_components(adjacency, directed=False)
    return first_seen_labels(raw)


def assign_clusters(points, delta, c=None, distances=None):
    """Threshold-graph clustering of final positions.

    With ``c`` set, distances are hyperbolic and each mode is the
    uniform-weight Fréchet mean of its members; with ``c=None`` they are
    Euclidean and modes are plain averages. ``distances`` may pass a
    precomputed distance matrix.

    Returns ``(labels, modes, num_clusters)``.
    """
    if not delta > 0:
        raise InvalidArgument(f"delta must be positive, got {delta}")
    x = np.asarray(points, dtype=np.float64)
    if distances is None:
        d2 = pairwise_sq_euclidean(x) if c is None else pairwise_sq_dist(x, c)
        distances = np.sqrt(d2)
    labels = components_from_distances(distances, delta)
    k = int(labels.max()) + 1
    modes = np.empty((k, x.shape[1]))
    for lab in range(k):
        members = x[labels == lab]
        if c is None:
            modes[lab] = members.mean(axis=0)
        else:
            w = np.full(len(members), 1.0 / len(members))
            modes[lab] = geo.frechet_mean(members, w, c)
    return labels, modes, k


def default_delta(distances, fallback):
    """0.1 x median off-diagonal distance; ``fallback`` when that is zero."""
    n = len(distances)
    if n < 2:
        return fallback
    med = float(np.median(distances[np.triu_indices(n, 1)]))
    return 0.1 * med if med > 0 else fallback


# --- full runs ----------------------------------------------------------------


def _run(x, cfg, c, callback):
    hyperbolic = c is not None
    n = len(x)

    def weights_of(points):
        d2 = pairwise_sq_dist(points, c) if hyperbolic else pairwise_sq_euclidean(points)
        return d2, gaussian_weights(d2, cfg.sigma)

    d2, weights = weights_of(x)
    delta = cfg.delta if cfg.delta is not None else default_delta(np.sqrt(d2), cfg.epsilon)
    initial_density = float(weights.raw.mean())

    trace = []
    entropy_prev = None
    reason = StopReason.MAX_ITER
    for t in range(1, cfg.max_iter + 1):
        if hyperbolic:
            x, avg_move, moves = hypegbms_step(x, cfg.sigma, c, weights=weights)
        else:
            x, avg_move, moves = gbms_step(x, cfg.sigma, weights=weights)
        entropy = movement_entropy(moves, cfg.entropy_bins_fraction) if n >= 2 else 0.0
        d2, weights = weights_of(x)
        trace.append(IterationTrace(t, avg_move, entropy, float(weights.raw.mean())))
        if callback is not None:
            callback(t, x)
        stop, why = should_stop(avg_move, entropy_prev, entropy, cfg)
        logger.debug("iter %d: movement=%.3e entropy=%.4f", t, avg_move, entropy)
        if stop:
            reason = why
            break
        entropy_prev = entropy

    labels, modes, k = assign_clusters(x, delta, c, distances=np.sqrt(d2))
    return ClusterResult(
        labels=labels,
        modes=modes,
        num_clusters=k,
        trace=trace,
        converged=reason is not StopReason.MAX_ITER,
        stop_reason=reason,
        points=x,
        delta=float(delta),
        initial_density=initial_density,
    )


def run_hypegbms(raw, cfg: RunConfig, callback: Optional[Callable] = None) -> ClusterResult:
    """Project ``raw`` into the ball, blur until a stopping rule fires, then cluster.

    ``callback(t, points)`` is invoked after every iteration.
    """
    x = geo.project_to_ball(raw, cfg.curvature, cfg.scale)
    return _run(x, cfg, cfg.curvature, callback)


def run_gbms(raw, cfg: RunConfig, callback: Optional[Callable] = None) -> ClusterResult:
    """Flat-space counterpart of :func:`run_hypegbms` on identically standardized data."""
    x = geo.standardize(raw, cfg.scale)
    return _run(x, cfg, None, callback)
