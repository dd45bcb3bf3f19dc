"""Self-checks of the geometry, kernel, metrics and clustering loops.

Each check returns a :class:`CheckResult` holding the measured quantity, the
threshold it is compared against and the wall time. ``CHECKS`` maps the
public check name to its function; the ``validate`` CLI subcommand and the
acceptance tests both run from this registry.
"""

import itertools
import math
import time
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from . import clustering as cl
from . import geometry as geo
from .data import make_hierarchical
from .kernel import kde, kde_gradient
from .metrics import ari, nmi


@dataclass
class CheckResult:
    name: str
    measured: float
    threshold: str
    passed: bool
    seconds: float = 0.0
    detail: str = ""


def sample_ball(rng, n, p, max_radius, c=-1.0):
    """Uniform-in-volume (Euclidean) samples with norm <= max_radius / sqrt(-c)."""
    d = rng.normal(size=(n, p))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = max_radius * rng.uniform(size=(n, 1)) ** (1.0 / p)
    return d * r / math.sqrt(-c)


def sample_geodesic_ball(rng, n, p, radius, c=-1.0):
    """Points within hyperbolic distance ``radius`` of the origin."""
    d = rng.normal(size=(n, p))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(n, 1)) ** (1.0 / p)
    # exp_0 maps a tangent of norm t to hyperbolic distance 2t
    return geo.exp_map(np.zeros(p), d * r / 2.0, c)


# --- individual checks ------------------------------------------------------


def check_distance_agreement(seed=42, n_pairs=1000, p=3):
    rng = np.random.default_rng(seed)
    x = sample_ball(rng, n_pairs, p, 0.95)
    y = sample_ball(rng, n_pairs, p, 0.95)
    d_atanh = geo.dist(x, y, -1.0)
    d_cosh = geo.dist_cosh(x, y)
    d_hyp = geo.hyperboloid_dist(geo.to_hyperboloid(x), geo.to_hyperboloid(y))
    worst = max(
        np.abs(d_atanh - d_cosh).max(), np.abs(d_atanh - d_hyp).max(), np.abs(d_cosh - d_hyp).max()
    )
    return CheckResult("distance-agreement", float(worst), "<= 1e-9", bool(worst <= 1e-9))


def check_exp_log_roundtrip(seed=42, n_pairs=1000, p=3, c=-1.0):
    rng = np.random.default_rng(seed)
    base = sample_ball(rng, n_pairs, p, 0.9, c)
    y = sample_ball(rng, n_pairs, p, 0.9, c)
    back = geo.exp_map(base, geo.log_map(base, y, c), c)
    worst = float(np.abs(back - y).max())
    return CheckResult("exp-log-roundtrip", worst, "<= 1e-10", worst <= 1e-10)


def euclidean_limit_trajectories(seed=42, n=50, p=3, sigma=0.5, c=-1e-8):
    """Per-iteration positions of both loops on the same data.

    The ball distance tends to twice the Euclidean distance as c -> 0, so the
    flat loop runs with half the bandwidth.
    """
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(n, p))
    hyp, flat = [], []
    res_h = cl.run_hypegbms(raw, cl.RunConfig(sigma=sigma, curvature=c), callback=lambda t, x: hyp.append(x.copy()))
    res_f = cl.run_gbms(raw, cl.RunConfig(sigma=sigma / 2.0), callback=lambda t, x: flat.append(x.copy()))
    return raw, hyp, flat, res_h, res_f


def check_euclidean_limit(seed=42):
    rng = np.random.default_rng(seed)
    c = -1e-8
    v = rng.normal(size=(1000, 3))
    w = rng.normal(size=(1000, 3))
    add_err = float(np.abs(geo.mobius_add(v, w, c) - (v + w)).max())
    _, hyp, flat, res_h, res_f = euclidean_limit_trajectories(seed)
    if len(hyp) != len(flat):
        traj_err = float("inf")
    else:
        traj_err = max(float(np.abs(a - b).max()) for a, b in zip(hyp, flat))
    ok = add_err <= 1e-5 and traj_err <= 1e-4 and bool(np.array_equal(res_h.labels, res_f.labels))
    return CheckResult(
        "euclidean-limit",
        traj_err,
        "add <= 1e-5, positions <= 1e-4",
        ok,
        detail=f"add_err={add_err:.2e} iterations={len(hyp)}/{len(flat)}",
    )


CUBIC_RADII = (0.05, 0.1, 0.2, 0.4)


def mobius_frechet_gaps(seed=42, radii=CUBIC_RADII, trials=50, n_points=10, p=2, c=-1.0):
    """Mean hyperbolic gap between Möbius and Fréchet means, per cloud radius."""
    rng = np.random.default_rng(seed)
    gaps = []
    for r in radii:
        errs = []
        for _ in range(trials):
            pts = sample_geodesic_ball(rng, n_points, p, r, c)
            w = rng.uniform(size=n_points)
            w /= w.sum()
            m = geo.mobius_weighted_mean(pts, w, c)
            f = geo.frechet_mean(pts, w, c)
            errs.append(float(geo.dist(m, f, c)))
        gaps.append(float(np.mean(errs)))
    return np.array(gaps)


def check_cubic_scaling(seed=42):
    gaps = mobius_frechet_gaps(seed)
    slope = float(np.polyfit(np.log(CUBIC_RADII), np.log(gaps), 1)[0])
    return CheckResult(
        "mean-cubic-scaling", slope, ">= 2.5", slope >= 2.5,
        detail="gaps=" + ",".join(f"{g:.2e}" for g in gaps),
    )


def density_fixture(seed=42):
    return make_hierarchical(1, 3, 100, leaf_spread=0.05, level_gap=4.0, p=2, seed=seed)


def check_density_ascent(seed=42, sigma=0.1, c=-1.0, scale=0.4):
    data = density_fixture(seed)
    projected = geo.project_to_ball(data.features, c, scale)
    radius = float(np.linalg.norm(projected, axis=1).max())
    res = cl.run_hypegbms(data.features, cl.RunConfig(sigma=sigma, curvature=c, scale=scale))
    dens = [res.initial_density] + [t.mean_density for t in res.trace]
    worst_drop = float(max(0.0, -np.diff(dens).min()))
    ok = worst_drop <= 1e-3 and radius <= 0.4
    return CheckResult(
        "density-ascent", worst_drop, "drop <= 1e-3", ok,
        detail=f"radius={radius:.3f} iterations={res.iterations}",
    )


def gradient_errors(seed=42, configs=20, p=3, c=-1.0, h=1e-5):
    """Relative error between analytic and central-difference directional derivatives."""
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(configs):
        n = int(rng.integers(5, 30))
        data = sample_ball(rng, n, p, 0.7, c)
        x = sample_ball(rng, 1, p, 0.7, c)[0]
        sigma = float(rng.uniform(0.3, 1.5))
        u = rng.normal(size=p)
        u /= np.linalg.norm(u)
        fd = (kde(geo.exp_map(x, h * u, c), data, sigma, c) - kde(geo.exp_map(x, -h * u, c), data, sigma, c)) / (2 * h)
        lam = float(geo.conformal_factor(x, c)[0])
        analytic = lam * lam * float(kde_gradient(x, data, sigma, c) @ u)
        errs.append(abs(fd - analytic) / abs(analytic))
    return np.array(errs)


def check_kde_gradient(seed=42):
    worst = float(gradient_errors(seed).max())
    return CheckResult("kde-gradient", worst, "<= 1e-5", worst <= 1e-5)


def set_partitions(n):
    """All partitions of range(n) as label lists in restricted-growth form."""
    def grow(prefix, top):
        if len(prefix) == n:
            yield list(prefix)
            return
        for lab in range(top + 2):
            yield from grow(prefix + [lab], max(top, lab))
    yield from grow([0], 0)


def ari_pair_counting(a, b):
    """ARI from explicit pair enumeration."""
    same_both = same_a = same_b = diff_both = 0
    for i, j in itertools.combinations(range(len(a)), 2):
        sa, sb = a[i] == a[j], b[i] == b[j]
        if sa and sb:
            same_both += 1
        elif sa:
            same_a += 1
        elif sb:
            same_b += 1
        else:
            diff_both += 1
    num = 2.0 * (same_both * diff_both - same_a * same_b)
    den = (same_both + same_a) * (same_a + diff_both) + (same_both + same_b) * (same_b + diff_both)
    return 1.0 if den == 0 else num / den


def nmi_plugin(a, b):
    n = len(a)
    ca, cb, cab = Counter(a), Counter(b), Counter(zip(a, b))
    h_a = -sum(k / n * math.log(k / n) for k in ca.values())
    h_b = -sum(k / n * math.log(k / n) for k in cb.values())
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    mi = sum(k / n * math.log((k / n) / (ca[x] / n * cb[y] / n)) for (x, y), k in cab.items())
    return mi / ((h_a + h_b) / 2.0)


def check_metric_oracles(max_n=6):
    worst = 0.0
    for n in range(2, max_n + 1):
        parts = list(set_partitions(n))
        for a in parts:
            for b in parts:
                worst = max(worst, abs(ari(a, b) - ari_pair_counting(a, b)), abs(nmi(a, b) - nmi_plugin(a, b)))
    exact = ari([0, 0, 1, 1], [0, 1, 0, 1]) == -0.5
    return CheckResult(
        "metric-oracles", worst, "<= 1e-12 and ARI example == -0.5", worst <= 1e-12 and exact,
        detail=f"ari_example_exact={exact}",
    )


SWEEP_SIGMAS = tuple(round(0.1 * k, 1) for k in range(1, 11))


def check_end_to_end(seed=42, c=-1.0):
    data = make_hierarchical(2, 2, 75, leaf_spread=0.05, level_gap=4.0, p=2, seed=seed)
    best, best_sigma, best_iters = -1.0, None, None
    for sigma in SWEEP_SIGMAS:
        res = cl.run_hypegbms(data.features, cl.RunConfig(sigma=sigma, curvature=c, max_iter=200))
        if res.converged:
            value = ari(data.labels, res.labels)
            if value > best:
                best, best_sigma, best_iters = value, sigma, res.iterations
    return CheckResult(
        "end-to-end", best, ">= 0.9 (converged before max_iter)", best >= 0.9,
        detail=f"best_sigma={best_sigma} iterations={best_iters}",
    )


def step_time_ratio(seed=42, sizes=(500, 1000), p=3, sigma=0.5, c=-1.0, repeats=7):
    rng = np.random.default_rng(seed)
    pts = {n: geo.project_to_ball(rng.normal(size=(n, p)), c) for n in sizes}
    cl.hypegbms_step(pts[sizes[0]][:10], sigma, c)  # JIT warm-up
    best = {n: float("inf") for n in sizes}
    for _ in range(repeats):
        for n in sizes:
            t0 = time.perf_counter()
            cl.hypegbms_step(pts[n], sigma, c)
            best[n] = min(best[n], time.perf_counter() - t0)
    return best[sizes[1]] / best[sizes[0]], best


def check_complexity(seed=42):
    ratio, best = step_time_ratio(seed)
    return CheckResult(
        "complexity-scaling", ratio, "in [3, 6]", 3.0 <= ratio <= 6.0,
        detail=f"t500={best[500]:.4f}s t1000={best[1000]:.4f}s",
    )


def check_stopping():
    res = cl.run_hypegbms(np.ones((8, 3)), cl.RunConfig(sigma=0.5))
    identical_ok = res.iterations == 1 and res.stop_reason is cl.StopReason.MOVEMENT
    cfg = cl.RunConfig(sigma=0.5)
    stop, why = cl.should_stop(1.0, 0.6931, 0.6931, cfg)
    entropy_ok = stop and why is cl.StopReason.ENTROPY
    keep_going, _ = cl.should_stop(1.0, 0.0, 1.0, cfg)
    ok = identical_ok and entropy_ok and not keep_going
    return CheckResult(
        "stopping-criteria", float(res.iterations), "identical -> 1 iteration (movement); flat entropy -> entropy",
        ok, detail=f"reason={res.stop_reason.value}",
    )


CHECKS: Dict[str, Callable[..., CheckResult]] = {
    "distance-agreement": check_distance_agreement,
    "exp-log-roundtrip": check_exp_log_roundtrip,
    "euclidean-limit": check_euclidean_limit,
    "mean-cubic-scaling": check_cubic_scaling,
    "density-ascent": check_density_ascent,
    "kde-gradient": check_kde_gradient,
    "metric-oracles": check_metric_oracles,
    "end-to-end": check_end_to_end,
    "complexity-scaling": check_complexity,
    "stopping-criteria": check_stopping,
}

_SEEDED = {
    "distance-agreement", "exp-log-roundtrip", "euclidean-limit", "mean-cubic-scaling",
    "density-ascent", "kde-gradient", "end-to-end", "complexity-scaling",
}


def run_check(name, seed=42) -> CheckResult:
    fn = CHECKS[name]
    t0 = time.perf_counter()
    result = fn(seed=seed) if name in _SEEDED else fn()
    result.seconds = time.perf_counter() - t0
    return result
