import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypegbms import geometry as geo
from hypegbms.clustering import (
    RunConfig,
    StopReason,
    _fold_mobius_rows,
    assign_clusters,
    default_delta,
    entropy_bin_count,
    gbms_step,
    hypegbms_step,
    movement_entropy,
    run_gbms,
    run_hypegbms,
    should_stop,
)
from hypegbms.data import make_hierarchical
from hypegbms.errors import InvalidArgument, InvalidData, NumericDegenerate
from hypegbms.kernel import gaussian_weights, pairwise_sq_dist
from hypegbms.metrics import ari
from hypegbms.validation import check_density_ascent, euclidean_limit_trajectories, sample_ball

C = -1.0


def two_groups(seed=0, n=20, p=2):
    rng = np.random.default_rng(seed)
    a = rng.normal(-5.0, 0.05, size=(n, p))
    b = rng.normal(5.0, 0.05, size=(n, p))
    return np.vstack([a, b]), np.repeat([0, 1], n)


# --- config -------------------------------------------------------------------


def test_config_defaults():
    cfg = RunConfig(sigma=0.5)
    assert (cfg.curvature, cfg.epsilon, cfg.gamma, cfg.max_iter) == (-1.0, 1e-5, 1e-4, 200)
    assert cfg.delta is None and cfg.entropy_bins_fraction == 0.9 and cfg.seed == 42


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(sigma=0.0),
        dict(sigma=1.0, curvature=0.5),
        dict(sigma=1.0, epsilon=0.0),
        dict(sigma=1.0, delta=-1.0),
        dict(sigma=1.0, gamma=0.0),
        dict(sigma=1.0, max_iter=0),
        dict(sigma=1.0, entropy_bins_fraction=1.5),
        dict(sigma=1.0, scale=0.0),
    ],
)
def test_config_rejects_invalid(kwargs):
    with pytest.raises(InvalidArgument):
        RunConfig(**kwargs)


# --- steps --------------------------------------------------------------------


def test_fold_kernel_matches_reference_mean():
    rng = np.random.default_rng(1)
    x = sample_ball(rng, 15, 3, 0.9)
    wbar = gaussian_weights(pairwise_sq_dist(x, C), 0.7).normalized
    got = _fold_mobius_rows(x, wbar, C)
    for i in range(len(x)):
        assert np.allclose(got[i], geo.mobius_weighted_mean(x, wbar[i], C), atol=1e-14)


@pytest.mark.parametrize("c", [-0.3, -2.0])
def test_fold_kernel_other_curvatures(c):
    rng = np.random.default_rng(2)
    x = sample_ball(rng, 10, 2, 0.9, c)
    wbar = gaussian_weights(pairwise_sq_dist(x, c), 0.4).normalized
    ref = np.array([geo.mobius_weighted_mean(x, w, c) for w in wbar])
    assert np.allclose(_fold_mobius_rows(x, wbar, c), ref, atol=1e-14)


def test_step_identical_points_unchanged():
    x = np.tile([0.1, 0.3], (6, 1))
    new, move, moves = hypegbms_step(x, 0.5, C)
    assert np.allclose(new, x, atol=1e-15)
    assert move == pytest.approx(0.0, abs=1e-14)
    new, move, _ = gbms_step(x, 0.5)
    assert np.allclose(new, x, atol=1e-15) and move == pytest.approx(0.0, abs=1e-15)


def test_step_single_point_unchanged():
    x = np.array([[0.4, -0.2]])
    new, move, _ = hypegbms_step(x, 0.5, C)
    assert np.allclose(new, x, atol=1e-15) and move == pytest.approx(0.0, abs=1e-14)


def test_step_symmetric_pair():
    x = np.array([[0.3, 0.0], [-0.3, 0.0]])
    new, move, moves = hypegbms_step(x, 100.0, C)
    # step-by-step oracle
    w = math.exp(-geo.dist(x[0], x[1], C) ** 2 / (2 * 100.0**2))
    row0 = np.array([1.0, w]) / (1.0 + w)
    row1 = np.array([w, 1.0]) / (1.0 + w)
    exp0 = geo.mobius_add(geo.mobius_scalar_mul(row0[0], x[0], C), geo.mobius_scalar_mul(row0[1], x[1], C), C)
    exp1 = geo.mobius_add(geo.mobius_scalar_mul(row1[0], x[0], C), geo.mobius_scalar_mul(row1[1], x[1], C), C)
    assert np.allclose(new, [exp0, exp1], atol=1e-15)
    assert abs(np.linalg.norm(new[0]) - np.linalg.norm(new[1])) <= 1e-10
    assert np.linalg.norm(new[0]) < 0.3
    assert new[0, 0] > 0 > new[1, 0]
    expected_move = np.linalg.norm(geo.log_map(x, new, C), axis=1).mean()
    assert move == pytest.approx(expected_move, abs=1e-15)
    assert moves == pytest.approx(np.linalg.norm(geo.log_map(x, new, C), axis=1))


def test_gbms_wide_kernel_maps_pair_to_midpoint():
    x = np.array([[1.0, 2.0], [-1.0, -2.0]])
    new, move, _ = gbms_step(x, 1e6)
    assert np.allclose(new, 0.0, atol=1e-10)
    assert move == pytest.approx(math.sqrt(5.0))


def test_gbms_step_is_weighted_average():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(12, 3))
    new, _, _ = gbms_step(x, 0.8)
    d2 = ((x[:, None] - x[None]) ** 2).sum(-1)
    w = np.exp(-d2 / (2 * 0.8**2))
    w /= w.sum(1, keepdims=True)
    assert np.allclose(new, w @ x, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), sigma=st.floats(0.05, 5.0), radius=st.floats(0.5, 1.0 - 1e-5))
def test_steps_stay_inside_ball(seed, sigma, radius):
    x = sample_ball(np.random.default_rng(seed), 20, 3, radius)
    new, move, moves = hypegbms_step(x, sigma, C)
    assert np.all(np.linalg.norm(new, axis=1) < 1.0)
    assert move >= 0 and np.all(moves >= 0)


def test_step_rejects_empty():
    with pytest.raises(InvalidArgument):
        hypegbms_step(np.zeros((0, 2)), 1.0, C)
    with pytest.raises(InvalidArgument):
        gbms_step(np.zeros((0, 2)), 1.0)


def test_fold_reports_degenerate_row(monkeypatch):
    # accumulators are clipped, so real denominators stay above ~1e-10; raise
    # the threshold to exercise the error path
    monkeypatch.setattr(geo, "MIN_DENOM", 1.5)
    x = np.array([[0.5, 0.0], [-0.5, 0.0]])
    with pytest.raises(NumericDegenerate) as info:
        _fold_mobius_rows(x, np.full((2, 2), 0.5), C)
    assert info.value.indices == [0]


# --- stopping -----------------------------------------------------------------


def test_entropy_bin_count():
    assert entropy_bin_count(10, 0.9) == 9
    assert entropy_bin_count(2, 0.1) == 1
    assert entropy_bin_count(300, 0.9) == 270


def test_entropy_equal_movements_is_zero():
    assert movement_entropy(np.full(7, 0.3)) == 0.0
    assert movement_entropy(np.zeros(5)) == 0.0


def test_entropy_hand_counted_histogram():
    # 9 unit-width bins over [0, 9]; 8 and 9 share the last (closed) bin
    h = movement_entropy(np.arange(10.0))
    expected = -(8 * 0.1 * math.log(0.1) + 0.2 * math.log(0.2))
    assert h == pytest.approx(expected, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 1e3), min_size=2, max_size=60), st.floats(0.05, 1.0))
def test_entropy_bounds(moves, frac):
    h = movement_entropy(moves, frac)
    assert 0.0 <= h <= math.log(entropy_bin_count(len(moves), frac)) + 1e-12


@pytest.mark.parametrize("bad", [[1.0], [], [0.1, -0.2], [0.1, float("nan")]])
def test_entropy_rejects_bad_input(bad):
    with pytest.raises(InvalidArgument):
        movement_entropy(bad)


def test_should_stop_rules():
    cfg = RunConfig(sigma=1.0)
    assert should_stop(0.0, None, 0.3, cfg) == (True, StopReason.MOVEMENT)
    assert should_stop(1.0, 0.5, 0.5, cfg) == (True, StopReason.ENTROPY)
    assert should_stop(1.0, 0.0, 1.0, cfg) == (False, None)
    # first iteration: no previous entropy, movement branch only
    assert should_stop(1.0, None, 0.5, cfg) == (False, None)
    # movement wins when both fire
    assert should_stop(0.0, 0.5, 0.5, cfg) == (True, StopReason.MOVEMENT)


# --- cluster assignment -------------------------------------------------------


def bfs_components(dist, delta):
    n = len(dist)
    labels = [-1] * n
    k = 0
    for s in range(n):
        if labels[s] >= 0:
            continue
        labels[s] = k
        queue = deque([s])
        while queue:
            i = queue.popleft()
            for j in range(n):
                if labels[j] < 0 and dist[i][j] <= delta:
                    labels[j] = k
                    queue.append(j)
        k += 1
    return labels


def test_assign_chain_is_one_cluster():
    step = 0.3
    x = np.array([[0.0, 0.0], [math.tanh(step / 2), 0.0], [math.tanh(step), 0.0]])
    d = np.sqrt(pairwise_sq_dist(x, C))
    assert d[0, 1] == pytest.approx(step) and d[1, 2] == pytest.approx(step)
    delta = 0.31
    assert d[0, 2] > delta
    labels, modes, k = assign_clusters(x, delta, C)
    assert k == 1 and list(labels) == bfs_components(d, delta) == [0, 0, 0]
    assert modes.shape == (1, 2)


def test_assign_extremes():
    rng = np.random.default_rng(0)
    x = sample_ball(rng, 12, 2, 0.8)
    d = np.sqrt(pairwise_sq_dist(x, C))
    _, _, k = assign_clusters(x, d.max() * 1.01, C)
    assert k == 1
    off = d[np.triu_indices(12, 1)]
    labels, modes, k = assign_clusters(x, off.min() * 0.5, C)
    assert k == 12 and list(labels) == list(range(12))
    assert np.allclose(modes, x, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), delta=st.floats(0.05, 2.0))
def test_assign_matches_bfs(seed, delta):
    x = sample_ball(np.random.default_rng(seed), 25, 2, 0.8)
    d = np.sqrt(pairwise_sq_dist(x, C))
    labels, modes, k = assign_clusters(x, delta, C)
    assert list(labels) == bfs_components(d, delta)
    assert k == len(set(labels.tolist())) == len(modes)


def test_assign_modes_are_frechet_means():
    x = np.array([[0.1, 0.0], [0.12, 0.01], [-0.5, 0.3], [-0.52, 0.31]])
    labels, modes, k = assign_clusters(x, 0.2, C)
    assert list(labels) == [0, 0, 1, 1]
    assert np.allclose(modes[1], geo.frechet_mean(x[2:], [0.5, 0.5], C), atol=1e-12)
    _, flat_modes, _ = assign_clusters(x, 0.2)
    assert np.allclose(flat_modes[0], x[:2].mean(0))


def test_assign_rejects_bad_delta():
    with pytest.raises(InvalidArgument):
        assign_clusters(np.zeros((2, 2)), 0.0, C)


def test_default_delta():
    d = np.array([[0.0, 1.0, 3.0], [1.0, 0.0, 2.0], [3.0, 2.0, 0.0]])
    assert default_delta(d, 1e-5) == pytest.approx(0.2)
    assert default_delta(np.zeros((3, 3)), 1e-5) == 1e-5
    assert default_delta(np.zeros((1, 1)), 7.0) == 7.0


# --- full runs ----------------------------------------------------------------


@pytest.mark.parametrize("runner", [run_hypegbms, run_gbms])
def test_single_point_run(runner):
    res = runner(np.array([[3.0, 4.0]]), RunConfig(sigma=0.5))
    assert res.num_clusters == 1 and res.iterations == 1
    assert res.converged and res.stop_reason is StopReason.MOVEMENT


@pytest.mark.parametrize("runner", [run_hypegbms, run_gbms])
def test_identical_points_run(runner):
    res = runner(np.ones((10, 3)), RunConfig(sigma=0.5))
    assert res.num_clusters == 1 and res.iterations == 1
    assert res.stop_reason is StopReason.MOVEMENT


@pytest.mark.parametrize("runner", [run_hypegbms, run_gbms])
def test_two_separated_groups(runner):
    raw, truth = two_groups()
    res = runner(raw, RunConfig(sigma=0.3))
    assert res.num_clusters == 2
    assert ari(truth, res.labels) == 1.0
    # each group collapsed within delta
    for lab in range(2):
        members = res.points[res.labels == lab]
        d = np.sqrt(pairwise_sq_dist(members, C)) if runner is run_hypegbms else 0.0
        assert np.max(d) <= res.delta


def test_single_cluster_contracts():
    rng = np.random.default_rng(5)
    raw = rng.normal(size=(60, 2))
    res = run_hypegbms(raw, RunConfig(sigma=2.0))
    d = np.sqrt(pairwise_sq_dist(res.points, C))
    assert d.max() < res.delta
    assert res.num_clusters == 1


def test_run_is_deterministic():
    ds = make_hierarchical(points_per_leaf=20, seed=3)
    cfg = RunConfig(sigma=0.2, curvature=-0.7)
    a = run_hypegbms(ds.features, cfg)
    b = run_hypegbms(ds.features, cfg)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.points, b.points)
    assert a.trace == b.trace


def test_permutation_consistency():
    ds = make_hierarchical(points_per_leaf=25, seed=8)
    cfg = RunConfig(sigma=0.2)
    base = run_hypegbms(ds.features, cfg)
    perm = np.random.default_rng(1).permutation(len(ds.features))
    shuffled = run_hypegbms(ds.features[perm], cfg)
    assert base.num_clusters == shuffled.num_clusters
    assert ari(base.labels[perm], shuffled.labels) == 1.0


def test_trace_records_diagnostics():
    raw, _ = two_groups(n=15)
    res = run_hypegbms(raw, RunConfig(sigma=0.3))
    assert [t.iteration for t in res.trace] == list(range(1, res.iterations + 1))
    assert all(t.avg_movement >= 0 and t.entropy >= 0 for t in res.trace)
    assert all(0 < t.mean_density <= 1 for t in res.trace)


def test_callback_sees_every_iterate_inside_ball():
    seen = []
    rng = np.random.default_rng(9)
    res = run_hypegbms(rng.normal(size=(40, 3)), RunConfig(sigma=0.4, curvature=-2.0),
                       callback=lambda t, x: seen.append((t, x.copy())))
    assert [t for t, _ in seen] == list(range(1, res.iterations + 1))
    for _, x in seen:
        assert np.all(np.linalg.norm(x, axis=1) < 1 / math.sqrt(2.0))


def test_max_iter_stop():
    rng = np.random.default_rng(10)
    res = run_hypegbms(rng.normal(size=(30, 2)), RunConfig(sigma=0.3, max_iter=1, epsilon=1e-12))
    assert res.iterations == 1 and not res.converged
    assert res.stop_reason is StopReason.MAX_ITER


def test_run_rejects_non_finite():
    raw = np.ones((5, 2))
    raw[3, 0] = np.inf
    with pytest.raises(InvalidData):
        run_hypegbms(raw, RunConfig(sigma=0.5))


def test_euclidean_limit_matches_gbms():
    _, hyp, flat, res_h, res_f = euclidean_limit_trajectories(seed=1)
    assert len(hyp) == len(flat)
    for a, b in zip(hyp, flat):
        assert np.abs(a - b).max() <= 1e-4
    assert np.array_equal(res_h.labels, res_f.labels)


def test_density_ascent_on_hierarchical_fixture():
    result = check_density_ascent(seed=4)
    assert result.passed, result.detail
