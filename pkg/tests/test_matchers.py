import math

import numpy as np
import pytest

from conftest import (
    angle_diff,
    assert_same_transform,
    minutia_set,
    position_metric,
    random_canonical_sets,
    vector_set,
)
from oracles import (
    assignment_min,
    edit_min,
    padded_assignment_min,
    rigid_grid_min_residual,
    squared_residual,
)
from pfreg import (
    Backend,
    DegenerateInput,
    MatcherConfig,
    MetricConfig,
    NoCandidates,
    RigidTransform,
    estimate_rigid,
    match,
    match_edit_cost,
    match_greedy,
    match_hough_consistency,
    match_hungarian,
    match_icp,
    point_distance_matrix,
)

BIG_EPS = 1e6


def _sets_with_costs(positions_p, positions_f, scale=1.0):
    """Minutia sets whose pair costs equal position distance / scale."""
    p = minutia_set(positions_p, [0.0] * len(positions_p), [0] * len(positions_p))
    f = minutia_set(positions_f, [0.0] * len(positions_f), [0] * len(positions_f))
    return p, f


def _config(eps=0.1, scale=1.0, backend=Backend.GREEDY, **kw):
    return MatcherConfig(backend=backend, epsilon=eps, metric=position_metric(scale), **kw)


def _cost(cfg, p, f):
    return point_distance_matrix(cfg.metric, p.points, f.points, p.features, f.features)


def _line_sets(costs_row):
    """1 x m instance whose cost row equals costs_row exactly."""
    f_positions = [[c, 0.0] for c in costs_row]
    return _sets_with_costs([[0.0, 0.0]], f_positions)


# ---------------------------------------------------------------------------
# estimate_rigid


def test_estimate_rigid_exact_recovery(rng):
    src = rng.uniform(-5, 5, (10, 2))
    g = RigidTransform(0.83, (2.0, -1.0))
    t = estimate_rigid(src, g.apply(src))
    assert_same_transform(t, g, tol=1e-9)


def test_estimate_rigid_identity():
    src = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    t = estimate_rigid(src, src)
    assert_same_transform(t, RigidTransform.identity(), tol=1e-12)


def test_estimate_rigid_degenerate():
    with pytest.raises(DegenerateInput):
        estimate_rigid(np.array([[1.0, 2.0]]), np.array([[0.0, 0.0]]))
    with pytest.raises(DegenerateInput):
        estimate_rigid(np.zeros((3, 2)), np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))


def test_estimate_rigid_beats_generator_and_grid(rng):
    # 3 pairs, one perturbed target: LS residual <= residual of the true
    # generating transform and <= best grid-searched transform (up to grid step)
    src = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
    g = RigidTransform(0.4, (1.0, 1.0))
    dst = g.apply(src)
    dst[2] += [0.3, -0.2]
    fit = estimate_rigid(src, dst)
    r_fit = squared_residual(fit.rotation, fit.translation, src, dst)
    r_gen = squared_residual(g.rotation, g.translation, src, dst)
    r_grid = rigid_grid_min_residual(src, dst)
    assert r_fit <= r_gen + 1e-12
    assert r_fit <= r_grid + 1e-9


# ---------------------------------------------------------------------------
# greedy


def test_greedy_identical_sets(rng):
    p, _ = random_canonical_sets(rng, 6, 6)
    res = match_greedy(p, p, _config(scale=1.0, eps=0.1))
    assert res.distance == pytest.approx(0.0)
    assert res.inliers == 6
    assert sorted(res.correspondence.pairs) == [(i, i) for i in range(6)]


def test_greedy_single_cheap_pair_matched():
    p, f = _line_sets([0.05])
    res = match_greedy(p, f, _config(eps=0.1))
    assert res.correspondence.pairs == ((0, 0),)
    assert res.sum_matched == pytest.approx(0.05)


def test_greedy_single_expensive_pair_unmatched():
    p, f = _line_sets([0.15])
    res = match_greedy(p, f, _config(eps=0.1))
    assert res.correspondence.pairs == ()
    assert res.distance == pytest.approx(0.1)  # epsilon / |P|


def test_greedy_takes_diagonal_when_optimal():
    # both assignments enumerated: diagonal (0.01 + 0.5) beats the exchange
    p, f = _sets_with_costs([[0.0, 0.0], [0.0, 10.0]], [[0.01, 0.0], [0.5, 10.0]])
    cfg = _config(eps=BIG_EPS)
    cost = _cost(cfg, p, f)
    assert cost[0, 0] == pytest.approx(0.01)
    res = match_greedy(p, f, cfg)
    assert sorted(res.correspondence.pairs) == [(0, 0), (1, 1)]
    assert res.sum_matched == pytest.approx(assignment_min(cost))  # greedy == optimal here


def test_greedy_suboptimal_instance():
    # greedy grabs the globally cheapest pair (cost 1) and is then forced into
    # a cost-3 remainder; the exchange assignment (1.01 + 1.01) is cheaper
    y = math.sqrt(1.0201 - 0.975**2)
    p, f = _sets_with_costs([[0.0, 0.0], [1.975, y]], [[1.0, 0.0], [-1.01, 0.0]])
    cfg = _config(eps=BIG_EPS)
    cost = _cost(cfg, p, f)
    assert cost[0, 0] == pytest.approx(1.0)     # global minimum
    assert cost[0, 1] == pytest.approx(1.01)
    assert cost[1, 0] == pytest.approx(1.01)
    res = match_greedy(p, f, cfg)
    assert (0, 0) in res.correspondence.pairs
    assert res.sum_matched > assignment_min(cost) + 1e-9


def test_greedy_never_below_optimal(rng):
    for _ in range(50):
        n = int(rng.integers(2, 7))
        p, f = random_canonical_sets(rng, n, n)
        cfg = _config(eps=BIG_EPS, scale=1.0)
        g = match_greedy(p, f, cfg)
        h = match_hungarian(p, f, cfg)
        assert g.sum_matched >= h.sum_matched - 1e-9


# ---------------------------------------------------------------------------
# hungarian


def test_hungarian_two_by_two():
    p, f = _sets_with_costs([[0.0, 0.0], [0.0, 3.0]], [[1.0, 0.0], [2.0, 0.0]])
    cfg = _config(eps=BIG_EPS)
    cost = _cost(cfg, p, f)
    # brute force over both permutations: the diagonal wins on this geometry
    assert cost[0, 0] + cost[1, 1] < cost[0, 1] + cost[1, 0]
    res = match_hungarian(p, f, cfg)
    assert res.sum_matched == pytest.approx(assignment_min(cost))
    assert sorted(res.correspondence.pairs) == [(0, 0), (1, 1)]


def test_hungarian_identity_structure(rng):
    n = 6
    pts = rng.uniform(-4, 4, (n, 2))
    p, f = _sets_with_costs(pts, pts)
    res = match_hungarian(p, f, _config(eps=BIG_EPS))
    assert sorted(res.correspondence.pairs) == [(i, i) for i in range(n)]
    assert res.sum_matched == pytest.approx(0.0)


def test_hungarian_matches_permutation_oracle(rng):
    for _ in range(60):
        n = int(rng.integers(2, 8))
        p, f = random_canonical_sets(rng, n, n)
        cfg = _config(eps=BIG_EPS, scale=1.0)
        res = match_hungarian(p, f, cfg)
        assert res.sum_matched == pytest.approx(assignment_min(_cost(cfg, p, f)), abs=1e-9)


def test_hungarian_rectangular_matches_padded_oracle(rng):
    # eps far above every real cost: nothing is demoted, only the |n - m|
    # forced pads separate the solver objective from the matched sum
    eps = 50.0
    for _ in range(30):
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        p, f = random_canonical_sets(rng, n, m)
        cfg = _config(eps=eps, scale=1.0)
        cost = _cost(cfg, p, f)
        res = match_hungarian(p, f, cfg)
        assert len(res.correspondence.pairs) == min(n, m)
        expected = padded_assignment_min(cost, eps) - eps * abs(n - m)
        assert res.sum_matched == pytest.approx(expected, abs=1e-9)


def test_hungarian_demotes_expensive_pairs():
    p, f = _sets_with_costs([[0.0, 0.0], [0.0, 1.0]], [[0.05, 0.0], [0.0, 1.3]])
    res = match_hungarian(p, f, _config(eps=0.1))
    assert res.correspondence.pairs == ((0, 0),)
    assert res.inliers == 1
    assert res.distance == pytest.approx((0.05 + 0.1) / 2)


def test_hungarian_kind_mismatch_feasible():
    # one partial point can only mismatch: stays feasible, ends unmatched
    p = minutia_set([[0.0, 0.0]], [0.0], [0])
    f = minutia_set([[0.0, 0.0]], [0.0], [1])
    res = match_hungarian(p, f, MatcherConfig(epsilon=0.1, metric=MetricConfig(position_scale=1.0)))
    assert res.correspondence.pairs == ()
    assert res.distance == pytest.approx(0.1)


# ---------------------------------------------------------------------------
# edit cost


def test_edit_identical_sets(rng):
    p, _ = random_canonical_sets(rng, 5, 5)
    res = match_edit_cost(p, p, _config(eps=0.1, backend=Backend.EDIT_COST))
    assert res.distance == pytest.approx(0.0)
    assert res.inliers == 5


def test_edit_deletes_expensive_point():
    # substitution at 0.5 vs delete+insert at 0.2: deleted, distance eps/1
    p, f = _line_sets([0.5])
    res = match_edit_cost(p, f, _config(eps=0.1))
    assert res.correspondence.pairs == ()
    assert res.correspondence.unmatched_partial == (0,)
    assert res.correspondence.unmatched_full == (0,)
    assert res.distance == pytest.approx(0.1)


def test_edit_keeps_borderline_substitution():
    # 0.15 < 2 * eps: substituting beats delete+insert
    p, f = _line_sets([0.15])
    res = match_edit_cost(p, f, _config(eps=0.1))
    assert res.correspondence.pairs == ((0, 0),)


def test_edit_matches_brute_force(rng):
    for _ in range(60):
        n, m = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        p, f = random_canonical_sets(rng, n, m)
        eps = float(rng.uniform(0.05, 0.6))
        cfg = _config(eps=eps)
        res = match_edit_cost(p, f, cfg)
        total = (
            res.sum_matched
            + eps * len(res.correspondence.unmatched_partial)
            + eps * len(res.correspondence.unmatched_full)
        )
        assert total == pytest.approx(edit_min(_cost(cfg, p, f), eps), abs=1e-9)


def test_edit_total_monotone_in_epsilon(rng):
    p, f = random_canonical_sets(rng, 4, 5)
    totals = []
    for eps in (0.02, 0.05, 0.1, 0.2, 0.4, 0.8):
        cfg = _config(eps=eps)
        res = match_edit_cost(p, f, cfg)
        totals.append(
            res.sum_matched
            + eps
            * (len(res.correspondence.unmatched_partial) + len(res.correspondence.unmatched_full))
        )
    assert all(a <= b + 1e-12 for a, b in zip(totals, totals[1:]))


def test_edit_handles_infinite_substitutions():
    p = minutia_set([[0.0, 0.0], [1.0, 0.0]], [0.0, 0.0], [0, 0])
    f = minutia_set([[0.0, 0.0], [1.0, 0.0]], [0.0, 0.0], [1, 1])  # all kinds differ
    res = match_edit_cost(p, f, _config(eps=0.1))
    assert res.correspondence.pairs == ()
    assert res.distance == pytest.approx(0.1)


# ---------------------------------------------------------------------------
# ICP


def test_icp_identical_sets(rng):
    p, _ = random_canonical_sets(rng, 8, 8)
    res = match_icp(p, p, _config(eps=0.1, backend=Backend.ICP))
    assert res.distance == pytest.approx(0.0, abs=1e-12)
    assert_same_transform(res.transform, RigidTransform.identity(), tol=1e-9)
    assert res.residual_history is not None and len(res.residual_history) >= 1


def test_icp_recovers_small_rotation(rng):
    # planted: partial = full rotated by 5 degrees, no noise
    pts = rng.uniform(-3, 3, (40, 2))
    ang = rng.uniform(0, 2 * math.pi, 40)
    kinds = rng.integers(0, 2, 40)
    full = minutia_set(pts, ang, kinds)
    g = RigidTransform(math.radians(5.0), (0.0, 0.0))
    partial = full.transformed(g)
    cfg = MatcherConfig(
        backend=Backend.ICP, epsilon=0.5, metric=MetricConfig(0.5, 0.5, position_scale=3.0)
    )
    res = match_icp(partial, full, cfg)
    # transform maps partial frame -> full frame: rotation -5 degrees
    assert angle_diff(res.transform.rotation, -math.radians(5.0)) < math.radians(0.1)


def test_icp_zero_iterations_nearest_neighbor(rng):
    p, f = random_canonical_sets(rng, 5, 9)
    cfg = MatcherConfig(
        backend=Backend.ICP,
        epsilon=BIG_EPS,
        icp_max_iters=0,
        metric=MetricConfig(0.5, 0.5, position_scale=1.0),
    )
    res = match_icp(p, f, cfg)
    assert_same_transform(res.transform, RigidTransform.identity(), tol=1e-12)
    assert len(res.correspondence.pairs) == 5
    assert len(res.residual_history) == 1


def test_icp_residual_history_non_increasing(rng):
    for _ in range(20):
        n = int(rng.integers(8, 30))
        pts = rng.uniform(-3, 3, (n, 2))
        full = minutia_set(pts, rng.uniform(0, 2 * math.pi, n), rng.integers(0, 2, n))
        g = RigidTransform(float(rng.uniform(-0.3, 0.3)), tuple(rng.uniform(-0.5, 0.5, 2)))
        partial = full.transformed(g)
        cfg = MatcherConfig(backend=Backend.ICP, metric=MetricConfig(position_scale=3.0))
        res = match_icp(partial, full, cfg)
        h = res.residual_history
        assert all(a >= b - 1e-12 for a, b in zip(h, h[1:]))


def test_icp_degenerate_partial():
    p = minutia_set([[0.0, 0.0]], [0.0], [0])
    with pytest.raises(DegenerateInput):
        match_icp(p, p, _config(backend=Backend.ICP))


# ---------------------------------------------------------------------------
# hough consistency


def test_hough_planted_subset_exact(rng):
    pts = rng.uniform(-4, 4, (30, 2))
    ang = rng.uniform(0, 2 * math.pi, 30)
    kinds = rng.integers(0, 2, 30)
    full = minutia_set(pts, ang, kinds)
    partial = full.subset(np.arange(10))
    cfg = MatcherConfig(
        backend=Backend.HOUGH,
        metric=MetricConfig(position_scale=4.0),
        hough_translation_bin=0.5,
        hough_angle_bin=math.pi / 18,
    )
    res = match_hough_consistency(partial, full, cfg)
    assert sorted(res.correspondence.pairs) == [(i, i) for i in range(10)]
    assert res.inliers == 10  # no rejection: every pair kept
    assert res.distance == pytest.approx(0.0, abs=1e-9)


def test_hough_single_point_partial(rng):
    p = vector_set([[0.0, 0.0]], [[1.0, 0.0]])
    f = vector_set([[0.2, 0.0], [3.0, 3.0]], [[1.0, 0.0], [0.9, 0.1]])
    cfg = MatcherConfig(
        backend=Backend.HOUGH,
        metric=MetricConfig(position_scale=1.0),
        hough_translation_bin=0.5,
    )
    res = match_hough_consistency(p, f, cfg)
    assert len(res.correspondence.pairs) == 1
    assert res.inliers == 1


def test_hough_clutter_scores_worse_than_planted(rng):
    # Monte-Carlo: planted distance is far below the clutter-only distribution
    pts = rng.uniform(-4, 4, (40, 2))
    ang = rng.uniform(0, 2 * math.pi, 40)
    kinds = rng.integers(0, 2, 40)
    full = minutia_set(pts, ang, kinds)
    partial = full.subset(np.arange(12))
    cfg = MatcherConfig(
        backend=Backend.HOUGH,
        metric=MetricConfig(position_scale=4.0),
        hough_translation_bin=0.5,
    )
    planted = match_hough_consistency(partial, full, cfg).distance

    clutter_distances = []
    for s in range(20):
        r2 = np.random.default_rng([7, s])
        other = minutia_set(
            r2.uniform(-4, 4, (12, 2)), r2.uniform(0, 2 * math.pi, 12), r2.integers(0, 2, 12)
        )
        clutter_distances.append(match_hough_consistency(other, full, cfg).distance)
    assert planted < min(clutter_distances) * 0.5


def test_hough_no_compatible_pairs():
    p = minutia_set([[0.0, 0.0]], [0.0], [0])
    f = minutia_set([[0.0, 0.0]], [0.0], [1])
    with pytest.raises(NoCandidates):
        match_hough_consistency(p, f, _config(backend=Backend.HOUGH))


# ---------------------------------------------------------------------------
# cross-backend invariants


@pytest.mark.parametrize("backend", list(Backend))
def test_bijectivity_and_determinism(backend, rng):
    n, m = 9, 13
    pts = np.random.default_rng(5).uniform(-3, 3, (m, 2))
    ang = np.random.default_rng(6).uniform(0, 2 * math.pi, m)
    kinds = np.random.default_rng(8).integers(0, 2, m)
    full = minutia_set(pts, ang, kinds)
    partial = full.subset(np.arange(n)).transformed(RigidTransform(0.02, (0.05, 0.0)))
    cfg = MatcherConfig(backend=backend, metric=MetricConfig(position_scale=3.0))
    a = match(partial, full, cfg)
    b = match(partial, full, cfg)
    a.correspondence.validate(n, m)
    assert a.correspondence == b.correspondence
    assert a.distance == b.distance
    assert a.transform == b.transform
    assert a.inliers == len(a.correspondence.pairs)
