"""Matching backends: pair a partial set with one candidate sub-set.

All matchers take two sets already expressed in canonical frames (translated
to their centers, rotated by their mean feature angles, minutia angles
mean-normalized) and return the correspondence, the aligning rigid transform
between the two canonical frames, the per-partial-point distance, and the
inlier count. They are pure functions of their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import DegenerateInput, EmptyPartial, NoCandidates
from .metrics import MetricConfig, _combine, cyclical_distance, point_distance_matrix
from .model import (
    Correspondence,
    MinutiaFeatures,
    PointSet,
    RigidTransform,
    wrap_angle,
)

# Stand-in for +inf where the assignment solver must stay feasible.
UNMATCHABLE = 1e9


class Backend(str, Enum):
    GREEDY = "greedy"
    HUNGARIAN = "hungarian"
    ICP = "icp"
    EDIT_COST = "editcost"
    HOUGH = "hough"


@dataclass(frozen=True)
class MatcherConfig:
    """Backend selection plus the knobs the backends share.

    epsilon is the insertion/deletion cost: pairs costing at least epsilon
    are not worth keeping, and every unmatched partial point scores epsilon.
    The hough bins default to scales derived from the metric when unset; the
    pipeline fills them from the voting thresholds.
    """

    backend: Backend = Backend.EDIT_COST
    epsilon: float = 0.1
    icp_max_iters: int = 50
    icp_tol: float = 1e-6
    icp_trim_fraction: float = 0.1
    metric: MetricConfig = field(default_factory=MetricConfig)
    hough_translation_bin: float | None = None
    hough_angle_bin: float | None = None

    def __post_init__(self) -> None:
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if not (0.0 <= self.icp_trim_fraction < 1.0):
            raise ValueError("icp_trim_fraction must lie in [0, 1)")
        if self.icp_max_iters < 0:
            raise ValueError("icp_max_iters must be >= 0")


@dataclass(frozen=True)
class MatchResult:
    """Output of one matcher run.

    transform maps the partial's canonical frame into the sub-set's canonical
    frame (the pipeline composes it back into original image coordinates).
    sum_matched is the total cost of the matched pairs, kept separate so the
    caller can normalize by the inlier count. residual_history is only set by
    the iterative backend.
    """

    correspondence: Correspondence
    transform: RigidTransform
    distance: float
    inliers: int
    sum_matched: float
    residual_history: tuple[float, ...] | None = None


# ---------------------------------------------------------------------------
# Rigid estimation (closed-form 2D least squares)


def estimate_rigid(src, dst) -> RigidTransform:
    """Least-squares rotation + translation mapping src points onto dst.

    src and dst are matched (n, 2) arrays. The rotation comes from the
    cross/dot sums of the centered coordinates, the translation from the
    centroids.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    if src.shape != dst.shape:
        raise DegenerateInput("src and dst must have equal shapes")
    if src.shape[0] < 2:
        raise DegenerateInput("need at least 2 pairs")
    ca = src.mean(axis=0)
    cb = dst.mean(axis=0)
    a = src - ca
    b = dst - cb
    if float(np.abs(a).max()) < 1e-12:
        raise DegenerateInput("all source points coincident")
    dot = float((a * b).sum())
    cross = float((a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]).sum())
    theta = math.atan2(cross, dot)
    c, s = math.cos(theta), math.sin(theta)
    t = cb - np.array([c * ca[0] - s * ca[1], s * ca[0] + c * ca[1]])
    return RigidTransform(theta, (float(t[0]), float(t[1])))


# ---------------------------------------------------------------------------
# Shared helpers


def _cost_matrix(partial: PointSet, full: PointSet, cfg: MatcherConfig) -> np.ndarray:
    return point_distance_matrix(
        cfg.metric, partial.points, full.points, partial.features, full.features
    )


def _cost_matrix_under(
    partial: PointSet, full: PointSet, cfg: MatcherConfig, t: RigidTransform
) -> np.ndarray:
    """Pair costs with the partial moved by t (angles shifted by its rotation)."""
    m = cfg.metric
    pos = t.apply(partial.points)
    pd = cdist(pos, full.points)
    if isinstance(partial.features, MinutiaFeatures):
        fa = wrap_angle(partial.features.angles + t.rotation)
        fd = cyclical_distance(fa[:, None], full.features.angles[None, :])
        fd = np.where(
            partial.features.kinds[:, None] == full.features.kinds[None, :],
            fd,
            np.inf,
        )
    else:
        fd = cdist(partial.features.values, full.features.values) / 2.0
    return _combine(m, fd, pd)


def _greedy_pairs(cost: np.ndarray, epsilon: float) -> list[tuple[int, int]]:
    """Repeatedly take the globally cheapest unused pair with cost < epsilon."""
    n, m = cost.shape
    flat = cost.ravel()
    ok = np.nonzero(flat < epsilon)[0]
    order = ok[np.argsort(flat[ok], kind="stable")]
    used_i = np.zeros(n, dtype=bool)
    used_j = np.zeros(m, dtype=bool)
    pairs = []
    for f in order:
        i, j = divmod(int(f), m)
        if used_i[i] or used_j[j]:
            continue
        used_i[i] = True
        used_j[j] = True
        pairs.append((i, j))
        if len(pairs) == min(n, m):
            break
    return pairs


def _fit_or_identity(
    partial: PointSet, full: PointSet, pairs: list[tuple[int, int]]
) -> RigidTransform:
    """Rigid fit through the matched pairs; identity when underdetermined."""
    if len(pairs) < 2:
        return RigidTransform.identity()
    pi = np.array([i for i, _ in pairs], dtype=np.intp)
    fi = np.array([j for _, j in pairs], dtype=np.intp)
    src = partial.points[pi]
    if float(np.abs(src - src.mean(axis=0)).max()) < 1e-12:
        return RigidTransform.identity()
    return estimate_rigid(src, full.points[fi])


def _result_from_pairs(
    partial: PointSet,
    full: PointSet,
    pairs: list[tuple[int, int]],
    pair_costs: np.ndarray,
    cfg: MatcherConfig,
    transform: RigidTransform | None = None,
    residual_history: tuple[float, ...] | None = None,
) -> MatchResult:
    corr = Correspondence.from_pairs(pairs, len(partial), len(full))
    if transform is None:
        transform = _fit_or_identity(partial, full, pairs)
    sum_matched = float(pair_costs.sum())
    distance = (sum_matched + cfg.epsilon * len(corr.unmatched_partial)) / len(partial)
    return MatchResult(
        correspondence=corr,
        transform=transform,
        distance=distance,
        inliers=len(pairs),
        sum_matched=sum_matched,
        residual_history=residual_history,
    )


def _costs_of(cost: np.ndarray, pairs: list[tuple[int, int]]) -> np.ndarray:
    if not pairs:
        return np.zeros(0)
    return cost[tuple(np.array(pairs).T)]


# ---------------------------------------------------------------------------
# Backends


def match_greedy(partial: PointSet, full: PointSet, cfg: MatcherConfig) -> MatchResult:
    """Take the globally cheapest remaining pair until none is below epsilon."""
    cost = _cost_matrix(partial, full, cfg)
    pairs = _greedy_pairs(cost, cfg.epsilon)
    return _result_from_pairs(partial, full, pairs, _costs_of(cost, pairs), cfg)


def match_hungarian(
    partial: PointSet, full: PointSet, cfg: MatcherConfig
) -> MatchResult:
    """Optimal assignment on the cost matrix padded to square with epsilon.

    Pad assignments model insertions/deletions; real pairs that cost at least
    epsilon are demoted to unmatched afterwards.
    """
    cost = _cost_matrix(partial, full, cfg)
    n, m = cost.shape
    size = max(n, m)
    padded = np.full((size, size), cfg.epsilon)
    padded[:n, :m] = np.minimum(cost, UNMATCHABLE)
    rows, cols = linear_sum_assignment(padded)
    pairs = [
        (int(i), int(j))
        for i, j in zip(rows, cols)
        if i < n and j < m and cost[i, j] < cfg.epsilon
    ]
    return _result_from_pairs(partial, full, pairs, _costs_of(cost, pairs), cfg)


def match_edit_cost(
    partial: PointSet, full: PointSet, cfg: MatcherConfig
) -> MatchResult:
    """Optimal edit assignment: substitute, or delete/insert at cost epsilon.

    Builds the square (n + m) matrix with the substitution block top-left,
    per-point deletion and insertion diagonals at epsilon, and a free
    dummy-to-dummy block, then solves it exactly. Substituted pairs are the
    inliers; points whose best substitution is not worth epsilon per side get
    edited out by the solver itself.
    """
    cost = _cost_matrix(partial, full, cfg)
    n, m = cost.shape
    big = np.full((n + m, n + m), np.inf)
    big[:n, :m] = cost
    big[n:, m:] = 0.0
    big[np.arange(n), m + np.arange(n)] = cfg.epsilon
    big[n + np.arange(m), np.arange(m)] = cfg.epsilon
    rows, cols = linear_sum_assignment(big)
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if i < n and j < m]
    return _result_from_pairs(partial, full, pairs, _costs_of(cost, pairs), cfg)


def match_icp(partial: PointSet, full: PointSet, cfg: MatcherConfig) -> MatchResult:
    """Iterative closest point with per-iteration trimming.

    Starts from the identity (the canonical frames are already coarse-aligned),
    alternates nearest-neighbor pairing with a rigid re-fit on the kept pairs,
    and stops when the trimmed mean residual improves by less than icp_tol or
    would increase. The recorded residual history is therefore non-increasing.
    The final pairing keeps nearest neighbors under the converged transform,
    demoting pairs that cost epsilon or more.
    """
    if len(partial) < 2:
        raise DegenerateInput("icp needs at least 2 partial points")

    n_drop = int(cfg.icp_trim_fraction * len(partial))

    def trimmed_state(t: RigidTransform):
        cost = _cost_matrix_under(partial, full, cfg, t)
        nn = np.argmin(cost, axis=1)
        c = cost[np.arange(len(partial)), nn]
        keep = np.argsort(c, kind="stable")[: len(partial) - n_drop]
        return cost, nn, keep, float(c[keep].mean())

    transform = RigidTransform.identity()
    cost, nn, keep, residual = trimmed_state(transform)
    history = [residual]

    for _ in range(cfg.icp_max_iters):
        src = partial.points[keep]
        if float(np.abs(src - src.mean(axis=0)).max()) < 1e-12:
            raise DegenerateInput("kept source points coincident")
        candidate = estimate_rigid(src, full.points[nn[keep]])
        new_cost, new_nn, new_keep, new_residual = trimmed_state(candidate)
        if not math.isfinite(new_residual) or new_residual > residual:
            break
        transform = candidate
        cost, nn, keep = new_cost, new_nn, new_keep
        improvement = residual - new_residual
        residual = new_residual
        history.append(residual)
        if improvement < cfg.icp_tol:
            break

    pairs = _greedy_pairs(cost, cfg.epsilon)
    return _result_from_pairs(
        partial,
        full,
        pairs,
        _costs_of(cost, pairs),
        cfg,
        transform=transform,
        residual_history=tuple(history),
    )


def match_hough_consistency(
    partial: PointSet, full: PointSet, cfg: MatcherConfig
) -> MatchResult:
    """Accumulate per-pair pose evidence, take the peak, pair without rejection.

    Every feature-compatible pair implies a (rotation, translation) that would
    map the partial point onto the full point; the implied poses are quantized
    and the densest bin's mean pose wins. All partial points are then paired
    to their nearest remaining full point under that pose; nothing is demoted,
    so this backend has no outlier rejection.
    """
    tbin = cfg.hough_translation_bin
    if tbin is None:
        tbin = cfg.metric.position_scale / 10.0
    abin = cfg.hough_angle_bin
    if abin is None:
        abin = math.pi / 18.0

    n, m = len(partial), len(full)
    if isinstance(partial.features, MinutiaFeatures):
        dtheta = wrap_angle(
            full.features.angles[None, :] - partial.features.angles[:, None]
        )
        compatible = partial.features.kinds[:, None] == full.features.kinds[None, :]
    else:
        dtheta = np.zeros((n, m))
        compatible = np.ones((n, m), dtype=bool)

    ii, jj = np.nonzero(compatible)
    if ii.size == 0:
        raise NoCandidates("no compatible pairs to accumulate")
    dt = dtheta[ii, jj]
    c, s = np.cos(dt), np.sin(dt)
    px, py = partial.points[ii, 0], partial.points[ii, 1]
    tx = full.points[jj, 0] - (c * px - s * py)
    ty = full.points[jj, 1] - (s * px + c * py)

    bins = np.column_stack(
        (
            np.floor(dt / abin).astype(np.int64),
            np.floor(tx / tbin).astype(np.int64),
            np.floor(ty / tbin).astype(np.int64),
        )
    )
    _, inverse, counts = np.unique(
        bins, axis=0, return_inverse=True, return_counts=True
    )
    # np.unique sorts bins lexicographically, so the first tied index is a
    # deterministic winner.
    peak = int(np.nonzero(counts == counts.max())[0][0])
    members = inverse == peak
    pose = RigidTransform(
        float(np.mean(dt[members])),
        (float(np.mean(tx[members])), float(np.mean(ty[members]))),
    )

    cost = _cost_matrix_under(partial, full, cfg, pose)
    pairs = _greedy_pairs(cost, math.inf)
    return _result_from_pairs(
        partial, full, pairs, _costs_of(cost, pairs), cfg, transform=pose
    )


_DISPATCH = {
    Backend.GREEDY: match_greedy,
    Backend.HUNGARIAN: match_hungarian,
    Backend.ICP: match_icp,
    Backend.EDIT_COST: match_edit_cost,
    Backend.HOUGH: match_hough_consistency,
}


def match(partial: PointSet, full: PointSet, cfg: MatcherConfig) -> MatchResult:
    """Run the backend selected by cfg."""
    if len(partial) == 0 or len(full) == 0:
        raise EmptyPartial("matchers need nonempty sets")
    return _DISPATCH[cfg.backend](partial, full, cfg)
