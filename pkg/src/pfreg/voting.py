"""Candidate-center voting: hypothesize where the partial set sits in the full set.

Every (partial point, full point) pair whose features are similar enough votes
for one position: where the partial's centroid would land if that pair were a
true correspondence. Votes from pairs that really do correspond agree on one
position, so peaks of a spatial accumulator are strong placement candidates.
The full set is then split into one sub-set per retained candidate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NoCandidates
from .metrics import feature_distance_matrix, normalize_angles
from .model import (
    Feature,
    Minutia,
    MinutiaFeatures,
    Point2,
    PointSet,
    check_same_variant,
    wrap_angle,
)

log = logging.getLogger(__name__)

# Auto-resolution factors for thresholds left unset (see VotingConfig).
RADIUS_SLACK = 1.1
SPATIAL_FRACTION = 0.1


@dataclass(frozen=True)
class VotingConfig:
    """Thresholds of the voting stage.

    t_spatial: merge radius for the vote accumulator (None: 0.1 * t_radius).
    t_feature: max feature distance for a pair to cast a vote.
    t_radius: radius of each split sub-set (None: 1.1 * the partial set's
        bounding radius, so a sub-set can hold a whole patch plus jitter).
    k: number of candidate centers retained.
    """

    t_spatial: float | None = None
    t_feature: float = 0.25
    t_radius: float | None = None
    k: int = 4

    def __post_init__(self) -> None:
        for name in ("t_spatial", "t_feature", "t_radius"):
            v = getattr(self, name)
            if v is not None and v <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def resolved(self, partial: PointSet) -> "VotingConfig":
        """Fill in auto thresholds from the partial set's geometry."""
        t_radius = self.t_radius
        if t_radius is None:
            t_radius = RADIUS_SLACK * partial.bounding_radius()
            if t_radius <= 0.0:
                t_radius = 1.0  # single-point partial: any positive radius
        t_spatial = self.t_spatial
        if t_spatial is None:
            t_spatial = SPATIAL_FRACTION * t_radius
        return replace(self, t_spatial=t_spatial, t_radius=t_radius)


@dataclass(frozen=True)
class Candidate:
    """One hypothesized center with its supporting vote count."""

    center: Point2
    votes: int
    mean_feature_dist: float


@dataclass(frozen=True)
class CandidateList:
    """Candidates ordered by descending votes (ties broken deterministically)."""

    entries: tuple[Candidate, ...]

    def __post_init__(self) -> None:
        votes = [c.votes for c in self.entries]
        if any(a < b for a, b in zip(votes, votes[1:])):
            raise ValueError("votes must be non-increasing")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class CandidateMatrix:
    """Sparse pair-vote table: one row per feature-compatible (i, j) pair."""

    partial_idx: np.ndarray   # (m,) indices into the partial set
    full_idx: np.ndarray      # (m,) indices into the full set
    centers: np.ndarray       # (m, 2) voted center positions
    feature_dist: np.ndarray  # (m,) gate distances (mean-normalized features)

    def __len__(self) -> int:
        return self.centers.shape[0]


# ---------------------------------------------------------------------------
# Center construction


def candidate_center(
    p_i: Point2,
    f_i: Feature,
    q_j: Point2,
    g_j: Feature,
    partial_centroid: Point2,
) -> Point2:
    """Center the partial centroid would land on if p_i mapped to q_j.

    For minutia features the angle difference fixes the relative rotation;
    vector features carry no orientation, so the offset is translated as-is.
    Angles must be raw (not mean-normalized) for the difference to be the
    true relative rotation.
    """
    if isinstance(f_i, Minutia) and isinstance(g_j, Minutia):
        dtheta = g_j.angle - f_i.angle
    else:
        dtheta = 0.0
    ox = partial_centroid.x - p_i.x
    oy = partial_centroid.y - p_i.y
    c, s = math.cos(dtheta), math.sin(dtheta)
    return Point2(q_j.x + c * ox - s * oy, q_j.y + s * ox + c * oy)


def build_candidate_matrix(
    partial: PointSet, full: PointSet, cfg: VotingConfig
) -> CandidateMatrix:
    """Vectorized construction of all feature-compatible pair votes.

    The similarity gate compares mean-normalized features (rotation
    invariant); the center math uses the raw angles of the two sets.
    """
    check_same_variant(partial.features, full.features)

    if isinstance(partial.features, MinutiaFeatures):
        gate = feature_distance_matrix(
            normalize_angles(partial).features, normalize_angles(full).features
        )
    else:
        gate = feature_distance_matrix(partial.features, full.features)

    i_idx, j_idx = np.nonzero(gate < cfg.t_feature)
    fdist = gate[i_idx, j_idx]

    offsets = partial.centroid() - partial.points[i_idx]
    q = full.points[j_idx]
    if isinstance(partial.features, MinutiaFeatures):
        dtheta = full.features.angles[j_idx] - partial.features.angles[i_idx]
        c, s = np.cos(dtheta), np.sin(dtheta)
        centers = np.column_stack(
            (
                q[:, 0] + c * offsets[:, 0] - s * offsets[:, 1],
                q[:, 1] + s * offsets[:, 0] + c * offsets[:, 1],
            )
        )
    else:
        centers = q + offsets

    return CandidateMatrix(i_idx, j_idx, centers, fdist)


# ---------------------------------------------------------------------------
# Voting, sorting, splitting


def vote_and_sort(matrix: CandidateMatrix, cfg: VotingConfig) -> CandidateList:
    """Cluster pair votes on a grid and return the top-k candidates.

    Votes hash into square cells of side t_spatial; cells merge into their
    strongest 8-neighbor when the two cell means are within t_spatial.
    Ties on the vote count break by smaller mean feature distance, then by
    lower (y, x) of the cluster center, so the output is fully deterministic.
    """
    if len(matrix) == 0:
        raise NoCandidates("no feature-compatible pairs voted")
    if cfg.t_spatial is None:
        raise ValueError("t_spatial unresolved; call cfg.resolved(partial) first")

    cells = np.floor(matrix.centers / cfg.t_spatial).astype(np.int64)
    # Shift by 1 and widen the stride so neighbor offsets never wrap onto
    # another cell's key.
    kx = cells[:, 0] - cells[:, 0].min() + 1
    ky = cells[:, 1] - cells[:, 1].min() + 1
    stride = ky.max() + 2
    key = kx * stride + ky
    uniq, first, inverse, counts = np.unique(
        key, return_index=True, return_inverse=True, return_counts=True
    )

    n_cells = counts.size
    sum_x = np.bincount(inverse, weights=matrix.centers[:, 0], minlength=n_cells)
    sum_y = np.bincount(inverse, weights=matrix.centers[:, 1], minlength=n_cells)
    sum_fd = np.bincount(inverse, weights=matrix.feature_dist, minlength=n_cells)
    mean_x = sum_x / counts
    mean_y = sum_y / counts
    coords = cells[first]

    # Mergeable neighbor edges, computed in one vectorized pass: for each of
    # the 8 offsets, find which cells have an occupied neighbor and whether
    # the two cell means are within t_spatial.
    edges_u, edges_v = [], []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            probe = uniq + dx * stride + dy
            pos = np.searchsorted(uniq, probe)
            pos[pos >= n_cells] = 0
            hit = uniq[pos] == probe
            u_idx = np.nonzero(hit)[0]
            v_idx = pos[u_idx]
            close = (
                (mean_x[u_idx] - mean_x[v_idx]) ** 2
                + (mean_y[u_idx] - mean_y[v_idx]) ** 2
            ) <= cfg.t_spatial**2
            edges_u.append(u_idx[close])
            edges_v.append(v_idx[close])
    eu = np.concatenate(edges_u)
    ev = np.concatenate(edges_v)
    by_u = np.argsort(eu, kind="stable")
    ev_sorted = ev[by_u].tolist()
    starts = np.searchsorted(eu[by_u], np.arange(n_cells + 1)).tolist()

    order = np.lexsort((coords[:, 1], coords[:, 0], -counts))
    votes_l = counts.tolist()
    sx_l, sy_l, sf_l = sum_x.tolist(), sum_y.tolist(), sum_fd.tolist()
    merged = [False] * n_cells
    cl_votes, cl_fd, cl_x, cl_y = [], [], [], []
    for u in order.tolist():
        if merged[u]:
            continue
        merged[u] = True
        votes = votes_l[u]
        sx, sy, sf = sx_l[u], sy_l[u], sf_l[u]
        for v in ev_sorted[starts[u] : starts[u + 1]]:
            if merged[v]:
                continue
            merged[v] = True
            votes += votes_l[v]
            sx += sx_l[v]
            sy += sy_l[v]
            sf += sf_l[v]
        cl_votes.append(votes)
        cl_x.append(sx / votes)
        cl_y.append(sy / votes)
        cl_fd.append(sf / votes)

    cl_votes = np.asarray(cl_votes)
    rank = np.lexsort((cl_x, cl_y, cl_fd, -cl_votes))[: cfg.k]
    return CandidateList(
        tuple(
            Candidate(Point2(cl_x[i], cl_y[i]), int(cl_votes[i]), float(cl_fd[i]))
            for i in rank.tolist()
        )
    )


def split_indices(
    full: PointSet, candidates: CandidateList, cfg: VotingConfig
) -> list[np.ndarray]:
    """Indices of full-set points within t_radius of each candidate center."""
    if cfg.t_radius is None:
        raise ValueError("t_radius unresolved; call cfg.resolved(partial) first")
    out = []
    for cand in candidates.entries:
        d = np.linalg.norm(full.points - cand.center.as_array(), axis=1)
        out.append(np.nonzero(d <= cfg.t_radius)[0])
    return out


def split(
    full: PointSet, candidates: CandidateList, cfg: VotingConfig
) -> list[PointSet]:
    """Sub-set of the full set around each candidate; empty ones are dropped.

    Sub-sets may overlap, so their sizes can sum to more than the full size.
    """
    out = []
    for cand, idx in zip(candidates.entries, split_indices(full, candidates, cfg)):
        if idx.size == 0:
            log.warning(
                "dropping candidate at (%.3g, %.3g): no points within t_radius",
                cand.center.x,
                cand.center.y,
            )
            continue
        out.append(full.subset(idx))
    return out
