"""Two-step registration: vote for candidate centers, match each sub-set, keep the best.

The winning match's distance approximates the partial-to-full distance, and
its correspondence and transform are returned with indices and coordinates
mapped back into the full set's original frame.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyPartial, NoCandidates, UndefinedMean
from .matchers import MatcherConfig, MatchResult, match
from .metrics import canonical_positions, circular_mean
from .model import (
    Correspondence,
    MinutiaFeatures,
    Point2,
    PointSet,
    RigidTransform,
    check_same_variant,
    compose,
    rotation_matrix,
    wrap_angle,
)
from .voting import (
    CandidateList,
    VotingConfig,
    build_candidate_matrix,
    split_indices,
    vote_and_sort,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateOutcome:
    """Diagnostics for one candidate: where it was, how it voted, how it matched."""

    center: Point2
    votes: int
    distance: float


@dataclass(frozen=True)
class RegistrationResult:
    """Winning candidate plus the global correspondence and transform.

    correspondence indices refer to the full set (not the sub-set); transform
    maps original partial coordinates to original full coordinates.
    """

    best_candidate: int
    distance: float
    correspondence: Correspondence
    transform: RigidTransform
    inliers: int
    sum_matched: float
    per_candidate: tuple[CandidateOutcome, ...]


def _mean_angle(s: PointSet) -> float:
    if isinstance(s.features, MinutiaFeatures):
        return circular_mean(s.features.angles)
    return 0.0


def _canonical(s: PointSet, center, mean_angle: float) -> PointSet:
    """Express a set in its canonical frame; minutia angles are mean-shifted."""
    pos = canonical_positions(s, center, mean_angle)
    feats = s.features
    if isinstance(feats, MinutiaFeatures):
        feats = MinutiaFeatures(wrap_angle(feats.angles - mean_angle), feats.kinds)
    return replace(s, points=pos, features=feats)


def _canonicalize_transform(center, mean_angle: float) -> RigidTransform:
    """Transform realizing p -> R(-mean_angle) (p - center)."""
    t = -(rotation_matrix(-mean_angle) @ np.asarray(center, dtype=np.float64))
    return RigidTransform(-mean_angle, (float(t[0]), float(t[1])))


def _resolve_matcher(matcher: MatcherConfig, vcfg: VotingConfig) -> MatcherConfig:
    """Fill metric scale and hough bins from the resolved voting thresholds."""
    out = matcher
    if out.metric.position_scale is None:
        out = replace(out, metric=replace(out.metric, position_scale=vcfg.t_radius))
    if out.hough_translation_bin is None:
        out = replace(out, hough_translation_bin=vcfg.t_spatial)
    if out.hough_angle_bin is None:
        out = replace(out, hough_angle_bin=vcfg.t_feature * math.pi)
    return out


def pf_register(
    partial: PointSet,
    full: PointSet,
    voting: VotingConfig | None = None,
    matcher: MatcherConfig | None = None,
) -> RegistrationResult:
    """Locate the partial set inside the full set and align it rigidly.

    Raises NoCandidates when the voting stage finds no placement at all,
    which callers should read as "partial not found".
    """
    voting = voting if voting is not None else VotingConfig()
    matcher = matcher if matcher is not None else MatcherConfig()
    if len(partial) == 0:
        raise EmptyPartial("partial set is empty")
    check_same_variant(partial.features, full.features)

    vcfg = voting.resolved(partial)
    mcfg = _resolve_matcher(matcher, vcfg)

    matrix = build_candidate_matrix(partial, full, vcfg)
    candidates = vote_and_sort(matrix, vcfg)
    members = split_indices(full, candidates, vcfg)

    centroid = partial.centroid()
    theta_p = _mean_angle(partial)
    partial_c = _canonical(partial, centroid, theta_p)

    outcomes: list[CandidateOutcome] = []
    best = None
    for a, (cand, idx) in enumerate(zip(candidates.entries, members)):
        if idx.size == 0:
            log.warning("candidate %d has an empty sub-set; skipping", a)
            outcomes.append(CandidateOutcome(cand.center, cand.votes, math.inf))
            continue
        sub = full.subset(idx)
        try:
            theta_a = _mean_angle(sub)
        except UndefinedMean:
            log.warning("candidate %d has a degenerate mean angle; skipping", a)
            outcomes.append(CandidateOutcome(cand.center, cand.votes, math.inf))
            continue
        sub_c = _canonical(sub, cand.center.as_array(), theta_a)
        res = match(partial_c, sub_c, mcfg)
        outcomes.append(CandidateOutcome(cand.center, cand.votes, res.distance))
        key = (res.distance, -cand.votes, a)
        if best is None or key < best[0]:
            best = (key, a, res, idx, theta_a, cand)

    if best is None:
        raise NoCandidates("every candidate sub-set was empty or degenerate")

    _, a, res, idx, theta_a, cand = best
    corr = Correspondence.from_pairs(
        [(i, int(idx[j])) for i, j in res.correspondence.pairs],
        len(partial),
        len(full),
    )
    transform = compose(
        RigidTransform(theta_a, (cand.center.x, cand.center.y)),
        compose(res.transform, _canonicalize_transform(centroid, theta_p)),
    )
    return RegistrationResult(
        best_candidate=a,
        distance=res.distance,
        correspondence=corr,
        transform=transform,
        inliers=res.inliers,
        sum_matched=res.sum_matched,
        per_candidate=tuple(outcomes),
    )


def direct_register(
    partial: PointSet, full: PointSet, matcher: MatcherConfig | None = None
) -> MatchResult:
    """Match the partial against the whole full set, no voting or splitting.

    This is the classical-registration baseline used as an oracle and for
    runtime comparisons; its cost grows with the full size, not the partial
    size.
    """
    matcher = matcher if matcher is not None else MatcherConfig()
    if len(partial) == 0 or len(full) == 0:
        raise EmptyPartial("direct_register needs nonempty sets")
    check_same_variant(partial.features, full.features)

    if matcher.metric.position_scale is None:
        scale = 1.1 * partial.bounding_radius() or 1.0
        matcher = replace(matcher, metric=replace(matcher.metric, position_scale=scale))

    centroid_p = partial.centroid()
    theta_p = _mean_angle(partial)
    centroid_f = full.centroid()
    theta_f = _mean_angle(full)
    res = match(
        _canonical(partial, centroid_p, theta_p),
        _canonical(full, centroid_f, theta_f),
        matcher,
    )
    transform = compose(
        RigidTransform(theta_f, (float(centroid_f[0]), float(centroid_f[1]))),
        compose(res.transform, _canonicalize_transform(centroid_p, theta_p)),
    )
    return replace(res, transform=transform)
