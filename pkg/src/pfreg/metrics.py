"""Distance functions between features, points and point sets.

Positional distances are taken in a canonical frame: translate to a designated
center, then rotate by the set's circular-mean feature angle. That makes the
combined point distance invariant to rigid motion of a whole set, so partial
and full sets can be compared without knowing their relative pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist

from .errors import EmptyPartial, UndefinedMean, VariantMismatch
from .model import (
    TWO_PI,
    Correspondence,
    Feature,
    FeatureArray,
    Minutia,
    MinutiaFeatures,
    Point2,
    PointSet,
    VectorFeature,
    VectorFeatures,
    check_same_variant,
    rotation_matrix,
    wrap_angle,
)

# Resultant lengths below this make a circular mean meaningless.
DEGENERATE_RESULTANT = 1e-9


@dataclass(frozen=True)
class MetricConfig:
    """Weights for the combined point distance.

    position_scale divides Euclidean position distances so they land in the
    same O(1) range as feature distances. None means "resolve later": the
    registration pipeline substitutes the split radius of the run. Distance
    functions require a concrete value.
    """

    w_feature: float = 0.5
    w_position: float = 0.5
    position_scale: float | None = None

    def __post_init__(self) -> None:
        if self.w_feature < 0.0 or self.w_position < 0.0:
            raise ValueError("weights must be non-negative")
        if self.w_feature + self.w_position <= 0.0:
            raise ValueError("at least one weight must be positive")
        if self.position_scale is not None and self.position_scale <= 0.0:
            raise ValueError("position_scale must be positive")

    def scale(self) -> float:
        if self.position_scale is None:
            raise ValueError("position_scale unresolved; set it or register via the pipeline")
        return self.position_scale


# ---------------------------------------------------------------------------
# Angle distances and normalization


def cyclical_distance(a, b):
    """Distance between angles on the circle, scaled to [0, 1].

    Accepts scalars or broadcastable arrays.
    """
    d = np.mod(np.abs(np.asarray(a, dtype=np.float64) - b), TWO_PI)
    out = np.minimum(d, TWO_PI - d) / math.pi
    return float(out) if np.ndim(out) == 0 else out


def circular_mean(angles) -> float:
    """Direction of the resultant vector of unit vectors at the given angles."""
    angles = np.asarray(angles, dtype=np.float64)
    if angles.size == 0:
        raise UndefinedMean("circular mean of zero angles")
    s = np.sin(angles).sum()
    c = np.cos(angles).sum()
    if math.hypot(s, c) / angles.size < DEGENERATE_RESULTANT:
        raise UndefinedMean("resultant vector length ~ 0")
    return float(wrap_angle(math.atan2(s, c)))


def normalize_angles(s: PointSet) -> PointSet:
    """Subtract the circular-mean angle from every minutia angle (mod 2pi)."""
    if not isinstance(s.features, MinutiaFeatures):
        raise VariantMismatch("normalize_angles needs minutia features")
    mean = circular_mean(s.features.angles)
    feats = MinutiaFeatures(wrap_angle(s.features.angles - mean), s.features.kinds)
    return replace(s, features=feats)


def canonical_positions(s: PointSet, center, mean_angle: float) -> np.ndarray:
    """Positions translated to `center` and rotated by -mean_angle.

    Output is invariant to any rigid motion applied to the whole set, provided
    center and mean_angle are recomputed from the moved set.
    """
    c = center.as_array() if isinstance(center, Point2) else np.asarray(center, dtype=np.float64)
    return (s.points - c) @ rotation_matrix(-mean_angle).T


# ---------------------------------------------------------------------------
# Feature distances


def feature_distance(f1: Feature, f2: Feature) -> float:
    """Distance in [0, 1] between two features; +inf for unmappable minutiae.

    Minutia angles are assumed already mean-normalized by the caller.
    """
    if isinstance(f1, Minutia) and isinstance(f2, Minutia):
        if f1.kind != f2.kind:
            return math.inf
        return cyclical_distance(f1.angle, f2.angle)
    if isinstance(f1, VectorFeature) and isinstance(f2, VectorFeature):
        if f1.values.shape != f2.values.shape:
            raise VariantMismatch("vector dimensions differ")
        return float(np.linalg.norm(f1.values - f2.values) / 2.0)
    raise VariantMismatch("cannot compare minutia with vector features")


def feature_distance_matrix(fa: FeatureArray, fb: FeatureArray) -> np.ndarray:
    """(len(fa), len(fb)) matrix of pairwise feature distances."""
    check_same_variant(fa, fb)
    if isinstance(fa, MinutiaFeatures):
        d = cyclical_distance(fa.angles[:, None], fb.angles[None, :])
        d = np.where(fa.kinds[:, None] == fb.kinds[None, :], d, np.inf)
        return d
    assert isinstance(fa, VectorFeatures) and isinstance(fb, VectorFeatures)
    return cdist(fa.values, fb.values) / 2.0


# ---------------------------------------------------------------------------
# Point and set distances


def point_distance(
    cfg: MetricConfig,
    p_partial,
    p_full,
    f_partial: Feature,
    f_full: Feature,
) -> float:
    """Weighted feature + position distance between two canonicalized points.

    An infinite feature distance (unmappable minutiae) propagates regardless
    of the feature weight.
    """
    fd = feature_distance(f_partial, f_full)
    if math.isinf(fd):
        return math.inf
    pd = float(
        np.linalg.norm(np.asarray(p_partial, dtype=np.float64) - np.asarray(p_full))
    )
    return cfg.w_feature * fd + cfg.w_position * pd / cfg.scale()


def _combine(cfg: MetricConfig, fd: np.ndarray, pd: np.ndarray) -> np.ndarray:
    """Weighted sum with infinite feature distances propagated for any weight."""
    with np.errstate(invalid="ignore"):
        out = cfg.w_feature * fd + (cfg.w_position / cfg.scale()) * pd
    mask = np.isinf(fd)
    if mask.any():
        out = np.where(mask, np.inf, out)
    return out


def point_distance_matrix(
    cfg: MetricConfig,
    pos_partial: np.ndarray,
    pos_full: np.ndarray,
    feats_partial: FeatureArray,
    feats_full: FeatureArray,
) -> np.ndarray:
    """Pairwise point distances for canonicalized positions (n, m)."""
    fd = feature_distance_matrix(feats_partial, feats_full)
    pd = cdist(np.asarray(pos_partial, dtype=np.float64), np.asarray(pos_full, dtype=np.float64))
    return _combine(cfg, fd, pd)


def _pairwise_feature_distance(fa: FeatureArray, fb: FeatureArray) -> np.ndarray:
    """Elementwise feature distances for two aligned feature arrays."""
    check_same_variant(fa, fb)
    if isinstance(fa, MinutiaFeatures):
        d = cyclical_distance(fa.angles, fb.angles)
        return np.where(fa.kinds == fb.kinds, d, np.inf)
    return np.linalg.norm(fa.values - fb.values, axis=1) / 2.0


def matched_pair_costs(
    cfg: MetricConfig,
    corr: Correspondence,
    partial: PointSet,
    full: PointSet,
) -> np.ndarray:
    """Point distance of each matched pair, in pair order (sets canonical)."""
    if not corr.pairs:
        return np.zeros(0)
    pi = corr.partial_indices()
    fi = corr.full_indices()
    fd = _pairwise_feature_distance(partial.features.take(pi), full.features.take(fi))
    pd = np.linalg.norm(partial.points[pi] - full.points[fi], axis=1)
    return _combine(cfg, fd, pd)


def set_distance(
    cfg: MetricConfig,
    corr: Correspondence,
    partial: PointSet,
    full: PointSet,
    epsilon: float = 0.1,
) -> float:
    """Mean per-partial-point cost of a correspondence (both sets canonical).

    Matched pairs contribute their point distance; every unmatched partial
    point contributes the insertion/deletion cost epsilon. The sum is divided
    by the partial size, so values are comparable across patch sizes.
    """
    n = len(partial)
    if n == 0:
        raise EmptyPartial("set_distance needs a nonempty partial set")
    total = epsilon * len(corr.unmatched_partial)
    total += float(matched_pair_costs(cfg, corr, partial, full).sum())
    return total / n


def inlier_normalized_distance(sum_matched: float, inliers: int) -> float:
    """Sum of matched-pair distances per inlier; +inf when there is no evidence."""
    if inliers < 0:
        raise ValueError("inliers must be >= 0")
    if inliers == 0:
        return math.inf
    return sum_matched / inliers
