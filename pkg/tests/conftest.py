import math

import numpy as np
import pytest

from pfreg import (
    MatcherConfig,
    MetricConfig,
    MinutiaFeatures,
    PointSet,
    RigidTransform,
    VectorFeatures,
)


def minutia_set(points, angles, kinds, **kwargs) -> PointSet:
    return PointSet(np.asarray(points, dtype=float), MinutiaFeatures(angles, kinds), **kwargs)


def vector_set(points, values, **kwargs) -> PointSet:
    return PointSet(
        np.asarray(points, dtype=float), VectorFeatures.normalized(np.asarray(values, float)), **kwargs
    )


def random_canonical_sets(rng, n, m, dim=5, span=4.0):
    """Two unrelated vector-feature sets (already 'canonical' by fiat)."""
    a = vector_set(rng.uniform(-span, span, (n, 2)), rng.normal(size=(n, dim)))
    b = vector_set(rng.uniform(-span, span, (m, 2)), rng.normal(size=(m, dim)))
    return a, b


def position_metric(scale=1.0) -> MetricConfig:
    """Pure-position metric; costs equal Euclidean distance / scale."""
    return MetricConfig(w_feature=0.0, w_position=1.0, position_scale=scale)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def angle_diff(a: float, b: float) -> float:
    """Absolute angular difference on the circle, in radians."""
    return abs((a - b + math.pi) % (2.0 * math.pi) - math.pi)


def assert_same_transform(t1: RigidTransform, t2: RigidTransform, tol=1e-9):
    assert angle_diff(t1.rotation, t2.rotation) < tol
    assert abs(t1.translation[0] - t2.translation[0]) < tol
    assert abs(t1.translation[1] - t2.translation[1]) < tol


def positions_metric_cost(cfg: MatcherConfig, partial: PointSet, full: PointSet):
    from pfreg import point_distance_matrix

    return point_distance_matrix(
        cfg.metric, partial.points, full.points, partial.features, full.features
    )
