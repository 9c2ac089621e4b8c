"""Core value types: points, features, point sets, rigid transforms, correspondences.

All types are immutable after construction (arrays are locked), so they can be
shared freely between workers. Positions are float64 pixels or centimeters;
a single run must use one unit consistently. Angles are radians in [0, 2pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import VariantMismatch

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap an angle (scalar or array) into [0, 2pi)."""
    return np.mod(a, TWO_PI)


def rotation_matrix(theta: float) -> np.ndarray:
    """2x2 counter-clockwise rotation matrix."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _locked(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Points and transforms


@dataclass(frozen=True)
class Point2:
    """A 2D position. Must be finite."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self) -> Iterator[float]:
        yield self.x
        yield self.y

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @classmethod
    def of(cls, xy) -> "Point2":
        x, y = xy
        return cls(float(x), float(y))


@dataclass(frozen=True)
class RigidTransform:
    """Rotation (radians, counter-clockwise) followed by translation.

    Maps p to R(rotation) @ p + translation.
    """

    rotation: float
    translation: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        dx, dy = self.translation
        if not (
            math.isfinite(self.rotation)
            and math.isfinite(dx)
            and math.isfinite(dy)
        ):
            raise ValueError("non-finite transform")
        object.__setattr__(self, "translation", (float(dx), float(dy)))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(0.0, (0.0, 0.0))

    @property
    def matrix(self) -> np.ndarray:
        return rotation_matrix(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to an (n, 2) array (or a single (2,) point)."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix.T + np.asarray(self.translation)


def apply_transform(t: RigidTransform, p: Point2) -> Point2:
    """Apply a rigid transform to one point."""
    return Point2.of(t.apply(p.as_array()))


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform equivalent to applying b first, then a."""
    ta = np.asarray(a.translation)
    tb = np.asarray(b.translation)
    t = a.matrix @ tb + ta
    return RigidTransform(a.rotation + b.rotation, (float(t[0]), float(t[1])))


def invert(t: RigidTransform) -> RigidTransform:
    """Inverse transform: invert(t) then t is the identity."""
    ti = rotation_matrix(-t.rotation) @ np.asarray(t.translation)
    return RigidTransform(-t.rotation, (float(-ti[0]), float(-ti[1])))


# ---------------------------------------------------------------------------
# Features


class MinutiaKind(IntEnum):
    TERMINATION = 0
    BIFURCATION = 1


@dataclass(frozen=True)
class Minutia:
    """A ridge-event feature: directional angle plus event type."""

    angle: float  # radians in [0, 2pi)
    kind: MinutiaKind

    def __post_init__(self) -> None:
        if not (0.0 <= self.angle < TWO_PI):
            raise ValueError(f"angle {self.angle} outside [0, 2pi)")


@dataclass(frozen=True)
class VectorFeature:
    """A descriptor vector, unit-normalized (or all-zero)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _locked(np.atleast_1d(self.values)))


@dataclass(frozen=True)
class MinutiaFeatures:
    """Columnar storage for the minutia features of one point set."""

    angles: np.ndarray  # (n,) radians in [0, 2pi)
    kinds: np.ndarray   # (n,) values of MinutiaKind

    variant = "minutia"

    def __post_init__(self) -> None:
        angles = np.asarray(self.angles, dtype=np.float64).reshape(-1)
        kinds = np.asarray(self.kinds, dtype=np.uint8).reshape(-1)
        if angles.shape != kinds.shape:
            raise ValueError("angles and kinds must have equal length")
        if angles.size and not np.all(np.isfinite(angles)):
            raise ValueError("non-finite angle")
        if angles.size and (angles.min() < 0.0 or angles.max() >= TWO_PI):
            raise ValueError("angles must lie in [0, 2pi)")
        if kinds.size and kinds.max() > 1:
            raise ValueError("kinds must be 0 (termination) or 1 (bifurcation)")
        object.__setattr__(self, "angles", _locked(angles))
        kinds = kinds.copy()
        kinds.setflags(write=False)
        object.__setattr__(self, "kinds", kinds)

    def __len__(self) -> int:
        return self.angles.size

    def __getitem__(self, i: int) -> Minutia:
        return Minutia(float(self.angles[i]), MinutiaKind(int(self.kinds[i])))

    def take(self, idx) -> "MinutiaFeatures":
        return MinutiaFeatures(self.angles[idx], self.kinds[idx])


@dataclass(frozen=True)
class VectorFeatures:
    """Columnar storage for descriptor-vector features (rows unit or zero norm)."""

    values: np.ndarray  # (n, d)

    variant = "vector"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] < 1:
            raise ValueError("values must be an (n, d) array with d >= 1")
        if values.size and not np.all(np.isfinite(values)):
            raise ValueError("non-finite feature value")
        norms = np.linalg.norm(values, axis=1)
        bad = ~(np.isclose(norms, 1.0, atol=1e-6) | np.isclose(norms, 0.0, atol=1e-12))
        if np.any(bad):
            raise ValueError(
                f"feature rows must be unit or zero norm; row {int(np.argmax(bad))} "
                f"has norm {norms[np.argmax(bad)]:.6g}"
            )
        object.__setattr__(self, "values", _locked(values))

    @classmethod
    def normalized(cls, raw) -> "VectorFeatures":
        """Build from raw vectors, rescaling each nonzero row to unit norm."""
        raw = np.asarray(raw, dtype=np.float64)
        if raw.ndim != 2:
            raise ValueError("raw must be an (n, d) array")
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        safe = np.where(norms > 0.0, norms, 1.0)
        return cls(raw / safe)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, i: int) -> VectorFeature:
        return VectorFeature(self.values[i])

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def take(self, idx) -> "VectorFeatures":
        return VectorFeatures(self.values[idx])


FeatureArray = Union[MinutiaFeatures, VectorFeatures]
Feature = Union[Minutia, VectorFeature]


def check_same_variant(a: FeatureArray, b: FeatureArray) -> None:
    if a.variant != b.variant:
        raise VariantMismatch(f"cannot compare {a.variant} with {b.variant} features")
    if a.variant == "vector" and a.dim != b.dim:
        raise VariantMismatch(f"vector dimensions differ: {a.dim} vs {b.dim}")


# ---------------------------------------------------------------------------
# Point sets


@dataclass(frozen=True)
class PointSet:
    """Salient points of one image with one feature per point.

    label identifies the subject or scene; order_index is the position in an
    ordered corpus (used by the neighbor-hit metric).
    """

    points: np.ndarray  # (n, 2)
    features: FeatureArray
    label: str | None = None
    order_index: int | None = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must be (n, 2), got {pts.shape}")
        if pts.size and not np.all(np.isfinite(pts)):
            raise ValueError("non-finite point position")
        if pts.shape[0] != len(self.features):
            raise ValueError(
                f"{pts.shape[0]} points but {len(self.features)} features"
            )
        object.__setattr__(self, "points", _locked(pts))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def variant(self) -> str:
        return self.features.variant

    def centroid(self) -> np.ndarray:
        if len(self) == 0:
            raise ValueError("centroid of an empty set")
        return self.points.mean(axis=0)

    def bounding_radius(self) -> float:
        """Max distance of any point from the centroid."""
        if len(self) == 0:
            return 0.0
        return float(np.linalg.norm(self.points - self.centroid(), axis=1).max())

    def subset(self, idx) -> "PointSet":
        idx = np.asarray(idx, dtype=np.intp)
        return replace(self, points=self.points[idx], features=self.features.take(idx))

    def transformed(self, t: RigidTransform) -> "PointSet":
        """Rigidly move the set; minutia angles shift by the rotation."""
        feats = self.features
        if isinstance(feats, MinutiaFeatures):
            feats = MinutiaFeatures(wrap_angle(feats.angles + t.rotation), feats.kinds)
        return replace(self, points=t.apply(self.points), features=feats)


# ---------------------------------------------------------------------------
# Correspondences


@dataclass(frozen=True)
class Correspondence:
    """Injective partial mapping between partial-set and full-set indices."""

    pairs: tuple[tuple[int, int], ...]
    unmatched_partial: tuple[int, ...] = ()
    unmatched_full: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(
            self, "unmatched_partial", tuple(int(i) for i in self.unmatched_partial)
        )
        object.__setattr__(
            self, "unmatched_full", tuple(int(j) for j in self.unmatched_full)
        )
        left = [i for i, _ in pairs]
        right = [j for _, j in pairs]
        if len(set(left)) != len(left) or len(set(right)) != len(right):
            raise ValueError("correspondence is not injective")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, int]], n_partial: int, n_full: int) -> "Correspondence":
        """Build with the unmatched lists derived from the set sizes."""
        matched_p = {int(i) for i, _ in pairs}
        matched_f = {int(j) for _, j in pairs}
        if matched_p and (min(matched_p) < 0 or max(matched_p) >= n_partial):
            raise ValueError("partial index out of range")
        if matched_f and (min(matched_f) < 0 or max(matched_f) >= n_full):
            raise ValueError("full index out of range")
        return cls(
            pairs=tuple((int(i), int(j)) for i, j in pairs),
            unmatched_partial=tuple(i for i in range(n_partial) if i not in matched_p),
            unmatched_full=tuple(j for j in range(n_full) if j not in matched_f),
        )

    def validate(self, n_partial: int, n_full: int) -> None:
        """Check exact coverage of both index ranges."""
        left = sorted([i for i, _ in self.pairs] + list(self.unmatched_partial))
        right = sorted([j for _, j in self.pairs] + list(self.unmatched_full))
        if left != list(range(n_partial)):
            raise ValueError("partial side does not cover every index exactly once")
        if right != list(range(n_full)):
            raise ValueError("full side does not cover every index exactly once")

    @property
    def n_matched(self) -> int:
        return len(self.pairs)

    def partial_indices(self) -> np.ndarray:
        return np.array([i for i, _ in self.pairs], dtype=np.intp)

    def full_indices(self) -> np.ndarray:
        return np.array([j for _, j in self.pairs], dtype=np.intp)
