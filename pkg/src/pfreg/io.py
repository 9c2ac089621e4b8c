"""JSON file formats: point sets, registration results, evaluation reports.

All files are plain JSON so fixtures stay diff-able. Angles cross the file
boundary in degrees and are radians in memory; descriptor vectors are
unit-normalized on load. Unknown fields are ignored with a warning rather
than rejected, so files from newer versions still load.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .evaluation import EvalReport, SyntheticConfig
from .model import (
    Correspondence,
    MinutiaFeatures,
    MinutiaKind,
    Point2,
    PointSet,
    RigidTransform,
    VectorFeatures,
)
from .pipeline import CandidateOutcome, RegistrationResult

SCHEMA_VERSION = 1
KIND_NAMES = {"termination": 0, "bifurcation": 1}
KIND_LABELS = {v: k for k, v in KIND_NAMES.items()}
UNITS = ("px", "cm")


def _warn_unknown(d: dict, known, where: str) -> None:
    for key in d:
        if key not in known:
            warnings.warn(f"{where}: ignoring unknown field {key!r}")


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ValidationError(f"{where}: missing required field {key!r}")
    return d[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}: expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise ValidationError(f"{where}: value must be finite")
    return float(value)


# ---------------------------------------------------------------------------
# Point sets


def point_set_to_dict(ps: PointSet, unit: str = "px") -> dict:
    if unit not in UNITS:
        raise ValueError(f"unit must be one of {UNITS}")
    points = []
    if isinstance(ps.features, MinutiaFeatures):
        variant = "minutia"
        for i in range(len(ps)):
            points.append(
                {
                    "x": float(ps.points[i, 0]),
                    "y": float(ps.points[i, 1]),
                    "feature": {
                        "angle_deg": math.degrees(float(ps.features.angles[i])),
                        "kind": KIND_LABELS[int(ps.features.kinds[i])],
                    },
                }
            )
    else:
        variant = "vector"
        for i in range(len(ps)):
            points.append(
                {
                    "x": float(ps.points[i, 0]),
                    "y": float(ps.points[i, 1]),
                    "feature": {"values": [float(v) for v in ps.features.values[i]]},
                }
            )
    doc: dict = {
        "schema_version": SCHEMA_VERSION,
        "feature_variant": variant,
        "unit": unit,
        "points": points,
    }
    if ps.label is not None:
        doc["label"] = ps.label
    if ps.order_index is not None:
        doc["order_index"] = ps.order_index
    return doc


def point_set_from_dict(doc: dict, where: str = "point set") -> PointSet:
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: top level must be an object")
    _warn_unknown(
        doc,
        {"schema_version", "feature_variant", "unit", "label", "order_index", "points"},
        where,
    )
    version = _require(doc, "schema_version", where)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"{where}.schema_version: unsupported version {version!r}")
    variant = _require(doc, "feature_variant", where)
    if variant not in ("minutia", "vector"):
        raise ValidationError(f"{where}.feature_variant: must be 'minutia' or 'vector'")
    unit = doc.get("unit", "px")
    if unit not in UNITS:
        raise ValidationError(f"{where}.unit: must be one of {UNITS}")
    label = doc.get("label")
    if label is not None and not isinstance(label, str):
        raise ValidationError(f"{where}.label: must be a string")
    order_index = doc.get("order_index")
    if order_index is not None and (isinstance(order_index, bool) or not isinstance(order_index, int)):
        raise ValidationError(f"{where}.order_index: must be an integer")

    raw_points = _require(doc, "points", where)
    if not isinstance(raw_points, list):
        raise ValidationError(f"{where}.points: must be a list")

    xs, ys = [], []
    angles, kinds, vectors = [], [], []
    dim = None
    for i, entry in enumerate(raw_points):
        path = f"{where}.points[{i}]"
        if not isinstance(entry, dict):
            raise ValidationError(f"{path}: must be an object")
        _warn_unknown(entry, {"x", "y", "feature"}, path)
        xs.append(_number(_require(entry, "x", path), f"{path}.x"))
        ys.append(_number(_require(entry, "y", path), f"{path}.y"))
        feat = _require(entry, "feature", path)
        if not isinstance(feat, dict):
            raise ValidationError(f"{path}.feature: must be an object")
        if variant == "minutia":
            _warn_unknown(feat, {"angle_deg", "kind"}, f"{path}.feature")
            deg = _number(_require(feat, "angle_deg", path), f"{path}.feature.angle_deg")
            if not (0.0 <= deg < 360.0):
                raise ValidationError(
                    f"{path}.feature.angle_deg: {deg} outside [0, 360)"
                )
            kind = _require(feat, "kind", path)
            if kind not in KIND_NAMES:
                raise ValidationError(
                    f"{path}.feature.kind: {kind!r} not in {sorted(KIND_NAMES)}"
                )
            angles.append(math.radians(deg))
            kinds.append(KIND_NAMES[kind])
        else:
            _warn_unknown(feat, {"values"}, f"{path}.feature")
            values = _require(feat, "values", path)
            if not isinstance(values, list) or not values:
                raise ValidationError(f"{path}.feature.values: must be a nonempty list")
            vec = [_number(v, f"{path}.feature.values[{k}]") for k, v in enumerate(values)]
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValidationError(
                    f"{path}.feature.values: dimension {len(vec)} != {dim}"
                )
            if all(v == 0.0 for v in vec):
                warnings.warn(f"{path}.feature.values: zero vector kept as zero")
            vectors.append(vec)

    points = np.column_stack((xs, ys)) if xs else np.zeros((0, 2))
    if variant == "minutia":
        # Degree->radian conversion cannot push a valid angle to 2pi, but be safe.
        features = MinutiaFeatures(np.minimum(angles, np.nextafter(2 * math.pi, 0)), kinds)
    else:
        features = VectorFeatures.normalized(np.asarray(vectors, dtype=np.float64))
    try:
        return PointSet(points, features, label=label, order_index=order_index)
    except ValueError as e:
        raise ValidationError(f"{where}: {e}") from e


def load_point_set(path) -> PointSet:
    """Load and validate one point-set file."""
    return point_set_from_dict(_load_json(path), where=str(path))


def save_point_set(ps: PointSet, path, unit: str = "px") -> None:
    _dump_json(point_set_to_dict(ps, unit), path)


# ---------------------------------------------------------------------------
# Registration results


def _transform_to_dict(t: RigidTransform) -> dict:
    return {"rotation_rad": t.rotation, "dx": t.translation[0], "dy": t.translation[1]}


def _transform_from_dict(d: dict, where: str) -> RigidTransform:
    return RigidTransform(
        _number(_require(d, "rotation_rad", where), f"{where}.rotation_rad"),
        (
            _number(_require(d, "dx", where), f"{where}.dx"),
            _number(_require(d, "dy", where), f"{where}.dy"),
        ),
    )


def registration_result_to_dict(r: RegistrationResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "best_candidate": r.best_candidate,
        "distance": r.distance,
        "inliers": r.inliers,
        "sum_matched": r.sum_matched,
        "transform": _transform_to_dict(r.transform),
        "pairs": [[i, j] for i, j in r.correspondence.pairs],
        "unmatched_partial": list(r.correspondence.unmatched_partial),
        "unmatched_full": list(r.correspondence.unmatched_full),
        "per_candidate": [
            {
                "center": [c.center.x, c.center.y],
                "votes": c.votes,
                "distance": c.distance if math.isfinite(c.distance) else None,
            }
            for c in r.per_candidate
        ],
    }


def registration_result_from_dict(doc: dict, where: str = "result") -> RegistrationResult:
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: top level must be an object")
    corr = Correspondence(
        pairs=tuple((int(i), int(j)) for i, j in _require(doc, "pairs", where)),
        unmatched_partial=tuple(doc.get("unmatched_partial", ())),
        unmatched_full=tuple(doc.get("unmatched_full", ())),
    )
    per = tuple(
        CandidateOutcome(
            Point2(float(c["center"][0]), float(c["center"][1])),
            int(c["votes"]),
            math.inf if c["distance"] is None else float(c["distance"]),
        )
        for c in doc.get("per_candidate", [])
    )
    return RegistrationResult(
        best_candidate=int(_require(doc, "best_candidate", where)),
        distance=_number(_require(doc, "distance", where), f"{where}.distance"),
        correspondence=corr,
        transform=_transform_from_dict(_require(doc, "transform", where), f"{where}.transform"),
        inliers=int(_require(doc, "inliers", where)),
        sum_matched=_number(_require(doc, "sum_matched", where), f"{where}.sum_matched"),
        per_candidate=per,
    )


def save_registration_result(r: RegistrationResult, path) -> None:
    _dump_json(registration_result_to_dict(r), path)


def load_registration_result(path) -> RegistrationResult:
    return registration_result_from_dict(_load_json(path), where=str(path))


# ---------------------------------------------------------------------------
# Evaluation reports and synthetic configs


def eval_report_to_dict(report: EvalReport) -> dict:
    def matrix(m):
        return [[v if math.isfinite(v) else None for v in row] for row in np.asarray(m).tolist()]

    return {
        "schema_version": SCHEMA_VERSION,
        "radii": list(report.radii),
        "recognition_ratio": list(report.recognition_ratio),
        "n_evaluated": list(report.n_evaluated),
        "runtime_per_patch": list(report.runtime_per_patch),
        "distance_matrix": matrix(report.distance_matrix),
        "inlier_matrix": np.asarray(report.inlier_matrix).tolist(),
        "normalized_matrix": matrix(report.normalized_matrix),
        "ref_labels": list(report.ref_labels),
        "test_labels": list(report.test_labels),
        "neighbor_hit": report.neighbor_hit,
    }


def eval_report_from_dict(doc: dict, where: str = "report") -> EvalReport:
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: top level must be an object")

    def matrix(rows):
        return np.array(
            [[math.inf if v is None else float(v) for v in row] for row in rows]
        )

    return EvalReport(
        radii=tuple(doc["radii"]),
        recognition_ratio=tuple(doc["recognition_ratio"]),
        n_evaluated=tuple(doc["n_evaluated"]),
        runtime_per_patch=tuple(doc["runtime_per_patch"]),
        distance_matrix=matrix(doc["distance_matrix"]),
        inlier_matrix=np.array(doc["inlier_matrix"], dtype=int),
        normalized_matrix=matrix(doc["normalized_matrix"]),
        ref_labels=tuple(doc["ref_labels"]),
        test_labels=tuple(doc["test_labels"]),
        neighbor_hit=doc.get("neighbor_hit"),
    )


def save_eval_report(report: EvalReport, path) -> None:
    _dump_json(eval_report_to_dict(report), path)


def load_eval_report(path) -> EvalReport:
    return eval_report_from_dict(_load_json(path), where=str(path))


def synthetic_config_from_dict(doc: dict, where: str = "config") -> SyntheticConfig:
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: top level must be an object")
    known = {f.name for f in fields(SyntheticConfig)}
    _warn_unknown(doc, known | {"corpus"}, where)
    kwargs = {k: v for k, v in doc.items() if k in known}
    if "patch_radii" in kwargs:
        kwargs["patch_radii"] = tuple(kwargs["patch_radii"])
    try:
        return SyntheticConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{where}: {e}") from e


def load_synthetic_config(path) -> SyntheticConfig:
    return synthetic_config_from_dict(_load_json(path), where=str(path))


def synthetic_config_to_dict(cfg: SyntheticConfig) -> dict:
    d = asdict(cfg)
    d["patch_radii"] = list(d["patch_radii"])
    return d


# ---------------------------------------------------------------------------
# Shared JSON helpers


def _load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"{path}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: malformed JSON: {e}") from e


def _dump_json(doc, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
