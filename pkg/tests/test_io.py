import json
import math

import numpy as np
import pytest

from conftest import minutia_set, vector_set
from pfreg import (
    Correspondence,
    ParseError,
    Point2,
    RigidTransform,
    ValidationError,
    load_eval_report,
    load_point_set,
    load_registration_result,
    load_synthetic_config,
    save_eval_report,
    save_point_set,
    save_registration_result,
)
from pfreg.evaluation import EvalReport, SyntheticConfig
from pfreg.io import point_set_from_dict, point_set_to_dict, synthetic_config_to_dict
from pfreg.pipeline import CandidateOutcome, RegistrationResult


def _minutia_doc():
    return {
        "schema_version": 1,
        "feature_variant": "minutia",
        "unit": "px",
        "points": [{"x": 1.0, "y": 2.0, "feature": {"angle_deg": 45.0, "kind": "termination"}}],
    }


def test_minimal_minutia_file(tmp_path):
    path = tmp_path / "one.json"
    path.write_text(json.dumps(_minutia_doc()))
    ps = load_point_set(path)
    assert len(ps) == 1
    assert ps.features.angles[0] == pytest.approx(math.pi / 4)


def test_minutia_round_trip(tmp_path, rng):
    ps = minutia_set(
        rng.uniform(-5, 5, (7, 2)),
        rng.uniform(0, 2 * math.pi - 1e-9, 7),
        rng.integers(0, 2, 7),
        label="subjectA",
        order_index=3,
    )
    path = tmp_path / "m.json"
    save_point_set(ps, path, unit="cm")
    back = load_point_set(path)
    np.testing.assert_allclose(back.points, ps.points, atol=1e-9)
    np.testing.assert_allclose(back.features.angles, ps.features.angles, atol=1e-9)
    np.testing.assert_array_equal(back.features.kinds, ps.features.kinds)
    assert back.label == "subjectA" and back.order_index == 3


def test_vector_round_trip_preserves_unit_norm(tmp_path, rng):
    ps = vector_set(rng.uniform(-5, 5, (6, 2)), rng.normal(size=(6, 9)))
    path = tmp_path / "v.json"
    save_point_set(ps, path)
    back = load_point_set(path)
    np.testing.assert_allclose(back.features.values, ps.features.values, atol=1e-9)
    norms = np.linalg.norm(back.features.values, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-9)


def test_angle_360_rejected(tmp_path):
    doc = _minutia_doc()
    doc["points"][0]["feature"]["angle_deg"] = 360.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError, match="angle_deg"):
        load_point_set(path)


def test_bad_kind_rejected_with_path():
    doc = _minutia_doc()
    doc["points"][0]["feature"]["kind"] = "ridge"
    with pytest.raises(ValidationError, match=r"points\[0\].feature.kind"):
        point_set_from_dict(doc)


def test_inconsistent_vector_dims_rejected():
    doc = {
        "schema_version": 1,
        "feature_variant": "vector",
        "points": [
            {"x": 0, "y": 0, "feature": {"values": [1.0, 0.0]}},
            {"x": 1, "y": 0, "feature": {"values": [1.0, 0.0, 0.0]}},
        ],
    }
    with pytest.raises(ValidationError, match="dimension"):
        point_set_from_dict(doc)


def test_malformed_json_is_parse_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_point_set(path)


def test_missing_file_is_parse_error(tmp_path):
    with pytest.raises(ParseError):
        load_point_set(tmp_path / "absent.json")


def test_unknown_fields_warn_not_fail():
    doc = _minutia_doc()
    doc["exposure"] = 0.5
    doc["points"][0]["quality"] = 0.9
    with pytest.warns(UserWarning, match="unknown field"):
        ps = point_set_from_dict(doc)
    assert len(ps) == 1


def test_zero_vector_warns_and_loads():
    doc = {
        "schema_version": 1,
        "feature_variant": "vector",
        "points": [{"x": 0, "y": 0, "feature": {"values": [0.0, 0.0]}}],
    }
    with pytest.warns(UserWarning, match="zero vector"):
        ps = point_set_from_dict(doc)
    np.testing.assert_array_equal(ps.features.values, [[0.0, 0.0]])


def test_non_finite_position_rejected():
    doc = _minutia_doc()
    doc["points"][0]["x"] = float("inf")
    with pytest.raises(ValidationError, match="finite"):
        point_set_from_dict(doc)


def test_registration_result_round_trip(tmp_path):
    result = RegistrationResult(
        best_candidate=1,
        distance=0.034,
        correspondence=Correspondence.from_pairs([(0, 4), (1, 2)], 3, 5),
        transform=RigidTransform(0.5, (1.25, -2.5)),
        inliers=2,
        sum_matched=0.05,
        per_candidate=(
            CandidateOutcome(Point2(0.0, 1.0), 5, math.inf),
            CandidateOutcome(Point2(2.0, 3.0), 4, 0.034),
        ),
    )
    path = tmp_path / "result.json"
    save_registration_result(result, path)
    back = load_registration_result(path)
    assert back == result


def test_eval_report_round_trip(tmp_path):
    report = EvalReport(
        radii=(0.5, 1.0),
        recognition_ratio=(0.25, 1.0),
        n_evaluated=(4, 4),
        runtime_per_patch=(0.01, 0.02),
        distance_matrix=np.array([[0.1, np.inf], [0.3, 0.4]]),
        inlier_matrix=np.array([[3, 0], [1, 2]]),
        normalized_matrix=np.array([[0.03, np.inf], [0.3, 0.2]]),
        ref_labels=("a", "b"),
        test_labels=("a", "b"),
        neighbor_hit=0.5,
    )
    path = tmp_path / "report.json"
    save_eval_report(report, path)
    back = load_eval_report(path)
    assert back.radii == report.radii
    assert back.recognition_ratio == report.recognition_ratio
    np.testing.assert_array_equal(back.distance_matrix, report.distance_matrix)
    np.testing.assert_array_equal(back.inlier_matrix, report.inlier_matrix)
    np.testing.assert_array_equal(back.normalized_matrix, report.normalized_matrix)
    assert back.neighbor_hit == 0.5


def test_synthetic_config_round_trip(tmp_path):
    cfg = SyntheticConfig(n_subjects=2, points_per_full=50, patch_radii=(1.0, 2.0), seed=9)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(synthetic_config_to_dict(cfg)))
    back = load_synthetic_config(path)
    assert back == cfg


def test_synthetic_config_unknown_key_warns(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"n_subjects": 2, "mystery": 1}))
    with pytest.warns(UserWarning, match="unknown field"):
        cfg = load_synthetic_config(path)
    assert cfg.n_subjects == 2


def test_high_precision_round_trip(tmp_path):
    value = 0.1234567890123456789
    ps = minutia_set([[value, -value]], [value], [0])
    path = tmp_path / "precise.json"
    save_point_set(ps, path)
    back = load_point_set(path)
    assert back.points[0, 0] == ps.points[0, 0]  # exact: repr round-trips floats
    assert abs(back.features.angles[0] - value) < 1e-12
