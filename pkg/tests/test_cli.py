import json
import math

import numpy as np
import pytest

from conftest import minutia_set
from pfreg import load_point_set, load_registration_result, save_point_set
from pfreg.cli import run_cli
from pfreg.evaluation import SyntheticConfig, generate_subject


@pytest.fixture
def planted_files(tmp_path):
    cfg = SyntheticConfig(
        n_subjects=1,
        n_ref_per_subject=1,
        n_test_per_subject=1,
        points_per_full=150,
        field_radius=6.0,
        noise_sigma=0.0,
        drop_rate=0.0,
        seed=17,
    )
    full = generate_subject(cfg, 0)[0]
    partial = full.subset(np.arange(30))
    full_path = tmp_path / "full.json"
    partial_path = tmp_path / "partial.json"
    save_point_set(full, full_path)
    save_point_set(partial, partial_path)
    return partial_path, full_path


def test_register_self_match(planted_files, tmp_path, capsys):
    partial, full = planted_files
    out = tmp_path / "result.json"
    code = run_cli(
        ["register", "--partial", str(partial), "--full", str(full), "--out", str(out)]
    )
    assert code == 0
    result = load_registration_result(out)
    assert result.distance < 0.05
    assert "distance" in capsys.readouterr().out


def test_register_quiet_suppresses_output(planted_files, capsys):
    partial, full = planted_files
    assert run_cli(["register", "--partial", str(partial), "--full", str(full), "--quiet"]) == 0
    assert capsys.readouterr().out == ""


def test_missing_required_flag_is_usage_error(capsys):
    assert run_cli(["register", "--partial", "x.json"]) == 1
    assert run_cli(["no-such-command"]) == 1


def test_unreadable_file_is_data_error(tmp_path):
    code = run_cli(
        ["register", "--partial", str(tmp_path / "a.json"), "--full", str(tmp_path / "b.json")]
    )
    assert code == 2


def test_not_found_exit_code(tmp_path):
    # kinds can never match, so voting produces nothing
    p = minutia_set([[0.0, 0.0], [1.0, 0.0]], [0.1, 0.2], [0, 0])
    f = minutia_set([[0.0, 0.0], [1.0, 0.0]], [0.1, 0.2], [1, 1])
    pp, fp = tmp_path / "p.json", tmp_path / "f.json"
    save_point_set(p, pp)
    save_point_set(f, fp)
    assert run_cli(["register", "--partial", str(pp), "--full", str(fp)]) == 3


def test_help_shows_spec_defaults(capsys):
    assert run_cli(["register", "--help"]) == 0
    text = capsys.readouterr().out
    assert "--k" in text and "default: 4" in text
    assert "default: 0.1" in text  # epsilon
    assert "default: auto" in text  # t-radius / t-spatial
    assert run_cli(["evaluate", "--help"]) == 0
    text = capsys.readouterr().out
    assert "default: 3" in text  # knn


def test_config_file_with_flag_precedence(planted_files, tmp_path):
    partial, full = planted_files
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"k": 2, "epsilon": 0.05}))
    out1 = tmp_path / "r1.json"
    code = run_cli(
        ["register", "--partial", str(partial), "--full", str(full),
         "--config", str(cfg_path), "--out", str(out1), "--quiet"]
    )
    assert code == 0
    assert len(load_registration_result(out1).per_candidate) <= 2  # config k applied

    out2 = tmp_path / "r2.json"
    code = run_cli(
        ["register", "--partial", str(partial), "--full", str(full),
         "--config", str(cfg_path), "--k", "4", "--out", str(out2), "--quiet"]
    )
    assert code == 0
    assert len(load_registration_result(out2).per_candidate) > 2  # flag wins


def test_generate_and_evaluate_round_trip(tmp_path):
    cfg = {
        "n_subjects": 2,
        "n_ref_per_subject": 2,
        "n_test_per_subject": 1,
        "points_per_full": 110,
        "field_radius": 5.0,
        "noise_sigma": 0.02,
        "drop_rate": 0.0,
        "seed": 5,
    }
    cfg_path = tmp_path / "corpus.json"
    cfg_path.write_text(json.dumps(cfg))
    corpus_dir = tmp_path / "corpus"
    assert run_cli(["generate", "--config", str(cfg_path), "--out-dir", str(corpus_dir), "--quiet"]) == 0

    manifest = json.loads((corpus_dir / "manifest.json").read_text())
    assert len(manifest["refs"]) == 4 and len(manifest["tests"]) == 2
    ps = load_point_set(corpus_dir / manifest["refs"][0])
    assert len(ps) > 0

    out_dir = tmp_path / "eval"
    code = run_cli(
        ["evaluate", "--refs", str(corpus_dir / "refs"), "--tests", str(corpus_dir / "tests"),
         "--radii", "1.5,2.5", "--out-dir", str(out_dir), "--threads", "1", "--quiet"]
    )
    assert code == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert len(report["recognition_ratio"]) == 2
    csv = (out_dir / "ratio_vs_radius.csv").read_text().splitlines()
    assert csv[0] == "radius,recognition_ratio,n_evaluated"
    assert len(csv) == 3


def test_generate_ordered_corpus(tmp_path):
    cfg_path = tmp_path / "ordered.json"
    cfg_path.write_text(
        json.dumps({"corpus": "ordered", "n_scenes": 3, "points_per_scene": 40, "seed": 2})
    )
    out = tmp_path / "scenes"
    assert run_cli(["generate", "--config", str(cfg_path), "--out-dir", str(out), "--quiet"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["scenes"]) == 3
    scene = load_point_set(out / manifest["scenes"][0])
    assert scene.order_index == 0


def test_bench_smoke(tmp_path, capsys):
    out = tmp_path / "bench.json"
    code = run_cli(
        ["bench", "--full-size", "120", "--partial-size", "25", "--repeats", "1",
         "--sizes", "60,120", "--out", str(out)]
    )
    assert code == 0
    table = json.loads(out.read_text())
    assert "speedup" in table and "voting_scaling" in table
    assert "speedup" in capsys.readouterr().out
