import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from palletpose import codec
from palletpose.cli import main
from palletpose.evaluation import load_trajectory
from palletpose.geometry import Keypoints2D, invert_pose
from palletpose.synth import generate_dataset, preset, read_annotation
from palletpose.synth.annotation import read_camera_settings

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    generate_dataset(replace(preset("ndds3"), seed=21), out, limit=100, render=False)
    return out


def _rows(path):
    return [l for l in Path(path).read_text().splitlines() if l.strip()]


def test_generate_limit(tmp_path, capsys):
    assert main(["generate", "--preset", "ndds1", "--out", str(tmp_path / "d"), "--limit", "10", "--seed", "4"]) == 0
    manifest = json.loads((tmp_path / "d" / "_manifest.json").read_text())
    assert manifest["frame_count"] == 10 and len(manifest["frames"]) == 10
    assert manifest["config"]["seed"] == 4 and manifest["config"]["name"] == "ndds1"
    assert len(list((tmp_path / "d").glob("*.png"))) == 10
    assert "10 frames" in capsys.readouterr().out


def test_generate_unwritable(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["generate", "--preset", "ndds1", "--out", str(blocker / "sub"), "--limit", "1"]) == 1
    assert "error [io]" in capsys.readouterr().err


def test_generate_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("dataset:\n  distance_range: [4, 2]\n")
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "d")]) == 1
    assert "error [config]" in capsys.readouterr().err


def test_estimate_clean_round_trip(dataset, tmp_path):
    est, gt = tmp_path / "est.tum", tmp_path / "gt.tum"
    assert main(["estimate", str(dataset), "--out", str(est), "--ground-truth-out", str(gt)]) == 0
    samples = load_trajectory(est)
    assert len(samples) == 100
    k = read_camera_settings(dataset / "_camera_settings.json")
    for s in samples:
        ann = read_annotation(dataset / f"{round(s.timestamp / 0.19):06d}.json", k)
        assert np.linalg.norm(s.pose.translation - ann.objects[0].pose.translation) < 0.01
    truth = load_trajectory(gt)
    assert len(truth) == 100
    assert all(abs(a.timestamp - b.timestamp) < 1e-12 for a, b in zip(samples, truth))


def test_estimate_dropout_binomial(tmp_path):
    ds = tmp_path / "ds"
    generate_dataset(replace(preset("ndds1"), seed=8), ds, limit=1000, render=False)
    out = tmp_path / "est.tum"
    assert main(["estimate", str(ds), "--out", str(out), "--dropout", "0.2", "--seed", "5"]) == 0
    missing = 1000 - len(_rows(out))
    sd = math.sqrt(1000 * 0.2 * 0.8)
    assert abs(missing - 200) <= 3 * sd


def test_estimate_noise_deterministic(dataset, tmp_path):
    a, b = tmp_path / "a.tum", tmp_path / "b.tum"
    args = ["--pixel-noise", "1.0", "--spurious-peaks", "3", "--seed", "2", "--limit", "30"]
    assert main(["estimate", str(dataset), "--out", str(a), *args]) == 0
    assert main(["estimate", str(dataset), "--out", str(b), *args]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(_rows(a)) >= 25


def test_estimate_empty_dir(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["estimate", str(tmp_path / "empty"), "--out", str(tmp_path / "o.tum")]) == 1
    assert "error [input]" in capsys.readouterr().err


def test_estimate_from_tensor_files(dataset, tmp_path):
    tdir = tmp_path / "tensors"
    tdir.mkdir()
    k = read_camera_settings(dataset / "_camera_settings.json")
    for i in range(5):
        ann = read_annotation(dataset / f"{i:06d}.json", k)
        t = codec.encode([Keypoints2D.from_points(ann.objects[0].projected)], 80, 60)
        codec.save_tensor(tdir / f"{i:06d}.blf", t)
    out = tmp_path / "t.tum"
    assert main(["estimate", str(tdir), "--out", str(out)]) == 0
    samples = load_trajectory(out)
    assert len(samples) == 5
    for i, s in enumerate(samples):
        ann = read_annotation(dataset / f"{i:06d}.json", k)
        assert np.linalg.norm(s.pose.translation - ann.objects[0].pose.translation) < 0.01


def test_pipeline_end_to_end(dataset, tmp_path, capsys):
    est, gt, rep, svg = (tmp_path / n for n in ("est.tum", "gt.tum", "r.json", "p.svg"))
    assert main(["estimate", str(dataset), "--out", str(est), "--ground-truth-out", str(gt)]) == 0
    assert main(["evaluate", "--reference", str(gt), "--estimate", str(est), "--report", str(rep),
                 "--plot", str(svg)]) == 0
    report = json.loads(rep.read_text())
    assert report["mean_position_error_unfiltered"] < 0.02
    assert report["robustness_percent"] == pytest.approx(100.0)
    assert svg.read_text().startswith("<?xml")
    out = capsys.readouterr().out
    assert "robustness" in out and "unfiltered" in out


def test_evaluate_identical_files(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("eval:\n  invert_estimate: false\n")
    ref = FIXTURES / "eval_reference.tum"
    copy = tmp_path / "copy.tum"
    copy.write_text(ref.read_text())
    assert main(["evaluate", "--reference", str(ref), "--estimate", str(copy), "--config", str(cfg),
                 "--report", str(tmp_path / "r.json")]) == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["mean_position_error_unfiltered"] < 1e-9
    assert report["robustness_percent"] == pytest.approx(100.0, abs=1e-9)
    assert "0.0 cm" in capsys.readouterr().out


def test_evaluate_fixture_matches_frozen(tmp_path):
    expected = json.loads((FIXTURES / "eval_expected.json").read_text())
    rep = tmp_path / "r.json"
    assert main(["evaluate", "--reference", str(FIXTURES / "eval_reference.tum"),
                 "--estimate", str(FIXTURES / "eval_estimate.tum"), "--report", str(rep)]) == 0
    got = json.loads(rep.read_text())
    assert got["mean_position_error_unfiltered"] == pytest.approx(expected["unfiltered"], abs=1e-9)
    assert got["mean_position_error_filtered"] == pytest.approx(expected["filtered"], abs=1e-9)
    assert got["robustness_percent"] == pytest.approx(expected["robustness"], abs=1e-9)
    assert got["matched_pair_count"] == expected["pairs"]


def test_evaluate_malformed_line(tmp_path, capsys):
    bad = tmp_path / "bad.tum"
    lines = (FIXTURES / "eval_estimate.tum").read_text().splitlines()
    lines[4] = "1.0 2.0 oops"
    bad.write_text("\n".join(lines) + "\n")
    assert main(["evaluate", "--reference", str(FIXTURES / "eval_reference.tum"), "--estimate", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "error [load]" in err and ":5:" in err


def test_evaluate_same_path_rejected(tmp_path, capsys):
    ref = str(FIXTURES / "eval_reference.tum")
    assert main(["evaluate", "--reference", ref, "--estimate", ref, "--report", ref]) == 1
    assert "error [config]" in capsys.readouterr().err


def test_plot_subcommand(tmp_path):
    out = tmp_path / "p.svg"
    assert main(["plot", "--reference", str(FIXTURES / "eval_reference.tum"),
                 "--estimate", str(FIXTURES / "eval_estimate.tum"), "--out", str(out)]) == 0
    assert out.read_text().count("<circle") > 2000
    assert main(["plot", "--reference", str(FIXTURES / "eval_reference.tum"), "--out", str(out)]) == 0


def test_usage_error_exit_code(capsys):
    assert _exit_code(["estimate"]) == 1
    assert _exit_code(["frobnicate"]) == 1


def _exit_code(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    return exc.value.code
