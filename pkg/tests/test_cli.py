import json

import numpy as np
import pytest

from ptzcalib.cli import main
from ptzcalib.field import standard_field
from ptzcalib.geometry import Correspondence, PtzCamera, PtzParams, project_point
from ptzcalib.io import camera_to_dict, parse_sweep_csv
from ptzcalib.synthetic import default_camera_base
from ptzcalib.twopoint import TwoPointProblem, calibrate_two_points

TINY_CONFIG = {
    "cameras_count": 2,
    "trials_per_camera": 2,
    "noise_levels_px": [0.0, 3.0],
    "rays_count": 120,
}


@pytest.fixture
def base_camera_file(tmp_path):
    cam = PtzCamera(default_camera_base(), PtzParams(40.0, -10.0, 2500.0))
    path = tmp_path / "camera.json"
    path.write_text(json.dumps(camera_to_dict(cam)))
    return path, cam


def write_config(tmp_path, extra=None):
    config = dict(TINY_CONFIG)
    if extra:
        config.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


class TestSynthSweep:
    def test_csv_output(self, tmp_path, capsys):
        config = write_config(tmp_path)
        out = tmp_path / "rows.csv"
        code = main(
            ["synth-sweep", "--config", str(config), "--seed", "3",
             "--format", "csv", "--out", str(out)]
        )
        assert code == 0
        rows = parse_sweep_csv(out.read_text())
        assert [r["sigma"] for r in rows] == [0.0, 3.0]
        assert rows[0]["mean_rot_err_deg"] < 1e-6

    def test_malformed_config_fails_with_diagnostic(self, tmp_path, capsys):
        config = tmp_path / "bad.json"
        config.write_text("{not json")
        code = main(["synth-sweep", "--config", str(config)])
        captured = capsys.readouterr()
        assert code != 0
        assert "error:" in captured.err

    def test_unknown_config_key_fails(self, tmp_path, capsys):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"nope": 1}))
        code = main(["synth-sweep", "--config", str(config)])
        assert code != 0
        assert "unknown" in capsys.readouterr().err

    def test_base_rotation_mode(self, tmp_path):
        config = write_config(tmp_path, {"noise_levels_px": [0.5]})
        out = tmp_path / "rows.csv"
        code = main(
            ["synth-sweep", "--config", str(config), "--mode", "base-rotation",
             "--format", "csv", "--out", str(out)]
        )
        assert code == 0
        assert len(parse_sweep_csv(out.read_text())) == 4  # default levels


class TestTwoPointCommand:
    def test_matches_library_bit_for_bit(self, tmp_path, capsys, base_camera_file):
        path, cam = base_camera_file
        field = standard_field()
        names = ["penalty_mark_right", "penalty_right_front_top"]
        pixels = {}
        for name in names:
            pixel, in_front = project_point(cam, field.key_point_world(name))
            assert in_front
            pixels[name] = pixel
        args = ["two-point", "--base", str(path)] + [
            f"{name}:{float(pixels[name][0])!r},{float(pixels[name][1])!r}"
            for name in names
        ]
        assert main(args) == 0
        result = json.loads(capsys.readouterr().out)

        problem = TwoPointProblem(
            cam.base,
            Correspondence(field.key_point_world(names[0]), pixels[names[0]]),
            Correspondence(field.key_point_world(names[1]), pixels[names[1]]),
        )
        solution = calibrate_two_points(problem)
        assert result["pan_deg"] == solution.ptz.pan_deg
        assert result["tilt_deg"] == solution.ptz.tilt_deg
        assert result["focal_px"] == solution.ptz.focal_px

    def test_unknown_key_point(self, base_camera_file, capsys):
        path, _ = base_camera_file
        code = main(["two-point", "--base", str(path), "nowhere:1,2", "center_mark:3,4"])
        assert code != 0
        assert "nowhere" in capsys.readouterr().err


class TestEvaluateCommand:
    def test_identical_cameras(self, tmp_path, capsys, base_camera_file):
        path, _ = base_camera_file
        assert main(["evaluate", "--gt", str(path), "--est", str(path)]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["iou"] == pytest.approx(1.0, abs=1e-9)
        assert result["rotation_error_deg"] < 1e-9
        assert result["focal_error_px"] == 0.0


class TestForestCommands:
    def test_train_then_calibrate_zero_noise(self, tmp_path, capsys):
        config = write_config(tmp_path, {"rays_count": 300, "seed": 2})
        forest_path = tmp_path / "forest.bin"
        code = main(
            ["train-forest", "--config", str(config), "--trees", "3",
             "--references", "10", "--out", str(forest_path)]
        )
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["trees"] == 3
        assert forest_path.exists()

        image_record = {
            "synthetic": {
                "ptz": {"pan_deg": 42.0, "tilt_deg": -9.0, "focal_px": 2200.0}
            }
        }
        image_path = tmp_path / "image.json"
        image_path.write_text(json.dumps(image_record))
        out_path = tmp_path / "estimate.json"
        code = main(
            ["calibrate", "--config", str(config), "--forest", str(forest_path),
             "--image", str(image_path), "--out", str(out_path)]
        )
        assert code == 0
        result = json.loads(out_path.read_text())
        assert result["iou_vs_gt"] > 1.0 - 1e-6
        assert abs(result["ptz"]["pan_deg"] - 42.0) < 1e-6

    def test_missing_forest_file(self, tmp_path, capsys):
        image_path = tmp_path / "image.json"
        image_path.write_text("{}")
        code = main(
            ["calibrate", "--forest", str(tmp_path / "none.bin"), "--image", str(image_path)]
        )
        assert code != 0


class TestFovReport:
    def test_csv_shape(self, tmp_path):
        config = write_config(tmp_path, {"rays_count": 300, "seed": 2})
        out = tmp_path / "fov.csv"
        code = main(
            ["fov-report", "--config", str(config), "--queries", "6",
             "--format", "csv", "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "fov_deg,iou,failed"
        assert len(lines) == 7
