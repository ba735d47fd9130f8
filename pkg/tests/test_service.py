import base64
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from ptzcalib.descriptors import write_pgm
from ptzcalib.field import standard_field
from ptzcalib.forest import ForestConfig
from ptzcalib.geometry import PtzCamera, PtzParams, project_point
from ptzcalib.io import camera_base_to_dict
from ptzcalib.service import create_app
from ptzcalib.synthetic import (
    ExperimentConfig,
    default_camera_base,
    generate_scene,
    train_scene_forest,
)

GT_PTZ = {"pan_deg": 40.0, "tilt_deg": -10.0, "focal_px": 2500.0}


@pytest.fixture(scope="module")
def base_payload():
    return camera_base_to_dict(default_camera_base())


@pytest.fixture(scope="module")
def trained_forest():
    config = ExperimentConfig(seed=2, rays_count=300)
    scene = generate_scene(config)
    return train_scene_forest(
        scene, config, reference_count=12, forest_config=ForestConfig(tree_count=3)
    )


@pytest.fixture
def client():
    return TestClient(create_app())


@pytest.fixture
def forest_client(trained_forest):
    return TestClient(create_app(forest=trained_forest))


def make_session(client, base_payload, image=None):
    response = client.post("/sessions", json={"base": base_payload, "image": image})
    assert response.status_code == 201
    return response.json()["session_id"]


def exact_annotation(names):
    cam = PtzCamera(default_camera_base(), PtzParams(**GT_PTZ))
    field = standard_field()
    points = []
    for name in names:
        pixel, in_front = project_point(cam, field.key_point_world(name))
        assert in_front
        points.append({"key_point": name, "pixel": [float(pixel[0]), float(pixel[1])]})
    return points


class TestSessions:
    def test_create_returns_id(self, client, base_payload):
        session_id = make_session(client, base_payload)
        state = client.get(f"/sessions/{session_id}").json()
        assert state["session_id"] == session_id
        assert state["last_solution"] is None

    def test_distinct_ids(self, client, base_payload):
        assert make_session(client, base_payload) != make_session(client, base_payload)

    def test_invalid_base_rejected(self, client, base_payload):
        bad = dict(base_payload)
        bad["rotation"] = [1, 0, 0, 0, 1, 0, 0, 0, 2]
        response = client.post("/sessions", json={"base": bad})
        assert response.status_code == 400
        assert response.json()["code"] == "invalid_base"
        assert "orthonormal" in response.json()["message"]

    def test_invalid_payload_shape(self, client):
        response = client.post("/sessions", json={"nope": 1})
        assert response.status_code == 400
        assert response.json()["code"] == "invalid_payload"

    def test_unknown_session(self, client):
        response = client.get("/sessions/ghost")
        assert response.status_code == 404
        assert response.json()["code"] == "unknown_session"

    def test_pgm_image_accepted(self, client, base_payload):
        image = np.zeros((8, 8), dtype=np.uint8)
        payload = {"pgm_base64": base64.b64encode(write_pgm(image)).decode()}
        session_id = make_session(client, base_payload, image=payload)
        state = client.get(f"/sessions/{session_id}").json()
        assert state["image"]["kind"] == "pgm"

    def test_bad_pgm_rejected(self, client, base_payload):
        payload = {"pgm_base64": base64.b64encode(b"nope").decode()}
        response = client.post("/sessions", json={"base": base_payload, "image": payload})
        assert response.status_code == 400
        assert response.json()["code"] == "invalid_image"

    def test_field_endpoint_serves_key_points(self, client, base_payload):
        session_id = make_session(client, base_payload)
        field = client.get(f"/sessions/{session_id}/field").json()
        assert "penalty_mark_left" in field["key_points"]


class TestCalibrate:
    def test_exact_two_point_calibration(self, client, base_payload):
        session_id = make_session(client, base_payload)
        points = exact_annotation(["penalty_mark_right", "halfway_top"])
        response = client.post(f"/sessions/{session_id}/calibrate", json={"points": points})
        assert response.status_code == 200
        body = response.json()
        assert abs(body["solution"]["pan_deg"] - GT_PTZ["pan_deg"]) < 1e-6
        assert abs(body["solution"]["focal_px"] - GT_PTZ["focal_px"]) < 1e-3
        assert body["solution"]["rmse_px"] < 1e-3
        assert body["overlay"], "overlay should not be empty"

    def test_replay_is_identical(self, client, base_payload):
        session_id = make_session(client, base_payload)
        points = exact_annotation(["penalty_mark_right", "halfway_top"])
        a = client.post(f"/sessions/{session_id}/calibrate", json={"points": points})
        b = client.post(f"/sessions/{session_id}/calibrate", json={"points": points})
        assert a.content == b.content

    def test_solution_matches_cli_two_point(self, client, base_payload, tmp_path, capsys):
        from ptzcalib.cli import main
        from ptzcalib.io import camera_to_dict

        names = ["penalty_mark_right", "halfway_top"]
        points = exact_annotation(names)
        session_id = make_session(client, base_payload)
        body = client.post(
            f"/sessions/{session_id}/calibrate", json={"points": points}
        ).json()

        cam_path = tmp_path / "camera.json"
        cam = PtzCamera(default_camera_base(), PtzParams(**GT_PTZ))
        cam_path.write_text(json.dumps(camera_to_dict(cam)))
        args = ["two-point", "--base", str(cam_path)] + [
            f"{p['key_point']}:{p['pixel'][0]!r},{p['pixel'][1]!r}" for p in points
        ]
        assert main(args) == 0
        cli_result = json.loads(capsys.readouterr().out)
        assert cli_result["pan_deg"] == body["solution"]["pan_deg"]
        assert cli_result["tilt_deg"] == body["solution"]["tilt_deg"]
        assert cli_result["focal_px"] == body["solution"]["focal_px"]
        assert cli_result["rmse_px"] == body["solution"]["rmse_px"]

    def test_unknown_key_point_named(self, client, base_payload):
        session_id = make_session(client, base_payload)
        points = exact_annotation(["penalty_mark_right", "halfway_top"])
        points[1]["key_point"] = "mystery_point"
        response = client.post(f"/sessions/{session_id}/calibrate", json={"points": points})
        assert response.status_code == 422
        body = response.json()
        assert body["code"] == "unknown_key_point"
        assert body["detail"] == "mystery_point"

    def test_coincident_pixels_degenerate(self, client, base_payload):
        session_id = make_session(client, base_payload)
        points = [
            {"key_point": "penalty_mark_right", "pixel": [500.0, 300.0]},
            {"key_point": "halfway_top", "pixel": [500.0, 300.0]},
        ]
        response = client.post(f"/sessions/{session_id}/calibrate", json={"points": points})
        assert response.status_code == 422
        assert response.json()["code"] == "degenerate_configuration"

    def test_wrong_point_count(self, client, base_payload):
        session_id = make_session(client, base_payload)
        points = exact_annotation(["penalty_mark_right"])
        response = client.post(f"/sessions/{session_id}/calibrate", json={"points": points})
        assert response.status_code == 400
        assert response.json()["code"] == "invalid_points"


class TestOverlayEndpoint:
    def test_matches_direct_rendering(self, client, base_payload):
        from ptzcalib.field import render_field_overlay

        session_id = make_session(client, base_payload)
        response = client.get(
            f"/sessions/{session_id}/overlay",
            params={"pan": GT_PTZ["pan_deg"], "tilt": GT_PTZ["tilt_deg"], "focal": GT_PTZ["focal_px"]},
        )
        assert response.status_code == 200
        cam = PtzCamera(default_camera_base(), PtzParams(**GT_PTZ))
        direct = render_field_overlay(cam, standard_field())
        body = response.json()["overlay"]
        assert [line["name"] for line in body] == [line.name for line in direct]

    def test_angle_canonicalisation(self, client, base_payload):
        session_id = make_session(client, base_payload)
        a = client.get(
            f"/sessions/{session_id}/overlay", params={"pan": 0.0, "tilt": -10.0, "focal": 2000.0}
        )
        b = client.get(
            f"/sessions/{session_id}/overlay", params={"pan": 360.0, "tilt": -10.0, "focal": 2000.0}
        )
        assert a.content == b.content

    def test_invalid_focal(self, client, base_payload):
        session_id = make_session(client, base_payload)
        response = client.get(
            f"/sessions/{session_id}/overlay", params={"pan": 0.0, "tilt": 0.0, "focal": -1.0}
        )
        assert response.status_code == 400
        assert response.json()["code"] == "invalid_parameters"


class TestAutoCalibrate:
    def test_no_forest_loaded(self, client, base_payload):
        session_id = make_session(client, base_payload)
        response = client.post(
            f"/sessions/{session_id}/auto-calibrate", json={"keypoints": []}
        )
        assert response.status_code == 409
        assert response.json()["code"] == "no_forest_loaded"

    def test_empty_keypoints(self, forest_client, base_payload):
        session_id = make_session(forest_client, base_payload)
        response = forest_client.post(
            f"/sessions/{session_id}/auto-calibrate", json={"keypoints": []}
        )
        assert response.status_code == 422
        assert response.json()["code"] == "keypoints_required"

    def test_synthetic_image_auto_calibration(self, forest_client, base_payload):
        image = {"synthetic": {"seed": 2, "ptz": GT_PTZ}}
        session_id = make_session(forest_client, base_payload, image=image)
        response = forest_client.post(
            f"/sessions/{session_id}/auto-calibrate", json={"from_image": True}
        )
        assert response.status_code == 200
        body = response.json()
        assert body["iou_vs_gt"] > 0.9
        assert body["inlier_count"] >= 2
        assert abs(body["estimate"]["pan_deg"] - GT_PTZ["pan_deg"]) < 0.1

    def test_from_image_requires_synthetic_reference(self, forest_client, base_payload):
        session_id = make_session(forest_client, base_payload)
        response = forest_client.post(
            f"/sessions/{session_id}/auto-calibrate", json={"from_image": True}
        )
        assert response.status_code == 422
        assert response.json()["code"] == "keypoints_required"

    def test_gated_out_descriptors(self, forest_client, base_payload, trained_forest):
        session_id = make_session(forest_client, base_payload)
        rng = np.random.default_rng(0)
        keypoints = [
            {
                "pixel": [float(100 + i), 200.0],
                "descriptor": (rng.standard_normal(trained_forest.descriptor_dim) + 40.0).tolist(),
            }
            for i in range(5)
        ]
        response = forest_client.post(
            f"/sessions/{session_id}/auto-calibrate", json={"keypoints": keypoints}
        )
        assert response.status_code == 422
        assert response.json()["code"] == "insufficient_gated_predictions"


class TestPersistence:
    def test_sessions_survive_restart(self, base_payload, tmp_path):
        persist = tmp_path / "store"
        first = TestClient(create_app(persist_dir=str(persist)))
        session_id = make_session(first, base_payload)
        points = exact_annotation(["penalty_mark_right", "halfway_top"])
        solution = first.post(
            f"/sessions/{session_id}/calibrate", json={"points": points}
        ).json()["solution"]

        second = TestClient(create_app(persist_dir=str(persist)))
        state = second.get(f"/sessions/{session_id}")
        assert state.status_code == 200
        assert state.json()["last_solution"] == solution
