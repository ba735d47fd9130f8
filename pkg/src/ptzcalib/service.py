"""HTTP annotation service: two-point calibration, overlays, auto-calibration.

Endpoints (JSON in/out):

- ``POST /sessions`` - create a session from a camera base, an optional
  field model (standard pitch by default) and an optional image reference
  (base64 PGM raster or a synthetic render spec).
- ``GET /sessions/{id}`` - session state readout.
- ``GET /sessions/{id}/field`` - the session's field model (for the UI).
- ``POST /sessions/{id}/calibrate`` - exactly two (key_point, pixel) pairs;
  returns the two-point solution and the projected-marking overlay.
- ``POST /sessions/{id}/auto-calibrate`` - keypoint descriptors (or
  ``from_image`` for synthetic renders) through the loaded pan-tilt forest.
- ``GET /sessions/{id}/overlay?pan=&tilt=&focal=`` - overlay for arbitrary
  manual parameters (angles are canonicalised, so pan 360 == pan 0).

Every 4xx body is ``{"code": ..., "message": ..., "detail": ...}`` with the
codes: invalid_payload, invalid_base, invalid_field, invalid_image,
unknown_session, invalid_points, unknown_key_point, degenerate_configuration,
solver_failure, no_forest_loaded, keypoints_required,
insufficient_gated_predictions, no_consensus, invalid_parameters.

Sessions live in memory; ``persist_dir`` turns on per-session JSON files.
Calibration responses are pure functions of (session base/field, request),
so replays return identical payloads.
"""

from __future__ import annotations

import base64
import json
import threading
import uuid
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .descriptors import read_pgm
from .field import FieldModel, render_field_overlay, standard_field
from .forest import PanTiltForest
from .geometry import (
    CameraBase,
    Correspondence,
    PtzCamera,
    PtzParams,
    wrap_angle_deg,
)
from .io import camera_base_from_dict, camera_base_to_dict, ptz_to_dict
from .metrics import compute_iou
from .pose import (
    NoConsensusError,
    NoGatedPredictionsError,
    RansacConfig,
    calibrate_image,
)
from .synthetic import ExperimentConfig, generate_scene, scene_keypoints
from .twopoint import (
    CalibrationError,
    DegenerateConfigurationError,
    TwoPointProblem,
    calibrate_two_points,
)

MAX_IMAGE_BYTES = 16 * 1024 * 1024


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: Any = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail


class PointPair(BaseModel):
    key_point: str
    pixel: tuple[float, float]


class CreateSessionRequest(BaseModel):
    base: dict
    field: dict | None = None
    image: dict | None = None


class CalibrateRequest(BaseModel):
    points: list[PointPair]


class KeypointPayload(BaseModel):
    pixel: tuple[float, float]
    descriptor: list[float]


class AutoCalibrateRequest(BaseModel):
    keypoints: list[KeypointPayload] | None = None
    from_image: bool = False


@dataclass
class Session:
    session_id: str
    base: CameraBase
    field: FieldModel
    image: dict | None
    annotations: list[dict] = dataclass_field(default_factory=list)
    last_solution: dict | None = None
    lock: threading.Lock = dataclass_field(default_factory=threading.Lock, repr=False)

    def public_state(self) -> dict:
        image_info = None
        if self.image is not None:
            image_info = {k: v for k, v in self.image.items() if k != "pgm_base64"}
            if "pgm_base64" in self.image:
                image_info["kind"] = "pgm"
        return {
            "session_id": self.session_id,
            "base": camera_base_to_dict(self.base),
            "image": image_info,
            "annotations": self.annotations,
            "last_solution": self.last_solution,
        }


def _overlay_payload(cam: PtzCamera, field: FieldModel) -> list[dict]:
    return [
        {"name": line.name, "points": [[float(x), float(y)] for x, y in line.points]}
        for line in render_field_overlay(cam, field)
    ]


def create_app(
    forest: PanTiltForest | None = None,
    default_field: FieldModel | None = None,
    persist_dir: str | None = None,
    ui_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="ptzcalib annotation service")
    sessions: dict[str, Session] = {}
    store = Path(persist_dir) if persist_dir else None
    if store is not None:
        store.mkdir(parents=True, exist_ok=True)

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={
                "code": "invalid_payload",
                "message": "request payload failed validation",
                "detail": exc.errors(),
            },
        )

    def persist(session: Session) -> None:
        if store is None:
            return
        record = {
            "session_id": session.session_id,
            "base": camera_base_to_dict(session.base),
            "field": session.field.to_dict(),
            "image": session.image,
            "annotations": session.annotations,
            "last_solution": session.last_solution,
        }
        (store / f"{session.session_id}.json").write_text(json.dumps(record))

    def get_session(session_id: str) -> Session:
        if session_id in sessions:
            return sessions[session_id]
        if store is not None:
            path = store / f"{session_id}.json"
            if path.exists():
                record = json.loads(path.read_text())
                session = Session(
                    session_id=session_id,
                    base=camera_base_from_dict(record["base"]),
                    field=FieldModel.from_dict(record["field"]),
                    image=record.get("image"),
                    annotations=record.get("annotations", []),
                    last_solution=record.get("last_solution"),
                )
                sessions[session_id] = session
                return session
        raise ApiError(404, "unknown_session", f"no session {session_id!r}")

    def parse_image(image: dict | None) -> dict | None:
        if image is None:
            return None
        if "pgm_base64" in image:
            try:
                raw = base64.b64decode(image["pgm_base64"], validate=True)
            except (ValueError, TypeError) as exc:
                raise ApiError(400, "invalid_image", f"bad base64 image: {exc}")
            if len(raw) > MAX_IMAGE_BYTES:
                raise ApiError(400, "invalid_image", "image exceeds 16 MB")
            try:
                read_pgm(raw)
            except ValueError as exc:
                raise ApiError(400, "invalid_image", f"bad PGM raster: {exc}")
            return dict(image)
        if "synthetic" in image:
            synth = image["synthetic"]
            if not isinstance(synth, dict):
                raise ApiError(400, "invalid_image", "synthetic image spec must be an object")
            return dict(image)
        raise ApiError(400, "invalid_image", "image needs 'pgm_base64' or 'synthetic'")

    @app.post("/sessions", status_code=201)
    def create_session(request: CreateSessionRequest) -> dict:
        try:
            base = camera_base_from_dict(request.base)
        except ValueError as exc:
            raise ApiError(400, "invalid_base", str(exc))
        try:
            field = (
                FieldModel.from_dict(request.field)
                if request.field is not None
                else (default_field or standard_field())
            )
        except ValueError as exc:
            raise ApiError(400, "invalid_field", str(exc))
        image = parse_image(request.image)
        session = Session(
            session_id=uuid.uuid4().hex, base=base, field=field, image=image
        )
        sessions[session.session_id] = session
        persist(session)
        return {"session_id": session.session_id}

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str) -> dict:
        return get_session(session_id).public_state()

    @app.get("/sessions/{session_id}/field")
    def session_field(session_id: str) -> dict:
        return get_session(session_id).field.to_dict()

    @app.post("/sessions/{session_id}/calibrate")
    def calibrate(session_id: str, request: CalibrateRequest) -> dict:
        session = get_session(session_id)
        if len(request.points) != 2:
            raise ApiError(
                400,
                "invalid_points",
                f"exactly two annotation points required, got {len(request.points)}",
            )
        for pair in request.points:
            if pair.key_point not in session.field.key_points:
                raise ApiError(
                    422,
                    "unknown_key_point",
                    f"field model has no key point {pair.key_point!r}",
                    detail=pair.key_point,
                )
        corrs = [
            Correspondence(
                session.field.key_point_world(pair.key_point),
                np.array(pair.pixel, dtype=float),
            )
            for pair in request.points
        ]
        with session.lock:
            try:
                problem = TwoPointProblem(session.base, corrs[0], corrs[1])
            except ValueError as exc:
                raise ApiError(422, "degenerate_configuration", str(exc))
            try:
                solution = calibrate_two_points(problem)
            except DegenerateConfigurationError as exc:
                raise ApiError(422, "degenerate_configuration", str(exc))
            except CalibrationError as exc:
                raise ApiError(422, "solver_failure", str(exc))
            payload = {
                "solution": {
                    "pan_deg": solution.ptz.pan_deg,
                    "tilt_deg": solution.ptz.tilt_deg,
                    "focal_px": solution.ptz.focal_px,
                    "rmse_px": solution.reprojection_rmse,
                    "converged": solution.converged,
                },
                "overlay": _overlay_payload(
                    PtzCamera(session.base, solution.ptz), session.field
                ),
            }
            session.annotations = [p.model_dump() for p in request.points]
            session.last_solution = payload["solution"]
            persist(session)
        return payload

    @app.post("/sessions/{session_id}/auto-calibrate")
    def auto_calibrate(session_id: str, request: AutoCalibrateRequest) -> dict:
        session = get_session(session_id)
        if forest is None:
            raise ApiError(409, "no_forest_loaded", "service was started without --forest")
        gt_ptz = None
        if request.keypoints:
            keypoints = [
                (np.array(kp.pixel, dtype=float), np.array(kp.descriptor, dtype=float))
                for kp in request.keypoints
            ]
        elif request.from_image:
            if not session.image or "synthetic" not in session.image:
                raise ApiError(
                    422,
                    "keypoints_required",
                    "keypoint extraction is only available for synthetic renders; "
                    "submit keypoint descriptors",
                )
            synth = session.image["synthetic"]
            config = ExperimentConfig(seed=int(synth.get("seed", 0)))
            scene = generate_scene(config, base=session.base, field=session.field)
            try:
                gt_ptz = PtzParams(**{
                    "pan_deg": float(synth["ptz"]["pan_deg"]),
                    "tilt_deg": float(synth["ptz"]["tilt_deg"]),
                    "focal_px": float(synth["ptz"]["focal_px"]),
                })
            except (KeyError, TypeError, ValueError) as exc:
                raise ApiError(400, "invalid_image", f"bad synthetic render spec: {exc!r}")
            keypoints = scene_keypoints(
                scene,
                gt_ptz,
                noise_sigma=float(synth.get("noise_sigma", 0.0)),
                outlier_prob=float(synth.get("outlier_prob", 0.0)),
                seed=int(synth.get("observation_seed", 0)),
            )
        else:
            raise ApiError(422, "keypoints_required", "no keypoints in request")
        with session.lock:
            try:
                estimate = calibrate_image(session.base, forest, keypoints, RansacConfig())
            except NoGatedPredictionsError as exc:
                raise ApiError(422, "insufficient_gated_predictions", str(exc))
            except NoConsensusError as exc:
                raise ApiError(
                    422, "no_consensus", str(exc), detail=exc.best_inlier_count
                )
            payload = {
                "estimate": ptz_to_dict(estimate.ptz),
                "inlier_count": len(estimate.inlier_indices),
                "rmse_px": estimate.reprojection_rmse,
                "overlay": _overlay_payload(
                    PtzCamera(session.base, estimate.ptz), session.field
                ),
            }
            if gt_ptz is not None:
                payload["iou_vs_gt"] = compute_iou(
                    PtzCamera(session.base, gt_ptz),
                    PtzCamera(session.base, estimate.ptz),
                    session.field,
                )
            session.last_solution = dict(payload["estimate"])
            persist(session)
        return payload

    @app.get("/sessions/{session_id}/overlay")
    def manual_overlay(session_id: str, pan: float, tilt: float, focal: float) -> dict:
        session = get_session(session_id)
        try:
            ptz = PtzParams(wrap_angle_deg(pan), wrap_angle_deg(tilt), focal)
        except ValueError as exc:
            raise ApiError(400, "invalid_parameters", str(exc))
        return {
            "ptz": ptz_to_dict(ptz),
            "overlay": _overlay_payload(PtzCamera(session.base, ptz), session.field),
        }

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
