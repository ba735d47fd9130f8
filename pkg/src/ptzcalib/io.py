"""File formats: camera records, experiment configs, and results tables.

Camera files are JSON.  A record holds the base (centre as 3 floats, the
mounting rotation as 9 floats row-major, principal point, image size) plus
the PTZ pose::

    {
      "base": {"center": [x, y, z], "rotation": [r11, ..., r33],
               "principal_point": [u, v], "image_size": [w, h]},
      "ptz": {"pan_deg": p, "tilt_deg": t, "focal_px": f}
    }

A file may be a single record or a JSON array of records (one camera per
record).  Results tables are emitted as aligned text, CSV, or a JSON array
of row objects, with the columns (sigma, mean_rot_err_deg, std_rot_err_deg,
mean_focal_err_px, std_focal_err_px, mean_iou, fail_count).
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .geometry import CameraBase, PtzCamera, PtzParams
from .synthetic import ExperimentConfig, SweepRow


class FormatError(ValueError):
    """Malformed input file."""


def camera_base_to_dict(base: CameraBase) -> dict:
    return {
        "center": [float(v) for v in base.center],
        "rotation": [float(v) for v in base.rotation.ravel()],
        "principal_point": [float(v) for v in base.principal_point],
        "image_size": [int(v) for v in base.image_size],
    }


def camera_base_from_dict(data: dict) -> CameraBase:
    try:
        return CameraBase(
            center=np.array(data["center"], dtype=float),
            rotation=np.array(data["rotation"], dtype=float).reshape(3, 3),
            principal_point=np.array(data["principal_point"], dtype=float),
            image_size=(int(data["image_size"][0]), int(data["image_size"][1])),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise FormatError(f"malformed camera base: {exc!r}") from exc


def ptz_to_dict(ptz: PtzParams) -> dict:
    return {"pan_deg": ptz.pan_deg, "tilt_deg": ptz.tilt_deg, "focal_px": ptz.focal_px}


def ptz_from_dict(data: dict) -> PtzParams:
    try:
        return PtzParams(
            pan_deg=float(data["pan_deg"]),
            tilt_deg=float(data["tilt_deg"]),
            focal_px=float(data["focal_px"]),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed ptz record: {exc!r}") from exc


def camera_to_dict(cam: PtzCamera) -> dict:
    return {"base": camera_base_to_dict(cam.base), "ptz": ptz_to_dict(cam.ptz)}


def camera_from_dict(data: dict) -> PtzCamera:
    if "base" not in data:
        raise FormatError("camera record must contain a 'base' object")
    base = camera_base_from_dict(data["base"])
    ptz = ptz_from_dict(data["ptz"]) if "ptz" in data else None
    if ptz is None:
        raise FormatError("camera record must contain a 'ptz' object")
    return PtzCamera(base, ptz)


def load_cameras(path) -> list[PtzCamera]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON in camera file {path}: {exc}") from exc
    records = data if isinstance(data, list) else [data]
    return [camera_from_dict(rec) for rec in records]


def save_cameras(cameras: list[PtzCamera], path) -> None:
    records = [camera_to_dict(cam) for cam in cameras]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records[0] if len(records) == 1 else records, fh, indent=2)
        fh.write("\n")


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def experiment_config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise FormatError("experiment config must be a JSON object")
    unknown = set(data) - _CONFIG_FIELDS
    if unknown:
        raise FormatError(f"unknown experiment config keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key.endswith(("_range_deg", "_range_px")):
            kwargs[key] = (float(value[0]), float(value[1]))
        elif key == "noise_levels_px":
            kwargs[key] = tuple(float(v) for v in value)
        else:
            kwargs[key] = type(getattr(ExperimentConfig(), key))(value)
    try:
        return ExperimentConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise FormatError(f"invalid experiment config: {exc}") from exc


def load_experiment_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON in config file {path}: {exc}") from exc
    return experiment_config_from_dict(data)


RESULT_COLUMNS = (
    "sigma",
    "mean_rot_err_deg",
    "std_rot_err_deg",
    "mean_focal_err_px",
    "std_focal_err_px",
    "mean_iou",
    "fail_count",
)


def format_sweep_rows(rows: list[SweepRow], fmt: str = "table") -> str:
    records = [row.as_record() for row in rows]
    if fmt == "json-like":
        return json.dumps(records, indent=2) + "\n"
    if fmt == "csv":
        lines = [",".join(RESULT_COLUMNS)]
        for rec in records:
            lines.append(",".join(_cell(rec[c]) for c in RESULT_COLUMNS))
        return "\n".join(lines) + "\n"
    if fmt == "table":
        widths = {c: max(len(c), 12) for c in RESULT_COLUMNS}
        header = "  ".join(c.rjust(widths[c]) for c in RESULT_COLUMNS)
        lines = [header]
        for rec in records:
            lines.append("  ".join(_cell(rec[c]).rjust(widths[c]) for c in RESULT_COLUMNS))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def _cell(value) -> str:
    if isinstance(value, int):
        return str(value)
    return f"{value:.6g}"


def parse_sweep_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    header = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        cells = ln.split(",")
        rec = {}
        for key, cell in zip(header, cells):
            rec[key] = int(cell) if key == "fail_count" else float(cell)
        out.append(rec)
    return out
