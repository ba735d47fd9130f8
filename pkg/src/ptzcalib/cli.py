"""Command-line interface.

Subcommands::

    synth-sweep   noise / base-uncertainty robustness tables
    train-forest  train a pan-tilt forest on a synthetic scene
    calibrate     forest + RANSAC calibration of an image record
    two-point     manual two-point calibration from named field points
    evaluate      IoU and rotation/focal errors between two camera files
    fov-report    per-query IoU vs field-of-view export
    serve         run the annotation HTTP service

All machine-readable output goes to stdout (or ``--out``); diagnostics go
to stderr and failures exit non-zero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import io as pio
from .field import load_field, standard_field
from .forest import ForestConfig, ForestFormatError, load_forest, save_forest
from .geometry import Correspondence, PtzCamera
from .metrics import compute_iou, rotation_focal_error
from .pose import PoseEstimationError, RansacConfig, calibrate_image
from .synthetic import (
    ExperimentConfig,
    generate_scene,
    run_base_uncertainty_sweep,
    run_forest_queries,
    run_noise_sweep,
    sample_poses,
    scene_keypoints,
    train_scene_forest,
)
from .twopoint import CalibrationError, TwoPointProblem, calibrate_two_points


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_config(args) -> ExperimentConfig:
    config = pio.load_experiment_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "full_scale", False):
        overrides["cameras_count"] = 100
        overrides["trials_per_camera"] = 100
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _forest_config(args) -> ForestConfig:
    kwargs = {}
    if args.trees is not None:
        kwargs["tree_count"] = args.trees
    if args.max_depth is not None:
        kwargs["max_depth"] = args.max_depth
    if args.threshold is not None:
        kwargs["feature_distance_threshold"] = args.threshold
    return ForestConfig(**kwargs)


def cmd_synth_sweep(args) -> int:
    config = _load_config(args)
    scene = generate_scene(config)
    if args.mode == "noise":
        rows = run_noise_sweep(scene, config)
    elif args.mode == "base-location":
        rows = run_base_uncertainty_sweep(scene, config, "location")
    elif args.mode == "base-rotation":
        rows = run_base_uncertainty_sweep(scene, config, "rotation")
    else:
        return _fail(f"unknown sweep mode {args.mode!r}")
    _emit(pio.format_sweep_rows(rows, args.format), args.out)
    return 0


def cmd_train_forest(args) -> int:
    if not args.out:
        return _fail("train-forest requires --out")
    config = _load_config(args)
    scene = generate_scene(config)
    forest = train_scene_forest(
        scene,
        config,
        reference_count=args.references,
        forest_config=_forest_config(args),
        noise_sigma=args.descriptor_noise,
    )
    save_forest(forest, args.out)
    summary = {
        "trees": len(forest.trees),
        "descriptor_dim": forest.descriptor_dim,
        "feature_distance_threshold": forest.feature_distance_threshold,
        "out": args.out,
    }
    print(json.dumps(summary))
    return 0


def _image_keypoints(record: dict, config: ExperimentConfig):
    """Keypoints plus the optional ground-truth pose of an image record."""
    gt_ptz = pio.ptz_from_dict(record["gt_ptz"]) if "gt_ptz" in record else None
    if "keypoints" in record:
        keypoints = [
            (np.array(kp["pixel"], dtype=float), np.array(kp["descriptor"], dtype=float))
            for kp in record["keypoints"]
        ]
        return keypoints, gt_ptz, None
    if "synthetic" in record:
        synth = record["synthetic"]
        ptz = pio.ptz_from_dict(synth["ptz"])
        scene = generate_scene(config)
        keypoints = scene_keypoints(
            scene,
            ptz,
            noise_sigma=float(synth.get("noise_sigma", 0.0)),
            outlier_prob=float(synth.get("outlier_prob", 0.0)),
            seed=int(synth.get("observation_seed", 0)),
        )
        return keypoints, gt_ptz if gt_ptz is not None else ptz, scene
    raise pio.FormatError("image record needs 'keypoints' or 'synthetic'")


def cmd_calibrate(args) -> int:
    config = _load_config(args)
    forest = load_forest(args.forest)
    with open(args.image, "r", encoding="utf-8") as fh:
        record = json.load(fh)
    keypoints, gt_ptz, scene = _image_keypoints(record, config)
    if scene is not None:
        base, field = scene.base, scene.field
    else:
        base = pio.load_cameras(args.base)[0].base
        field = load_field(args.field) if args.field else standard_field()
    estimate = calibrate_image(base, forest, keypoints, RansacConfig(), seed=config.seed)
    result = {
        "ptz": pio.ptz_to_dict(estimate.ptz),
        "inlier_count": len(estimate.inlier_indices),
        "rmse_px": estimate.reprojection_rmse,
        "iterations": estimate.iterations_used,
    }
    if gt_ptz is not None:
        result["iou_vs_gt"] = compute_iou(
            PtzCamera(base, gt_ptz), PtzCamera(base, estimate.ptz), field
        )
    _emit(json.dumps(result, indent=2) + "\n", args.out)
    return 0


def _parse_point(spec: str):
    name, _, coords = spec.partition(":")
    x, y = coords.split(",")
    return name, float(x), float(y)


def cmd_two_point(args) -> int:
    base = pio.load_cameras(args.base)[0].base
    field = load_field(args.field) if args.field else standard_field()
    pairs = [_parse_point(p) for p in args.points]
    if len(pairs) != 2:
        return _fail("exactly two name:x,y points are required")
    corrs = []
    for name, x, y in pairs:
        if name not in field.key_points:
            return _fail(f"unknown field key point {name!r}")
        corrs.append(Correspondence(field.key_point_world(name), np.array([x, y])))
    solution = calibrate_two_points(TwoPointProblem(base, corrs[0], corrs[1]))
    result = {
        "pan_deg": solution.ptz.pan_deg,
        "tilt_deg": solution.ptz.tilt_deg,
        "focal_px": solution.ptz.focal_px,
        "rmse_px": solution.reprojection_rmse,
        "converged": solution.converged,
    }
    _emit(json.dumps(result, indent=2) + "\n", args.out)
    return 0


def cmd_evaluate(args) -> int:
    gt = pio.load_cameras(args.gt)[0]
    est = pio.load_cameras(args.est)[0]
    field = load_field(args.field) if args.field else standard_field()
    rot_err, focal_err = rotation_focal_error(gt.ptz, est.ptz, gt.base, est.base)
    result = {
        "iou": compute_iou(gt, est, field),
        "rotation_error_deg": rot_err,
        "focal_error_px": focal_err,
    }
    _emit(json.dumps(result, indent=2) + "\n", args.out)
    return 0


def cmd_fov_report(args) -> int:
    config = _load_config(args)
    scene = generate_scene(config)
    forest = train_scene_forest(scene, config, forest_config=_forest_config(args))
    queries = sample_poses(config, args.queries, 17)
    results = run_forest_queries(scene, forest, queries, seed=config.seed)
    records = [
        {"fov_deg": round(r.fov_deg, 6), "iou": round(r.iou, 9), "failed": r.failed}
        for r in results
    ]
    failures_wide = sum(1 for r in results if r.fov_deg > 40.0 and (r.failed or r.iou < 0.6))
    if args.format == "csv":
        lines = ["fov_deg,iou,failed"]
        lines += [f"{r['fov_deg']},{r['iou']},{int(r['failed'])}" for r in records]
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(
            {"queries": records, "failures_above_40deg": failures_wide}, indent=2
        ) + "\n"
    _emit(text, args.out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    forest = load_forest(args.forest) if args.forest else None
    field = load_field(args.field) if args.field else None
    app = create_app(
        forest=forest, default_field=field, persist_dir=args.persist, ui_dir=args.serve_ui
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptzcalib", description="PTZ sports-camera calibration toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=True):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, help="override the experiment seed")
        p.add_argument("--out", help="write output to this path instead of stdout")
        if fmt:
            p.add_argument(
                "--format", choices=("table", "csv", "json-like"), default="table"
            )

    p = sub.add_parser("synth-sweep", help="noise / base-uncertainty sweeps")
    common(p)
    p.add_argument(
        "--mode", choices=("noise", "base-location", "base-rotation"), default="noise"
    )
    p.add_argument("--full-scale", action="store_true", help="paper scale: 100 cameras x 100 trials")
    p.set_defaults(func=cmd_synth_sweep)

    p = sub.add_parser("train-forest", help="train a forest on a synthetic scene")
    common(p, fmt=False)
    p.add_argument("--trees", type=int, help="number of trees")
    p.add_argument("--max-depth", type=int, help="maximum tree depth")
    p.add_argument("--threshold", type=float, help="feature-distance gating threshold")
    p.add_argument("--references", type=int, default=20, help="reference poses to render")
    p.add_argument("--descriptor-noise", type=float, default=0.0)
    p.set_defaults(func=cmd_train_forest)

    p = sub.add_parser("calibrate", help="calibrate an image record with a forest")
    common(p, fmt=False)
    p.add_argument("--forest", required=True)
    p.add_argument("--image", required=True, help="image record JSON")
    p.add_argument("--base", help="camera file providing the base (non-synthetic records)")
    p.add_argument("--field", help="field model JSON")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("two-point", help="two-point calibration from named key points")
    p.add_argument("--base", required=True, help="camera file providing the base")
    p.add_argument("--field", help="field model JSON (default: standard pitch)")
    p.add_argument("--out")
    p.add_argument("points", nargs="+", help="two name:x,y correspondences")
    p.set_defaults(func=cmd_two_point)

    p = sub.add_parser("evaluate", help="compare two camera files")
    p.add_argument("--gt", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--field")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fov-report", help="IoU vs field-of-view export")
    common(p)
    p.add_argument("--trees", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--queries", type=int, default=50)
    p.set_defaults(func=cmd_fov_report)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--forest", help="forest file for auto-calibrate")
    p.add_argument("--field", help="default field model JSON")
    p.add_argument("--persist", help="directory for file-backed session persistence")
    p.add_argument("--serve-ui", help="static directory with the annotation UI")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        pio.FormatError,
        ForestFormatError,
        CalibrationError,
        PoseEstimationError,
        FileNotFoundError,
        ValueError,
        json.JSONDecodeError,
    ) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
