"""Synthetic stadium scenes and the noise-robustness experiment suite.

A scene is a fixed bank of world rays anchored on the field plane around a
fixed camera base, each with a deterministic canonical descriptor from the
appearance oracle.  About 90% of the rays intersect the plane outside the
playing field (stands, boards), mimicking the keypoint distribution of real
footage.  Experiments sample random (pan, tilt, focal) poses inside the
configured ranges, project the visible bank rays with the tangent model,
corrupt the data, and run the two-point RANSAC estimator:

- feature-location sweep: i.i.d. Gaussian pixel noise on exact ray labels,
- base-uncertainty sweep: the estimator is handed a perturbed copy of the
  camera base (centre shift or mounting-rotation error) while ground truth
  keeps the true base,
- forest sweep: descriptors with noise/outliers are pushed through a trained
  pan-tilt forest and the gated predictions are calibrated end to end.

Per-trial RNG streams are derived from (seed, experiment tag, camera index,
trial index), so results do not depend on execution order or parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.spatial.transform import Rotation

from .descriptors import appearance_oracle
from .field import FieldModel, standard_field
from .forest import ForestConfig, PanTiltForest, label_keypoints, predict_ray, train_forest
from .geometry import (
    CameraBase,
    PtzCamera,
    PtzParams,
    Ray,
    pixels_to_rays as _pixel_ray_angles,
    project_rays,
    ray_to_direction,
    wrap_angle_deg,
)
from .metrics import compute_iou, fov_degrees, rotation_focal_error
from .pose import PoseEstimationError, RansacConfig, RayObservation, calibrate_image, estimate_pose

# RNG stream tags
_TAG_SCENE = 11
_TAG_CAMERAS = 12
_TAG_NOISE = 13
_TAG_BASE = 14
_TAG_REFERENCES = 15
_TAG_QUERIES = 16
_TAG_SWEEP_RAYS = 18


@dataclass(frozen=True)
class ExperimentConfig:
    """Ranges and sizes of the synthetic experiments (paper-style defaults)."""

    pan_range_deg: tuple[float, float] = (15.0, 75.0)
    tilt_range_deg: tuple[float, float] = (-14.0, -5.0)
    focal_range_px: tuple[float, float] = (1500.0, 5000.0)
    noise_levels_px: tuple[float, ...] = (0.5, 1.0, 2.0, 3.0)
    cameras_count: int = 20
    trials_per_camera: int = 20
    seed: int = 0
    rays_count: int = 200
    off_field_fraction: float = 0.9
    descriptor_dim: int = 128

    def __post_init__(self):
        for lo, hi in (self.pan_range_deg, self.tilt_range_deg, self.focal_range_px):
            if not lo < hi:
                raise ValueError("ranges must be non-empty")
        if not 0.0 <= self.off_field_fraction < 1.0:
            raise ValueError("off_field_fraction must lie in [0, 1)")
        if self.rays_count < 2 or self.cameras_count < 1 or self.trials_per_camera < 1:
            raise ValueError("experiment sizes must be positive")


@dataclass(frozen=True)
class BankRay:
    ray: Ray
    anchor: np.ndarray  # world point on the plane z = 0
    descriptor: np.ndarray
    on_field: bool


@dataclass(frozen=True)
class SyntheticScene:
    base: CameraBase
    field: FieldModel
    pan_deg: np.ndarray
    tilt_deg: np.ndarray
    anchors: np.ndarray
    descriptors: np.ndarray
    on_field: np.ndarray
    fraction_off_field: float

    def __len__(self) -> int:
        return len(self.pan_deg)

    def bank_ray(self, index: int) -> BankRay:
        return BankRay(
            ray=Ray(float(self.pan_deg[index]), float(self.tilt_deg[index])),
            anchor=self.anchors[index],
            descriptor=self.descriptors[index],
            on_field=bool(self.on_field[index]),
        )


def default_camera_base(image_size: tuple[int, int] = (1280, 720)) -> CameraBase:
    """Fixed broadcast-style base: high behind the right field corner.

    The base forward axis points back across the field so the configured pan
    range sweeps the playing surface; the base itself is level (tilt zero is
    the horizon).
    """
    yaw = np.radians(180.0)
    forward = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    right = np.array([np.sin(yaw), -np.cos(yaw), 0.0])
    down = np.array([0.0, 0.0, -1.0])
    rotation = np.vstack([right, down, forward])
    w, h = image_size
    return CameraBase(
        center=np.array([118.0, -18.0, 16.0]),
        rotation=rotation,
        principal_point=np.array([w / 2.0, h / 2.0]),
        image_size=(w, h),
    )


def _plane_anchor(base: CameraBase, ray: Ray) -> np.ndarray | None:
    direction = base.rotation.T @ ray_to_direction(ray)
    if direction[2] >= -1e-9:
        return None
    t = -base.center[2] / direction[2]
    return base.center + t * direction


def generate_scene(
    config: ExperimentConfig,
    base: CameraBase | None = None,
    field: FieldModel | None = None,
) -> SyntheticScene:
    """Deterministic ray bank with the configured on-field/off-field split.

    Each bank ray is drawn by sampling a random pose inside the configured
    ranges and a uniform pixel in its image, so the bank mimics the keypoint
    distribution actually observed across legal views; rays are classified
    on/off-field by their field-plane intersection and kept until both pools
    are filled.  Every ray occupies a distinct appearance-oracle cell, making
    canonical descriptors unique by construction.
    """
    base = base if base is not None else default_camera_base()
    field = field if field is not None else standard_field()
    n_off = int(round(config.rays_count * config.off_field_fraction))
    n_on = config.rays_count - n_off
    w, h = base.image_size

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, _TAG_SCENE])))
    pans, tilts, anchors, descs, flags = [], [], [], [], []
    used_cells: set[tuple[int, int]] = set()
    need_on, need_off = n_on, n_off
    attempts = 0
    while (need_on > 0 or need_off > 0) and attempts < 200000:
        attempts += 1
        pose = sample_ptz(config, rng)
        pixel = np.array([rng.uniform(0.0, w), rng.uniform(0.0, h)])
        pan, tilt = (
            float(v[0]) for v in _pixel_ray_angles(pose, base.principal_point, pixel)
        )
        ray = Ray(pan, tilt)
        cell = (int(np.floor(ray.pan_deg / 0.05)), int(np.floor(ray.tilt_deg / 0.05)))
        if cell in used_cells:
            continue
        anchor = _plane_anchor(base, ray)
        on = anchor is not None and bool(
            0.0 <= anchor[0] <= field.length and 0.0 <= anchor[1] <= field.width
        )
        if anchor is None:
            # no plane hit (at or above the horizon): a stand point along the ray
            anchor = base.center + 100.0 * (base.rotation.T @ ray_to_direction(ray))
        if on and need_on > 0:
            need_on -= 1
        elif not on and need_off > 0:
            need_off -= 1
        else:
            continue
        used_cells.add(cell)
        pans.append(ray.pan_deg)
        tilts.append(ray.tilt_deg)
        anchors.append(anchor)
        descs.append(appearance_oracle(ray, dim=config.descriptor_dim))
        flags.append(on)
    if need_on > 0 or need_off > 0:
        raise RuntimeError("could not fill the ray bank; check base/field geometry")
    order = np.argsort(np.array(pans), kind="stable")
    return SyntheticScene(
        base=base,
        field=field,
        pan_deg=np.array(pans)[order],
        tilt_deg=np.array(tilts)[order],
        anchors=np.array(anchors)[order],
        descriptors=np.array(descs)[order],
        on_field=np.array(flags)[order],
        fraction_off_field=n_off / config.rays_count,
    )


def sample_ptz(config: ExperimentConfig, rng: np.random.Generator) -> PtzParams:
    return PtzParams(
        pan_deg=float(rng.uniform(*config.pan_range_deg)),
        tilt_deg=float(rng.uniform(*config.tilt_range_deg)),
        focal_px=float(rng.uniform(*config.focal_range_px)),
    )


def visible_bank(scene: SyntheticScene, ptz: PtzParams) -> tuple[np.ndarray, np.ndarray]:
    """(indices, pixels) of bank rays projecting inside the image for ``ptz``."""
    pixels, valid = project_rays(ptz, scene.base.principal_point, scene.pan_deg, scene.tilt_deg)
    w, h = scene.base.image_size
    inside = (
        valid
        & (pixels[:, 0] >= 0.0)
        & (pixels[:, 0] <= w)
        & (pixels[:, 1] >= 0.0)
        & (pixels[:, 1] <= h)
    )
    return np.flatnonzero(inside), pixels[inside]


@dataclass(frozen=True)
class EvalResult:
    iou: float
    pan_error_deg: float
    tilt_error_deg: float
    rotation_error_deg: float
    focal_error_px: float

    def __post_init__(self):
        if not 0.0 <= self.iou <= 1.0:
            raise ValueError("IoU must lie in [0, 1]")
        if min(self.pan_error_deg, self.tilt_error_deg,
               self.rotation_error_deg, self.focal_error_px) < 0.0:
            raise ValueError("errors must be non-negative")


def evaluate_estimate(
    gt_base: CameraBase,
    gt_ptz: PtzParams,
    est_base: CameraBase,
    est_ptz: PtzParams,
    field: FieldModel,
) -> EvalResult:
    rot_err, focal_err = rotation_focal_error(gt_ptz, est_ptz, gt_base, est_base)
    iou = compute_iou(PtzCamera(gt_base, gt_ptz), PtzCamera(est_base, est_ptz), field)
    return EvalResult(
        iou=iou,
        pan_error_deg=abs(wrap_angle_deg(gt_ptz.pan_deg - est_ptz.pan_deg)),
        tilt_error_deg=abs(wrap_angle_deg(gt_ptz.tilt_deg - est_ptz.tilt_deg)),
        rotation_error_deg=rot_err,
        focal_error_px=focal_err,
    )


@dataclass(frozen=True)
class SweepRow:
    """One table row of a sweep: per-level mean/std errors and fail count."""

    level: float
    trials: int
    fail_count: int
    mean_rotation_error_deg: float
    std_rotation_error_deg: float
    mean_focal_error_px: float
    std_focal_error_px: float
    mean_iou: float

    def as_record(self) -> dict:
        return {
            "sigma": self.level,
            "mean_rot_err_deg": self.mean_rotation_error_deg,
            "std_rot_err_deg": self.std_rotation_error_deg,
            "mean_focal_err_px": self.mean_focal_error_px,
            "std_focal_err_px": self.std_focal_error_px,
            "mean_iou": self.mean_iou,
            "fail_count": self.fail_count,
        }


def _sweep_cameras(config: ExperimentConfig) -> list[PtzParams]:
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([config.seed, _TAG_CAMERAS]))
    )
    return [sample_ptz(config, rng) for _ in range(config.cameras_count)]


def _trial_rng(config, tag, level_idx, cam_idx, trial_idx):
    return np.random.Generator(
        np.random.PCG64(
            np.random.SeedSequence([config.seed, tag, level_idx, cam_idx, trial_idx])
        )
    )


def _summarise(level, results: list[EvalResult], fails: int) -> SweepRow:
    rot = np.array([r.rotation_error_deg for r in results])
    foc = np.array([r.focal_error_px for r in results])
    iou = np.array([r.iou for r in results])
    n = len(results)
    return SweepRow(
        level=float(level),
        trials=n + fails,
        fail_count=fails,
        mean_rotation_error_deg=float(rot.mean()) if n else float("nan"),
        std_rotation_error_deg=float(rot.std()) if n else float("nan"),
        mean_focal_error_px=float(foc.mean()) if n else float("nan"),
        std_focal_error_px=float(foc.std()) if n else float("nan"),
        mean_iou=float(iou.mean()) if n else float("nan"),
    )


def noise_sweep_ransac(sigma: float) -> RansacConfig:
    """Estimator settings for the feature-noise sweep: the inlier threshold
    scales with the injected noise so inliers are not starved at high sigma."""
    return RansacConfig(inlier_threshold_px=max(3.0, 3.0 * sigma))


def _view_rays(
    scene: SyntheticScene, ptz: PtzParams, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform image keypoints of one view with their exact ray labels."""
    w, h = scene.base.image_size
    pixels = np.column_stack([rng.uniform(0.0, w, count), rng.uniform(0.0, h, count)])
    pans, tilts = _pixel_ray_angles(ptz, scene.base.principal_point, pixels)
    return pixels, pans, tilts


def run_noise_sweep(
    scene: SyntheticScene,
    config: ExperimentConfig,
    ransac: RansacConfig | None = None,
) -> list[SweepRow]:
    """Feature-location noise sweep (exact ray labels, noisy pixels).

    Per camera and trial, ``rays_count`` rays are sampled inside the view
    (uniform pixels labelled exactly), the pixels are disturbed with
    i.i.d. Gaussian noise, and the two-point RANSAC estimator is run on the
    noisy pixel / exact ray pairs.  The same view rays are reused across
    noise levels so the per-level results are paired.
    """
    cameras = _sweep_cameras(config)
    rows = []
    for level_idx, sigma in enumerate(config.noise_levels_px):
        cfg = ransac if ransac is not None else noise_sweep_ransac(sigma)
        results: list[EvalResult] = []
        fails = 0
        for cam_idx, gt_ptz in enumerate(cameras):
            for trial in range(config.trials_per_camera):
                ray_rng = _trial_rng(config, _TAG_SWEEP_RAYS, 0, cam_idx, trial)
                pixels, pans, tilts = _view_rays(scene, gt_ptz, config.rays_count, ray_rng)
                rng = _trial_rng(config, _TAG_NOISE, level_idx, cam_idx, trial)
                noisy = pixels + rng.normal(0.0, sigma, pixels.shape) if sigma > 0 else pixels
                observations = [
                    RayObservation(noisy[k], Ray(float(pans[k]), float(tilts[k])))
                    for k in range(len(pixels))
                ]
                try:
                    est = estimate_pose(
                        scene.base,
                        observations,
                        cfg,
                        seed=int(rng.integers(2**62)),
                    )
                except PoseEstimationError:
                    fails += 1
                    continue
                results.append(
                    evaluate_estimate(scene.base, gt_ptz, scene.base, est.ptz, scene.field)
                )
        rows.append(_summarise(sigma, results, fails))
    return rows


DEFAULT_LOCATION_LEVELS_M = (0.1, 0.25, 0.5, 1.0)
DEFAULT_ROTATION_LEVELS_DEG = (0.05, 0.1, 0.5, 1.0)


def perturbed_base(
    base: CameraBase, mode: str, level: float, rng: np.random.Generator
) -> CameraBase:
    """Copy of the base with a Gaussian centre shift or mounting-rotation error."""
    if mode == "location":
        return CameraBase(
            center=base.center + rng.normal(0.0, level, 3),
            rotation=base.rotation,
            principal_point=base.principal_point,
            image_size=base.image_size,
        )
    if mode == "rotation":
        axis = rng.normal(0.0, 1.0, 3)
        axis /= np.linalg.norm(axis)
        angle = np.radians(rng.normal(0.0, level))
        perturb = Rotation.from_rotvec(angle * axis).as_matrix()
        return CameraBase(
            center=base.center,
            rotation=perturb @ base.rotation,
            principal_point=base.principal_point,
            image_size=base.image_size,
        )
    raise ValueError(f"unknown perturbation mode {mode!r}")


def run_base_uncertainty_sweep(
    scene: SyntheticScene,
    config: ExperimentConfig,
    mode: str,
    levels: tuple[float, ...] | None = None,
    ransac: RansacConfig | None = None,
) -> list[SweepRow]:
    """Estimate with a perturbed base while ground truth keeps the true base.

    ``mode`` is "location" (metres, Gaussian per axis) or "rotation"
    (rotation about a random axis, Gaussian angle in degrees).  Reported
    rotation errors compare the full orientations Q_phi Q_theta S of the
    ground-truth pose under the true base against the estimate under the
    perturbed base, so mounting errors propagate directly into the metric.
    """
    if levels is None:
        levels = DEFAULT_LOCATION_LEVELS_M if mode == "location" else DEFAULT_ROTATION_LEVELS_DEG
    cfg = ransac if ransac is not None else RansacConfig()
    cameras = _sweep_cameras(config)
    rows = []
    for level_idx, level in enumerate(levels):
        results: list[EvalResult] = []
        fails = 0
        for cam_idx, gt_ptz in enumerate(cameras):
            for trial in range(config.trials_per_camera):
                ray_rng = _trial_rng(config, _TAG_SWEEP_RAYS, 0, cam_idx, trial)
                pixels, pans, tilts = _view_rays(scene, gt_ptz, config.rays_count, ray_rng)
                rng = _trial_rng(config, _TAG_BASE, level_idx, cam_idx, trial)
                est_base = perturbed_base(scene.base, mode, level, rng)
                observations = [
                    RayObservation(pixels[k], Ray(float(pans[k]), float(tilts[k])))
                    for k in range(len(pixels))
                ]
                try:
                    est = estimate_pose(
                        est_base, observations, cfg, seed=int(rng.integers(2**62))
                    )
                except PoseEstimationError:
                    fails += 1
                    continue
                results.append(
                    evaluate_estimate(scene.base, gt_ptz, est_base, est.ptz, scene.field)
                )
        rows.append(_summarise(level, results, fails))
    return rows


def sample_poses(config: ExperimentConfig, count: int, tag: int) -> list[PtzParams]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, tag])))
    return [sample_ptz(config, rng) for _ in range(count)]


def _observation_seed(seed: int, pose_index: int, bank_index: int) -> int:
    return ((seed * 1000003 + pose_index) * 1000003 + bank_index) % (2**62)


def scene_keypoints(
    scene: SyntheticScene,
    ptz: PtzParams,
    noise_sigma: float = 0.0,
    outlier_prob: float = 0.0,
    seed: int = 0,
    pose_index: int = 0,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """(pixel, descriptor) keypoints of one rendered view of the scene."""
    idx, pixels = visible_bank(scene, ptz)
    keypoints = []
    for k, i in enumerate(idx):
        desc = appearance_oracle(
            scene.bank_ray(int(i)).ray,
            noise_sigma=noise_sigma,
            outlier_prob=outlier_prob,
            seed=_observation_seed(seed, pose_index, int(i)),
            dim=scene.descriptors.shape[1],
        )
        keypoints.append((pixels[k], desc))
    return keypoints


def scene_training_samples(
    scene: SyntheticScene,
    poses: list[PtzParams],
    noise_sigma: float = 0.0,
    outlier_prob: float = 0.0,
    seed: int = 0,
):
    """Pixel-labelled training samples from a set of calibrated reference views."""
    samples = []
    for pose_index, ptz in enumerate(poses):
        keypoints = scene_keypoints(
            scene, ptz, noise_sigma, outlier_prob, seed=seed, pose_index=pose_index
        )
        samples.extend(label_keypoints(ptz, scene.base.principal_point, keypoints))
    return samples


def train_scene_forest(
    scene: SyntheticScene,
    config: ExperimentConfig,
    reference_count: int = 20,
    forest_config: ForestConfig = ForestConfig(),
    noise_sigma: float = 0.0,
) -> PanTiltForest:
    poses = sample_poses(config, reference_count, _TAG_REFERENCES)
    samples = scene_training_samples(scene, poses, noise_sigma=noise_sigma, seed=config.seed)
    return train_forest(samples, forest_config, seed=config.seed)


@dataclass(frozen=True)
class QueryResult:
    fov_deg: float
    failed: bool
    iou: float
    result: EvalResult | None


def run_forest_queries(
    scene: SyntheticScene,
    forest: PanTiltForest,
    queries: list[PtzParams],
    ransac: RansacConfig = RansacConfig(),
    noise_sigma: float = 0.0,
    outlier_prob: float = 0.0,
    seed: int = 0,
) -> list[QueryResult]:
    """End-to-end forest calibration of held-out query poses."""
    out = []
    for q_idx, gt_ptz in enumerate(queries):
        keypoints = scene_keypoints(
            scene, gt_ptz, noise_sigma, outlier_prob, seed=seed + 1, pose_index=q_idx
        )
        fov = fov_degrees(scene.base.image_size[0], gt_ptz.focal_px)
        try:
            est = calibrate_image(scene.base, forest, keypoints, ransac, seed=seed + q_idx)
        except PoseEstimationError:
            out.append(QueryResult(fov_deg=fov, failed=True, iou=0.0, result=None))
            continue
        ev = evaluate_estimate(scene.base, gt_ptz, scene.base, est.ptz, scene.field)
        out.append(QueryResult(fov_deg=fov, failed=False, iou=ev.iou, result=ev))
    return out


def prediction_inlier_rate(
    scene: SyntheticScene,
    forest: PanTiltForest,
    queries: list[PtzParams],
    gated: bool,
    noise_sigma: float = 0.0,
    outlier_prob: float = 0.0,
    seed: int = 0,
    angle_tol_deg: float = 0.5,
) -> float:
    """Fraction of per-tree ray predictions within ``angle_tol_deg`` of truth.

    With ``gated=False`` the feature-distance threshold is ignored, which is
    the ablation baseline the gating is compared against.
    """
    good = 0
    total = 0
    for q_idx, ptz in enumerate(queries):
        idx, _ = visible_bank(scene, ptz)
        for i in idx:
            bank = scene.bank_ray(int(i))
            desc = appearance_oracle(
                bank.ray,
                noise_sigma=noise_sigma,
                outlier_prob=outlier_prob,
                seed=_observation_seed(seed + 1, q_idx, int(i)),
                dim=scene.descriptors.shape[1],
            )
            true_dir = ray_to_direction(bank.ray)
            for ray, _dist in predict_ray(forest, desc, gated=gated):
                cos = float(np.clip(ray_to_direction(ray) @ true_dir, -1.0, 1.0))
                if np.degrees(np.arccos(cos)) < angle_tol_deg:
                    good += 1
                total += 1
    return good / total if total else 0.0
