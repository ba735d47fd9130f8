"""Robust pose estimation from (pixel, predicted ray) observations.

The minimal solver fits (pan, tilt, focal) to two observations of the
tangent projection model.  Taking the ratio of the two pan equations
eliminates the focal length and leaves a one-dimensional root-finding
problem in the pan angle::

    (x1 - u) * tan(theta_2 - theta) = (x2 - u) * tan(theta_1 - theta)

solved by bracketed bisection/Brent on the open interval where both
tangents are finite; the focal length then follows from either pan equation
and the tilt from the tilt equations.  When the pan pair is degenerate
(equal ray pans) the symmetric tilt-pair path is used.  All closed-form
candidates are scored by the total squared reprojection residual of both
observations and the best is returned.

RANSAC samples observation pairs for the Table-1 iteration count computed
from the configured success probability and outlier ratio (rounded to the
nearest integer), scores hypotheses by inlier count under a pixel
threshold, and refines the best consensus set with Levenberg-Marquardt plus
one inlier re-classification pass.  Several per-tree predictions at the
same pixel count as alternative observations: at most one member of each
pixel group - the one best fitting the model - contributes to the
consensus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .forest import PanTiltForest, predict_ray
from .geometry import (
    CameraBase,
    DEG,
    PtzParams,
    Ray,
    project_rays,
    wrap_angle_deg,
)
from .optimize import levenberg_marquardt

_LM_STEPS = np.array([1e-6, 1e-6, 1e-3])  # (pan deg, tilt deg, focal px)
_GRID_STEP_DEG = 0.25
_EDGE_EPS_DEG = 1e-6
#: Ray pans/tilts closer than this (degrees) count as an uninformative pair.
_PAIR_TOL_DEG = 1e-9


class PoseEstimationError(Exception):
    """RANSAC could not produce a confident estimate."""

    def __init__(self, message: str, best_inlier_count: int = 0):
        super().__init__(message)
        self.best_inlier_count = best_inlier_count


class NoGatedPredictionsError(PoseEstimationError):
    """Feature-distance gating (or an empty keypoint set) left < 2 observations."""


class NoConsensusError(PoseEstimationError):
    """Observations survived gating but no consensus set was found."""


class DegenerateObservationsError(ValueError):
    """The sampled observation pair cannot constrain the model."""


@dataclass(frozen=True)
class RayObservation:
    pixel: np.ndarray
    ray: Ray
    feature_distance: float = 0.0

    def __post_init__(self):
        px = np.asarray(self.pixel, dtype=float).reshape(2)
        object.__setattr__(self, "pixel", px)
        if not (np.all(np.isfinite(px)) and np.isfinite(self.feature_distance)):
            raise ValueError("observation must be finite")


@dataclass(frozen=True)
class RansacConfig:
    success_probability: float = 0.99
    outlier_ratio_assumption: float = 0.5
    inlier_threshold_px: float = 3.0
    max_iterations: int | None = None
    min_inliers: int = 8

    def __post_init__(self):
        if not 0.0 < self.success_probability < 1.0:
            raise ValueError("success_probability must lie in (0, 1)")
        if not 0.0 <= self.outlier_ratio_assumption < 1.0:
            raise ValueError("outlier_ratio_assumption must lie in [0, 1)")
        if self.inlier_threshold_px <= 0.0:
            raise ValueError("inlier_threshold_px must be positive")
        if self.min_inliers < 2:
            raise ValueError("min_inliers must be at least the minimal set size")


@dataclass(frozen=True)
class PoseEstimate:
    ptz: PtzParams
    inlier_indices: tuple[int, ...]
    reprojection_rmse: float
    iterations_used: int


def ransac_iterations(min_set_size: int, config: RansacConfig = RansacConfig()) -> int:
    """Iteration count log(1-p)/log(1-(1-eps)^s), rounded to nearest."""
    if min_set_size < 1:
        raise ValueError("min_set_size must be >= 1")
    p = config.success_probability
    inlier_rate = 1.0 - config.outlier_ratio_assumption
    denom = np.log(1.0 - inlier_rate**min_set_size)
    return int(np.floor(np.log(1.0 - p) / denom + 0.5))


def _reprojection_errors(
    base: CameraBase, ptz: PtzParams, pixels: np.ndarray, pans: np.ndarray, tilts: np.ndarray
) -> np.ndarray:
    proj, valid = project_rays(ptz, base.principal_point, pans, tilts)
    err = np.full(len(pixels), np.inf)
    err[valid] = np.linalg.norm(proj[valid] - pixels[valid], axis=1)
    return err


def _ratio_roots(offset_1, angle_1, offset_2, angle_2):
    """Roots of offset_2*tan(angle_1 - a) - offset_1*tan(angle_2 - a) on the
    open interval where both tangents are finite (all angles in degrees)."""
    lo = max(angle_1, angle_2) - 90.0 + _EDGE_EPS_DEG
    hi = min(angle_1, angle_2) + 90.0 - _EDGE_EPS_DEG
    if hi <= lo:
        return []

    def g(a):
        return offset_2 * np.tan((angle_1 - a) * DEG) - offset_1 * np.tan((angle_2 - a) * DEG)

    grid = np.linspace(lo, hi, max(int((hi - lo) / _GRID_STEP_DEG), 8) + 1)
    vals = g(grid)
    roots = []
    for i in range(len(grid) - 1):
        va, vb = vals[i], vals[i + 1]
        if not (np.isfinite(va) and np.isfinite(vb)):
            continue
        if va == 0.0:
            roots.append(float(grid[i]))
        elif va * vb < 0.0:
            roots.append(float(brentq(g, grid[i], grid[i + 1], xtol=1e-13)))
    if np.isfinite(vals[-1]) and vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


def fit_ptz_minimal(
    base: CameraBase, obs_a: RayObservation, obs_b: RayObservation
) -> PtzParams:
    """Closed-form-style PTZ fit to two ray observations.

    Raises ``DegenerateObservationsError`` when the pair cannot determine the
    focal length (identical rays, or pans and tilts both uninformative).
    """
    u, v = base.principal_point
    xt = np.array([obs_a.pixel[0] - u, obs_b.pixel[0] - u])
    yt = np.array([obs_a.pixel[1] - v, obs_b.pixel[1] - v])
    pans = np.array([obs_a.ray.pan_deg, obs_b.ray.pan_deg])
    tilts = np.array([obs_a.ray.tilt_deg, obs_b.ray.tilt_deg])
    dpan = abs(wrap_angle_deg(pans[0] - pans[1]))
    dtilt = abs(wrap_angle_deg(tilts[0] - tilts[1]))
    if dpan < _PAIR_TOL_DEG and dtilt < _PAIR_TOL_DEG:
        raise DegenerateObservationsError("both rays are identical")

    candidates: list[PtzParams] = []

    def try_candidate(pan, tilt, focal):
        if focal is None or not np.isfinite(focal) or focal <= 0.0:
            return
        if not (-90.0 < pan < 90.0) or not np.isfinite(tilt):
            return
        try:
            candidates.append(PtzParams(pan, tilt, focal))
        except ValueError:
            pass

    if dpan >= _PAIR_TOL_DEG:
        for theta in _ratio_roots(xt[0], pans[0], xt[1], pans[1]):
            tans = np.tan((pans - theta) * DEG)
            i = int(np.argmax(np.abs(tans)))
            if abs(tans[i]) < 1e-15:
                continue
            focal = xt[i] / tans[i]
            if focal <= 0.0 or not np.isfinite(focal):
                continue
            phi = float(np.mean(tilts + np.degrees(np.arctan(yt / focal))))
            try_candidate(theta, phi, focal)
    if dtilt >= _PAIR_TOL_DEG:
        for phi in _ratio_roots(-yt[0], tilts[0], -yt[1], tilts[1]):
            tans = np.tan((tilts - phi) * DEG)
            i = int(np.argmax(np.abs(tans)))
            if abs(tans[i]) < 1e-15:
                continue
            focal = -yt[i] / tans[i]
            if focal <= 0.0 or not np.isfinite(focal):
                continue
            theta = float(np.mean(pans - np.degrees(np.arctan(xt / focal))))
            try_candidate(theta, phi, focal)

    if not candidates:
        raise DegenerateObservationsError(
            "no PTZ model fits the observation pair (focal length unobservable)"
        )
    pixels = np.array([obs_a.pixel, obs_b.pixel])
    best = min(
        candidates,
        key=lambda ptz: float(
            np.sum(np.square(_reprojection_errors(base, ptz, pixels, pans, tilts)))
        ),
    )
    return best


def _refine_on_rays(base, init, pixels, pans, tilts):
    def residuals(x):
        pan, tilt, focal = x
        if not (-90.0 < pan < 90.0) or focal <= 0.0:
            return None
        proj, valid = project_rays(
            PtzParams(pan, tilt, focal), base.principal_point, pans, tilts
        )
        if not valid.all():
            return None
        return (proj - pixels).ravel()

    x0 = np.array([init.pan_deg, init.tilt_deg, init.focal_px])
    result = levenberg_marquardt(residuals, x0, _LM_STEPS)
    return PtzParams(*result.x)


def estimate_pose(
    base: CameraBase,
    observations: list[RayObservation],
    config: RansacConfig = RansacConfig(),
    init_hint: PtzParams | None = None,
    seed: int = 0,
) -> PoseEstimate:
    """Two-point RANSAC over ray observations followed by LM refinement.

    Observations sharing a pixel are alternative per-tree predictions: only
    the best-fitting member of each pixel group contributes to the consensus
    and survives into the inlier set.  Deterministic for a fixed seed.
    """
    if len(observations) < 2:
        raise PoseEstimationError(
            f"need at least two observations, got {len(observations)}",
            best_inlier_count=0,
        )
    pixels = np.array([o.pixel for o in observations])
    pans = np.array([o.ray.pan_deg for o in observations])
    tilts = np.array([o.ray.tilt_deg for o in observations])

    group_of = {}
    for i, px in enumerate(np.round(pixels, 6)):
        group_of.setdefault((px[0], px[1]), []).append(i)
    groups = list(group_of.values())
    if len(groups) < 2:
        raise PoseEstimationError("need observations at two distinct pixels")

    def score(ptz):
        err = _reprojection_errors(base, ptz, pixels, pans, tilts)
        reps, rep_errs = [], []
        for members in groups:
            j = members[int(np.argmin(err[members]))]
            reps.append(j)
            rep_errs.append(err[j])
        rep_errs = np.array(rep_errs)
        inlier_mask = rep_errs <= config.inlier_threshold_px
        count = int(np.count_nonzero(inlier_mask))
        rmse = float(np.sqrt(np.mean(rep_errs[inlier_mask] ** 2))) if count else np.inf
        return count, rmse, np.array(reps)[inlier_mask]

    iterations = (
        config.max_iterations
        if config.max_iterations is not None
        else ransac_iterations(2, config)
    )
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & (2**63 - 1)])))
    best = None  # (count, rmse, inlier reps, ptz)
    used = 0

    def consider(ptz):
        nonlocal best
        count, rmse, reps = score(ptz)
        if best is None or count > best[0] or (count == best[0] and rmse < best[1]):
            best = (count, rmse, reps, ptz)

    if init_hint is not None:
        consider(init_hint)
    for _ in range(iterations):
        used += 1
        ga, gb = rng.choice(len(groups), size=2, replace=False)
        ia = groups[ga][int(rng.integers(len(groups[ga])))]
        ib = groups[gb][int(rng.integers(len(groups[gb])))]
        try:
            hypothesis = fit_ptz_minimal(base, observations[ia], observations[ib])
        except (DegenerateObservationsError, ValueError):
            continue
        consider(hypothesis)
        if best is not None and best[0] == len(groups):
            break  # full consensus; no hypothesis can beat it

    min_needed = max(2, config.min_inliers)
    if best is None or best[0] < min_needed:
        raise NoConsensusError(
            f"no consensus: best inlier count {0 if best is None else best[0]} "
            f"< required {min_needed}",
            best_inlier_count=0 if best is None else best[0],
        )

    # refine on the consensus set, then one re-classification pass
    ptz = best[3]
    reps = best[2]
    for _ in range(2):
        ptz = _refine_on_rays(base, ptz, pixels[reps], pans[reps], tilts[reps])
        count, rmse, new_reps = score(ptz)
        if count < min_needed:
            break
        reps = new_reps

    count, rmse, reps = score(ptz)
    if count < min_needed:
        raise NoConsensusError(
            f"refinement lost the consensus ({count} < {min_needed})",
            best_inlier_count=count,
        )
    return PoseEstimate(
        ptz=ptz,
        inlier_indices=tuple(int(i) for i in sorted(reps)),
        reprojection_rmse=rmse,
        iterations_used=used,
    )


def calibrate_image(
    base: CameraBase,
    forest: PanTiltForest,
    keypoints: list[tuple[np.ndarray, np.ndarray]],
    config: RansacConfig = RansacConfig(),
    seed: int = 0,
) -> PoseEstimate:
    """Automatic calibration of a new image from its (pixel, descriptor) keypoints.

    Every keypoint is pushed through the pan-tilt forest; the surviving
    per-tree predictions become ray observations for ``estimate_pose``.
    Raises ``NoGatedPredictionsError`` when gating (or an empty keypoint
    set) leaves fewer than two observations, ``NoConsensusError`` when
    RANSAC fails on the gated observations.
    """
    observations = []
    for pixel, descriptor in keypoints:
        for ray, dist in predict_ray(forest, descriptor):
            observations.append(RayObservation(np.asarray(pixel, dtype=float), ray, dist))
    if len(observations) < 2:
        raise NoGatedPredictionsError(
            f"{len(keypoints)} keypoints yielded {len(observations)} gated predictions; "
            "need at least 2"
        )
    return estimate_pose(base, observations, config, seed=seed)


def dump_observations(observations: list[RayObservation]) -> str:
    """Debug dump: one `x y pan tilt feature_distance` row per observation."""
    lines = ["# pixel_x pixel_y ray_pan_deg ray_tilt_deg feature_distance"]
    for o in observations:
        lines.append(
            f"{o.pixel[0]:.9f} {o.pixel[1]:.9f} {o.ray.pan_deg:.12f} "
            f"{o.ray.tilt_deg:.12f} {o.feature_distance:.9g}"
        )
    return "\n".join(lines) + "\n"


def load_observations(text: str) -> list[RayObservation]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"malformed observation row: {line!r}")
        x, y, pan, tilt, dist = map(float, parts)
        out.append(RayObservation(np.array([x, y]), Ray(pan, tilt), dist))
    return out
