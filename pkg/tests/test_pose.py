import numpy as np
import pytest
from hypothesis import given, strategies as st

from ptzcalib.geometry import (
    Correspondence,
    PtzCamera,
    PtzParams,
    Ray,
    back_project_pixel,
    pixel_to_ray,
    project_point,
    project_ray,
)
from ptzcalib.pose import (
    DegenerateObservationsError,
    NoConsensusError,
    NoGatedPredictionsError,
    PoseEstimationError,
    PoseEstimate,
    RansacConfig,
    RayObservation,
    calibrate_image,
    dump_observations,
    estimate_pose,
    fit_ptz_minimal,
    load_observations,
    ransac_iterations,
)
from ptzcalib.twopoint import TwoPointProblem, calibrate_two_points

from conftest import random_ptz


def synth_observations(base, ptz, pixels):
    pp = base.principal_point
    return [
        RayObservation(np.asarray(px, dtype=float), pixel_to_ray(ptz, pp, np.asarray(px, dtype=float)))
        for px in pixels
    ]


def random_pixels(rng, count, w=1280, h=720):
    return np.column_stack([rng.uniform(0, w, count), rng.uniform(0, h, count)])


class TestRansacIterations:
    def test_published_iteration_counts(self):
        config = RansacConfig(success_probability=0.99, outlier_ratio_assumption=0.5)
        assert ransac_iterations(4, config) == 71
        assert ransac_iterations(2, config) == 16
        assert ransac_iterations(1, config) == 7

    @given(
        st.floats(min_value=0.5, max_value=0.999),
        st.floats(min_value=0.05, max_value=0.8),
        st.integers(min_value=1, max_value=6),
    )
    def test_matches_formula(self, p, eps, s):
        config = RansacConfig(success_probability=p, outlier_ratio_assumption=eps)
        expected = np.log(1 - p) / np.log(1 - (1 - eps) ** s)
        assert ransac_iterations(s, config) == int(np.floor(expected + 0.5))


class TestMinimalSolver:
    def test_exact_recovery(self, corner_base):
        rng = np.random.default_rng(1)
        for _ in range(200):
            ptz = random_ptz(rng)
            pixels = random_pixels(rng, 2)
            if np.abs(pixels[0] - pixels[1]).min() < 30.0:
                continue
            obs = synth_observations(corner_base, ptz, pixels)
            fitted = fit_ptz_minimal(corner_base, obs[0], obs[1])
            assert abs(fitted.pan_deg - ptz.pan_deg) < 1e-6
            assert abs(fitted.tilt_deg - ptz.tilt_deg) < 1e-6
            assert abs(fitted.focal_px - ptz.focal_px) < 1e-3

    def test_pan_equation_residual_vanishes(self, corner_base):
        rng = np.random.default_rng(2)
        ptz = random_ptz(rng)
        pixels = random_pixels(rng, 2)
        obs = synth_observations(corner_base, ptz, pixels)
        fitted = fit_ptz_minimal(corner_base, obs[0], obs[1])
        u = corner_base.principal_point[0]
        for o in obs:
            residual = (
                fitted.focal_px * np.tan(np.radians(o.ray.pan_deg - fitted.pan_deg))
                + u
                - o.pixel[0]
            )
            assert abs(residual) < 1e-6

    def test_identical_rays_degenerate(self, corner_base):
        ray = Ray(30.0, -10.0)
        a = RayObservation(np.array([100.0, 100.0]), ray)
        b = RayObservation(np.array([500.0, 400.0]), ray)
        with pytest.raises(DegenerateObservationsError):
            fit_ptz_minimal(corner_base, a, b)

    def test_matches_two_point_correspondence_solver(self, corner_base):
        # the same physical data fed to both solvers: pixels from the full
        # projection of depth-1 ray points, rays from the pixel labelling
        rng = np.random.default_rng(3)
        for _ in range(20):
            ptz = random_ptz(rng)
            cam = PtzCamera(corner_base, ptz)
            pixels = random_pixels(rng, 2, w=1180, h=620) + 50.0
            if np.abs(pixels[0] - pixels[1]).min() < 40.0:
                continue
            world = [back_project_pixel(cam, px, 1.0) for px in pixels]
            obs = [
                RayObservation(px, pixel_to_ray(ptz, corner_base.principal_point, px))
                for px in pixels
            ]
            via_rays = fit_ptz_minimal(corner_base, obs[0], obs[1])
            problem = TwoPointProblem(
                corner_base,
                Correspondence(world[0], pixels[0]),
                Correspondence(world[1], pixels[1]),
            )
            via_points = calibrate_two_points(problem).ptz
            assert abs(via_rays.pan_deg - via_points.pan_deg) < 1e-6
            assert abs(via_rays.tilt_deg - via_points.tilt_deg) < 1e-6
            assert abs(via_rays.focal_px - via_points.focal_px) < 1e-2


class TestEstimatePose:
    def test_exact_observations(self, corner_base):
        rng = np.random.default_rng(4)
        ptz = random_ptz(rng)
        obs = synth_observations(corner_base, ptz, random_pixels(rng, 100))
        estimate = estimate_pose(corner_base, obs, RansacConfig(), seed=0)
        assert abs(estimate.ptz.pan_deg - ptz.pan_deg) < 1e-6
        assert abs(estimate.ptz.tilt_deg - ptz.tilt_deg) < 1e-6
        assert len(estimate.inlier_indices) == 100
        assert estimate.iterations_used <= ransac_iterations(2, RansacConfig())

    def test_half_outliers(self, corner_base):
        rng = np.random.default_rng(5)
        ptz = random_ptz(rng)
        obs = synth_observations(corner_base, ptz, random_pixels(rng, 100))
        true_inliers = set(range(50))
        corrupted = list(obs[:50])
        for i in range(50, 100):
            bad_ray = Ray(float(rng.uniform(-80, 80)), float(rng.uniform(-40, 40)))
            corrupted.append(RayObservation(obs[i].pixel, bad_ray))
        estimate = estimate_pose(corner_base, corrupted, RansacConfig(), seed=1)
        assert abs(estimate.ptz.pan_deg - ptz.pan_deg) < 0.05
        assert abs(estimate.ptz.tilt_deg - ptz.tilt_deg) < 0.05
        assert abs(estimate.ptz.focal_px - ptz.focal_px) < 10.0
        recovered = true_inliers & set(estimate.inlier_indices)
        assert len(recovered) >= 0.95 * len(true_inliers)

    def test_single_observation_fails(self, corner_base):
        obs = [RayObservation(np.array([100.0, 100.0]), Ray(30.0, -10.0))]
        with pytest.raises(PoseEstimationError):
            estimate_pose(corner_base, obs, RansacConfig())

    def test_insufficient_consensus_reports_best_count(self, corner_base):
        rng = np.random.default_rng(6)
        obs = [
            RayObservation(px, Ray(float(rng.uniform(-80, 80)), float(rng.uniform(-40, 40))))
            for px in random_pixels(rng, 12)
        ]
        with pytest.raises(NoConsensusError) as excinfo:
            estimate_pose(corner_base, obs, RansacConfig(min_inliers=10), seed=2)
        assert excinfo.value.best_inlier_count < 10

    def test_inliers_reverify(self, corner_base):
        rng = np.random.default_rng(7)
        ptz = random_ptz(rng)
        pixels = random_pixels(rng, 60)
        obs = synth_observations(corner_base, ptz, pixels)
        noisy = [
            RayObservation(o.pixel + rng.normal(0, 2.0, 2), o.ray) for o in obs
        ]
        config = RansacConfig(inlier_threshold_px=6.0)
        estimate = estimate_pose(corner_base, noisy, config, seed=3)
        pp = corner_base.principal_point
        for i in estimate.inlier_indices:
            projected = project_ray(estimate.ptz, pp, noisy[i].ray)
            assert np.linalg.norm(projected - noisy[i].pixel) <= config.inlier_threshold_px

    def test_adding_exact_observations_never_hurts(self, corner_base):
        rng = np.random.default_rng(8)
        ptz = random_ptz(rng)
        obs = synth_observations(corner_base, ptz, random_pixels(rng, 60))
        est_small = estimate_pose(corner_base, obs[:30], RansacConfig(), seed=4)
        est_large = estimate_pose(corner_base, obs, RansacConfig(), seed=4)
        err_small = abs(est_small.ptz.pan_deg - ptz.pan_deg)
        err_large = abs(est_large.ptz.pan_deg - ptz.pan_deg)
        assert err_large <= err_small + 1e-9

    def test_deterministic_for_fixed_seed(self, corner_base):
        rng = np.random.default_rng(9)
        ptz = random_ptz(rng)
        obs = synth_observations(corner_base, ptz, random_pixels(rng, 40))
        noisy = [RayObservation(o.pixel + rng.normal(0, 2.0, 2), o.ray) for o in obs]
        a = estimate_pose(corner_base, noisy, RansacConfig(inlier_threshold_px=6.0), seed=7)
        b = estimate_pose(corner_base, noisy, RansacConfig(inlier_threshold_px=6.0), seed=7)
        assert a == b

    def test_same_pixel_alternatives_resolved_by_consensus(self, corner_base):
        rng = np.random.default_rng(10)
        ptz = random_ptz(rng)
        pixels = random_pixels(rng, 30)
        obs = synth_observations(corner_base, ptz, pixels)
        # add a wrong alternative prediction at every pixel
        with_alternatives = []
        for o in obs:
            with_alternatives.append(o)
            with_alternatives.append(
                RayObservation(o.pixel, Ray(o.ray.pan_deg + 5.0, o.ray.tilt_deg - 3.0), 1.0)
            )
        estimate = estimate_pose(corner_base, with_alternatives, RansacConfig(), seed=5)
        assert abs(estimate.ptz.pan_deg - ptz.pan_deg) < 1e-6
        # exactly one observation per pixel group survives, the correct one
        assert len(estimate.inlier_indices) == 30
        assert all(i % 2 == 0 for i in estimate.inlier_indices)

    def test_init_hint_is_used(self, corner_base):
        rng = np.random.default_rng(11)
        ptz = random_ptz(rng)
        obs = synth_observations(corner_base, ptz, random_pixels(rng, 20))
        estimate = estimate_pose(
            corner_base, obs, RansacConfig(max_iterations=0, min_inliers=2),
            init_hint=ptz, seed=6,
        )
        assert abs(estimate.ptz.pan_deg - ptz.pan_deg) < 1e-9


class TestCalibrateImage:
    def test_zero_keypoints_fails_with_gating_error(self, corner_base, tiny_forest):
        with pytest.raises(NoGatedPredictionsError):
            calibrate_image(corner_base, tiny_forest, [], RansacConfig())

    def test_unknown_descriptors_gated_out(self, corner_base, tiny_forest):
        rng = np.random.default_rng(12)
        keypoints = [
            (np.array([100.0 + i, 200.0]), rng.standard_normal(tiny_forest.descriptor_dim) + 50.0)
            for i in range(10)
        ]
        with pytest.raises(NoGatedPredictionsError):
            calibrate_image(corner_base, tiny_forest, keypoints, RansacConfig())


@pytest.fixture(scope="module")
def tiny_forest():
    from ptzcalib.forest import ForestConfig, TrainingSample, train_forest

    rng = np.random.default_rng(77)
    samples = [
        TrainingSample(descriptor=rng.standard_normal(8), ray=Ray(float(p), 0.0))
        for p in rng.uniform(-40, 40, 40)
    ]
    return train_forest(samples, ForestConfig(tree_count=2), seed=0)


class TestObservationDump:
    def test_round_trip(self, corner_base):
        rng = np.random.default_rng(13)
        ptz = random_ptz(rng)
        obs = synth_observations(corner_base, ptz, random_pixels(rng, 5))
        text = dump_observations(obs)
        loaded = load_observations(text)
        assert len(loaded) == len(obs)
        for a, b in zip(obs, loaded):
            assert np.abs(a.pixel - b.pixel).max() < 1e-6
            assert abs(a.ray.pan_deg - b.ray.pan_deg) < 1e-9

    def test_malformed_row(self):
        with pytest.raises(ValueError, match="malformed"):
            load_observations("1.0 2.0 3.0\n")
