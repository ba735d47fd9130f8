"""PTZ sports-camera calibration toolkit.

Two-point minimal calibration, pan-tilt regression forests, RANSAC pose
estimation, synthetic robustness experiments, and an annotation service.
"""

from .field import FieldModel, load_field, render_field_overlay, save_field, standard_field
from .forest import (
    ForestConfig,
    PanTiltForest,
    TrainingSample,
    deserialize_forest,
    label_keypoints,
    predict_ray,
    serialize_forest,
    train_forest,
)
from .geometry import (
    CameraBase,
    Correspondence,
    PtzCamera,
    PtzParams,
    Ray,
    compose_projection,
    field_to_image_homography,
    pixel_to_ray,
    project_point,
    project_ray,
)
from .metrics import compute_iou, fov_degrees, rotation_focal_error
from .pose import (
    PoseEstimate,
    RansacConfig,
    RayObservation,
    calibrate_image,
    estimate_pose,
    fit_ptz_minimal,
    ransac_iterations,
)
from .synthetic import (
    ExperimentConfig,
    SyntheticScene,
    generate_scene,
    run_base_uncertainty_sweep,
    run_noise_sweep,
)
from .twopoint import (
    CalibSolution,
    TwoPointProblem,
    calibrate_two_points,
    focal_from_two_points,
    pan_tilt_from_one_point,
    refine_ptz,
)

__version__ = "0.1.0"
