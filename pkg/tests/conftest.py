import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ptzcalib.geometry import CameraBase, PtzCamera, PtzParams
from ptzcalib.synthetic import default_camera_base

settings.register_profile(
    "ci", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def corner_base() -> CameraBase:
    """Broadcast-style base used by the synthetic experiments."""
    return default_camera_base()


@pytest.fixture(scope="session")
def identity_base() -> CameraBase:
    """Base at the origin, aligned with the world axes (S = I)."""
    return CameraBase(
        center=np.zeros(3),
        rotation=np.eye(3),
        principal_point=np.array([640.0, 360.0]),
        image_size=(1280, 720),
    )


def random_ptz(rng: np.random.Generator) -> PtzParams:
    return PtzParams(
        pan_deg=float(rng.uniform(15.0, 75.0)),
        tilt_deg=float(rng.uniform(-14.0, -5.0)),
        focal_px=float(rng.uniform(1500.0, 5000.0)),
    )


def random_camera(base: CameraBase, rng: np.random.Generator) -> PtzCamera:
    return PtzCamera(base, random_ptz(rng))
