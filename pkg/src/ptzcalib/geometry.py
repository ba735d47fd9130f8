"""Camera model and angle/projection math for fixed-base pan-tilt-zoom rigs.

Coordinate conventions (used consistently across the whole package):

World frame (right-handed):
  - x along the field length, y along the field width, z up.
  - The playing field lies on the plane z = 0 with one corner at the origin.

Camera frame (computer-vision convention):
  - +x right, +y down, +z forward along the optical axis.
  - ``base_rotation`` (S) maps world vectors into the camera frame of the
    mounted-but-unrotated head ("base frame").

Pan / tilt:
  - Pan theta rotates about the base-frame y axis, positive pan turns the
    view toward +x (camera right).  Q_theta = R_y(-theta).
  - Tilt phi rotates about the panned x axis, positive tilt raises the view.
    Q_phi = R_x(-phi).  A camera looking down at the field has negative tilt.
  - Combined rotation (applied to base-frame vectors):

        Q_phi @ Q_theta = [[ cp,      0,  -sp     ],
                           [ st * sp, ct,  st * cp],
                           [ ct * sp, -st, ct * cp]]

    with sp/cp = sin/cos(pan) and st/ct = sin/cos(tilt).

Rays:
  - A viewing direction through the camera centre is parameterised by the
    (pan, tilt) angles of the camera pose that would centre it:
    d = (cos phi sin theta, -sin phi, cos phi cos theta) in the base frame.
  - The tangent-model projection of a ray for a camera at (theta, phi, f):

        x = u + f * tan(theta_p - theta)
        y = v - f * tan(phi_p - phi)

    and its exact inverse labels a pixel with a ray:

        theta_p = theta + arctan((x - u) / f)
        phi_p   = phi   - arctan((y - v) / f)

    These are mutual inverses on the open hemisphere.  The tangent model
    agrees with the full projection matrix exactly on the pan axis
    (phi_p == phi) and on the tilt axis (theta_p == theta); elsewhere the
    agreement is first-order in the angular offsets.

Angles are degrees at all API boundaries and radians only inside formulas.
All types are immutable value objects; all functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEG = np.pi / 180.0

#: |det| threshold (after normalisation) under which a field-to-image
#: homography is reported as degenerate.
_HOMOGRAPHY_DET_EPS = 1e-12

#: Dehomogenisation epsilon: depths with |w| below this count as "at infinity".
_DEHOM_EPS = 1e-12


class GeometryError(ValueError):
    """Invalid geometric configuration (degenerate homography, bad ray, ...)."""


def wrap_angle_deg(angle: float) -> float:
    """Wrap an angle in degrees into the canonical range (-180, 180]."""
    wrapped = np.remainder(np.asarray(angle, dtype=float), 360.0)
    wrapped = np.where(wrapped > 180.0, wrapped - 360.0, wrapped)
    if np.ndim(angle) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class CameraBase:
    """Time-invariant part of a PTZ camera: projection centre and mounting.

    ``rotation`` is the world-to-base-frame rotation S; ``center`` is the
    centre of projection C in world metres.
    """

    center: np.ndarray
    rotation: np.ndarray
    principal_point: np.ndarray
    image_size: tuple[int, int]

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(3)
        rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        pp = np.asarray(self.principal_point, dtype=float).reshape(2)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "principal_point", pp)
        object.__setattr__(self, "image_size", (int(self.image_size[0]), int(self.image_size[1])))
        if not np.all(np.isfinite(center)):
            raise ValueError("camera center must be finite")
        ortho = np.abs(rotation.T @ rotation - np.eye(3)).max()
        if ortho >= 1e-9:
            raise ValueError(f"base_rotation is not orthonormal (|S^T S - I|_inf = {ortho:.3e})")
        if np.linalg.det(rotation) <= 0.0:
            raise ValueError("base_rotation must have determinant +1")
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise ValueError("image_size must be positive")
        if not (0.0 <= pp[0] <= w and 0.0 <= pp[1] <= h):
            raise ValueError("principal_point must lie inside the image")


@dataclass(frozen=True)
class PtzParams:
    """Time-varying part of a PTZ camera: pan, tilt (degrees) and focal (pixels)."""

    pan_deg: float
    tilt_deg: float
    focal_px: float

    def __post_init__(self):
        object.__setattr__(self, "pan_deg", float(self.pan_deg))
        object.__setattr__(self, "tilt_deg", float(self.tilt_deg))
        object.__setattr__(self, "focal_px", float(self.focal_px))
        if not np.isfinite([self.pan_deg, self.tilt_deg, self.focal_px]).all():
            raise ValueError("PTZ parameters must be finite")
        if self.focal_px <= 0.0:
            raise ValueError("focal length must be positive")
        if not -90.0 < self.pan_deg < 90.0:
            raise ValueError("pan must lie in (-90, 90) degrees relative to the base")


@dataclass(frozen=True)
class Ray:
    """Viewing direction through the camera centre, as (pan, tilt) angles."""

    pan_deg: float
    tilt_deg: float

    def __post_init__(self):
        if not np.isfinite([self.pan_deg, self.tilt_deg]).all():
            raise ValueError("ray angles must be finite")
        object.__setattr__(self, "pan_deg", wrap_angle_deg(float(self.pan_deg)))
        object.__setattr__(self, "tilt_deg", float(self.tilt_deg))
        if not -90.0 < self.tilt_deg < 90.0:
            raise ValueError("ray tilt must lie in (-90, 90) degrees")


@dataclass(frozen=True)
class PtzCamera:
    """A full camera pose: fixed base plus current pan/tilt/zoom."""

    base: CameraBase
    ptz: PtzParams


@dataclass(frozen=True)
class Correspondence:
    """A 3D world point paired with its observed image pixel."""

    world_point: np.ndarray
    pixel: np.ndarray

    def __post_init__(self):
        wp = np.asarray(self.world_point, dtype=float).reshape(3)
        px = np.asarray(self.pixel, dtype=float).reshape(2)
        object.__setattr__(self, "world_point", wp)
        object.__setattr__(self, "pixel", px)
        if not (np.all(np.isfinite(wp)) and np.all(np.isfinite(px))):
            raise ValueError("correspondence must be finite")


def pan_rotation(pan_deg: float) -> np.ndarray:
    """Rotation applied to base-frame vectors for a camera panned by ``pan_deg``."""
    t = pan_deg * DEG
    cp, sp = np.cos(t), np.sin(t)
    return np.array([[cp, 0.0, -sp], [0.0, 1.0, 0.0], [sp, 0.0, cp]])


def tilt_rotation(tilt_deg: float) -> np.ndarray:
    """Rotation applied after panning for a camera tilted by ``tilt_deg``."""
    t = tilt_deg * DEG
    ct, st = np.cos(t), np.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, ct, st], [0.0, -st, ct]])


def pan_tilt_rotation(pan_deg: float, tilt_deg: float) -> np.ndarray:
    """Combined Q_phi @ Q_theta rotation from the base frame to the view frame."""
    return tilt_rotation(tilt_deg) @ pan_rotation(pan_deg)


def intrinsic_matrix(focal_px: float, principal_point: np.ndarray) -> np.ndarray:
    u, v = np.asarray(principal_point, dtype=float).reshape(2)
    return np.array([[focal_px, 0.0, u], [0.0, focal_px, v], [0.0, 0.0, 1.0]])


def camera_rotation(cam: PtzCamera) -> np.ndarray:
    """World-to-view rotation Q_phi Q_theta S of the posed camera."""
    return pan_tilt_rotation(cam.ptz.pan_deg, cam.ptz.tilt_deg) @ cam.base.rotation


def compose_projection(cam: PtzCamera) -> np.ndarray:
    """3x4 projection matrix P = K Q_phi Q_theta S [I | -C]."""
    K = intrinsic_matrix(cam.ptz.focal_px, cam.base.principal_point)
    R = camera_rotation(cam)
    P = np.empty((3, 4))
    P[:, :3] = K @ R
    P[:, 3] = -P[:, :3] @ cam.base.center
    return P


def project_points(cam: PtzCamera, world_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project an (N, 3) array of world points.

    Returns (pixels, in_front): pixels are NaN where the point is behind the
    camera (depth <= 0), flagged False in ``in_front``.
    """
    pts = np.atleast_2d(np.asarray(world_points, dtype=float))
    P = compose_projection(cam)
    h = pts @ P[:, :3].T + P[:, 3]
    depth = h[:, 2]
    in_front = depth > _DEHOM_EPS
    pixels = np.full((len(pts), 2), np.nan)
    pixels[in_front] = h[in_front, :2] / depth[in_front, None]
    return pixels, in_front


def project_point(cam: PtzCamera, world_point: np.ndarray) -> tuple[np.ndarray, bool]:
    """Project one world point; behind-camera is flagged, not raised."""
    pixels, in_front = project_points(cam, np.asarray(world_point, dtype=float).reshape(1, 3))
    return pixels[0], bool(in_front[0])


def back_project_pixel(cam: PtzCamera, pixel: np.ndarray, depth: float) -> np.ndarray:
    """World point at ``depth`` along the exact viewing ray of ``pixel``."""
    u, v = cam.base.principal_point
    f = cam.ptz.focal_px
    d_view = np.array([(pixel[0] - u) / f, (pixel[1] - v) / f, 1.0])
    d_world = camera_rotation(cam).T @ d_view
    return cam.base.center + depth * d_world


def ray_to_direction(ray: Ray) -> np.ndarray:
    """Unit base-frame direction of a ray."""
    t, p = ray.pan_deg * DEG, ray.tilt_deg * DEG
    return np.array([np.cos(p) * np.sin(t), -np.sin(p), np.cos(p) * np.cos(t)])


def direction_to_ray(direction: np.ndarray) -> Ray:
    """Canonical (pan, tilt) angles of a base-frame direction."""
    d = np.asarray(direction, dtype=float).reshape(3)
    horiz = float(np.hypot(d[0], d[2]))
    if horiz <= 0.0 and d[1] == 0.0:
        raise GeometryError("zero direction has no ray angles")
    pan = float(np.arctan2(d[0], d[2])) / DEG
    tilt = float(np.arctan2(-d[1], horiz)) / DEG
    return Ray(pan, tilt)


def world_point_to_ray(base: CameraBase, world_point: np.ndarray) -> Ray:
    """Ray angles of the direction from the camera centre to a world point."""
    d = base.rotation @ (np.asarray(world_point, dtype=float).reshape(3) - base.center)
    return direction_to_ray(d)


def project_rays(
    ptz: PtzParams,
    principal_point: np.ndarray,
    pan_deg: np.ndarray,
    tilt_deg: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Tangent-model projection of ray angle arrays.

    Returns (pixels, valid); rays outside the open hemisphere of the current
    pose (|offset| >= 90 degrees in pan or tilt) are flagged invalid.
    """
    u, v = np.asarray(principal_point, dtype=float).reshape(2)
    dpan = wrap_angle_deg(np.asarray(pan_deg, dtype=float) - ptz.pan_deg)
    dtilt = wrap_angle_deg(np.asarray(tilt_deg, dtype=float) - ptz.tilt_deg)
    valid = (np.abs(dpan) < 90.0) & (np.abs(dtilt) < 90.0)
    x = np.where(valid, u + ptz.focal_px * np.tan(dpan * DEG), np.nan)
    y = np.where(valid, v - ptz.focal_px * np.tan(dtilt * DEG), np.nan)
    return np.stack([x, y], axis=-1), valid


def project_ray(ptz: PtzParams, principal_point: np.ndarray, ray: Ray) -> np.ndarray:
    """Project one ray with the tangent model; out-of-hemisphere rays raise."""
    pixels, valid = project_rays(
        ptz, principal_point, np.asarray(ray.pan_deg), np.asarray(ray.tilt_deg)
    )
    if not bool(valid):
        raise GeometryError(
            f"ray ({ray.pan_deg:.3f}, {ray.tilt_deg:.3f}) deg is outside the open hemisphere "
            f"of pose ({ptz.pan_deg:.3f}, {ptz.tilt_deg:.3f}) deg"
        )
    return pixels.reshape(2)


def pixels_to_rays(
    ptz: PtzParams, principal_point: np.ndarray, pixels: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Label (N, 2) pixels with ray angles; exact inverse of ``project_rays``."""
    px = np.atleast_2d(np.asarray(pixels, dtype=float))
    u, v = np.asarray(principal_point, dtype=float).reshape(2)
    pan = ptz.pan_deg + np.arctan((px[:, 0] - u) / ptz.focal_px) / DEG
    tilt = ptz.tilt_deg - np.arctan((px[:, 1] - v) / ptz.focal_px) / DEG
    return pan, tilt


def pixel_to_ray(ptz: PtzParams, principal_point: np.ndarray, pixel: np.ndarray) -> Ray:
    """Ray label of a single pixel under the current pose."""
    pan, tilt = pixels_to_rays(ptz, principal_point, np.asarray(pixel, dtype=float).reshape(1, 2))
    return Ray(float(pan[0]), float(tilt[0]))


def field_to_image_homography(cam: PtzCamera) -> np.ndarray:
    """Homography mapping field-plane points (x, y, 1) on z = 0 to image pixels.

    Columns 1, 2 and 4 of the projection matrix.  Raises ``GeometryError``
    when the restriction is rank-deficient (camera on the field plane).
    """
    P = compose_projection(cam)
    H = P[:, [0, 1, 3]]
    norm = np.abs(H).max()
    if norm <= 0.0:
        raise GeometryError("degenerate homography (zero matrix)")
    det = np.linalg.det(H / norm)
    if abs(det) <= _HOMOGRAPHY_DET_EPS:
        raise GeometryError(f"degenerate field-to-image homography (|det| = {abs(det):.3e})")
    return H
