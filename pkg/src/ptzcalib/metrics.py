"""Calibration accuracy metrics: topview IoU, rotation and focal errors.

The IoU of two cameras is the overlap of their image footprints on the
field plane: the image rectangle is pulled back through each camera's
inverse field homography and the two convex polygons are intersected with
Sutherland-Hodgman clipping.  Pixels above the plane's vanishing line map
behind the camera, so the image rectangle is first clipped against the
horizon in homogeneous coordinates; footprints are additionally clipped to
the field plus a fixed margin so areas stay finite when the horizon enters
the image.
"""

from __future__ import annotations

import numpy as np

from .field import FieldModel
from .geometry import (
    CameraBase,
    DEG,
    GeometryError,
    PtzCamera,
    PtzParams,
    camera_rotation,
    field_to_image_homography,
)

#: Footprints are clipped to the field rectangle grown by this margin (m).
FOOTPRINT_MARGIN_M = 20.0

#: Relative w cutoff when clipping the image rectangle against the horizon.
_HORIZON_W_EPS = 1e-6


def polygon_area(polygon: np.ndarray) -> float:
    """Absolute shoelace area of a simple polygon (K, 2)."""
    poly = np.asarray(polygon, dtype=float)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return float(abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)) / 2.0)


def clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` by a convex ``clip`` polygon.

    Both polygons are (K, 2) vertex arrays; the clip polygon may wind either
    way.  Returns a possibly empty (K', 2) array.
    """
    subject = [np.asarray(p, dtype=float) for p in np.atleast_2d(subject)]
    clip = np.atleast_2d(np.asarray(clip, dtype=float))
    if len(clip) < 3:
        return np.zeros((0, 2))
    # enforce counter-clockwise winding so "inside" is the left half-plane
    if polygon_area(clip) == 0.0:
        return np.zeros((0, 2))
    signed = np.sum(
        clip[:, 0] * np.roll(clip[:, 1], -1) - np.roll(clip[:, 0], -1) * clip[:, 1]
    )
    if signed < 0.0:
        clip = clip[::-1]

    output = subject
    for i in range(len(clip)):
        a, b = clip[i], clip[(i + 1) % len(clip)]
        edge = b - a
        if not output:
            return np.zeros((0, 2))
        inputs, output = output, []

        def side(p):
            return edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0])

        s = inputs[-1]
        s_in = side(s) >= 0.0
        for e in inputs:
            e_in = side(e) >= 0.0
            if e_in != s_in:
                t = side(s) / (side(s) - side(e))
                output.append(s + t * (e - s))
            if e_in:
                output.append(e)
            s, s_in = e, e_in
    return np.array(output) if output else np.zeros((0, 2))


def _margin_polygon(field: FieldModel, margin: float) -> np.ndarray:
    return np.array(
        [
            [-margin, -margin],
            [field.length + margin, -margin],
            [field.length + margin, field.width + margin],
            [-margin, field.width + margin],
        ]
    )


def camera_footprint(
    cam: PtzCamera, field: FieldModel, margin: float = FOOTPRINT_MARGIN_M
) -> np.ndarray:
    """Image rectangle pulled back to the field plane, clipped to field+margin.

    Returns a convex (K, 2) polygon in field metres, possibly empty.
    """
    H = field_to_image_homography(cam)
    Hinv = np.linalg.inv(H)
    w, h = cam.base.image_size
    rect = np.array(
        [[0.0, 0.0, 1.0], [w, 0.0, 1.0], [w, h, 1.0], [0.0, h, 1.0]]
    )
    hom = rect @ Hinv.T  # homogeneous plane points, third coord > 0 means in front

    # clip against the horizon (w = 0 line) in homogeneous space; linear
    # interpolation along image-rectangle edges is projectively correct
    w_eps = _HORIZON_W_EPS * max(float(np.abs(hom[:, 2]).max()), 1e-30)
    kept: list[np.ndarray] = []
    n = len(hom)
    for i in range(n):
        s, e = hom[i], hom[(i + 1) % n]
        s_in, e_in = s[2] >= w_eps, e[2] >= w_eps
        if s_in:
            kept.append(s)
        if s_in != e_in:
            t = (w_eps - s[2]) / (e[2] - s[2])
            kept.append(s + t * (e - s))
    if len(kept) < 3:
        return np.zeros((0, 2))
    plane = np.array([[p[0] / p[2], p[1] / p[2]] for p in kept])
    return clip_polygon(plane, _margin_polygon(field, margin))


def compute_iou(
    gt: PtzCamera, est: PtzCamera, field: FieldModel, margin: float = FOOTPRINT_MARGIN_M
) -> float:
    """Topview IoU of the two cameras' field-plane footprints, in [0, 1].

    Symmetric in its camera arguments; raises ``GeometryError`` when either
    field homography is degenerate.
    """
    poly_a = camera_footprint(gt, field, margin)
    poly_b = camera_footprint(est, field, margin)
    # canonical argument order makes the float result exactly symmetric
    if _polygon_key(poly_b) < _polygon_key(poly_a):
        poly_a, poly_b = poly_b, poly_a
    area_a, area_b = polygon_area(poly_a), polygon_area(poly_b)
    if area_a == 0.0 and area_b == 0.0:
        return 1.0
    inter = polygon_area(clip_polygon(poly_a, poly_b)) if len(poly_a) and len(poly_b) else 0.0
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return float(np.clip(inter / union, 0.0, 1.0))


def _polygon_key(poly: np.ndarray) -> tuple:
    return (len(poly), *map(tuple, np.asarray(poly).round(12)))


def rasterized_iou(
    poly_a: np.ndarray, poly_b: np.ndarray, cell_m: float = 0.05
) -> float:
    """Monte-Carlo-free IoU oracle: point-in-polygon tests on a regular grid."""
    if polygon_area(poly_a) == 0.0 and polygon_area(poly_b) == 0.0:
        return 1.0
    pts = [p for p in (poly_a, poly_b) if len(p)]
    allpts = np.vstack(pts)
    x0, y0 = allpts.min(axis=0) - cell_m
    x1, y1 = allpts.max(axis=0) + cell_m
    xs = np.arange(x0 + cell_m / 2, x1, cell_m)
    ys = np.arange(y0 + cell_m / 2, y1, cell_m)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])

    def inside(poly):
        if len(poly) < 3:
            return np.zeros(len(grid), dtype=bool)
        signed = np.sum(
            poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1]
        )
        sign = 1.0 if signed >= 0 else -1.0
        ok = np.ones(len(grid), dtype=bool)
        for i in range(len(poly)):
            a, b = poly[i], poly[(i + 1) % len(poly)]
            cross = (b[0] - a[0]) * (grid[:, 1] - a[1]) - (b[1] - a[1]) * (grid[:, 0] - a[0])
            ok &= sign * cross >= 0.0
        return ok

    in_a, in_b = inside(np.asarray(poly_a)), inside(np.asarray(poly_b))
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return float(np.count_nonzero(in_a & in_b) / union)


def rotation_angle_deg(rot_a: np.ndarray, rot_b: np.ndarray) -> float:
    """Angle of the relative rotation between two rotation matrices, degrees."""
    rel = rot_a.T @ rot_b
    cos = (np.trace(rel) - 1.0) / 2.0
    sin_vec = np.array(
        [rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]]
    )
    sin = float(np.linalg.norm(sin_vec)) / 2.0
    return float(np.arctan2(sin, cos)) / DEG


def rotation_focal_error(
    gt: PtzParams, est: PtzParams, base: CameraBase, est_base: CameraBase | None = None
) -> tuple[float, float]:
    """(rotation error deg, |focal error| px) between two poses.

    The rotation error is the angle of R_gt^T R_est with R = Q_phi Q_theta S;
    ``est_base`` supports evaluating an estimate made under a perturbed base.
    """
    rot_gt = camera_rotation(PtzCamera(base, gt))
    rot_est = camera_rotation(PtzCamera(est_base if est_base is not None else base, est))
    return rotation_angle_deg(rot_gt, rot_est), abs(gt.focal_px - est.focal_px)


def fov_degrees(image_width: int, focal_px: float) -> float:
    """Horizontal field of view 2*arctan(width / (2 f)), degrees."""
    if focal_px <= 0:
        raise ValueError("focal length must be positive")
    return float(2.0 * np.arctan(image_width / (2.0 * focal_px))) / DEG


__all__ = [
    "FOOTPRINT_MARGIN_M",
    "polygon_area",
    "clip_polygon",
    "camera_footprint",
    "compute_iou",
    "rasterized_iou",
    "rotation_angle_deg",
    "rotation_focal_error",
    "fov_degrees",
    "GeometryError",
]
