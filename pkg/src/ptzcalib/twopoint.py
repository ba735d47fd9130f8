"""Minimal calibration solvers for a fixed-base PTZ camera.

Given the camera base (centre C and mounting rotation S) and two 3D-2D point
correspondences, the pipeline is:

1. closed-form focal length from the angle between the two viewing rays,
2. closed-form pan/tilt from a single point at that focal length,
3. Levenberg-Marquardt refinement of (pan, tilt, focal) over both points.

The focal solve reduces to a quadratic in f^2.  With centred pixels
``xt_i = pixel_i - principal_point`` and unit directions
``Xb_i = (X_i - C)/|X_i - C|``::

    a = xt_1 . xt_1,  b = xt_2 . xt_2,  c = xt_1 . xt_2,  d = Xb_1 . Xb_2
    (d^2 - 1) f^4 + (d^2 (a + b) - 2 c) f^2 + (d^2 a b - c^2) = 0

Both positive roots are kept as candidates (the quadratic is obtained by
squaring, so roots are verified against the unsquared angle constraint);
the stable-division branch is reported first.

The pan/tilt solve uses the normalised camera-frame point (X, Y, Z) =
S (P_w - C) and the normalised pixel (U, V, 1): collinearity under the
pan-tilt rotation yields a quadratic in t = tan(pan)::

    a t^2 + b t + c = 0
    a = (V^2 + 1) Z^2 - U^2 (X^2 + Y^2)
    b = -2 X Z (U^2 + V^2 + 1)
    c = (V^2 + 1) X^2 - U^2 (Y^2 + Z^2)

with the tilt recovered from

    cos(tilt) = (V Y + X sp + Z cp)(X cp - Z sp) / det
    sin(tilt) = (V X sp + V Z cp - Y)(X cp - Z sp) / det
    det      = U (Y^2 + (Z cp + X sp)^2).

Candidates are verified by forward projection and kept only when they
reproject the input within 1e-3 px.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    CameraBase,
    Correspondence,
    DEG,
    PtzCamera,
    PtzParams,
    project_points,
)
from .optimize import levenberg_marquardt

#: Degenerate-angle guard for the two-point focal solve (radians).
ANGLE_EPS = 1e-4
#: Below this |U| the general pan quadratic is singular and the centred
#: closed form is used instead.
U_EPS = 1e-9
#: Candidate poses must reproject their defining point within this (pixels).
CANDIDATE_REPROJECTION_TOL = 1e-3

_LM_STEPS = np.array([1e-6, 1e-6, 1e-3])  # (pan deg, tilt deg, focal px)


class CalibrationError(Exception):
    """Base class for two-point calibration failures."""


class DegenerateConfigurationError(CalibrationError):
    """Input geometry violates a solver precondition."""


class SolverFailureError(CalibrationError):
    """No real/positive solution exists for the given inputs."""


@dataclass(frozen=True)
class TwoPointProblem:
    base: CameraBase
    corr_a: Correspondence
    corr_b: Correspondence

    def __post_init__(self):
        if np.linalg.norm(self.corr_a.world_point - self.corr_b.world_point) <= 1e-6:
            raise ValueError("world points must be distinct")
        if np.linalg.norm(self.corr_a.pixel - self.corr_b.pixel) <= 1e-6:
            raise ValueError("pixels must be distinct")
        for corr in (self.corr_a, self.corr_b):
            if np.linalg.norm(corr.world_point - self.base.center) <= 1e-6:
                raise ValueError("world points must be distinct from the camera centre")


@dataclass(frozen=True)
class CalibSolution:
    ptz: PtzParams
    reprojection_rmse: float
    converged: bool

    def __post_init__(self):
        if self.reprojection_rmse < 0.0:
            raise ValueError("reprojection RMSE must be non-negative")


def _unit_directions(problem: TwoPointProblem) -> tuple[np.ndarray, np.ndarray]:
    da = problem.corr_a.world_point - problem.base.center
    db = problem.corr_b.world_point - problem.base.center
    return da / np.linalg.norm(da), db / np.linalg.norm(db)


def focal_quadratic_coefficients(problem: TwoPointProblem) -> tuple[float, float, float]:
    """Coefficients (A, B, C) of A (f^2)^2 + B f^2 + C = 0."""
    pp = problem.base.principal_point
    xt1 = problem.corr_a.pixel - pp
    xt2 = problem.corr_b.pixel - pp
    a = float(xt1 @ xt1)
    b = float(xt2 @ xt2)
    c = float(xt1 @ xt2)
    d1, d2 = _unit_directions(problem)
    d = float(d1 @ d2)
    return d * d - 1.0, d * d * (a + b) - 2.0 * c, d * d * a * b - c * c


def _cos_angle_at_focal(problem: TwoPointProblem, focal: np.ndarray) -> np.ndarray:
    """cos(angle) between the back-projected pixel rays as a function of f."""
    pp = problem.base.principal_point
    xt1 = problem.corr_a.pixel - pp
    xt2 = problem.corr_b.pixel - pp
    f2 = np.asarray(focal, dtype=float) ** 2
    num = xt1 @ xt2 + f2
    den = np.sqrt((xt1 @ xt1 + f2) * (xt2 @ xt2 + f2))
    return num / den


def focal_from_two_points(problem: TwoPointProblem) -> tuple[float, ...]:
    """All positive focal lengths consistent with the two correspondences.

    The stable-division root is first.  Raises ``DegenerateConfigurationError``
    for a near-zero or near-straight angle between the 3D rays and
    ``SolverFailureError`` when no real positive root exists.
    """
    d1, d2 = _unit_directions(problem)
    alpha = float(np.arccos(np.clip(d1 @ d2, -1.0, 1.0)))
    if not ANGLE_EPS < alpha < np.pi - ANGLE_EPS:
        raise DegenerateConfigurationError(
            f"angle between world rays is degenerate ({np.degrees(alpha):.6f} deg)"
        )
    A, B, C = focal_quadratic_coefficients(problem)
    disc = B * B - 4.0 * A * C
    if disc < 0.0:
        raise SolverFailureError("no real focal-length root (negative discriminant)")
    sq = np.sqrt(disc)
    # stable pairing: citardauq branch first, classic branch second
    denom = -B + sq
    roots_f2 = []
    if abs(denom) > 0.0:
        roots_f2.append(2.0 * C / denom)
    if abs(A) > 0.0:
        roots_f2.append((-B - sq) / (2.0 * A))

    scale = max(abs(A), abs(B), abs(C), 1e-300)
    candidates = []
    d = float(d1 @ d2)
    for f2 in roots_f2:
        if not np.isfinite(f2) or f2 <= 0.0:
            continue
        # polish on the quadratic in f^2
        for _ in range(2):
            deriv = 2.0 * A * f2 + B
            if deriv != 0.0:
                f2 -= (A * f2 * f2 + B * f2 + C) / deriv
        if f2 <= 0.0:
            continue
        f = float(np.sqrt(f2))
        # squaring introduced the antipodal branch: keep true-angle roots only
        if abs(float(_cos_angle_at_focal(problem, f)) - d) < 1e-7:
            if not any(abs(f - got) < 1e-6 * max(f, 1.0) for got in candidates):
                candidates.append(f)
    if not candidates:
        raise SolverFailureError("no positive focal-length root")
    return tuple(candidates)


def _pan_tilt_candidates_raw(base, focal, corr):
    """Unverified (pan, tilt) candidate angles in degrees."""
    X, Y, Z = base.rotation @ (corr.world_point - base.center)
    if abs(X) < 1e-12 and abs(Z) < 1e-12:
        raise DegenerateConfigurationError("world point lies on the pan axis")
    u, v = base.principal_point
    U = (corr.pixel[0] - u) / focal
    V = (corr.pixel[1] - v) / focal

    if abs(U) < U_EPS:
        # centred column: pan must zero the view-frame x component, then the
        # tilt follows from the remaining y/z ratio
        pan = float(np.arctan2(X, Z))
        zp = Z * np.cos(pan) + X * np.sin(pan)
        tilt = float(np.arctan2(V * zp - Y, zp + V * Y))
        return [(pan / DEG, tilt / DEG)]

    a = (V * V + 1.0) * Z * Z - U * U * (X * X + Y * Y)
    b = -2.0 * X * Z * (U * U + V * V + 1.0)
    c = (V * V + 1.0) * X * X - U * U * (Y * Y + Z * Z)
    if abs(a) < 1e-300:
        if abs(b) < 1e-300:
            raise SolverFailureError("pan quadratic vanished")
        roots = [-c / b]
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            raise SolverFailureError("no real pan root (negative discriminant)")
        sq = np.sqrt(disc)
        q = -0.5 * (b + sq) if b >= 0.0 else -0.5 * (b - sq)
        roots = [q / a]
        if abs(q) > 0.0:
            roots.append(c / q)

    out = []
    for t in roots:
        if not np.isfinite(t):
            continue
        for _ in range(2):
            deriv = 2.0 * a * t + b
            if deriv != 0.0:
                t -= (a * t * t + b * t + c) / deriv
        sp, cp = np.sin(np.arctan(t)), np.cos(np.arctan(t))
        det = U * (Y * Y + (Z * cp + X * sp) ** 2)
        if abs(det) < 1e-300:
            continue
        factor = X * cp - Z * sp
        ct = (V * Y + X * sp + Z * cp) * factor / det
        st = (V * X * sp + V * Z * cp - Y) * factor / det
        out.append((float(np.arctan(t)) / DEG, float(np.arctan2(st, ct)) / DEG))
    return out


def pan_tilt_candidates_trig(base, focal, corr):
    """(cos, sin) of the tilt per raw candidate, before normalisation.

    Diagnostic helper: at a true root these satisfy cos^2 + sin^2 = 1.
    """
    X, Y, Z = base.rotation @ (corr.world_point - base.center)
    u, v = base.principal_point
    U = (corr.pixel[0] - u) / focal
    V = (corr.pixel[1] - v) / focal
    pairs = []
    for pan_deg, _ in _pan_tilt_candidates_raw(base, focal, corr):
        sp, cp = np.sin(pan_deg * DEG), np.cos(pan_deg * DEG)
        det = U * (Y * Y + (Z * cp + X * sp) ** 2)
        if abs(det) < 1e-300:
            continue
        factor = X * cp - Z * sp
        pairs.append(
            (
                (V * Y + X * sp + Z * cp) * factor / det,
                (V * X * sp + V * Z * cp - Y) * factor / det,
            )
        )
    return pairs


def _reprojection_rmse(base, ptz, correspondences):
    cam = PtzCamera(base, ptz)
    pts = np.array([c.world_point for c in correspondences])
    obs = np.array([c.pixel for c in correspondences])
    pix, in_front = project_points(cam, pts)
    if not in_front.all():
        return None
    return float(np.sqrt(np.mean(np.sum((pix - obs) ** 2, axis=1))))


def pan_tilt_from_one_point(
    base: CameraBase, focal: float, corr: Correspondence
) -> tuple[PtzParams, ...]:
    """Pan/tilt candidates (focal fixed) that reproject ``corr`` exactly.

    Up to two closed-form candidates; each is verified by forward projection
    and discarded unless it reprojects the pixel within 1e-3 px.  Survivors
    are sorted by reprojection error.
    """
    if focal <= 0.0:
        raise ValueError("focal length must be positive")
    verified = []
    for pan_deg, tilt_deg in _pan_tilt_candidates_raw(base, focal, corr):
        if not -90.0 < pan_deg < 90.0:
            continue
        try:
            ptz = PtzParams(pan_deg, tilt_deg, focal)
        except ValueError:
            continue
        err = _reprojection_rmse(base, ptz, [corr])
        if err is not None and err <= CANDIDATE_REPROJECTION_TOL:
            verified.append((err, ptz))
    if not verified:
        raise SolverFailureError("no pan/tilt candidate reprojects the point")
    verified.sort(key=lambda pair: pair[0])
    return tuple(ptz for _, ptz in verified)


def refine_ptz(
    base: CameraBase, init: PtzParams, correspondences: list[Correspondence]
) -> CalibSolution:
    """Local LM minimisation of the reprojection error over (pan, tilt, focal).

    The result never has a higher cost than ``init``; a run that cannot make
    progress returns the initial parameters with ``converged=False``.
    """
    if len(correspondences) < 2:
        raise ValueError("refinement needs at least two correspondences")
    pts = np.array([c.world_point for c in correspondences])
    obs = np.array([c.pixel for c in correspondences])

    def residuals(x):
        pan, tilt, focal = x
        if not (-90.0 < pan < 90.0) or focal <= 0.0:
            return None
        cam = PtzCamera(base, PtzParams(pan, tilt, focal))
        pix, in_front = project_points(cam, pts)
        if not in_front.all():
            return None
        return (pix - obs).ravel()

    x0 = np.array([init.pan_deg, init.tilt_deg, init.focal_px])
    result = levenberg_marquardt(residuals, x0, _LM_STEPS)
    ptz = PtzParams(*result.x)
    rmse = float(np.sqrt(result.cost / len(correspondences)))
    return CalibSolution(ptz=ptz, reprojection_rmse=rmse, converged=result.converged)


def calibrate_two_points(problem: TwoPointProblem) -> CalibSolution:
    """Full two-point calibration: focal, then pan/tilt, then LM refinement.

    Every focal candidate is combined with every pan/tilt candidate solved
    from the first correspondence; all branches are refined over both points
    and the lowest-RMSE solution wins.
    """
    focal_candidates = focal_from_two_points(problem)
    corrs = [problem.corr_a, problem.corr_b]
    best: CalibSolution | None = None
    failures: list[str] = []
    for focal in focal_candidates:
        try:
            inits = pan_tilt_from_one_point(problem.base, focal, problem.corr_a)
        except CalibrationError as exc:
            failures.append(f"f={focal:.3f}: {exc}")
            continue
        for init in inits:
            solution = refine_ptz(problem.base, init, corrs)
            if best is None or solution.reprojection_rmse < best.reprojection_rmse:
                best = solution
    if best is None:
        raise SolverFailureError(
            "all calibration branches failed: " + "; ".join(failures)
        )
    return best
