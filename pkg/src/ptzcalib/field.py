"""Planar field model: named key points, marking primitives and overlays.

The default model is a FIFA-standard 105 m x 68 m soccer pitch.  Key points
are the marking intersections plus the two penalty marks, i.e. the points a
human annotator typically clicks.  Field files are JSON documents::

    {
      "length": 105.0,
      "width": 68.0,
      "key_points": {"corner_left_bottom": [0.0, 0.0], ...},
      "segments": [{"name": "...", "p0": [x, y], "p1": [x, y]}, ...],
      "arcs": [{"name": "...", "center": [x, y], "radius": r,
                "start_deg": a0, "end_deg": a1}, ...]
    }

All coordinates are metres on the plane z = 0; arcs run counter-clockwise
from ``start_deg`` to ``end_deg`` measured from the +x axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .geometry import PtzCamera, project_points


@dataclass(frozen=True)
class SegmentMark:
    name: str
    p0: tuple[float, float]
    p1: tuple[float, float]


@dataclass(frozen=True)
class ArcMark:
    name: str
    center: tuple[float, float]
    radius: float
    start_deg: float
    end_deg: float


@dataclass(frozen=True)
class FieldModel:
    length: float
    width: float
    key_points: dict[str, tuple[float, float]]
    segments: tuple[SegmentMark, ...] = ()
    arcs: tuple[ArcMark, ...] = ()

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("field dimensions must be positive")
        if len(set(self.key_points)) != len(self.key_points):
            raise ValueError("key point names must be unique")
        for name, (x, y) in self.key_points.items():
            self._check_inside(x, y, f"key point {name!r}")
        for seg in self.segments:
            self._check_inside(*seg.p0, f"segment {seg.name!r}")
            self._check_inside(*seg.p1, f"segment {seg.name!r}")
        for arc in self.arcs:
            for ang in np.linspace(arc.start_deg, arc.end_deg, 16):
                x = arc.center[0] + arc.radius * np.cos(np.radians(ang))
                y = arc.center[1] + arc.radius * np.sin(np.radians(ang))
                self._check_inside(x, y, f"arc {arc.name!r}")

    def _check_inside(self, x: float, y: float, what: str) -> None:
        tol = 1e-9
        if not (-tol <= x <= self.length + tol and -tol <= y <= self.width + tol):
            raise ValueError(f"{what} lies outside the field bounds: ({x}, {y})")

    def key_point_world(self, name: str) -> np.ndarray:
        """3D world coordinates (z = 0) of a named key point."""
        x, y = self.key_points[name]
        return np.array([x, y, 0.0])

    def corners(self) -> np.ndarray:
        """Field corner polygon (4, 2), counter-clockwise from the origin."""
        return np.array(
            [[0.0, 0.0], [self.length, 0.0], [self.length, self.width], [0.0, self.width]]
        )

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "width": self.width,
            "key_points": {k: list(v) for k, v in self.key_points.items()},
            "segments": [{"name": s.name, "p0": list(s.p0), "p1": list(s.p1)} for s in self.segments],
            "arcs": [
                {
                    "name": a.name,
                    "center": list(a.center),
                    "radius": a.radius,
                    "start_deg": a.start_deg,
                    "end_deg": a.end_deg,
                }
                for a in self.arcs
            ],
        }

    @staticmethod
    def from_dict(data: dict) -> "FieldModel":
        try:
            return FieldModel(
                length=float(data["length"]),
                width=float(data["width"]),
                key_points={str(k): (float(v[0]), float(v[1])) for k, v in data["key_points"].items()},
                segments=tuple(
                    SegmentMark(str(s["name"]), (float(s["p0"][0]), float(s["p0"][1])),
                                (float(s["p1"][0]), float(s["p1"][1])))
                    for s in data.get("segments", ())
                ),
                arcs=tuple(
                    ArcMark(str(a["name"]), (float(a["center"][0]), float(a["center"][1])),
                            float(a["radius"]), float(a["start_deg"]), float(a["end_deg"]))
                    for a in data.get("arcs", ())
                ),
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise ValueError(f"malformed field model: {exc!r}") from exc


def load_field(path) -> FieldModel:
    with open(path, "r", encoding="utf-8") as fh:
        return FieldModel.from_dict(json.load(fh))


def save_field(field: FieldModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(field.to_dict(), fh, indent=2)
        fh.write("\n")


def standard_field(length: float = 105.0, width: float = 68.0) -> FieldModel:
    """FIFA-standard pitch markings with named annotation key points."""
    cy = width / 2.0
    pa_depth, pa_half = 16.5, 40.32 / 2.0   # penalty area
    ga_depth, ga_half = 5.5, 18.32 / 2.0    # goal area
    pm = 11.0                               # penalty mark distance
    r = 9.15                                # centre circle / penalty arc radius

    key_points: dict[str, tuple[float, float]] = {
        "corner_left_bottom": (0.0, 0.0),
        "corner_left_top": (0.0, width),
        "corner_right_bottom": (length, 0.0),
        "corner_right_top": (length, width),
        "halfway_bottom": (length / 2.0, 0.0),
        "halfway_top": (length / 2.0, width),
        "center_mark": (length / 2.0, cy),
        "center_circle_bottom": (length / 2.0, cy - r),
        "center_circle_top": (length / 2.0, cy + r),
        "penalty_mark_left": (pm, cy),
        "penalty_mark_right": (length - pm, cy),
    }
    for side, x_goal, x_sign in (("left", 0.0, 1.0), ("right", length, -1.0)):
        x_pa = x_goal + x_sign * pa_depth
        x_ga = x_goal + x_sign * ga_depth
        key_points[f"penalty_{side}_goal_line_bottom"] = (x_goal, cy - pa_half)
        key_points[f"penalty_{side}_goal_line_top"] = (x_goal, cy + pa_half)
        key_points[f"penalty_{side}_front_bottom"] = (x_pa, cy - pa_half)
        key_points[f"penalty_{side}_front_top"] = (x_pa, cy + pa_half)
        key_points[f"goal_{side}_goal_line_bottom"] = (x_goal, cy - ga_half)
        key_points[f"goal_{side}_goal_line_top"] = (x_goal, cy + ga_half)
        key_points[f"goal_{side}_front_bottom"] = (x_ga, cy - ga_half)
        key_points[f"goal_{side}_front_top"] = (x_ga, cy + ga_half)
        # penalty arc meets the penalty area front line
        dy = np.sqrt(r**2 - (pa_depth - pm) ** 2)
        key_points[f"penalty_arc_{side}_bottom"] = (x_pa, cy - dy)
        key_points[f"penalty_arc_{side}_top"] = (x_pa, cy + dy)

    segments = [
        SegmentMark("touchline_bottom", (0.0, 0.0), (length, 0.0)),
        SegmentMark("touchline_top", (0.0, width), (length, width)),
        SegmentMark("goal_line_left", (0.0, 0.0), (0.0, width)),
        SegmentMark("goal_line_right", (length, 0.0), (length, width)),
        SegmentMark("halfway_line", (length / 2.0, 0.0), (length / 2.0, width)),
    ]
    for side, x_goal, x_sign in (("left", 0.0, 1.0), ("right", length, -1.0)):
        x_pa = x_goal + x_sign * pa_depth
        x_ga = x_goal + x_sign * ga_depth
        segments += [
            SegmentMark(f"penalty_{side}_bottom", (x_goal, cy - pa_half), (x_pa, cy - pa_half)),
            SegmentMark(f"penalty_{side}_top", (x_goal, cy + pa_half), (x_pa, cy + pa_half)),
            SegmentMark(f"penalty_{side}_front", (x_pa, cy - pa_half), (x_pa, cy + pa_half)),
            SegmentMark(f"goal_{side}_bottom", (x_goal, cy - ga_half), (x_ga, cy - ga_half)),
            SegmentMark(f"goal_{side}_top", (x_goal, cy + ga_half), (x_ga, cy + ga_half)),
            SegmentMark(f"goal_{side}_front", (x_ga, cy - ga_half), (x_ga, cy + ga_half)),
        ]

    arc_half = float(np.degrees(np.arccos((pa_depth - pm) / r)))
    arcs = [
        ArcMark("center_circle", (length / 2.0, cy), r, 0.0, 360.0),
        ArcMark("penalty_arc_left", (pm, cy), r, -arc_half, arc_half),
        ArcMark("penalty_arc_right", (length - pm, cy), r, 180.0 - arc_half, 180.0 + arc_half),
        ArcMark("corner_arc_left_bottom", (0.0, 0.0), 1.0, 0.0, 90.0),
        ArcMark("corner_arc_right_bottom", (length, 0.0), 1.0, 90.0, 180.0),
        ArcMark("corner_arc_right_top", (length, width), 1.0, 180.0, 270.0),
        ArcMark("corner_arc_left_top", (0.0, width), 1.0, 270.0, 360.0),
    ]
    return FieldModel(length, width, key_points, tuple(segments), tuple(arcs))


@dataclass(frozen=True)
class OverlayPolyline:
    """One projected marking fragment, vertices inside the image rectangle."""

    name: str
    points: np.ndarray  # (K, 2) pixels


def _clip_segment_to_rect(p0, p1, w, h):
    """Liang-Barsky clip of segment p0-p1 to [0, w] x [0, h]; None if outside."""
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for coord, lo, hi in ((0, 0.0, w), (1, 0.0, h)):
        if d[coord] == 0.0:
            if not lo <= p0[coord] <= hi:
                return None
            continue
        ta = (lo - p0[coord]) / d[coord]
        tb = (hi - p0[coord]) / d[coord]
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return None
    bounds_lo, bounds_hi = np.array([0.0, 0.0]), np.array([w, h])
    return (
        np.clip(p0 + t0 * d, bounds_lo, bounds_hi),
        np.clip(p0 + t1 * d, bounds_lo, bounds_hi),
    )


def _sample_primitive(prim, step: float) -> np.ndarray:
    if isinstance(prim, SegmentMark):
        p0 = np.asarray(prim.p0, dtype=float)
        p1 = np.asarray(prim.p1, dtype=float)
        n = max(int(np.ceil(np.linalg.norm(p1 - p0) / step)), 1)
        t = np.linspace(0.0, 1.0, n + 1)
        return p0 + t[:, None] * (p1 - p0)
    arc_len = abs(np.radians(prim.end_deg - prim.start_deg)) * prim.radius
    n = max(int(np.ceil(arc_len / step)), 4)
    ang = np.radians(np.linspace(prim.start_deg, prim.end_deg, n + 1))
    return np.stack(
        [prim.center[0] + prim.radius * np.cos(ang), prim.center[1] + prim.radius * np.sin(ang)],
        axis=1,
    )


def render_field_overlay(
    cam: PtzCamera, field: FieldModel, sample_step: float = 0.25
) -> list[OverlayPolyline]:
    """Project all marking primitives and clip them to the image rectangle.

    Each primitive is sampled at ``sample_step`` metres, projected, and cut
    into visible polyline fragments.  Every returned vertex lies inside
    [0, width] x [0, height]; the list is empty when nothing is visible.
    """
    if sample_step <= 0.0:
        raise ValueError("sample_step must be positive")
    w, h = cam.base.image_size
    overlay: list[OverlayPolyline] = []
    for prim in list(field.segments) + list(field.arcs):
        plane_pts = _sample_primitive(prim, sample_step)
        world = np.column_stack([plane_pts, np.zeros(len(plane_pts))])
        pixels, in_front = project_points(cam, world)
        current: list[np.ndarray] = []
        fragments: list[np.ndarray] = []

        def flush():
            if len(current) >= 2:
                fragments.append(np.array(current))
            current.clear()

        for i in range(len(pixels) - 1):
            if not (in_front[i] and in_front[i + 1]):
                flush()
                continue
            clipped = _clip_segment_to_rect(pixels[i], pixels[i + 1], float(w), float(h))
            if clipped is None:
                flush()
                continue
            a, b = clipped
            if not current:
                current.append(a)
            elif np.linalg.norm(current[-1] - a) > 1e-9:
                flush()
                current.append(a)
            current.append(b)
        flush()
        overlay.extend(OverlayPolyline(prim.name, frag) for frag in fragments)
    return overlay
