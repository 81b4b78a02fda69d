"""Synthetic waypoint generators standing in for surveyed road data.

Every generator returns a dense ``(n, 2)`` polyline (spacing ``step``) that is
then resampled and fitted like measured waypoints. Closed tracks are driven
counter-clockwise, so their turns are left turns (positive curvature).
"""
from __future__ import annotations

import math

import numpy as np

from ..road_map import RoadMap, fit_waypoints

# campus stand-in: a rounded rectangle with one turn of each benchmark radius
CAMPUS_WIDTH = 140.0
CAMPUS_HEIGHT = 90.0
CAMPUS_RADII = (9.2, 5.3, 8.0, 7.0)


def _arc(cx, cy, r, a0, a1, step):
    n = max(2, int(math.ceil(abs(a1 - a0) * r / step)) + 1)
    a = np.linspace(a0, a1, n)
    return np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a)])


def _line(p0, p1, step):
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    n = max(2, int(math.ceil(np.hypot(*(p1 - p0)) / step)) + 1)
    f = np.linspace(0.0, 1.0, n)[:, None]
    return p0 + f * (p1 - p0)


def _join(pieces):
    out = [pieces[0]]
    for p in pieces[1:]:
        out.append(p[1:])
    return np.vstack(out)


def straight_points(length: float = 500.0, step: float = 0.5) -> np.ndarray:
    if not length > 0:
        raise ValueError("straight track length must be positive")
    return _line((0.0, 0.0), (length, 0.0), step)


def circle_points(radius: float = 10.0, step: float = 0.05) -> np.ndarray:
    """Counter-clockwise circle starting at ``(R, 0)``; first point not repeated."""
    if not radius > 0:
        raise ValueError("circle radius must be positive")
    n = max(8, int(math.ceil(2.0 * math.pi * radius / step)))
    a = np.arange(n) * (2.0 * math.pi / n)
    return np.column_stack([radius * np.cos(a), radius * np.sin(a)])


def rounded_rectangle_points(width: float, height: float, radii, step: float = 0.25) -> np.ndarray:
    """Closed rectangle with corner radii ``(bottom-right, top-right, top-left, bottom-left)``.

    The track starts at the middle of the bottom straight heading ``+x``.
    """
    r1, r2, r3, r4 = radii
    if min(radii) <= 0:
        raise ValueError("corner radii must be positive")
    if r1 + r4 >= width or r2 + r3 >= width or r1 + r2 >= height or r3 + r4 >= height:
        raise ValueError("corner radii do not fit the rectangle")
    w, h = width, height
    pieces = [
        _line((w / 2, 0.0), (w - r1, 0.0), step),
        _arc(w - r1, r1, r1, -math.pi / 2, 0.0, step),
        _line((w, r1), (w, h - r2), step),
        _arc(w - r2, h - r2, r2, 0.0, math.pi / 2, step),
        _line((w - r2, h), (r3, h), step),
        _arc(r3, h - r3, r3, math.pi / 2, math.pi, step),
        _line((0.0, h - r3), (0.0, r4), step),
        _arc(r4, r4, r4, math.pi, 1.5 * math.pi, step),
        _line((r4, 0.0), (w / 2, 0.0), step),
    ]
    return _join(pieces)[:-1]


def oval_points(radius: float = 20.0, straight: float = 100.0, step: float = 0.25) -> np.ndarray:
    """Stadium: two straights of length ``straight`` joined by half circles."""
    if not (radius > 0 and straight > 0):
        raise ValueError("oval radius and straight length must be positive")
    r, L = radius, straight
    pieces = [
        _line((0.0, 0.0), (L / 2, 0.0), step),
        _arc(L / 2, r, r, -math.pi / 2, math.pi / 2, step),
        _line((L / 2, 2 * r), (-L / 2, 2 * r), step),
        _arc(-L / 2, r, r, math.pi / 2, 1.5 * math.pi, step),
        _line((-L / 2, 0.0), (0.0, 0.0), step),
    ]
    return _join(pieces)[:-1]


def campus_points(step: float = 0.25) -> np.ndarray:
    return rounded_rectangle_points(CAMPUS_WIDTH, CAMPUS_HEIGHT, CAMPUS_RADII, step)


def campus_turns() -> dict[str, tuple[float, float, float]]:
    """``name -> (s_entry, s_exit, radius)`` of the two benchmark turns on the exact geometry."""
    w, h = CAMPUS_WIDTH, CAMPUS_HEIGHT
    r1, r2, _, _ = CAMPUS_RADII
    s1 = w / 2 - r1
    e1 = s1 + 0.5 * math.pi * r1
    s2 = e1 + (h - r1 - r2)
    e2 = s2 + 0.5 * math.pi * r2
    return {"turn1": (s1, e1, r1), "turn2": (s2, e2, r2)}


GENERATORS = {
    "straight": (straight_points, False),
    "circle": (circle_points, True),
    "oval": (oval_points, True),
    "campus": (lambda: campus_points(), True),
}


def synthetic_points(name: str, **params) -> tuple[np.ndarray, bool]:
    """Waypoints of a named generator and whether the track is closed."""
    try:
        gen, cyclic = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown track generator {name!r}; choose from {sorted(GENERATORS)}") from None
    return gen(**params), cyclic


def synthetic_map(name: str, ds: float = 4.0, b_yl: float = -1.75, b_yh: float = 1.75,
                  **params) -> RoadMap:
    pts, cyclic = synthetic_points(name, **params)
    return fit_waypoints(pts, ds, cyclic=cyclic, b_yl=b_yl, b_yh=b_yh)
