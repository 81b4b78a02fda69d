"""Elliptical obstacles in road coordinates and the parallel-line distance.

Distances are measured in the curvilinear ``(s, y)`` plane, treating it as
Euclidean. The approximate gap between two ellipses is the smallest gap along
five parallel lines: the line through both centers plus two offsets on each
side at 1/3 and 2/3 of a reference semi-axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .road_map import wrap_angle

# packed obstacle row layout: s, y, theta, v_s, v_y, a, b
O_S, O_Y, O_TH, O_VS, O_VY, O_A, O_B = range(7)


@dataclass(frozen=True)
class Obstacle:
    s_obs: float
    y_obs: float
    theta_obs: float = 0.0
    v_s: float = 0.0
    v_y: float = 0.0
    a: float = 2.0
    b: float = 1.0

    def __post_init__(self):
        if not self.a >= self.b > 0:
            raise ValueError(f"obstacle semi-axes must satisfy a >= b > 0, got a={self.a}, b={self.b}")

    def as_row(self) -> tuple:
        return (self.s_obs, self.y_obs, self.theta_obs, self.v_s, self.v_y, self.a, self.b)


@dataclass(frozen=True)
class EllipsePose:
    center: tuple[float, float]
    heading: float
    semi_major: float
    semi_minor: float

    def __post_init__(self):
        if not (self.semi_major > 0 and self.semi_minor > 0):
            raise ValueError("ellipse semi-axes must be positive")


def obstacle_array(obstacles) -> np.ndarray:
    """Pack obstacles into an ``(n, 7)`` float array for the kernels."""
    rows = [o.as_row() for o in obstacles]
    return np.array(rows, dtype=float).reshape(-1, 7)


def predict_obstacle(o: Obstacle, k: int, dt: float) -> EllipsePose:
    """Constant-velocity prediction ``k`` steps of ``dt`` ahead."""
    if k < 0:
        raise ValueError("prediction step must be non-negative")
    return EllipsePose((o.s_obs + o.v_s * k * dt, o.y_obs + o.v_y * k * dt),
                       o.theta_obs, o.a, o.b)


def ego_ellipse(s: float, y: float, psi: float, theta_c: float,
                length: float = 4.0, width: float = 1.9) -> EllipsePose:
    """Vehicle footprint ellipse, aligned with the heading relative to the road."""
    return EllipsePose((s, y), wrap_angle(psi - theta_c), length / 2.0, width / 2.0)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _line_hits(cx, cy, h, a, b, px, py, ux, uy):
    """Parameters ``t`` where ``p + t*u`` crosses the ellipse; ``ok`` flags a hit."""
    ch = math.cos(h)
    sh = math.sin(h)
    dx = px - cx
    dy = py - cy
    # line expressed in the ellipse's own axes
    qx = ch * dx + sh * dy
    qy = -sh * dx + ch * dy
    vx = ch * ux + sh * uy
    vy = -sh * ux + ch * uy
    A = vx * vx / (a * a) + vy * vy / (b * b)
    B = 2.0 * (qx * vx / (a * a) + qy * vy / (b * b))
    C = qx * qx / (a * a) + qy * qy / (b * b) - 1.0
    disc = B * B - 4.0 * A * C
    if disc < 0.0:
        return False, 0.0, 0.0
    r = math.sqrt(disc)
    # numerically stable pair of roots
    if B >= 0.0:
        q = -0.5 * (B + r)
    else:
        q = -0.5 * (B - r)
    if q == 0.0:
        return True, 0.0, 0.0
    t1 = q / A
    t2 = C / q
    if t1 > t2:
        t1, t2 = t2, t1
    return True, t1, t2


@njit(cache=True)
def _semi_diameter(h, a, b, ux, uy):
    """Half chord of a centered ellipse along direction ``u``."""
    c = math.cos(h) * ux + math.sin(h) * uy
    s = -math.sin(h) * ux + math.cos(h) * uy
    return a * b / math.sqrt((b * c) ** 2 + (a * s) ** 2)


@njit(cache=True)
def _chord(q0x, q0y, nx, ny, vx, vy, ia2, ib2, quad_a, off):
    """Entry/exit parameters of the offset line in an ellipse's local frame."""
    qx = q0x + off * nx
    qy = q0y + off * ny
    B = 2.0 * (qx * vx * ia2 + qy * vy * ib2)
    C = qx * qx * ia2 + qy * qy * ib2 - 1.0
    disc = B * B - 4.0 * quad_a * C
    if disc < 0.0:
        return False, 0.0, 0.0
    r = math.sqrt(disc)
    if B >= 0.0:
        q = -0.5 * (B + r)
    else:
        q = -0.5 * (B - r)
    if q == 0.0:
        return True, 0.0, 0.0
    t1 = q / quad_a
    t2 = C / q
    if t1 > t2:
        return True, t2, t1
    return True, t1, t2


@njit(cache=True)
def ellipse_distance(x1, y1, h1, a1, b1, x2, y2, h2, a2, b2):
    """Approximate gap between two ellipses; 0 when they interpenetrate."""
    # canonical argument order makes the result exactly symmetric
    if (x2, y2, h2, a2, b2) < (x1, y1, h1, a1, b1):
        x1, y1, h1, a1, b1, x2, y2, h2, a2, b2 = x2, y2, h2, a2, b2, x1, y1, h1, a1, b1
    dx = x2 - x1
    dy = y2 - y1
    d = math.hypot(dx, dy)
    if d < 1e-12:
        return 0.0
    ux = dx / d
    uy = dy / d
    c1 = math.cos(h1)
    s1 = math.sin(h1)
    c2 = math.cos(h2)
    s2 = math.sin(h2)
    # center-line direction and its normal in each ellipse frame
    v1x = c1 * ux + s1 * uy
    v1y = -s1 * ux + c1 * uy
    v2x = c2 * ux + s2 * uy
    v2y = -s2 * ux + c2 * uy
    w1 = b1 if abs(v1x) >= abs(v1y) else a1
    w2 = b2 if abs(v2x) >= abs(v2y) else a2
    w = min(w1, w2)
    ia1 = 1.0 / (a1 * a1)
    ib1 = 1.0 / (b1 * b1)
    ia2 = 1.0 / (a2 * a2)
    ib2 = 1.0 / (b2 * b2)
    qa1 = v1x * v1x * ia1 + v1y * v1y * ib1
    qa2 = v2x * v2x * ia2 + v2y * v2y * ib2
    # lines are parametrized from center 1; normal n = (-uy, ux) maps to (-v.y, v.x)
    q2x = -(c2 * dx + s2 * dy)
    q2y = -(-s2 * dx + c2 * dy)
    best = math.inf
    for m in range(-2, 3):
        off = m * w / 3.0
        ok1, e1s, e1e = _chord(0.0, 0.0, -v1y, v1x, v1x, v1y, ia1, ib1, qa1, off)
        if not ok1:
            continue
        ok2, e2s, e2e = _chord(q2x, q2y, -v2y, v2x, v2x, v2y, ia2, ib2, qa2, off)
        if not ok2:
            continue
        if e1e >= e2s and e2e >= e1s:
            return 0.0
        if e2s > e1e:
            gap = e2s - e1e
        else:
            gap = e1s - e2e
        if gap < best:
            best = gap
    if best == math.inf:
        best = d - _semi_diameter(h1, a1, b1, ux, uy) - _semi_diameter(h2, a2, b2, ux, uy)
        if best < 0.0:
            best = 0.0
    return best


@njit(cache=True)
def obstacle_gap(s_ego, y_ego, heading_ego, a_ego, b_ego, obs, i, t, track_length):
    """Gap between the ego ellipse and obstacle row ``i`` predicted ``t`` seconds ahead.

    With ``track_length > 0`` the longitudinal offset is wrapped to the
    nearest image on the closed track.
    """
    so = obs[i, O_S] + obs[i, O_VS] * t
    yo = obs[i, O_Y] + obs[i, O_VY] * t
    ds = so - s_ego
    if track_length > 0.0:
        ds = ds - track_length * math.floor(ds / track_length + 0.5)
    return ellipse_distance(0.0, y_ego, heading_ego, a_ego, b_ego,
                            ds, yo, obs[i, O_TH], obs[i, O_A], obs[i, O_B])


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def ellipse_line_intersections(e: EllipsePose, point, direction) -> list[np.ndarray]:
    """Points where the line ``point + t * direction`` meets the ellipse boundary."""
    ux, uy = float(direction[0]), float(direction[1])
    if ux == 0.0 and uy == 0.0:
        raise ValueError("line direction must be non-zero")
    px, py = float(point[0]), float(point[1])
    ok, t1, t2 = _line_hits(e.center[0], e.center[1], e.heading, e.semi_major, e.semi_minor,
                            px, py, ux, uy)
    if not ok:
        return []
    pts = [np.array([px + t1 * ux, py + t1 * uy])]
    if t2 != t1:
        pts.append(np.array([px + t2 * ux, py + t2 * uy]))
    return pts


def relative_distance(ego: EllipsePose, obs: EllipsePose) -> float:
    return ellipse_distance(ego.center[0], ego.center[1], ego.heading, ego.semi_major, ego.semi_minor,
                            obs.center[0], obs.center[1], obs.heading, obs.semi_major, obs.semi_minor)


def boundary_points(e: EllipsePose, n: int = 2000) -> np.ndarray:
    """``n`` points evenly spaced in parameter angle along the ellipse boundary."""
    phi = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    local = np.column_stack([e.semi_major * np.cos(phi), e.semi_minor * np.sin(phi)])
    c, s = math.cos(e.heading), math.sin(e.heading)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.asarray(e.center)
