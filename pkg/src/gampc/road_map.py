"""Road centerline as a piecewise Cubic Hermite Spline over traveled distance.

The curvilinear abscissa ``s`` is the cumulative chord length of the spline
control points, so ``t(s)`` is affine inside each segment. Lateral offset
``y`` is positive to the left of the driving direction.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

DEFAULT_HALF_WIDTH = 1.75

# column layout of the packed segment table consumed by the kernels
_S0, _H, _P0X, _P0Y, _P1X, _P1Y, _D0X, _D0Y, _D1X, _D1Y = range(10)


class MapError(ValueError):
    """Base class for road geometry errors."""


class MapDomainError(MapError):
    """Abscissa outside the range covered by a segment or map."""


class GeometryError(MapError):
    """Degenerate geometry, e.g. a vanishing tangent."""


class FitError(MapError):
    """The tangent least-squares problem is rank deficient."""


@dataclass(frozen=True)
class HermiteSegment:
    s_start: float
    s_end: float
    p0: tuple[float, float]
    p1: tuple[float, float]
    d0: tuple[float, float]
    d1: tuple[float, float]

    def __post_init__(self):
        if not self.s_end > self.s_start:
            raise MapError(f"segment [{self.s_start}, {self.s_end}] has non-positive length")

    @property
    def length(self) -> float:
        return self.s_end - self.s_start


@dataclass(frozen=True)
class RoadPose:
    theta_c: float
    theta_c_prime: float
    X: float
    Y: float


def hermite_basis(t):
    """Return (H00, H10, H01, H11) evaluated at ``t`` (scalar or array)."""
    t2 = t * t
    t3 = t2 * t
    return (2 * t3 - 3 * t2 + 1, t3 - 2 * t2 + t, -2 * t3 + 3 * t2, t3 - t2)


def _segment_t(seg: HermiteSegment, s: float) -> float:
    if not seg.s_start <= s <= seg.s_end:
        raise MapDomainError(
            f"s={s} outside segment [{seg.s_start}, {seg.s_end}]"
        )
    return (s - seg.s_start) / seg.length


def hermite_eval(seg: HermiteSegment, s: float) -> np.ndarray:
    t = _segment_t(seg, s)
    h00, h10, h01, h11 = hermite_basis(t)
    return (h00 * np.asarray(seg.p0) + h10 * np.asarray(seg.d0)
            + h01 * np.asarray(seg.p1) + h11 * np.asarray(seg.d1))


def hermite_derivatives(seg: HermiteSegment, s: float) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivative of the segment w.r.t. ``s``.

    The tangents are stored per unit ``t``; the chain rule through the affine
    map ``t = (s - s_start) / length`` divides by ``length`` once per order.
    """
    t = _segment_t(seg, s)
    h = seg.length
    p0, p1, d0, d1 = (np.asarray(v, dtype=float) for v in (seg.p0, seg.p1, seg.d0, seg.d1))
    dt = (6 * t * t - 6 * t) * p0 + (3 * t * t - 4 * t + 1) * d0 \
        + (-6 * t * t + 6 * t) * p1 + (3 * t * t - 2 * t) * d1
    ddt = (12 * t - 6) * p0 + (6 * t - 4) * d0 + (-12 * t + 6) * p1 + (6 * t - 2) * d1
    return dt / h, ddt / (h * h)


# ---------------------------------------------------------------------------
# compiled evaluation, shared by the planner rollouts and the plant
# ---------------------------------------------------------------------------

@njit(cache=True)
def wrap_angle(a):
    """Map an angle to (-pi, pi]."""
    if -math.pi < a <= math.pi:
        return a
    return math.pi - (math.pi - a) % (2.0 * math.pi)


@njit(cache=True)
def road_eval(seg, total, cyclic, s):
    """Centerline (X, Y, theta_c, kappa, X', Y') at abscissa ``s``.

    Cyclic maps wrap ``s``; open maps are continued by straight lines beyond
    both ends so that planner rollouts never leave the domain.
    """
    n = seg.shape[0]
    extra = 0.0
    if cyclic:
        s = s % total
        j = np.searchsorted(seg[:, _S0], s, side="right") - 1
    elif s < 0.0:
        extra = s
        s = 0.0
        j = 0
    elif s > total:
        extra = s - total
        s = total
        j = n - 1
    else:
        j = np.searchsorted(seg[:, _S0], s, side="right") - 1
    if j < 0:
        j = 0
    if j > n - 1:
        j = n - 1
    h = seg[j, _H]
    t = (s - seg[j, _S0]) / h
    if t > 1.0:
        t = 1.0
    t2 = t * t
    t3 = t2 * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    g00 = 6 * t2 - 6 * t
    g10 = 3 * t2 - 4 * t + 1
    g01 = -6 * t2 + 6 * t
    g11 = 3 * t2 - 2 * t
    x = h00 * seg[j, _P0X] + h10 * seg[j, _D0X] + h01 * seg[j, _P1X] + h11 * seg[j, _D1X]
    y = h00 * seg[j, _P0Y] + h10 * seg[j, _D0Y] + h01 * seg[j, _P1Y] + h11 * seg[j, _D1Y]
    dx = (g00 * seg[j, _P0X] + g10 * seg[j, _D0X] + g01 * seg[j, _P1X] + g11 * seg[j, _D1X]) / h
    dy = (g00 * seg[j, _P0Y] + g10 * seg[j, _D0Y] + g01 * seg[j, _P1Y] + g11 * seg[j, _D1Y]) / h
    theta = math.atan2(dy, dx)
    if theta <= -math.pi:
        theta = math.pi
    norm2 = dx * dx + dy * dy
    if extra != 0.0:
        inv = 1.0 / math.sqrt(norm2)
        return x + extra * dx * inv, y + extra * dy * inv, theta, 0.0, dx, dy
    k00 = 12 * t - 6
    k10 = 6 * t - 4
    k01 = -12 * t + 6
    k11 = 6 * t - 2
    ddx = (k00 * seg[j, _P0X] + k10 * seg[j, _D0X] + k01 * seg[j, _P1X] + k11 * seg[j, _D1X]) / (h * h)
    ddy = (k00 * seg[j, _P0Y] + k10 * seg[j, _D0Y] + k01 * seg[j, _P1Y] + k11 * seg[j, _D1Y]) / (h * h)
    if norm2 == 0.0:
        return x, y, theta, 0.0, dx, dy
    kappa = (dx * ddy - dy * ddx) / (norm2 * math.sqrt(norm2))
    return x, y, theta, kappa, dx, dy


class RoadMap:
    """Immutable chain of contiguous Hermite segments plus lane bounds."""

    def __init__(self, segments, b_yl=-DEFAULT_HALF_WIDTH, b_yh=DEFAULT_HALF_WIDTH,
                 cyclic=False):
        segments = list(segments)
        if not segments:
            raise MapError("a road map needs at least one segment")
        for a, b in zip(segments, segments[1:]):
            if a.s_end != b.s_start:
                raise MapError(f"segments not contiguous at s={a.s_end} / {b.s_start}")
        if not b_yl < 0 < b_yh:
            raise MapError(f"lateral bounds must satisfy b_yl < 0 < b_yh, got ({b_yl}, {b_yh})")
        self.b_yl = float(b_yl)
        self.b_yh = float(b_yh)
        self.cyclic = bool(cyclic)
        if segments[0].s_start != 0.0:
            raise MapError("the first segment must start at s=0")
        table = np.empty((len(segments), 10))
        for i, sg in enumerate(segments):
            table[i] = (sg.s_start, sg.length, *sg.p0, *sg.p1, *sg.d0, *sg.d1)
        table.setflags(write=False)
        self._table = table
        self._segments = tuple(segments)
        self.total_length = float(segments[-1].s_end)

    @property
    def segments(self) -> tuple[HermiteSegment, ...]:
        return self._segments

    @property
    def table(self) -> np.ndarray:
        """Packed (n, 10) segment table for the compiled kernels."""
        return self._table

    def __len__(self):
        return len(self._segments)

    def _check_range(self, s):
        if self.cyclic:
            return
        if not 0.0 <= s <= self.total_length:
            raise MapDomainError(f"s={s} outside map range [0, {self.total_length}]")

    def evaluate(self, s: float):
        """Return ``(X, Y, theta_c, kappa, X', Y')`` with no range check."""
        return road_eval(self._table, self.total_length, self.cyclic, float(s))

    def pose(self, s: float) -> RoadPose:
        return road_pose(self, s)

    def position(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.array([self.evaluate(v)[:2] for v in s])
        return out

    def sample(self, n: int = 2000) -> tuple[np.ndarray, np.ndarray]:
        """``n`` abscissae spread over the map and their centerline points."""
        s = np.linspace(0.0, self.total_length, n, endpoint=not self.cyclic)
        return s, self.position(s)

    def project(self, X: float, Y: float) -> tuple[float, float]:
        """Exact projection of a global point onto the centerline: ``(s, y)``."""
        s_grid, pts = self.sample(max(400, 20 * len(self)))
        i = int(np.argmin(np.hypot(pts[:, 0] - X, pts[:, 1] - Y)))
        s = float(s_grid[i])
        q = np.array([X, Y])
        for _ in range(30):
            x, y, _, kappa, dx, dy = self.evaluate(s)
            g = np.array([dx, dy])
            r = np.array([x, y]) - q
            # second derivative from curvature, tangent and speed
            speed2 = dx * dx + dy * dy
            normal = np.array([-dy, dx]) / math.sqrt(speed2)
            dd = kappa * speed2 * normal
            f = r @ g
            fp = g @ g + r @ dd
            step = f / fp
            s -= step
            if not self.cyclic:
                s = min(max(s, 0.0), self.total_length)
            if abs(step) < 1e-13:
                break
        x, y, _, _, dx, dy = self.evaluate(s)
        lat = (dx * (Y - y) - dy * (X - x)) / math.hypot(dx, dy)
        if self.cyclic:
            s = s % self.total_length
        return s, lat

    # -- persistence ---------------------------------------------------------

    def dump(self, path) -> None:
        """Write the segment table as JSON (float repr round-trips bit-exactly)."""
        doc = {
            "format": "gampc-road-map/1",
            "cyclic": self.cyclic,
            "b_yl": self.b_yl,
            "b_yh": self.b_yh,
            "segments": [
                {"s_start": sg.s_start, "s_end": sg.s_end, "p0": list(sg.p0),
                 "p1": list(sg.p1), "d0": list(sg.d0), "d1": list(sg.d1)}
                for sg in self._segments
            ],
        }
        Path(path).write_text(json.dumps(doc, indent=1))

    @classmethod
    def load(cls, path) -> RoadMap:
        doc = json.loads(Path(path).read_text())
        segs = [HermiteSegment(r["s_start"], r["s_end"], tuple(r["p0"]), tuple(r["p1"]),
                               tuple(r["d0"]), tuple(r["d1"])) for r in doc["segments"]]
        return cls(segs, b_yl=doc["b_yl"], b_yh=doc["b_yh"], cyclic=doc["cyclic"])


def road_pose(road: RoadMap, s: float) -> RoadPose:
    road._check_range(s)
    x, y, theta, kappa, dx, dy = road.evaluate(s)
    if math.hypot(dx, dy) < 1e-9:
        raise GeometryError(f"degenerate tangent at s={s}")
    return RoadPose(theta_c=theta, theta_c_prime=kappa, X=x, Y=y)


def curvilinear_to_global(road: RoadMap, s: float, y: float, psi: float):
    """Global ``(X, Y, heading)`` of a point given in road coordinates."""
    road._check_range(s)
    xc, yc, theta, _, _, _ = road.evaluate(s)
    return xc - y * math.sin(theta), yc + y * math.cos(theta), psi


# ---------------------------------------------------------------------------
# construction from waypoints
# ---------------------------------------------------------------------------

def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) array of planar points, got shape {pts.shape}")
    return pts


def _open_loop(pts: np.ndarray, cyclic: bool) -> np.ndarray:
    # a closed track given with a repeated first point is treated as open data
    if cyclic and len(pts) > 2 and np.allclose(pts[0], pts[-1]):
        return pts[:-1]
    return pts


def chord_lengths(pts: np.ndarray, cyclic: bool = False) -> np.ndarray:
    """Cumulative chord length; for cyclic input the closing chord is appended."""
    if cyclic:
        pts = np.vstack([pts, pts[:1]])
    return np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])


def resample_waypoints(points, ds: float, cyclic: bool = False) -> np.ndarray:
    """Pick points every ``ds`` of traveled distance along the polyline.

    The first point is kept. On open data a remainder of at least ``ds / 2``
    gets its own final point; a shorter one is absorbed by moving the last
    sample onto the end point. On cyclic data a closing chord shorter than
    ``ds / 2`` is absorbed by dropping the last sample.
    """
    pts = _as_points(points)
    if len(pts) < 2:
        raise ValueError("need at least two waypoints to resample")
    if not ds > 0:
        raise ValueError(f"ds must be positive, got {ds}")
    pts = _open_loop(pts, cyclic)
    c = chord_lengths(pts, cyclic)
    total = c[-1]
    if total <= 0:
        raise ValueError("waypoints have zero total length")
    targets = np.arange(0.0, total + 1e-9 * total, ds)
    remainder = total - targets[-1]
    if cyclic:
        if remainder < 0.5 * ds and len(targets) > 3:
            targets = targets[:-1]
        loop = np.vstack([pts, pts[:1]])
    else:
        loop = pts
        if remainder >= 0.5 * ds:
            targets = np.append(targets, total)
        elif remainder > 1e-9 * total:
            targets[-1] = total
    return np.column_stack([np.interp(targets, c, loop[:, 0]), np.interp(targets, c, loop[:, 1])])


def _polyline_params(ctrl: np.ndarray, raw: np.ndarray, raw_c: np.ndarray, cyclic: bool):
    """Cumulative raw-chord parameter of each control point (monotone match)."""
    loop = np.vstack([raw, raw[:1]]) if cyclic else raw
    a = loop[:-1]
    b = loop[1:]
    ab = b - a
    len2 = np.einsum("ij,ij->i", ab, ab)
    len2[len2 == 0] = 1.0
    params = np.empty(len(ctrl))
    lo = 0.0
    for i, p in enumerate(ctrl):
        u = np.clip(np.einsum("ij,ij->i", p - a, ab) / len2, 0.0, 1.0)
        proj = a + u[:, None] * ab
        d = np.hypot(*(proj - p).T)
        cand = raw_c[:-1] + u * np.sqrt(len2)
        d = np.where(cand >= lo - 1e-9, d, np.inf)
        k = int(np.argmin(d))
        params[i] = cand[k]
        lo = params[i]
    return params


def fit_tangents(control_points, raw_points, cyclic: bool = False,
                 b_yl: float = -DEFAULT_HALF_WIDTH, b_yh: float = DEFAULT_HALF_WIDTH) -> RoadMap:
    """Least-squares tangents for a CHS through ``control_points``.

    Each raw point is tied once to a segment and a local parameter through its
    cumulative chord position; the curve is linear in the per-point tangents,
    so both coordinates are solved as one linear least-squares problem.
    """
    ctrl = _open_loop(_as_points(control_points), cyclic)
    raw = _open_loop(_as_points(raw_points), cyclic)
    n = len(ctrl)
    if n < 2 or (cyclic and n < 3):
        raise FitError("not enough control points")
    s_knots = chord_lengths(ctrl, cyclic)
    h = np.diff(s_knots)
    if np.any(h <= 1e-12):
        raise FitError("duplicate consecutive control points")
    n_seg = len(h)
    raw_c = chord_lengths(raw, cyclic)
    knots_c = _polyline_params(ctrl, raw, raw_c, cyclic)
    if cyclic:
        knots_c = np.append(knots_c, raw_c[-1])
    pts_c = raw_c[:-1] if cyclic else raw_c

    j = np.clip(np.searchsorted(knots_c, pts_c, side="right") - 1, 0, n_seg - 1)
    t = np.clip((pts_c - knots_c[j]) / (knots_c[j + 1] - knots_c[j]), 0.0, 1.0)
    nxt = (j + 1) % n
    h00, h10, h01, h11 = hermite_basis(t)

    # unknown: per-point tangent dp/ds; the segment tangent is length * dp/ds
    A = np.zeros((len(raw), n))
    rows = np.arange(len(raw))
    np.add.at(A, (rows, j), h[j] * h10)
    np.add.at(A, (rows, nxt), h[j] * h11)
    rhs = raw - h00[:, None] * ctrl[j] - h01[:, None] * ctrl[nxt]
    sol, _, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < n:
        raise FitError(f"tangent system rank {rank} < {n}; raw points do not cover every segment")
    return build_map(ctrl, sol, cyclic=cyclic, b_yl=b_yl, b_yh=b_yh)


def build_map(points, tangents, cyclic=False, b_yl=-DEFAULT_HALF_WIDTH, b_yh=DEFAULT_HALF_WIDTH):
    """Assemble a C1 map from control points and tangents expressed per unit ``s``."""
    pts = np.asarray(points, dtype=float)
    m = np.asarray(tangents, dtype=float)
    s_knots = chord_lengths(pts, cyclic)
    n_seg = len(s_knots) - 1
    segs = []
    for i in range(n_seg):
        k = (i + 1) % len(pts)
        hi = s_knots[i + 1] - s_knots[i]
        segs.append(HermiteSegment(
            float(s_knots[i]), float(s_knots[i + 1]),
            (float(pts[i, 0]), float(pts[i, 1])), (float(pts[k, 0]), float(pts[k, 1])),
            (float(hi * m[i, 0]), float(hi * m[i, 1])), (float(hi * m[k, 0]), float(hi * m[k, 1])),
        ))
    return RoadMap(segs, b_yl=b_yl, b_yh=b_yh, cyclic=cyclic)


def finite_difference_tangents(points, cyclic=False) -> np.ndarray:
    """Central-difference (Catmull-Rom style) tangents per unit chord length."""
    pts = np.asarray(points, dtype=float)
    if cyclic:
        prev, nxt = np.roll(pts, 1, axis=0), np.roll(pts, -1, axis=0)
    else:
        prev = np.vstack([pts[:1], pts[:-1]])
        nxt = np.vstack([pts[1:], pts[-1:]])
    span = np.hypot(*(nxt - prev).T)
    return (nxt - prev) / span[:, None]


def fit_waypoints(points, ds: float, cyclic: bool = False, **bounds) -> RoadMap:
    ctrl = resample_waypoints(points, ds, cyclic)
    return fit_tangents(ctrl, points, cyclic=cyclic, **bounds)


def hausdorff_distance(road: RoadMap, points, samples_per_segment: int = 200) -> float:
    """Two-sided Hausdorff distance between the curve and a polyline through ``points``.

    The curve is sampled densely and both sides are measured as point to
    polyline distances, so the result does not depend on vertex spacing.
    """
    pts = _as_points(points)
    _, curve = road.sample(samples_per_segment * len(road))
    if road.cyclic:
        curve = np.vstack([curve, curve[:1]])
        loop = np.vstack([pts, pts[:1]])
    else:
        loop = pts
    d_pts = point_polyline_distance(pts, curve)
    d_curve = point_polyline_distance(curve, loop)
    return float(max(d_pts.max(), d_curve.max()))


def point_polyline_distance(query, poly) -> np.ndarray:
    """Distance of each query point to the polyline ``poly``.

    The nearest vertex is found with a KD-tree; the true distance is then the
    smaller of the distances to the two edges adjacent to that vertex.
    """
    q = np.asarray(query, dtype=float)
    poly = np.asarray(poly, dtype=float)
    _, i = cKDTree(poly).query(q)
    best = np.hypot(*(poly[i] - q).T)
    n = len(poly)
    closed = n > 2 and np.array_equal(poly[0], poly[-1])
    for lo in (i - 1, i):
        if closed:
            # the duplicated end vertex joins the last and the first edge
            lo = np.where(lo < 0, n - 2, np.where(lo >= n - 1, 0, lo))
        ok = (lo >= 0) & (lo < n - 1)
        a = poly[np.clip(lo, 0, n - 2)]
        b = poly[np.clip(lo + 1, 1, n - 1)]
        ab = b - a
        len2 = np.einsum("ij,ij->i", ab, ab)
        u = np.clip(np.einsum("ij,ij->i", q - a, ab) / np.where(len2 > 0, len2, 1.0), 0.0, 1.0)
        d = np.hypot(*(a + u[:, None] * ab - q).T)
        best = np.where(ok, np.minimum(best, d), best)
    return best


def read_points_file(path):
    """Parse a waypoint file: optional ``key=value`` header line, then ``X Y`` rows.

    Returns ``(points, header)`` where ``header`` maps keys to strings.
    """
    header = {}
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            if rows:
                raise ValueError(f"{path}:{lineno}: header must precede the points")
            for tok in line.replace(",", " ").split():
                key, _, val = tok.partition("=")
                header[key.strip()] = val.strip()
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'X Y', got {line!r}")
        rows.append((float(parts[0]), float(parts[1])))
    return np.array(rows, dtype=float).reshape(-1, 2), header


def load_map_file(path, ds: float | None = None, cyclic: bool | None = None,
                  b_yl: float = -DEFAULT_HALF_WIDTH, b_yh: float = DEFAULT_HALF_WIDTH) -> RoadMap:
    """Read raw waypoints, resample them every ``ds`` metres and fit tangents.

    ``ds`` and ``cyclic`` fall back to the file header (``ds=4 cyclic=1``),
    then to 4 m and open.
    """
    pts, header = read_points_file(path)
    if ds is None:
        ds = float(header.get("ds", 4.0))
    if cyclic is None:
        cyclic = header.get("cyclic", "0").lower() in ("1", "true", "yes")
    return fit_waypoints(pts, ds, cyclic=cyclic, b_yl=b_yl, b_yh=b_yh)
