import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gampc.obstacles import (
    EllipsePose,
    Obstacle,
    ego_ellipse,
    ellipse_line_intersections,
    obstacle_array,
    obstacle_gap,
    predict_obstacle,
    relative_distance,
)
from oracles import dense_ellipse_distance, random_ellipse_pair


def circle(x, y, r=1.0):
    return EllipsePose((x, y), 0.0, r, r)


poses = st.builds(
    EllipsePose,
    center=st.tuples(st.floats(-10, 10), st.floats(-10, 10)),
    heading=st.floats(-math.pi, math.pi),
    semi_major=st.floats(0.5, 3.0),
    semi_minor=st.floats(0.3, 1.5),
)


# -- prediction -----------------------------------------------------------------

def test_predict_examples():
    o = Obstacle(10.0, -1.3, 0.1, v_s=3.0, v_y=0.0)
    p0 = predict_obstacle(o, 0, 0.12)
    assert p0.center == (10.0, -1.3) and p0.heading == 0.1
    assert predict_obstacle(o, 10, 0.12).center[0] == pytest.approx(13.6)
    p20 = predict_obstacle(o, 20, 0.12)
    assert p20.center == pytest.approx((17.2, -1.3))
    with pytest.raises(ValueError):
        predict_obstacle(o, -1, 0.12)


def test_obstacle_axes_validation():
    with pytest.raises(ValueError):
        Obstacle(0.0, 0.0, a=1.0, b=2.0)
    with pytest.raises(ValueError):
        EllipsePose((0, 0), 0.0, 1.0, 0.0)


# -- line intersections -------------------------------------------------------

def test_line_intersections_examples():
    unit = circle(0.0, 0.0)
    pts = ellipse_line_intersections(unit, (0.0, 0.0), (1.0, 0.0))
    assert sorted(p[0] for p in pts) == pytest.approx([-1.0, 1.0])
    assert ellipse_line_intersections(unit, (0.0, 2.0), (1.0, 0.0)) == []
    e = EllipsePose((0.0, 0.0), 0.0, 2.0, 1.0)
    pts = ellipse_line_intersections(e, (1.0, 0.0), (0.0, 1.0))
    assert sorted(p[1] for p in pts) == pytest.approx([-math.sqrt(0.75), math.sqrt(0.75)])
    with pytest.raises(ValueError):
        ellipse_line_intersections(unit, (0, 0), (0, 0))


@settings(max_examples=200)
@given(poses, st.tuples(st.floats(-10, 10), st.floats(-10, 10)), st.floats(-math.pi, math.pi))
def test_intersections_lie_on_boundary(e, point, ang):
    for p in ellipse_line_intersections(e, point, (math.cos(ang), math.sin(ang))):
        c, s = math.cos(e.heading), math.sin(e.heading)
        d = p - np.asarray(e.center)
        u, v = d[0] * c + d[1] * s, -d[0] * s + d[1] * c
        assert (u / e.semi_major) ** 2 + (v / e.semi_minor) ** 2 == pytest.approx(1.0, abs=1e-9)


# -- distance -----------------------------------------------------------------

def test_distance_examples():
    assert relative_distance(circle(0, 0), circle(4, 0)) == 2.0
    assert relative_distance(circle(0, 0), circle(0.5, 0)) == 0.0
    assert relative_distance(circle(1, 1), circle(1, 1)) == 0.0
    e1 = EllipsePose((0.0, 0.0), 0.0, 2.0, 1.0)
    e2 = EllipsePose((6.0, 0.0), 0.0, 2.0, 1.0)
    assert relative_distance(e1, e2) == pytest.approx(2.0, abs=1e-12)


@settings(max_examples=300)
@given(poses, poses)
def test_distance_symmetric(e1, e2):
    assert relative_distance(e1, e2) == relative_distance(e2, e1)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_distance_never_below_true_gap(seed):
    e1, e2 = random_ellipse_pair(np.random.default_rng(seed))
    # every line gap joins two boundary points, so it cannot undercut the true gap
    assert relative_distance(e1, e2) >= dense_ellipse_distance(e1, e2) - 1e-3


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.floats(-math.pi, math.pi), st.floats(-50, 50), st.floats(-50, 50))
def test_distance_invariant_under_rigid_motion(seed, rot, tx, ty):
    e1, e2 = random_ellipse_pair(np.random.default_rng(seed))
    c, s = math.cos(rot), math.sin(rot)

    def move(e):
        x, y = e.center
        return EllipsePose((c * x - s * y + tx, s * x + c * y + ty), e.heading + rot,
                           e.semi_major, e.semi_minor)

    assert relative_distance(move(e1), move(e2)) == pytest.approx(relative_distance(e1, e2), abs=1e-9)


@settings(max_examples=100)
@given(poses, st.floats(0.0, 0.9), st.floats(-math.pi, math.pi))
def test_overlap_returns_zero(e, frac, ang):
    # a small circle centered inside the ellipse always overlaps it
    u = frac * math.cos(ang), frac * math.sin(ang)
    c, s = math.cos(e.heading), math.sin(e.heading)
    x = e.center[0] + e.semi_major * u[0] * c - e.semi_minor * u[1] * s
    y = e.center[1] + e.semi_major * u[0] * s + e.semi_minor * u[1] * c
    assert relative_distance(e, circle(x, y, 0.2)) == 0.0


def test_circle_distance_matches_dense_oracle():
    rng = np.random.default_rng(3)
    for _ in range(200):
        r1, r2 = rng.uniform(0.3, 2.0, 2)
        ang = rng.uniform(-math.pi, math.pi)
        d = r1 + r2 + rng.uniform(0.01, 4.0)
        c1 = circle(0.0, 0.0, r1)
        c2 = circle(d * math.cos(ang), d * math.sin(ang), r2)
        assert relative_distance(c1, c2) == pytest.approx(d - r1 - r2, abs=1e-9)


# -- packed obstacle gap --------------------------------------------------------

def test_obstacle_gap_prediction_and_wrap():
    obs = obstacle_array([Obstacle(10.0, 0.0, v_s=2.0, a=1.0, b=1.0)])
    # ego unit circle at s=0: obstacle at 10 + 2*1 = 12 after 1 s
    assert obstacle_gap(0.0, 0.0, 0.0, 1.0, 1.0, obs, 0, 1.0, 0.0) == pytest.approx(10.0)
    # on a 20 m loop the obstacle at s=12 is 8 m behind the ego
    assert obstacle_gap(0.0, 0.0, 0.0, 1.0, 1.0, obs, 0, 1.0, 20.0) == pytest.approx(6.0)


def test_ego_ellipse_uses_relative_heading():
    e = ego_ellipse(5.0, 0.5, 1.2, 1.0, length=4.0, width=2.0)
    assert e.center == (5.0, 0.5) and e.heading == pytest.approx(0.2)
    assert (e.semi_major, e.semi_minor) == (2.0, 1.0)
