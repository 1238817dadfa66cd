import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flamecov.errors import OffCurveError, ZeroMidpointError
from flamecov.model import (ArcParams, FlameModel, arc_from_midpoint, arc_from_tip,
                            arc_length_of, constant_width, midpoint_from_arc,
                            sample_center_curve, surface_value)

Q = (1 - math.cos(math.pi / 4), 0.0, math.sin(math.pi / 4))


def test_arc_from_midpoint_quarter_circle():
    p = arc_from_midpoint(Q)
    assert p.alpha == pytest.approx(math.pi / 2)
    assert p.beta == pytest.approx(0.0)
    assert p.r == pytest.approx(1.0)


def test_arc_from_midpoint_on_axis_is_straight():
    p = arc_from_midpoint([0, 0, 0.5])
    assert p.straight and p.length == pytest.approx(1.0)


def test_arc_from_midpoint_rotation_covariance():
    c, s = math.cos(math.pi / 3), math.sin(math.pi / 3)
    xm = np.array([c * Q[0], s * Q[0], Q[2]])
    p = arc_from_midpoint(xm)
    assert p.alpha == pytest.approx(math.pi / 2) and p.r == pytest.approx(1.0)
    assert p.beta == pytest.approx(math.pi / 3)


def test_arc_from_midpoint_zero():
    with pytest.raises(ZeroMidpointError):
        arc_from_midpoint([0, 0, 0])


def test_midpoint_from_arc_examples():
    assert np.allclose(midpoint_from_arc(ArcParams(math.pi / 2, 0.0, 1.0)), [0.29289, 0, 0.70711],
                       atol=1e-5)
    assert np.allclose(midpoint_from_arc(ArcParams.line(1.0)), [0, 0, 0.5])


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 2 * math.pi - 1e-3), st.floats(-math.pi + 1e-6, math.pi),
       st.floats(0.05, 5.0))
def test_round_trip_property(alpha, beta, r):
    q = arc_from_midpoint(midpoint_from_arc(ArcParams(alpha, beta, r)))
    assert q.alpha == pytest.approx(alpha, rel=1e-9)
    assert q.r == pytest.approx(r, rel=1e-9)
    assert math.cos(q.beta - beta) == pytest.approx(1.0, abs=1e-12)


def test_sample_straight():
    pts, ls = sample_center_curve(ArcParams.line(1.0), 3)
    assert np.allclose(pts, [[0, 0, 0], [0, 0, 0.5], [0, 0, 1]])
    assert np.allclose(ls, [0, 0.5, 1])


def test_sample_quarter_circle():
    pts, ls = sample_center_curve(ArcParams(math.pi / 2, 0.0, 1.0), 3)
    assert np.allclose(pts[0], 0)
    assert np.allclose(pts[1], [0.29289, 0, 0.70711], atol=1e-5)
    assert np.allclose(pts[2], [1, 0, 1])
    assert ls[-1] == pytest.approx(math.pi / 2)


def test_sample_tangent_at_nozzle_is_z():
    pts, _ = sample_center_curve(ArcParams(1.0, 0.3, 0.4), 1000)
    t = pts[1] - pts[0]
    assert t[2] / np.linalg.norm(t) > 0.9999


def test_arc_length_examples():
    half = ArcParams(math.pi, 0.0, 1.0)
    assert arc_length_of(half, [2, 0, 0]) == pytest.approx(math.pi)
    assert arc_length_of(half, [0, 0, 0]) == 0.0
    assert arc_length_of(ArcParams.line(1.0), [0, 0, 0.25]) == pytest.approx(0.25)


def test_arc_length_off_curve():
    with pytest.raises(OffCurveError):
        arc_length_of(ArcParams.line(1.0), [0.1, 0, 0.25])


def test_arc_from_tip_matches_endpoint():
    p = ArcParams(1.1, -0.4, 0.7)
    pts, _ = sample_center_curve(p, 5)
    q = arc_from_tip(pts[-1])
    assert q.alpha == pytest.approx(p.alpha) and q.r == pytest.approx(p.r)
    assert q.beta == pytest.approx(p.beta)


def test_surface_value_on_curve_and_boundary():
    fm = FlameModel.arc(midpoint_from_arc(ArcParams(0.8, 0.0, 0.5)),
                        constant_width(0.03, 0.4, sigma_n=0.0), samples=400)
    l = 0.2
    pc = fm.point_at(l)[0]
    assert surface_value(fm, pc) == pytest.approx(-0.03, abs=1e-6)
    # the arc bends in +X, so +Y is perpendicular to the tangent everywhere
    assert surface_value(fm, pc + [0, 0.03, 0]) == pytest.approx(0.0, abs=1e-5)


def test_flame_model_json_round_trip():
    fm = FlameModel.arc([0.05, 0.02, 0.2], constant_width(0.02, 0.4))
    back = FlameModel.from_dict(fm.to_dict())
    assert np.array_equal(back.curve, fm.curve) and np.array_equal(back.curve_w, fm.curve_w)
    line = FlameModel.line(0.3, constant_width(0.02, 0.3))
    assert FlameModel.from_dict(line.to_dict()).kind == "line"


def test_round_trip_timing():
    rng = np.random.default_rng(0)
    trip = np.column_stack([rng.uniform(0.01, 6.0, 1000), rng.uniform(-math.pi, math.pi, 1000),
                            rng.uniform(0.05, 5.0, 1000)])
    t0 = time.perf_counter()
    for a, b, r in trip:
        arc_from_midpoint(midpoint_from_arc(ArcParams(a, b, r)))
    assert time.perf_counter() - t0 < 1.0
