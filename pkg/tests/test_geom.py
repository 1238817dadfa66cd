import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flamecov.errors import BehindCameraError
from flamecov.geom import (CameraModel, Pose, Ray, backproject, fundamental_matrix, load_rig,
                           point_polyline_closest, project, ray_polyline_closest,
                           ray_ray_closest, save_rig)
from flamecov.model import ArcParams, sample_center_curve

from conftest import ring_camera


def cam100(pose=None):
    return CameraModel(100.0, 100.0, 50.0, 50.0, 101, 101, pose or Pose.identity())


def test_project_principal_point():
    assert np.allclose(project(cam100(), [0, 0, 1]), [50, 50])


def test_project_offset_point():
    assert np.allclose(project(cam100(), [0.1, 0, 1]), [60, 50])


def test_project_behind_camera():
    with pytest.raises(BehindCameraError):
        project(cam100(), [0, 0, -1])


def test_backproject_principal_point():
    r = backproject(cam100(), [50, 50])
    assert np.allclose(r.origin, 0)
    assert np.allclose(r.direction, [0, 0, 1])


def test_backproject_origin_is_camera_center():
    r = backproject(cam100(Pose(np.eye(3), [0, 0, -1])), [50, 50])
    assert np.allclose(r.origin, [0, 0, 1])


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 159), st.floats(0, 119), st.floats(-math.pi, math.pi), st.floats(-0.5, 0.5))
def test_project_backproject_round_trip(u, v, az, el):
    cam = ring_camera(az, 0.5, elevation=el)
    ray = backproject(cam, [u, v])
    assert np.allclose(project(cam, ray.at(2.0)), [u, v], atol=1e-6)


def test_pose_rejects_non_rotation():
    with pytest.raises(ValueError):
        Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_rig_round_trip(tmp_path):
    c1, c2 = ring_camera(0.0, 0.4), ring_camera(1.0, 0.4)
    save_rig(tmp_path / "rig.json", c1, c2)
    d1, d2 = load_rig(tmp_path / "rig.json")
    assert np.allclose(d1.P, c1.P) and np.allclose(d2.P, c2.P)


def test_fundamental_matrix_epipolar_constraint():
    c1, c2 = ring_camera(0.0, 0.4), ring_camera(1.0, 0.4)
    F = fundamental_matrix(c1, c2)
    rng = np.random.default_rng(0)
    for X in rng.uniform([-0.05, -0.05, 0.05], [0.05, 0.05, 0.25], (20, 3)):
        x1, x2 = np.r_[project(c1, X), 1], np.r_[project(c2, X), 1]
        assert abs(x2 @ F @ x1) < 1e-6 * np.linalg.norm(F)


def test_ray_ray_perpendicular_skew():
    _, _, dist, ang = ray_ray_closest(Ray([0, 0, 0], [0, 0, 1]), Ray([1, 0, 0], [0, 1, 0]))
    assert dist == pytest.approx(1.0)
    assert ang == pytest.approx(math.pi / 2)


def test_ray_ray_identical():
    r = Ray([0.1, 0.2, 0.3], [1, 1, 0])
    _, _, dist, ang = ray_ray_closest(r, r)
    assert dist == pytest.approx(0.0, abs=1e-12)
    assert ang == pytest.approx(0.0, abs=1e-12)


def test_ray_ray_matches_dense_sampling():
    a = Ray([0, 0, 0], [0, 0, 1])
    b = Ray([0.5, 0, 0], [0, 1, 1])
    pa, pb, dist, _ = ray_ray_closest(a, b)
    s = np.arange(0, 2, 1e-4)
    A = a.origin + s[:, None] * a.direction
    # closest distance of each sampled point of b to line a is analytic
    B = b.origin + s[:, None] * b.direction
    d = np.hypot(B[:, 0], B[:, 1])
    k = np.argmin(d)
    assert dist == pytest.approx(d[k], abs=1e-4)
    assert np.allclose(pb, B[k], atol=2e-4)
    assert np.allclose(pa, A[np.argmin(np.abs(A[:, 2] - B[k, 2]))], atol=2e-4)


def test_ray_polyline_intersection():
    curve = np.array([[0, 0, 0], [0, 0, 2.0]])
    pr, pc, i, dist = ray_polyline_closest(Ray([-1, 0, 1], [1, 0, 0]), curve)
    assert dist == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(pc, [0, 0, 1]) and i == 0


def test_ray_polyline_parallel_offset():
    curve = np.array([[0, 0, 0], [0, 0, 1.0], [0, 0, 2.0]])
    _, _, _, dist = ray_polyline_closest(Ray([0.3, 0, -1], [0, 0, 1]), curve)
    assert dist == pytest.approx(0.3)


def test_ray_polyline_quarter_circle_dense_oracle():
    curve, _ = sample_center_curve(ArcParams(math.pi / 2, 0.0, 1.0), 400)
    ray = Ray([0.2, -1.0, 0.4], [0.1, 1.0, 0.3])
    _, pc, _, dist = ray_polyline_closest(ray, curve)
    a = np.arange(0, math.pi / 2, 1e-4)
    pts = np.column_stack([1 - np.cos(a), np.zeros_like(a), np.sin(a)])
    rel = pts - ray.origin
    s = np.maximum(rel @ ray.direction, 0)
    d = np.linalg.norm(rel - s[:, None] * ray.direction, axis=1)
    # the 400-sample polyline cuts the circle by at most r(1 - cos(h/2))
    assert dist == pytest.approx(d.min(), abs=2e-6)
    assert np.linalg.norm(pc - pts[np.argmin(d)]) < 5e-3


def test_point_polyline_examples():
    curve = np.array([[0, 0, 0], [0, 0, 2.0]])
    pc, _, dist = point_polyline_closest([1, 0, 1], curve)
    assert np.allclose(pc, [0, 0, 1]) and dist == pytest.approx(1.0)
    _, _, dist = point_polyline_closest([0, 0, 1.5], curve)
    assert dist == 0.0


def test_point_polyline_dense_oracle():
    p = ArcParams(1.0, 0.7, 0.5)
    curve, _ = sample_center_curve(p, 2000)
    rng = np.random.default_rng(3)
    for q in rng.uniform(-0.3, 0.6, (20, 3)):
        _, _, dist = point_polyline_closest(q, curve)
        assert dist == pytest.approx(np.linalg.norm(curve - q, axis=1).min(), abs=1e-4)
