import math

import numpy as np
from scipy import ndimage

from flamecov.estimate import reproject_silhouette
from flamecov.geom import CameraModel, Pose, project_points
from flamecov.model import ArcParams, FlameModel, constant_width, sample_center_curve
from flamecov.render import pixel_rays, render_mask
from flamecov.synth import flame_from_params

from conftest import ring_camera


def capsule_points(length, w, n=400):
    """Dense samples of a capped cylinder along +Z (surface and interior)."""
    zs = np.linspace(-w, length + w, n)
    th = np.linspace(0, 2 * math.pi, 90, endpoint=False)
    pts = []
    for z in zs:
        zc = min(max(z, 0.0), length)
        rad = math.sqrt(max(w * w - (z - zc) ** 2, 0.0))
        for rr in np.linspace(0, rad, 6):
            pts.append(np.column_stack([rr * np.cos(th), rr * np.sin(th), np.full_like(th, z)]))
    return np.vstack(pts)


def test_straight_capsule_matches_projected_samples():
    L, w = 0.3, 0.05
    cam = ring_camera(-math.pi / 2, 0.6, target=(0, 0, L / 2))
    curve, _ = sample_center_curve(ArcParams.line(L), 64)
    mask = render_mask(curve, np.full(64, w), cam)
    px, ok = project_points(cam, capsule_points(L, w))
    ref = np.zeros_like(mask)
    px = np.rint(px[ok]).astype(int)
    inb = (px[:, 0] >= 0) & (px[:, 0] < cam.width) & (px[:, 1] >= 0) & (px[:, 1] < cam.height)
    ref[px[inb, 1], px[inb, 0]] = True
    ref = ndimage.binary_fill_holes(ref)
    band = ndimage.binary_dilation(ref) & ~ndimage.binary_erosion(ref)
    assert not (mask ^ ref)[~band].any()
    assert mask.sum() > 500


def test_zero_width_model_renders_empty():
    fm = FlameModel.line(0.3, constant_width(0.0, 0.3))
    cam = ring_camera(0.0, 0.6, target=(0, 0, 0.15))
    assert reproject_silhouette(fm, cam).area <= cam.height


def test_camera_facing_away_sees_nothing():
    fm = flame_from_params(ArcParams(0.6, 0.2, 0.5))
    target = np.array([0.0, 0.0, 0.15])
    eye = np.array([0.5, 0.0, 0.15])
    cam = CameraModel.from_fov(160, 120, 71, 56, Pose.look_at(eye, 2 * eye - target))
    assert reproject_silhouette(fm, cam).empty


def test_simplification_changes_little():
    fm = flame_from_params(ArcParams(1.0, 0.5, 0.6), peak_w=0.05, samples=256)
    cam = ring_camera(-1.2, 0.7, target=(0.1, 0, 0.25))
    exact = render_mask(fm.curve, fm.curve_w, cam, tol_px=0.0)
    fast = render_mask(fm.curve, fm.curve_w, cam)
    # only pixel centres within tol_px of the boundary may flip, which is
    # about tol_px times the perimeter
    perimeter = np.count_nonzero(exact & ~ndimage.binary_erosion(exact))
    assert np.count_nonzero(exact ^ fast) <= 2 * 0.05 * perimeter + 1


def test_pixel_rays_are_unit_and_centered():
    cam = ring_camera(0.3, 0.5)
    d = pixel_rays(cam)
    assert np.allclose(np.linalg.norm(d, axis=-1), 1.0)
    axis = cam.pose.rotation[2]
    mid = d[59:61, 79:81].mean(axis=(0, 1))
    assert np.dot(mid / np.linalg.norm(mid), axis) > 0.9999
