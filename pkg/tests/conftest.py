import math

import numpy as np
import pytest

from flamecov.estimate import StereoObservation
from flamecov.geom import CameraModel, Pose
from flamecov.model import ArcParams
from flamecov.silhouette import Silhouette, threshold
from flamecov.synth import SceneSpec, default_rig, flame_from_params, render_scene, scene_extent


def ring_camera(azimuth, dist, target=(0.0, 0.0, 0.15), elevation=0.0,
                size=(160, 120), fov=(71.0, 56.0)):
    """Camera ``dist`` from ``target`` at the given azimuth/elevation, looking at it."""
    target = np.asarray(target, dtype=float)
    eye = target + dist * np.array([math.cos(elevation) * math.cos(azimuth),
                                    math.cos(elevation) * math.sin(azimuth),
                                    math.sin(elevation)])
    return CameraModel.from_fov(*size, *fov, Pose.look_at(eye, target, up=(0.0, 0.0, 1.0)))


def blank_obs(cam1, cam2):
    """Observation with one lit pixel per view, for geometry-only calls."""
    sils = []
    for cam in (cam1, cam2):
        m = np.zeros((cam.height, cam.width), dtype=bool)
        m[cam.height // 2, cam.width // 2] = True
        sils.append(Silhouette(m))
    return StereoObservation(sils[0], sils[1], cam1, cam2)


def scene_obs(spec, T=1000):
    im1, im2 = render_scene(spec)
    return StereoObservation(threshold(im1, T), threshold(im2, T), spec.cam1, spec.cam2)


def arc_scene(alpha, beta, r, peak=0.04, profile="rise-fall", seed=0):
    model = flame_from_params(ArcParams(alpha, beta, r), profile, peak)
    cam1, cam2 = default_rig(scene_extent(model))
    return SceneSpec(model, cam1, cam2, seed=seed)


def line_scene(length, peak=0.04, profile="rise-fall"):
    model = flame_from_params(ArcParams.line(length), profile, peak)
    cam1, cam2 = default_rig(scene_extent(model))
    return SceneSpec(model, cam1, cam2)


@pytest.fixture(scope="session")
def example_scene():
    """The reference curved flame: alpha 0.8, beta 2.0, r 1.2, 4 cm peak width."""
    spec = arc_scene(0.8, 2.0, 1.2, 0.04)
    return spec, scene_obs(spec)


# pass/fail lines from the acceptance module, echoed after the test run
ACCEPTANCE = []


def record(name: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
