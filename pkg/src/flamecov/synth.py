"""Synthetic ground truth: flame models, camera rigs and rendered thermal pairs."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geom import CameraModel, Pose, rig_from_dict, rig_to_dict
from .model import ArcParams, FlameModel, midpoint_from_arc
from .render import pixel_rays, render_mask
from .silhouette import ThermalImage
from .width import width_fit

# FLIR Lepton 3.5 geometry (datasheet values)
LEPTON_SIZE = (160, 120)
LEPTON_FOV = (71.0, 56.0)
HOT = 65535
PROFILE_SAMPLES = 32
# smallest framed length (m); keeps the side camera about half a metre out
MIN_EXTENT = 0.4


def make_profile(kind: str, peak_w: float, length: float, n: int = PROFILE_SAMPLES):
    """Analytic width profile sampled at ``n`` arc lengths over [0, length]."""
    if peak_w <= 0 or length <= 0:
        raise ValueError("peak width and length must be positive")
    l = np.linspace(0.0, length, n)
    if kind == "rise-fall":
        w = np.clip(peak_w * np.sin(np.pi * l / length), 0.0, None)
    elif kind == "constant":
        w = np.full(n, float(peak_w))
    elif kind == "linear":
        w = peak_w * l / length
    else:
        raise ValueError(f"unknown profile {kind!r}")
    return l, w


def flame_from_params(params: ArcParams, profile: str = "rise-fall", peak_w: float = 0.04,
                      samples: int = 64, sigma_n: float = 1e-4) -> FlameModel:
    l, w = make_profile(profile, peak_w, params.total_length)
    width = width_fit(np.column_stack([l, w]), sigma_n=sigma_n)
    if params.straight:
        return FlameModel.line(params.length, width, samples)
    return FlameModel.arc(midpoint_from_arc(params), width, samples)


def default_rig(extent: float, size=LEPTON_SIZE, fov=LEPTON_FOV):
    """Side camera plus a camera behind and beside the nozzle.

    ``extent`` (m) is the flame length the rig should frame. Camera 1 looks
    across the flame along +Y with the flame running left to right; camera 2
    sits behind the nozzle, offset toward -Y, looking down the flame. The
    optical axes are about 65 degrees apart.
    """
    E = max(float(extent), MIN_EXTENT)
    target = np.array([0.0, 0.0, 0.5 * E])
    cam1 = CameraModel.from_fov(*size, *fov, Pose.look_at([0.0, -1.1 * E, 0.5 * E], target,
                                                          up=[-1.0, 0.0, 0.0]))
    cam2 = CameraModel.from_fov(*size, *fov, Pose.look_at([0.0, -0.5 * E, -0.55 * E], target,
                                                          up=[0.0, -1.0, 0.0]))
    return cam1, cam2


def scene_extent(model: FlameModel) -> float:
    """Length the default rig frames: curve length plus the widest diameter."""
    return model.total_length + 2.0 * float(model.curve_w.max())


@dataclass
class NoiseSpec:
    pixel_dropout: float = 0.0
    boundary_jitter: float = 0.0
    hot_clutter: int = 0

    def __post_init__(self):
        if not 0.0 <= self.pixel_dropout <= 1.0:
            raise ValueError("pixel_dropout must be a probability")
        if self.boundary_jitter < 0 or self.hot_clutter < 0:
            raise ValueError("noise magnitudes must be non-negative")


@dataclass
class SceneSpec:
    model: FlameModel
    cam1: CameraModel
    cam2: CameraModel
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        if "model" not in d:
            raise ValueError("scene spec needs a 'model'")
        model = FlameModel.from_dict(d["model"])
        if "rig" in d:
            cam1, cam2 = rig_from_dict(d["rig"])
        else:
            cam1, cam2 = default_rig(scene_extent(model))
        noise = NoiseSpec(**d.get("noise", {}))
        seed = int(d.get("seed", 0))
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        return cls(model, cam1, cam2, noise, seed)

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "rig": rig_to_dict(self.cam1, self.cam2),
                "noise": vars(self.noise).copy(), "seed": self.seed}


def _render_view(model: FlameModel, cam: CameraModel, noise: NoiseSpec, rng) -> np.ndarray:
    offsets = None
    if noise.boundary_jitter > 0:
        offsets = np.clip(rng.normal(0.0, noise.boundary_jitter, (cam.height, cam.width, 2)),
                          -3 * noise.boundary_jitter, 3 * noise.boundary_jitter)
    dirs = pixel_rays(cam, offsets)
    mask = render_mask(model.curve, model.curve_w, cam, dirs,
                       pad=1.0 + 3.0 * noise.boundary_jitter)
    if noise.pixel_dropout > 0:
        mask &= rng.random(mask.shape) >= noise.pixel_dropout
    img = np.where(mask, HOT, 0).astype(np.uint16)
    for _ in range(noise.hot_clutter):
        cx, cy = rng.integers(0, cam.width), rng.integers(0, cam.height)
        rad = rng.uniform(0.5, 2.0)
        ys, xs = np.ogrid[0:cam.height, 0:cam.width]
        img[(xs - cx) ** 2 + (ys - cy) ** 2 <= rad * rad] = HOT
    return img


def render_scene(spec: SceneSpec) -> tuple[ThermalImage, ThermalImage]:
    """Binary thermal pair (0 outside, 65535 inside) with seeded noise."""
    rng = np.random.default_rng(spec.seed)
    img1 = _render_view(spec.model, spec.cam1, spec.noise, rng)
    img2 = _render_view(spec.model, spec.cam2, spec.noise, rng)
    return ThermalImage(img1), ThermalImage(img2)


def scene_grid(n: int = 30, jitter: float = 0.0, seed: int = 0, alphas=(0.1, 0.4, 0.8, 1.2),
               radii=(0.6, 1.2, 2.0), peaks=(0.02, 0.03, 0.04, 0.05, 0.06)) -> list[SceneSpec]:
    """Deterministic grid of arc scenes cycling through curvature and size.

    Scene i uses alpha = alphas[i % 4], r = radii[(i // 4) % 3], so the first
    twelve scenes cover every (alpha, r) pair. Peak widths and bend azimuths
    are spread with low-discrepancy strides.
    """
    out = []
    for i in range(n):
        alpha = alphas[i % len(alphas)]
        r = radii[(i // len(alphas)) % len(radii)]
        peak = peaks[(7 * i) % len(peaks)]
        beta = -math.pi + 2.0 * math.pi * ((0.6180339887 * i + 0.1) % 1.0)
        params = ArcParams(alpha, beta, r)
        model = flame_from_params(params, "rise-fall", peak)
        cam1, cam2 = default_rig(scene_extent(model))
        out.append(SceneSpec(model, cam1, cam2, NoiseSpec(boundary_jitter=jitter), seed + i))
    return out


def load_scene(path) -> SceneSpec:
    with open(path) as f:
        return SceneSpec.from_dict(json.load(f))
