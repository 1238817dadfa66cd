"""Camera frames, pinhole projection, rays and closest-point queries.

All 3D quantities live in the torch nozzle frame {H}. A :class:`Pose` maps
{H} points into a camera frame, ``x_cam = R @ x_h + t``. Pixels use the
raster convention: origin top-left, x to the right, y down, with pixel
centers at integer coordinates.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BehindCameraError, EmptyCurveError

_EPS_DEPTH = 1e-9
_EPS_PARALLEL = 1e-9


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    return a


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = _as_vec3(self.translation)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 0.0, 1.0)) -> "Pose":
        """Pose of a camera at ``eye`` whose optical axis points at ``target``.

        ``up`` is a hint for the image's upward direction (image y points
        away from it).
        """
        eye = _as_vec3(eye)
        z = _as_vec3(target) - eye
        z /= np.linalg.norm(z)
        up = _as_vec3(up)
        x = np.cross(z, up)
        if np.linalg.norm(x) < 1e-9:
            # up parallel to the view direction, pick any perpendicular
            x = np.cross(z, [1.0, 0.0, 0.0] if abs(z[0]) < 0.9 else [0.0, 1.0, 0.0])
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        R = np.vstack([x, y, z])
        return cls(R, -R @ eye)

    @property
    def center(self) -> np.ndarray:
        """Camera center expressed in {H}."""
        return -self.rotation.T @ self.translation

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")

    @classmethod
    def from_fov(cls, width: int, height: int, hfov_deg: float, vfov_deg: float,
                 pose: Pose | None = None) -> "CameraModel":
        fx = (width / 2.0) / np.tan(np.radians(hfov_deg) / 2.0)
        fy = (height / 2.0) / np.tan(np.radians(vfov_deg) / 2.0)
        return cls(fx, fy, (width - 1) / 2.0, (height - 1) / 2.0, width, height,
                   pose or Pose.identity())

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        return np.array([[1.0 / self.fx, 0.0, -self.cx / self.fx],
                         [0.0, 1.0 / self.fy, -self.cy / self.fy],
                         [0.0, 0.0, 1.0]])

    @property
    def P(self) -> np.ndarray:
        """3x4 projection matrix K [R t]."""
        return self.K @ np.hstack([self.pose.rotation, self.pose.translation[:, None]])

    @property
    def center(self) -> np.ndarray:
        return self.pose.center

    def with_pose(self, pose: Pose) -> "CameraModel":
        return CameraModel(self.fx, self.fy, self.cx, self.cy, self.width, self.height, pose)

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
            "rotation": self.pose.rotation.reshape(-1).tolist(),
            "translation": self.pose.translation.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        keys = {"fx", "fy", "cx", "cy", "width", "height", "rotation", "translation"}
        missing = keys - set(d)
        if missing:
            raise ValueError(f"camera entry missing keys: {sorted(missing)}")
        rot = np.asarray(d["rotation"], dtype=float)
        if rot.size != 9:
            raise ValueError("rotation must have 9 entries")
        pose = Pose(rot.reshape(3, 3), np.asarray(d["translation"], dtype=float))
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d["width"]), int(d["height"]), pose)


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = _as_vec3(self.origin)
        d = _as_vec3(self.direction)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("ray direction must be non-zero")
        d = d / n
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, s: float) -> np.ndarray:
        return self.origin + s * self.direction


def load_rig(path) -> tuple[CameraModel, CameraModel]:
    with open(path) as f:
        data = json.load(f)
    return rig_from_dict(data)


def rig_from_dict(data: dict) -> tuple[CameraModel, CameraModel]:
    if not isinstance(data, dict) or "cam1" not in data or "cam2" not in data:
        raise ValueError("rig must hold 'cam1' and 'cam2'")
    return CameraModel.from_dict(data["cam1"]), CameraModel.from_dict(data["cam2"])


def rig_to_dict(cam1: CameraModel, cam2: CameraModel) -> dict:
    return {"cam1": cam1.to_dict(), "cam2": cam2.to_dict()}


def save_rig(path, cam1: CameraModel, cam2: CameraModel) -> None:
    Path(path).write_text(json.dumps(rig_to_dict(cam1, cam2), indent=2))


# --------------------------------------------------------------------------
# projection

def project_points(cam: CameraModel, points) -> tuple[np.ndarray, np.ndarray]:
    """Project (N, 3) points; returns (N, 2) pixels and an in-front mask.

    Pixels of points behind the camera are NaN.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    pc = cam.pose.apply(p)
    z = pc[:, 2]
    ok = z > _EPS_DEPTH
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.fx * pc[:, 0] / z + cam.cx
        v = cam.fy * pc[:, 1] / z + cam.cy
    px = np.column_stack([u, v])
    px[~ok] = np.nan
    return px, ok


def project(cam: CameraModel, p) -> np.ndarray:
    """Project a single point, or an (N, 3) array, into pixel coordinates.

    The result may fall outside the image; callers clip. Raises
    :class:`BehindCameraError` when any point has camera depth <= 1e-9.
    """
    arr = np.asarray(p, dtype=float)
    px, ok = project_points(cam, arr.reshape(-1, 3))
    if not ok.all():
        raise BehindCameraError("point lies behind the camera")
    return px[0] if arr.ndim == 1 else px


def backproject_dirs(cam: CameraModel, pixels) -> np.ndarray:
    """Unit ray directions in {H} for an (N, 2) array of pixels."""
    px = np.atleast_2d(np.asarray(pixels, dtype=float))
    xh = np.column_stack([px, np.ones(len(px))])
    v = xh @ (cam.pose.rotation.T @ cam.K_inv).T
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def backproject(cam: CameraModel, px) -> Ray:
    return Ray(cam.center, backproject_dirs(cam, px)[0])


def fundamental_matrix(cam1: CameraModel, cam2: CameraModel) -> np.ndarray:
    """F with x2^T F x1 = 0 for corresponding homogeneous pixels."""
    R1, t1 = cam1.pose.rotation, cam1.pose.translation
    R2, t2 = cam2.pose.rotation, cam2.pose.translation
    R = R2 @ R1.T
    t = t2 - R @ t1
    tx = skew(t)
    return cam2.K_inv.T @ tx @ R @ cam1.K_inv


def skew(v) -> np.ndarray:
    x, y, z = _as_vec3(v)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


# --------------------------------------------------------------------------
# closest points

def ray_ray_closest(a: Ray, b: Ray):
    """Closest points between the two (infinite) lines carrying ``a`` and ``b``.

    Returns ``(pa, pb, dist, angle)`` with ``angle`` the acute angle between
    the directions.
    """
    d1, d2 = a.direction, b.direction
    w = a.origin - b.origin
    c = float(np.dot(d1, d2))
    # atan2 of |cross| and |dot| stays accurate near parallel, unlike arccos
    angle = float(np.arctan2(np.linalg.norm(np.cross(d1, d2)), abs(c)))
    denom = 1.0 - c * c
    if angle < _EPS_PARALLEL or denom < 1e-18:
        pa = a.origin.copy()
        pb = b.origin + np.dot(pa - b.origin, d2) * d2
        return pa, pb, float(np.linalg.norm(pa - pb)), angle
    e = np.dot(d1, w)
    f = np.dot(d2, w)
    s = (c * f - e) / denom
    u = (f - c * e) / denom
    pa = a.origin + s * d1
    pb = b.origin + u * d2
    return pa, pb, float(np.linalg.norm(pa - pb)), angle


def ray_ray_closest_batch(o1, d1, o2, d2):
    """Pairwise line-line closest points for (N, 3) and (K, 3) ray bundles.

    Directions must be unit length. Returns ``(mid, dist, angle)`` of shapes
    (N, K, 3), (N, K), (N, K) where ``mid`` is the midpoint of the two feet.
    """
    o1 = np.asarray(o1, float).reshape(-1, 3)
    o2 = np.asarray(o2, float).reshape(-1, 3)
    c = d1 @ d2.T
    w = o1[:, None, :] - o2[None, :, :]
    e = np.einsum("nj,nkj->nk", d1, w)
    f = np.einsum("kj,nkj->nk", d2, w)
    denom = 1.0 - c * c
    par = denom < 1e-18
    safe = np.where(par, 1.0, denom)
    s = np.where(par, 0.0, (c * f - e) / safe)
    u = np.where(par, f, (f - c * e) / safe)
    pa = o1[:, None, :] + s[..., None] * d1[:, None, :]
    pb = o2[None, :, :] + u[..., None] * d2[None, :, :]
    dist = np.linalg.norm(pa - pb, axis=-1)
    angle = np.arccos(np.clip(np.abs(c), 0.0, 1.0))
    return 0.5 * (pa + pb), dist, angle


def _check_curve(curve) -> np.ndarray:
    c = np.asarray(curve, dtype=float)
    if c.ndim != 2 or c.shape[0] < 2 or c.shape[1] != 3:
        raise EmptyCurveError("curve needs at least two 3D points")
    return c


def point_polyline_closest(p, curve):
    """Closest point on a piecewise-linear curve to ``p``.

    Returns ``(pc, segment_index, dist)``.
    """
    c = _check_curve(curve)
    p = _as_vec3(p)
    a, seg = c[:-1], np.diff(c, axis=0)
    ll = np.einsum("ij,ij->i", seg, seg)
    t = np.einsum("ij,ij->i", p - a, seg) / np.where(ll > 0, ll, 1.0)
    t = np.clip(t, 0.0, 1.0)
    foot = a + t[:, None] * seg
    d = np.linalg.norm(foot - p, axis=1)
    i = int(np.argmin(d))
    return foot[i], i, float(d[i])


def points_polyline_closest(points, curve):
    """Vectorised :func:`point_polyline_closest` for (N, 3) points.

    Returns feet (N, 3), segment indices (N,), segment parameters (N,) and
    distances (N,).
    """
    c = _check_curve(curve)
    p = np.atleast_2d(np.asarray(points, dtype=float))
    a, seg = c[:-1], np.diff(c, axis=0)
    ll = np.einsum("ij,ij->i", seg, seg)
    rel = p[:, None, :] - a[None, :, :]
    t = np.einsum("nij,ij->ni", rel, seg) / np.where(ll > 0, ll, 1.0)
    t = np.clip(t, 0.0, 1.0)
    foot = a[None, :, :] + t[..., None] * seg[None, :, :]
    d2 = np.einsum("nij,nij->ni", foot - p[:, None, :], foot - p[:, None, :])
    idx = np.argmin(d2, axis=1)
    rows = np.arange(len(p))
    return foot[rows, idx], idx, t[rows, idx], np.sqrt(d2[rows, idx])


def _ray_segment_params(o, d, a, b):
    """Parameters (s >= 0 on the ray, t in [0, 1] on segments a->b).

    ``o``, ``d`` broadcast against (..., 3) segment arrays ``a``, ``b``.
    """
    e2 = b - a
    r = o - a
    ee = np.einsum("...j,...j->...", e2, e2)
    bb = np.einsum("...j,...j->...", d, e2)
    c = np.einsum("...j,...j->...", d, r)
    f = np.einsum("...j,...j->...", e2, r)
    denom = ee - bb * bb
    degenerate = ee < 1e-24
    safe_ee = np.where(degenerate, 1.0, ee)
    safe_den = np.where(denom > 1e-18 * np.maximum(ee, 1e-300), denom, np.inf)
    s = np.maximum((bb * f - c * ee) / safe_den, 0.0)
    s = np.where(np.isfinite(safe_den), s, np.maximum(-c, 0.0))
    t = (bb * s + f) / safe_ee
    lo, hi = t < 0.0, t > 1.0
    t = np.clip(t, 0.0, 1.0)
    s = np.where(lo, np.maximum(-c, 0.0), s)
    s = np.where(hi, np.maximum(bb - c, 0.0), s)
    t = np.where(degenerate, 0.0, t)
    s = np.where(degenerate, np.maximum(-c, 0.0), s)
    return s, t


def ray_polyline_closest(r: Ray, curve):
    """Closest pair between a ray (s >= 0) and a piecewise-linear curve.

    Returns ``(pr, pc, segment_index, dist)``.
    """
    c = _check_curve(curve)
    a, b = c[:-1], c[1:]
    s, t = _ray_segment_params(r.origin, r.direction, a, b)
    pr = r.origin + s[:, None] * r.direction
    pc = a + t[:, None] * (b - a)
    d = np.linalg.norm(pr - pc, axis=1)
    i = int(np.argmin(d))
    return pr[i], pc[i], i, float(d[i])


def rays_polyline_closest(origins, dirs, curve):
    """Vectorised :func:`ray_polyline_closest` for (N, 3) ray bundles.

    Returns ray feet, curve feet, segment indices, segment parameters and
    distances.
    """
    c = _check_curve(curve)
    o = np.atleast_2d(np.asarray(origins, float))
    d = np.atleast_2d(np.asarray(dirs, float))
    o = np.broadcast_to(o, d.shape)
    a, b = c[:-1][None], c[1:][None]
    s, t = _ray_segment_params(o[:, None, :], d[:, None, :], a, b)
    pr = o[:, None, :] + s[..., None] * d[:, None, :]
    pc = a + t[..., None] * (b - a)
    dist = np.linalg.norm(pr - pc, axis=-1)
    idx = np.argmin(dist, axis=1)
    rows = np.arange(len(d))
    return pr[rows, idx], pc[rows, idx], idx, t[rows, idx], dist[rows, idx]
