"""Two-view flame estimation: midpoint triangulation, surface point recovery,
width regression and joint IoU refinement."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict, fields
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.optimize import minimize

from . import geom
from .errors import (DegenerateGeometryError, EmptySilhouetteError,
                     InsufficientPointsError, ZeroMidpointError)
from .geom import CameraModel
from .model import (ArcParams, FlameModel, NOZZLE_RADIUS, arc_from_midpoint, arc_from_tip,
                    curve_point_at, midpoint_from_arc, sample_center_curve)
from .render import pixel_rays, render_mask
from .silhouette import Silhouette, mask_iou
from .width import KERNELS, SIGMA_N_DEFAULT, SIGMA_F_DEFAULT, width_fit

log = logging.getLogger(__name__)

TWO_VIEW = "two-view"
ONE_VIEW = "one-view"

# Gaussian blur (px) of the coarse and middle refinement stages
REFINE_BLUR = (3.0, 1.5)


@dataclass(frozen=True)
class EstimatorConfig:
    d: float = 0.01
    theta: float = 0.35
    gamma: float = 1.47
    refine: bool = True
    refine_iters: int = 250
    M: int = 64
    sigma_n: float = SIGMA_N_DEFAULT
    sigma_f: float = SIGMA_F_DEFAULT
    kernel: str = "thinplate"
    nozzle_radius: float = NOZZLE_RADIUS
    knots: int = 8
    dedup_bins: int = 32

    def __post_init__(self):
        for name in ("d", "theta", "gamma", "sigma_n", "sigma_f", "nozzle_radius"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.gamma > math.pi / 2:
            raise ValueError("gamma must not exceed pi/2")
        if self.refine_iters < 0 or self.M < 2 or self.knots < 1 or self.dedup_bins < 1:
            raise ValueError("bad iteration/sample counts")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown estimator keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **kw) -> "EstimatorConfig":
        return EstimatorConfig(**{**asdict(self), **kw})


@dataclass(frozen=True, eq=False)
class StereoObservation:
    sil1: Silhouette
    sil2: Silhouette
    cam1: CameraModel
    cam2: CameraModel

    def __post_init__(self):
        if np.linalg.norm(self.cam1.center - self.cam2.center) <= 1e-6:
            raise DegenerateGeometryError("camera centers coincide (zero baseline)")
        for sil, cam in ((self.sil1, self.cam1), (self.sil2, self.cam2)):
            if sil.mask.shape != (cam.height, cam.width):
                raise ValueError("silhouette size does not match its camera")

    @cached_property
    def distance1(self) -> np.ndarray:
        """Distance (px) from each silhouette pixel of view 1 to the background."""
        return ndimage.distance_transform_edt(self.sil1.mask)

    @cached_property
    def distance2(self) -> np.ndarray:
        return ndimage.distance_transform_edt(self.sil2.mask)

    def swapped(self) -> "StereoObservation":
        return StereoObservation(self.sil2, self.sil1, self.cam2, self.cam1)


@dataclass(frozen=True, eq=False)
class SurfacePointSet:
    points: np.ndarray  # (N, 3)
    source: np.ndarray  # (N,) of TWO_VIEW / ONE_VIEW
    l: np.ndarray
    w: np.ndarray

    def __len__(self):
        return len(self.points)

    @classmethod
    def empty(cls) -> "SurfacePointSet":
        return cls(np.zeros((0, 3)), np.array([], dtype=object), np.zeros(0), np.zeros(0))

    def concat(self, other: "SurfacePointSet") -> "SurfacePointSet":
        return SurfacePointSet(np.vstack([self.points, other.points]),
                               np.concatenate([self.source, other.source]),
                               np.concatenate([self.l, other.l]),
                               np.concatenate([self.w, other.w]))

    def count(self, source: str) -> int:
        return int(np.count_nonzero(self.source == source))


@dataclass
class FitDiagnostics:
    n_two_view: int = 0
    n_one_view: int = 0
    iou1: float = float("nan")
    iou2: float = float("nan")
    refined: bool = False
    midpoint_reproj_px: tuple = ()

    def to_dict(self) -> dict:
        return {"n_two_view": self.n_two_view, "n_one_view": self.n_one_view,
                "iou1": self.iou1, "iou2": self.iou2, "refined": self.refined}


# --------------------------------------------------------------------------
# midpoint

def _midpoint_system(obs: StereoObservation, pixels=None) -> np.ndarray:
    rows = []
    for i, (sil, cam) in enumerate(((obs.sil1, obs.cam1), (obs.sil2, obs.cam2))):
        if pixels is not None:
            c = pixels[i]
        elif sil.empty:
            raise EmptySilhouetteError("cannot triangulate from an empty silhouette")
        else:
            c = sil.centroid
        # normalized image coordinates keep the system well conditioned
        xn = cam.K_inv @ np.array([c[0], c[1], 1.0])
        Rt = np.hstack([cam.pose.rotation, cam.pose.translation[:, None]])
        rows.append(geom.skew(xn / np.linalg.norm(xn)) @ Rt)
    return np.vstack(rows)


def triangulate_midpoint(obs: StereoObservation, pixels=None) -> np.ndarray:
    """Arc midpoint from the two silhouette centroids (homogeneous DLT).

    ``pixels`` replaces the centroids with two other image points.
    """
    A = _midpoint_system(obs, pixels)
    _, s, vt = np.linalg.svd(A)
    if abs(s[2] - s[3]) <= 1e-9 * s[0]:
        raise DegenerateGeometryError("midpoint rays are (near) parallel")
    X = vt[-1]
    if abs(X[3]) < 1e-12:
        raise DegenerateGeometryError("midpoint at infinity")
    xm = X[:3] / X[3]
    if xm[2] <= 0:
        raise DegenerateGeometryError("triangulated midpoint lies behind the nozzle")
    return xm


def triangulate_axis_midpoint(obs: StereoObservation, pixels=None) -> np.ndarray:
    """Least-squares midpoint constrained to the nozzle Z axis."""
    A = _midpoint_system(obs, pixels)
    a, b = A[:, 2], A[:, 3]
    aa = float(a @ a)
    if aa < 1e-18:
        raise DegenerateGeometryError("nozzle axis is unobservable")
    z = -float(a @ b) / aa
    if z <= 0:
        raise DegenerateGeometryError("midpoint lies behind the nozzle")
    return np.array([0.0, 0.0, z])


def _tip_pixels(obs: StereoObservation) -> list:
    """Per view, the silhouette pixel farthest from the projected nozzle."""
    out = []
    for sil, cam in ((obs.sil1, obs.cam1), (obs.sil2, obs.cam2)):
        if sil.empty:
            raise EmptySilhouetteError("cannot locate the tip in an empty silhouette")
        px, ok = geom.project_points(cam, np.zeros(3))
        if not ok[0]:
            raise DegenerateGeometryError("nozzle is behind a camera")
        b = sil.boundary.astype(float)
        k = int(np.argmax(np.sum((b - px[0]) ** 2, axis=1)))
        out.append(b[k])
    return out


def triangulate_tip(obs: StereoObservation) -> np.ndarray:
    """Flame tip from the silhouette pixels farthest from the nozzle image."""
    return triangulate_midpoint(obs, _tip_pixels(obs))


def midpoint_reprojection(obs: StereoObservation, xm) -> tuple[float, float]:
    out = []
    for sil, cam in ((obs.sil1, obs.cam1), (obs.sil2, obs.cam2)):
        px, ok = geom.project_points(cam, xm)
        out.append(float(np.linalg.norm(px[0] - sil.centroid)) if ok[0] else float("inf"))
    return tuple(out)


# --------------------------------------------------------------------------
# surface points

def _arc_lengths(params: ArcParams, feet: np.ndarray) -> np.ndarray:
    """Nozzle-to-foot arc length through the chord/arc relation."""
    if params.straight:
        return np.clip(feet[:, 2], 0.0, params.length)
    # snap the polyline feet radially onto the analytic arc first
    q = (feet - params.center) @ np.array([[math.cos(params.beta), -math.sin(params.beta), 0.0],
                                           [math.sin(params.beta), math.cos(params.beta), 0.0],
                                           [0.0, 0.0, 1.0]])
    a = np.clip(np.arctan2(q[:, 2], -q[:, 0]), 0.0, params.alpha)
    chord = 2.0 * params.r * np.sin(a / 2.0)
    return 2.0 * params.r * np.arcsin(np.clip(chord / (2.0 * params.r), 0.0, 1.0))


def _register(points: np.ndarray, params: ArcParams, curve: np.ndarray, tag: str) -> SurfacePointSet:
    if len(points) == 0:
        return SurfacePointSet.empty()
    feet, _, _, dist = geom.points_polyline_closest(points, curve)
    l = _arc_lengths(params, feet)
    return SurfacePointSet(points, np.full(len(points), tag, dtype=object), l, dist)


def recover_two_view_points(obs: StereoObservation, params: ArcParams, curve: np.ndarray,
                            cfg: EstimatorConfig) -> SurfacePointSet:
    """Surface points seen on both silhouette boundaries.

    View-1 boundary points are visited in contour order. For each, view-2
    boundary points are tried in order of distance to its epipolar line and
    the first unused one whose rays pass the distance and angle gates is
    matched; the registered point is the midpoint of the two ray feet.
    """
    b1, b2 = obs.sil1.boundary.astype(float), obs.sil2.boundary.astype(float)
    if len(b1) == 0 or len(b2) == 0:
        return SurfacePointSet.empty()
    c1, c2 = obs.cam1.center, obs.cam2.center
    d1 = geom.backproject_dirs(obs.cam1, b1)
    d2 = geom.backproject_dirs(obs.cam2, b2)
    mid, dist, ang = geom.ray_ray_closest_batch(c1, d1, c2, d2)
    front = (np.einsum("nkj,nj->nk", mid - c1, d1) > 0) & \
            (np.einsum("nkj,kj->nk", mid - c2, d2) > 0)
    ok = (dist < cfg.d) & (ang > cfg.theta) & front
    if not ok.any():
        return SurfacePointSet.empty()

    F = geom.fundamental_matrix(obs.cam1, obs.cam2)
    lines = np.column_stack([b1, np.ones(len(b1))]) @ F.T
    x2h = np.column_stack([b2, np.ones(len(b2))])
    epi = np.abs(lines @ x2h.T) / np.maximum(np.hypot(lines[:, :1], lines[:, 1:2]), 1e-300)

    used = np.zeros(len(b2), dtype=bool)
    picked = []
    for j in np.flatnonzero(ok.any(axis=1)):
        cand = ok[j] & ~used
        if not cand.any():
            continue
        k = int(np.argmin(np.where(cand, epi[j], np.inf)))
        used[k] = True
        picked.append(mid[j, k])
    return _register(np.array(picked).reshape(-1, 3), params, curve, TWO_VIEW)


def recover_one_view_points(sil: Silhouette, cam: CameraModel, params: ArcParams,
                            curve: np.ndarray, cfg: EstimatorConfig) -> SurfacePointSet:
    """Surface points from boundary rays that pass the curve near-perpendicularly."""
    b = sil.boundary.astype(float)
    if len(b) == 0:
        return SurfacePointSet.empty()
    dirs = geom.backproject_dirs(cam, b)
    pr, _, idx, _, _ = geom.rays_polyline_closest(cam.center, dirs, curve)
    tang = curve[idx + 1] - curve[idx]
    tang /= np.maximum(np.linalg.norm(tang, axis=1, keepdims=True), 1e-300)
    ang = np.arccos(np.clip(np.abs(np.einsum("ij,ij->i", dirs, tang)), 0.0, 1.0))
    keep = ang > cfg.gamma if cfg.gamma > 0 else np.ones(len(b), dtype=bool)
    return _register(pr[keep], params, curve, ONE_VIEW)


def _select(pts: SurfacePointSet, keep) -> SurfacePointSet:
    keep = np.asarray(keep, dtype=bool)
    return SurfacePointSet(pts.points[keep], pts.source[keep], pts.l[keep], pts.w[keep])


def _drop_explained(extra: SurfacePointSet, primary: SurfacePointSet, total: float,
                    bins: int) -> SurfacePointSet:
    """Points of ``extra`` whose arc-length bin holds no ``primary`` point."""
    if len(extra) == 0 or len(primary) == 0 or total <= 0:
        return extra
    step = total / bins
    taken = set(np.floor(primary.l / step).astype(int).tolist())
    return _select(extra, [int(b) not in taken for b in np.floor(extra.l / step)])


def perpendicular_only(pts: SurfacePointSet, curve: np.ndarray, max_cos: float = 0.5) -> SurfacePointSet:
    """Drop points whose offset from the curve is not across it.

    Cross-sections are perpendicular to the center curve, so a point whose
    nearest curve point is an end sample and which lies beyond that end
    cannot be a cross-section boundary point.
    """
    if len(pts) == 0:
        return pts
    feet, idx, _, dist = geom.points_polyline_closest(pts.points, curve)
    tang = curve[idx + 1] - curve[idx]
    tang /= np.maximum(np.linalg.norm(tang, axis=1, keepdims=True), 1e-300)
    off = pts.points - feet
    cos = np.abs(np.einsum("ij,ij->i", off, tang)) / np.maximum(dist, 1e-300)
    return _select(pts, (cos <= max_cos) | (dist <= 1e-12))


def recover_surface_points(obs: StereoObservation, params: ArcParams, curve: np.ndarray,
                           cfg: EstimatorConfig) -> SurfacePointSet:
    """Two-view and one-view surface points, merged per arc-length bin.

    One-view points take precedence: where a bin already holds one, the
    two-view points that fall into it are dropped.
    """
    two = perpendicular_only(recover_two_view_points(obs, params, curve, cfg), curve)
    one = recover_one_view_points(obs.sil1, obs.cam1, params, curve, cfg).concat(
        recover_one_view_points(obs.sil2, obs.cam2, params, curve, cfg))
    two = _drop_explained(two, one, params.total_length, cfg.dedup_bins)
    return two.concat(one)


def bin_widths(pts: SurfacePointSet, total: float, bins: int, outlier_ratio: float = 2.5):
    """Collapse surface points to one (l, w) sample per arc-length bin.

    Bins holding one-view points use their median. Bins with only two-view
    points use the smallest width: a two-view point is a visual-hull vertex,
    so its width bounds the true radius from above, and false matches only
    ever inflate it.
    """
    if len(pts) == 0:
        return np.zeros(0), np.zeros(0)
    step = max(total, 1e-9) / bins
    b = np.minimum(np.floor(pts.l / step).astype(int), bins - 1)
    ls, ws, trusted = [], [], []
    for k in np.unique(b):
        m = b == k
        one = m & (pts.source == ONE_VIEW)
        if one.any():
            ls.append(np.median(pts.l[one]))
            ws.append(np.median(pts.w[one]))
        else:
            j = np.flatnonzero(m)[np.argmin(pts.w[m])]
            ls.append(pts.l[j])
            ws.append(pts.w[j])
        trusted.append(one.any())
    ls, ws, trusted = np.array(ls), np.array(ws), np.array(trusted)
    # two-view-only bins far above the typical width are false matches
    ref = np.median(ws[trusted]) if trusted.any() else np.median(ws)
    keep = trusted | (ws <= outlier_ratio * ref)
    return ls[keep], ws[keep]


def inscribed_width(obs: StereoObservation, points) -> np.ndarray:
    """Upper bound on the flame radius at each center point.

    The cross-section sphere around a center point projects to a disc that
    must fit inside both silhouettes, so its radius is at most the distance
    transform at the projected center (plus a pixel of slack) scaled back to
    metres by depth over focal length. Points projecting outside a silhouette
    get a one-pixel bound.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.full(len(points), np.inf)
    for sil, cam, dt in ((obs.sil1, obs.cam1, obs.distance1), (obs.sil2, obs.cam2, obs.distance2)):
        px, ok = geom.project_points(cam, points)
        depth = cam.pose.apply(points)[:, 2]
        r = np.zeros(len(points))
        inside = ok & np.all(np.isfinite(px), axis=1)
        if inside.any():
            r[inside] = ndimage.map_coordinates(dt, [px[inside, 1], px[inside, 0]], order=1,
                                                mode="constant", cval=0.0)
        bound = np.where(ok, (r + 1.0) * np.maximum(depth, 0.0) / min(cam.fx, cam.fy), np.inf)
        out = np.minimum(out, bound)
    return out


def width_cap(obs: StereoObservation, xm) -> float:
    """Largest radius either silhouette can hold at the midpoint's depth."""
    caps = []
    for sil, cam in ((obs.sil1, obs.cam1), (obs.sil2, obs.cam2)):
        depth = float(cam.pose.apply(np.asarray(xm, dtype=float))[2])
        ys, xs = np.nonzero(sil.mask)
        span = max(xs.max() - xs.min(), ys.max() - ys.min()) + 1.0
        caps.append(0.5 * span * abs(depth) / min(cam.fx, cam.fy))
    return max(min(caps), 1e-4)


# --------------------------------------------------------------------------
# fitting

def _width_model(l, w, cfg: EstimatorConfig):
    l = np.concatenate([[0.0], l])
    w = np.concatenate([[cfg.nozzle_radius], w])
    return width_fit(np.column_stack([l, w]), sigma_n=cfg.sigma_n, kernel=cfg.kernel,
                     sigma_f=cfg.sigma_f)


def _observed_ious(fm: FlameModel, obs: StereoObservation, dirs=None) -> tuple[float, float]:
    dirs = dirs or (None, None)
    m1 = render_mask(fm.curve, fm.curve_w, obs.cam1, dirs[0])
    m2 = render_mask(fm.curve, fm.curve_w, obs.cam2, dirs[1])
    return mask_iou(m1, obs.sil1.mask), mask_iou(m2, obs.sil2.mask)


def fit_flame_full(obs: StereoObservation, cfg: EstimatorConfig = EstimatorConfig(),
                   kind: str = "arc"):
    """Like :func:`fit_flame` but also returns diagnostics and the surface points."""
    if obs.sil1.empty or obs.sil2.empty:
        raise EmptySilhouetteError("empty silhouette")
    if kind == "arc":
        xm = triangulate_midpoint(obs)
    elif kind == "line":
        xm = triangulate_axis_midpoint(obs)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    try:
        params = arc_from_midpoint(xm) if kind == "arc" else ArcParams.line(2.0 * xm[2])
    except ZeroMidpointError as e:
        raise DegenerateGeometryError(str(e)) from e
    curve, curve_l = sample_center_curve(params, cfg.M)
    pts = recover_surface_points(obs, params, curve, cfg)
    if len(pts) < 3:
        raise InsufficientPointsError(f"only {len(pts)} surface points recovered")
    cap = width_cap(obs, xm)
    pts = _select(pts, pts.w <= cap)
    if len(pts) < 3:
        raise InsufficientPointsError(f"only {len(pts)} plausible surface points recovered")
    l, w = bin_widths(pts, params.total_length, cfg.dedup_bins)
    w = np.minimum(w, inscribed_width(obs, curve_point_at(curve, curve_l, l)))
    width = _width_model(l, w, cfg)
    if kind == "arc":
        fm = FlameModel.arc(xm, width, cfg.M)
    else:
        fm = FlameModel.line(params.length, width, cfg.M)
    diag = FitDiagnostics(pts.count(TWO_VIEW), pts.count(ONE_VIEW),
                          midpoint_reproj_px=midpoint_reprojection(obs, xm))
    dirs = (pixel_rays(obs.cam1), pixel_rays(obs.cam2))
    if cfg.refine and cfg.refine_iters > 0:
        fm, _ = joint_refine_info(fm, obs, cfg, dirs)
        diag.refined = True
    diag.iou1, diag.iou2 = _observed_ious(fm, obs, dirs)
    return fm, diag, pts


def fit_flame(obs: StereoObservation, cfg: EstimatorConfig = EstimatorConfig(),
              kind: str = "arc") -> FlameModel:
    """Estimate a flame model from a stereo silhouette pair.

    ``kind="line"`` fits the straight baseline with the midpoint held on the
    nozzle axis.
    """
    return fit_flame_full(obs, cfg, kind)[0]


# --------------------------------------------------------------------------
# joint refinement

@dataclass
class RefineInfo:
    initial: float
    final: float
    evaluations: int = 0
    failed: bool = False
    history: list = field(default_factory=list)


def reproject_objective(fm: FlameModel, obs: StereoObservation, dirs=None) -> float:
    """Sum of the two per-view IoUs between observed and reprojected silhouettes."""
    return sum(_observed_ious(fm, obs, dirs))


def joint_refine(fm: FlameModel, obs: StereoObservation,
                 cfg: EstimatorConfig = EstimatorConfig()) -> FlameModel:
    return joint_refine_info(fm, obs, cfg)[0]


def _bbox(mask: np.ndarray):
    ys = np.flatnonzero(mask.any(axis=1))
    xs = np.flatnonzero(mask.any(axis=0))
    if len(ys) == 0:
        return None
    return ys[0], ys[-1] + 1, xs[0], xs[-1] + 1


def blurred_iou(pred: np.ndarray, target: np.ndarray, target_bbox, sigma: float) -> float:
    """IoU of Gaussian-blurred masks (sum of minima over sum of maxima).

    ``target`` is the already blurred observation and ``target_bbox`` the box
    of its unblurred mask. Work is limited to the union box padded by the
    filter radius, outside which both blurred images vanish.
    """
    pad = int(math.ceil(4.0 * sigma))
    boxes = [b for b in (_bbox(pred), target_bbox) if b is not None]
    if not boxes:
        return 1.0
    H, W = pred.shape
    y0 = max(min(b[0] for b in boxes) - pad, 0)
    y1 = min(max(b[1] for b in boxes) + pad, H)
    x0 = max(min(b[2] for b in boxes) - pad, 0)
    x1 = min(max(b[3] for b in boxes) + pad, W)
    a = ndimage.gaussian_filter(pred[y0:y1, x0:x1].astype(float), sigma, mode="constant")
    b = target[y0:y1, x0:x1]
    den = float(np.maximum(a, b).sum())
    return float(np.minimum(a, b).sum()) / den if den > 0 else 1.0


def joint_refine_info(fm: FlameModel, obs: StereoObservation, cfg: EstimatorConfig,
                      dirs=None):
    """Nelder-Mead over [midpoint, width knots] maximising the two-view IoU sum.

    Width knots sit at fixed fractions of the current curve length and are
    interpolated by the width GP together with the nozzle anchor. The search
    runs coarse to fine:

    1. re-triangulate the midpoint with the centroid offsets of the current
       model removed (a few fixed-point steps);
    2. move the midpoint with a scale and a tilt on the knots, once from the current
       midpoint and once from the arc through the triangulated flame tip,
       scoring the IoU of Gaussian-blurred masks so thin silhouettes that do
       not overlap yet still pull the model in;
    3. refine the full vector on lightly blurred masks, then restart on the
       exact IoU.

    Every candidate is also scored by the exact IoU sum and the best model
    seen is returned, so the objective never drops below the input's.
    """
    if dirs is None:
        dirs = (pixel_rays(obs.cam1), pixel_rays(obs.cam2))
    f0 = reproject_objective(fm, obs, dirs)
    info = RefineInfo(f0, f0)
    if cfg.refine_iters <= 0:
        return fm, info

    straight = fm.kind == "line"
    K = cfg.knots
    frac = np.arange(1, K + 1) / K
    cap = width_cap(obs, fm.midpoint if not straight else [0.0, 0.0, fm.total_length / 2.0])
    upper = min(3.0 * max(float(fm.curve_w.max()), cfg.nozzle_radius), cap)
    best = {"f": f0, "model": fm}
    views = ((obs.sil1, obs.cam1, dirs[0]), (obs.sil2, obs.cam2, dirs[1]))
    blurred = {}

    def target(view, sigma):
        key = (view, sigma)
        if key not in blurred:
            mask = views[view][0].mask
            blurred[key] = (ndimage.gaussian_filter(mask.astype(float), sigma, mode="constant"),
                            _bbox(mask))
        return blurred[key]

    def build(head, knots):
        knots = np.clip(knots, 0.0, upper)
        if straight:
            if head[0] <= 1e-3:
                return None
            total = 2.0 * head[0]
        else:
            if head[2] <= 1e-3:
                return None
            try:
                total = arc_from_midpoint(head).total_length
            except ZeroMidpointError:
                return None
        width = _width_model(frac * total, knots, cfg)
        if straight:
            return FlameModel.line(total, width, cfg.M)
        return FlameModel.arc(head, width, cfg.M)

    def score(m, sigma=0.0, masks=None):
        """Negated objective for the simplex; also tracks the incumbent."""
        info.evaluations += 1
        if m is None:
            return 1.0  # worse than any reachable objective
        if masks is None:
            masks = [render_mask(m.curve, m.curve_w, cam, d) for _, cam, d in views]
        f = sum(mask_iou(mk, sil.mask) for mk, (sil, _, _) in zip(masks, views))
        if f > best["f"]:
            best["f"], best["model"] = f, m
        if sigma <= 0:
            return -f
        return -sum(blurred_iou(mk, *target(i, sigma), sigma) for i, mk in enumerate(masks))

    def state(m):
        head = np.array([m.total_length / 2.0]) if straight else m.midpoint.copy()
        return head, np.clip(m.width.mean(frac * m.total_length), 0.0, upper)

    def run(fun, x0, steps, iters):
        simplex = np.vstack([x0] + [x0 + np.eye(len(x0))[i] * steps[i] for i in range(len(x0))])
        try:
            return minimize(fun, x0, method="Nelder-Mead",
                            options={"maxiter": iters, "initial_simplex": simplex,
                                     "xatol": 1e-4, "fatol": 1e-4}).x
        except (ValueError, np.linalg.LinAlgError) as e:  # pragma: no cover - defensive
            log.warning("refinement failed: %s", e)
            info.failed = True
            return x0

    # 1. centroid pass
    m = fm
    for _ in range(3):
        head, knots = state(m)
        xm = head if not straight else np.array([0.0, 0.0, head[0]])
        masks, pixels = [], []
        for sil, cam, d in views:
            mk = render_mask(m.curve, m.curve_w, cam, d)
            ys, xs = np.nonzero(mk)
            px, ok = geom.project_points(cam, xm)
            if len(xs) == 0 or not ok[0]:
                break
            masks.append(mk)
            pixels.append(sil.centroid - (np.array([xs.mean(), ys.mean()]) - px[0]))
        if len(pixels) < 2:
            break
        try:
            if straight:
                head = triangulate_axis_midpoint(obs, pixels)[2:]
            else:
                head = triangulate_midpoint(obs, pixels)
        except DegenerateGeometryError:
            break
        m = build(head, knots)
        if m is None:
            break
        score(m)

    # 2. midpoint and knot scale on blurred masks, started from the current
    # incumbent and from the arc through the triangulated flame tip
    head0, knots0 = state(best["model"])
    nh = len(head0)
    starts = [head0]
    try:
        xe = triangulate_tip(obs)
        if straight:
            starts.append(np.array([triangulate_axis_midpoint(obs, _tip_pixels(obs))[2] / 2.0]))
        else:
            starts.append(midpoint_from_arc(arc_from_tip(xe)))
    except (DegenerateGeometryError, ZeroMidpointError):
        pass
    hstep = max(0.02, 0.1 * float(np.linalg.norm(head0)))
    seeds = []
    for h in starts:
        # knots are first pulled under the inscribed-disc bound of this start
        m = build(h, knots0)
        if m is None:
            continue
        base = np.minimum(knots0, inscribed_width(obs, m.point_at(frac * m.total_length)))

        def shaped(x, base=base):
            # overall log-scale plus a log-linear tilt along the flame
            return base * np.exp(x[nh] + x[nh + 1] * (frac - 0.5))

        x = run(lambda x: score(build(x[:nh], shaped(x)), REFINE_BLUR[0]),
                np.concatenate([h, [0.0, 0.0]]), np.r_[np.full(nh, hstep), 0.5, 1.0],
                max(cfg.refine_iters // 4, 1))
        m = build(x[:nh], shaped(x))
        if m is not None:
            seeds.append(m)

    # 3. full vector from each seed, blurred then exact
    for m in seeds:
        wtop = max(float(m.curve_w.max()), cfg.nozzle_radius)
        steps = np.r_[np.full(nh, 0.5 * hstep), np.full(K, 0.3 * wtop)]
        x = np.concatenate(state(m))
        for iters, sigma in ((max(cfg.refine_iters // 2, 1), REFINE_BLUR[1]),
                             (max(cfg.refine_iters // 4, 1), 0.0)):
            if info.failed:
                break
            x = run(lambda x: score(build(x[:nh], x[nh:]), sigma), x, steps, iters)
            steps = steps * 0.5

    info.final = best["f"]
    return best["model"], info


def reproject_silhouette(fm: FlameModel, cam: CameraModel) -> Silhouette:
    """Pixels whose back-projected ray meets the flame (F <= 0 somewhere on it)."""
    return Silhouette(render_mask(fm.curve, fm.curve_w, cam))
