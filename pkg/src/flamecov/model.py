"""Flame representation: circular-arc center curve plus cross-section width.

The center curve leaves the nozzle (origin of {H}) along +Z and bends in the
half-plane at azimuth ``beta`` with radius ``r`` through central angle
``alpha``. A point at sweep angle ``a`` is

    R_Z(beta) @ [r (1 - cos a), 0, r sin a]

so the arc center is ``R_Z(beta) @ [r, 0, 0]`` and the midpoint sits at
``a = alpha / 2``. The arc is stored and exchanged through that midpoint.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import geom
from .errors import OffCurveError, ZeroMidpointError
from .width import WidthModel, width_fit

EPS_STRAIGHT = 1e-4
DEFAULT_SAMPLES = 64
NOZZLE_RADIUS = 0.005


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class ArcParams:
    alpha: float = 0.0
    beta: float = 0.0
    r: float = 0.0
    straight: bool = False
    length: float = 0.0

    @classmethod
    def line(cls, length: float) -> "ArcParams":
        if length <= 0:
            raise ValueError("straight flame length must be positive")
        return cls(straight=True, length=float(length))

    @property
    def total_length(self) -> float:
        return self.length if self.straight else self.r * self.alpha

    @property
    def center(self) -> np.ndarray | None:
        if self.straight:
            return None
        return rot_z(self.beta) @ np.array([self.r, 0.0, 0.0])


def arc_from_midpoint(xm, eps_straight: float = EPS_STRAIGHT) -> ArcParams:
    """Recover (alpha, beta, r) from the arc midpoint."""
    xm = np.asarray(xm, dtype=float).reshape(3)
    n = float(np.linalg.norm(xm))
    if n < 1e-9:
        raise ZeroMidpointError("arc midpoint coincides with the nozzle")
    nxy = math.hypot(xm[0], xm[1])
    ratio = nxy / n
    if ratio < eps_straight:
        if xm[2] <= 0:
            raise ZeroMidpointError("straight flame must extend along +Z")
        return ArcParams.line(2.0 * xm[2])
    alpha = 4.0 * math.asin(min(ratio, 1.0))
    beta = math.atan2(xm[1], xm[0])
    r = (n / 2.0) / math.sin(alpha / 4.0)
    return ArcParams(alpha, beta, r)


def midpoint_from_arc(p: ArcParams) -> np.ndarray:
    if p.straight:
        return np.array([0.0, 0.0, p.length / 2.0])
    h = p.alpha / 2.0
    return rot_z(p.beta) @ np.array([p.r * (1.0 - math.cos(h)), 0.0, p.r * math.sin(h)])


def curve_point_at(curve, lengths, l) -> np.ndarray:
    """Linear interpolation of polyline points at arc lengths ``l``."""
    l = np.atleast_1d(np.asarray(l, dtype=float))
    return np.column_stack([np.interp(l, lengths, curve[:, k]) for k in range(3)])


def arc_from_tip(xe, eps_straight: float = EPS_STRAIGHT) -> ArcParams:
    """The arc leaving the nozzle along +Z that ends at ``xe``.

    In the bend plane the tip sits at (r(1 - cos a), r sin a), so the sweep
    is a = 2 atan2(rho, z) with rho the tip's distance from the Z axis.
    """
    xe = np.asarray(xe, dtype=float).reshape(3)
    n = float(np.linalg.norm(xe))
    if n < 1e-9:
        raise ZeroMidpointError("flame tip coincides with the nozzle")
    rho = math.hypot(xe[0], xe[1])
    if rho / n < eps_straight:
        if xe[2] <= 0:
            raise ZeroMidpointError("straight flame must extend along +Z")
        return ArcParams.line(xe[2])
    alpha = 2.0 * math.atan2(rho, xe[2])
    r = rho / (1.0 - math.cos(alpha))
    return ArcParams(alpha, math.atan2(xe[1], xe[0]), r)


def sample_center_curve(p: ArcParams, M: int = DEFAULT_SAMPLES):
    """M points along the center curve and their arc lengths from the nozzle."""
    if M < 2:
        raise ValueError("need at least two curve samples")
    frac = np.linspace(0.0, 1.0, M)
    lengths = frac * p.total_length
    if p.straight:
        pts = np.zeros((M, 3))
        pts[:, 2] = lengths
        return pts, lengths
    a = frac * p.alpha
    local = np.column_stack([p.r * (1.0 - np.cos(a)), np.zeros(M), p.r * np.sin(a)])
    pts = local @ rot_z(p.beta).T
    pts[0] = 0.0
    return pts, lengths


def arc_length_of(p: ArcParams, pc, tol: float = 1e-6) -> float:
    """Arc length from the nozzle to a point on the center curve."""
    pc = np.asarray(pc, dtype=float).reshape(3)
    if p.straight:
        off = math.hypot(pc[0], pc[1])
        if off > tol or pc[2] < -tol or pc[2] > p.length + tol:
            raise OffCurveError("point is not on the straight center line")
        return float(np.linalg.norm(pc))
    off = _arc_distance(p, pc)
    if off > tol:
        raise OffCurveError(f"point is {off:.3g} m off the center arc")
    chord = float(np.linalg.norm(pc))
    return 2.0 * p.r * math.asin(min(chord / (2.0 * p.r), 1.0))


def _arc_local(p: ArcParams, x) -> np.ndarray:
    """Coordinates in the arc plane: (radial from center, normal, axial)."""
    return (np.asarray(x, float) - p.center) @ rot_z(p.beta)


def _arc_distance(p: ArcParams, x) -> float:
    return float(np.linalg.norm(x - snap_to_arc(p, x)))


def snap_to_arc(p: ArcParams, x) -> np.ndarray:
    """Closest point on the analytic center curve (end points clamped)."""
    x = np.asarray(x, dtype=float).reshape(3)
    if p.straight:
        return np.array([0.0, 0.0, min(max(x[2], 0.0), p.length)])
    q = _arc_local(p, x)
    # sweep angle measured from the nozzle, which sits at (-r, 0, 0) locally
    a = math.atan2(q[2], -q[0])
    if 0.0 <= a <= p.alpha:
        return _arc_point(p, a)
    ends = [_arc_point(p, 0.0), _arc_point(p, p.alpha)]
    return min(ends, key=lambda e: float(np.linalg.norm(e - x)))


def _arc_point(p: ArcParams, a: float) -> np.ndarray:
    local = np.array([p.r * (1.0 - math.cos(a)), 0.0, p.r * math.sin(a)])
    return rot_z(p.beta) @ local


@dataclass(frozen=True, eq=False)
class FlameModel:
    """Center curve plus width GP, with cached curve samples.

    ``midpoint`` is ``None`` for the straight baseline, in which case
    ``length`` holds the line length.
    """
    width: WidthModel
    midpoint: np.ndarray | None = None
    length: float | None = None
    samples: int = DEFAULT_SAMPLES
    params: ArcParams = field(init=False, repr=False)
    curve: np.ndarray = field(init=False, repr=False)
    curve_l: np.ndarray = field(init=False, repr=False)
    curve_w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.midpoint is not None:
            xm = np.asarray(self.midpoint, dtype=float).reshape(3)
            if xm[2] <= 0:
                raise ValueError("arc midpoint must lie in front of the nozzle (z > 0)")
            object.__setattr__(self, "midpoint", xm)
            params = arc_from_midpoint(xm)
        elif self.length is not None:
            params = ArcParams.line(self.length)
        else:
            raise ValueError("need a midpoint or a straight length")
        pts, ls = sample_center_curve(params, self.samples)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "curve", pts)
        object.__setattr__(self, "curve_l", ls)
        object.__setattr__(self, "curve_w", self.width.mean(ls))

    @property
    def kind(self) -> str:
        return "line" if self.midpoint is None else "arc"

    @property
    def total_length(self) -> float:
        return self.params.total_length

    @property
    def is_straight(self) -> bool:
        return self.params.straight

    @classmethod
    def arc(cls, midpoint, width: WidthModel, samples: int = DEFAULT_SAMPLES) -> "FlameModel":
        return cls(width, midpoint=np.asarray(midpoint, float), samples=samples)

    @classmethod
    def line(cls, length: float, width: WidthModel, samples: int = DEFAULT_SAMPLES) -> "FlameModel":
        return cls(width, length=float(length), samples=samples)

    def with_width(self, width: WidthModel) -> "FlameModel":
        return FlameModel(width, self.midpoint, self.length, self.samples)

    def point_at(self, l) -> np.ndarray:
        """Center-curve points at arc lengths ``l`` (clamped to the curve)."""
        return curve_point_at(self.curve, self.curve_l, l)

    def foot(self, points):
        """Closest center-curve points, their arc lengths and distances."""
        feet, idx, t, dist = geom.points_polyline_closest(points, self.curve)
        l = self.curve_l[idx] + t * (self.curve_l[idx + 1] - self.curve_l[idx])
        return feet, l, dist

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.midpoint is None:
            d["length"] = self.length
        else:
            d["midpoint"] = self.midpoint.tolist()
        d["width"] = self.width.to_dict()
        d["samples"] = self.samples
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FlameModel":
        kind = d.get("kind")
        width = WidthModel.from_dict(d["width"])
        samples = int(d.get("samples", DEFAULT_SAMPLES))
        if kind == "arc":
            return cls.arc(d["midpoint"], width, samples)
        if kind == "line":
            return cls.line(d["length"], width, samples)
        raise ValueError(f"unknown model kind {kind!r}")

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def surface_value(fm: FlameModel, p):
    """Signed flame surface function: negative inside, zero on the boundary.

    Accepts one point or an (N, 3) array.
    """
    arr = np.asarray(p, dtype=float)
    _, l, dist = fm.foot(arr.reshape(-1, 3))
    val = dist - fm.width.mean(l)
    return float(val[0]) if arr.ndim == 1 else val


def constant_width(w: float, length: float, n: int = 16, sigma_n: float = 0.0) -> WidthModel:
    """Width model that is flat at ``w`` over [0, length]."""
    ls = np.linspace(0.0, length, n)
    return width_fit(np.column_stack([ls, np.full(n, w)]), sigma_n=sigma_n)
