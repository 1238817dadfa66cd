"""Silhouette reprojection of a flame model into a pinhole camera.

A pixel belongs to the reprojected silhouette when its back-projected ray
(restricted to the half-line in front of the camera) enters the flame, i.e.
some ray point has non-positive surface value. The flame is the tube around
the sampled center polyline; within each segment the radius is interpolated
linearly between the widths predicted at its two end samples, and the ends
are closed by spherical caps. For every segment the closed-form closest pair
between ray and segment is tested against the interpolated radius, so no
fixed marching step is involved. Segments are splatted through their
projected bounding box, which keeps the per-view cost proportional to
the silhouette area.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .geom import CameraModel


def pixel_rays(cam: CameraModel, offsets: np.ndarray | None = None) -> np.ndarray:
    """(H, W, 3) unit ray directions in {H} through every pixel center.

    ``offsets`` (H, W, 2) shifts the sampling position of each pixel, used by
    the synthetic renderer to jitter silhouette boundaries.
    """
    ys, xs = np.mgrid[0:cam.height, 0:cam.width].astype(float)
    if offsets is not None:
        xs = xs + offsets[..., 0]
        ys = ys + offsets[..., 1]
    h = np.stack([xs, ys, np.ones_like(xs)], axis=-1)
    d = h @ (cam.pose.rotation.T @ cam.K_inv).T
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return np.ascontiguousarray(d)


@njit(cache=True)
def _sphere_box(x, y, z, rho, R, t, fx, fy, cx, cy):
    """Conservative pixel box (umin, umax, vmin, vmax) of a sphere, or None-like
    (flag False) when it reaches behind the camera."""
    px = R[0, 0] * x + R[0, 1] * y + R[0, 2] * z + t[0]
    py = R[1, 0] * x + R[1, 1] * y + R[1, 2] * z + t[1]
    pz = R[2, 0] * x + R[2, 1] * y + R[2, 2] * z + t[2]
    if pz - rho <= 1e-6:
        return False, 0.0, 0.0, 0.0, 0.0
    zn, zf = pz - rho, pz + rho
    hi, lo = px + rho, px - rho
    umax = fx * (hi / zn if hi >= 0 else hi / zf) + cx
    umin = fx * (lo / zf if lo >= 0 else lo / zn) + cx
    hi, lo = py + rho, py - rho
    vmax = fy * (hi / zn if hi >= 0 else hi / zf) + cy
    vmin = fy * (lo / zf if lo >= 0 else lo / zn) + cy
    return True, umin, umax, vmin, vmax


@njit(cache=True)
def _splat(curve, widths, dirs, C, R, t, fx, fy, cx, cy, pad, out):
    H, W = out.shape
    nseg = curve.shape[0] - 1
    for i in range(nseg):
        wa = widths[i]
        wb = widths[i + 1]
        if max(wa, wb) <= 0.0:
            continue
        ax, ay, az = curve[i, 0], curve[i, 1], curve[i, 2]
        bx, by, bz = curve[i + 1, 0], curve[i + 1, 1], curve[i + 1, 2]
        ex, ey, ez = bx - ax, by - ay, bz - az
        ee = ex * ex + ey * ey + ez * ez
        # the capsule is the hull of its end spheres, so its image box is the
        # union of the two sphere boxes
        oka, u0a, u1a, v0a, v1a = _sphere_box(ax, ay, az, wa, R, t, fx, fy, cx, cy)
        okb, u0b, u1b, v0b, v1b = _sphere_box(bx, by, bz, wb, R, t, fx, fy, cx, cy)
        if not (oka and okb):
            x0, x1, y0, y1 = 0, W - 1, 0, H - 1
        else:
            umin, umax = min(u0a, u0b), max(u1a, u1b)
            vmin, vmax = min(v0a, v0b), max(v1a, v1b)
            if umax < -pad or vmax < -pad or umin > W - 1 + pad or vmin > H - 1 + pad:
                continue
            x0 = max(0, int(np.floor(umin - pad)))
            x1 = min(W - 1, int(np.ceil(umax + pad)))
            y0 = max(0, int(np.floor(vmin - pad)))
            y1 = min(H - 1, int(np.ceil(vmax + pad)))
        rx, ry, rz = C[0] - ax, C[1] - ay, C[2] - az
        f = ex * rx + ey * ry + ez * rz
        for y in range(y0, y1 + 1):
            for x in range(x0, x1 + 1):
                if out[y, x]:
                    continue
                dx, dy, dz = dirs[y, x, 0], dirs[y, x, 1], dirs[y, x, 2]
                b = dx * ex + dy * ey + dz * ez
                c = dx * rx + dy * ry + dz * rz
                if ee < 1e-24:
                    tt = 0.0
                    s = max(-c, 0.0)
                else:
                    den = ee - b * b
                    if den > 1e-18 * ee:
                        s = max((b * f - c * ee) / den, 0.0)
                    else:
                        s = max(-c, 0.0)
                    tt = (b * s + f) / ee
                    if tt < 0.0:
                        tt = 0.0
                        s = max(-c, 0.0)
                    elif tt > 1.0:
                        tt = 1.0
                        s = max(b - c, 0.0)
                qx = C[0] + s * dx - (ax + tt * ex)
                qy = C[1] + s * dy - (ay + tt * ey)
                qz = C[2] + s * dz - (az + tt * ez)
                w = wa + tt * (wb - wa)
                if qx * qx + qy * qy + qz * qz <= w * w and w > 0.0:
                    out[y, x] = True


@njit(cache=True)
def _simplify(curve, widths, R, t, f, tol_px):
    """Indices of samples to keep so that dropping the rest moves the tube
    surface by at most ``tol_px`` pixels in the image."""
    n = curve.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    keep[0] = True
    keep[n - 1] = True
    depth = np.empty(n)
    for i in range(n):
        depth[i] = (R[2, 0] * curve[i, 0] + R[2, 1] * curve[i, 1] + R[2, 2] * curve[i, 2]
                    + t[2]) - widths[i]
    a = 0
    while a < n - 1:
        j = a + 1
        while j + 1 < n:
            b = j + 1
            ex = curve[b, 0] - curve[a, 0]
            ey = curve[b, 1] - curve[a, 1]
            ez = curve[b, 2] - curve[a, 2]
            ee = ex * ex + ey * ey + ez * ez
            zmin = min(depth[a], depth[b])
            ok = ee > 0.0
            for i in range(a + 1, b):
                zmin = min(zmin, depth[i])
            if zmin <= 1e-6:
                ok = False
            i = a + 1
            while ok and i < b:
                qx = curve[i, 0] - curve[a, 0]
                qy = curve[i, 1] - curve[a, 1]
                qz = curve[i, 2] - curve[a, 2]
                u = min(max((qx * ex + qy * ey + qz * ez) / ee, 0.0), 1.0)
                dx, dy, dz = qx - u * ex, qy - u * ey, qz - u * ez
                err = np.sqrt(dx * dx + dy * dy + dz * dz) + \
                    abs(widths[i] - (widths[a] + u * (widths[b] - widths[a])))
                if f * err / zmin > tol_px:
                    ok = False
                i += 1
            if not ok:
                break
            j = b
        keep[j] = True
        a = j
    return np.flatnonzero(keep)


def render_mask(curve, widths, cam: CameraModel, dirs: np.ndarray | None = None,
                pad: float = 1.0, tol_px: float = 0.05) -> np.ndarray:
    """Boolean (H, W) reprojected silhouette of a sampled tube.

    ``pad`` widens the per-segment pixel box; it must cover any sub-pixel
    offsets baked into ``dirs``. Interior samples are dropped while doing so
    moves the tube surface by at most ``tol_px`` pixels (0 keeps them all);
    densely sampled short, wide flames otherwise cost one overlapping pixel
    box per sample.
    """
    if dirs is None:
        dirs = pixel_rays(cam)
    out = np.zeros((cam.height, cam.width), dtype=np.bool_)
    R = np.ascontiguousarray(cam.pose.rotation)
    t = np.ascontiguousarray(cam.pose.translation)
    curve = np.ascontiguousarray(curve, dtype=float)
    widths = np.ascontiguousarray(widths, dtype=float)
    if tol_px > 0 and len(curve) > 2:
        idx = _simplify(curve, widths, R, t, float(max(cam.fx, cam.fy)), float(tol_px))
        curve, widths = curve[idx], widths[idx]
    _splat(curve, widths, dirs, np.ascontiguousarray(cam.center), R, t,
           cam.fx, cam.fy, cam.cx, cam.cy, float(pad), out)
    return out
