"""Thermal thresholding, silhouette centroid/boundary and mask set operations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError

_EIGHT = np.ones((3, 3), dtype=bool)

# Moore neighbourhood in (dx, dy), clockwise on screen starting west.
# Walking the outer contour with this ordering visits it counter-clockwise
# as displayed (down the left side first).
_NBRS = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)]
_NBRS_CCW = _NBRS[::-1]


@dataclass(frozen=True)
class ThermalImage:
    data: np.ndarray  # (height, width) uint16 radiometric counts

    def __post_init__(self):
        a = np.asarray(self.data)
        if a.ndim != 2:
            raise ValueError("thermal image must be 2D")
        object.__setattr__(self, "data", a.astype(np.uint16, copy=False))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class Silhouette:
    mask: np.ndarray  # (height, width) bool
    centroid: np.ndarray | None = field(init=False)
    boundary: np.ndarray = field(init=False, repr=False)  # (N, 2) as (x, y)

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 2:
            raise ValueError("mask must be 2D")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)
        ys, xs = np.nonzero(m)
        if len(xs):
            c = np.array([xs.mean(), ys.mean()])
            b = trace_boundary(m)
        else:
            c, b = None, np.zeros((0, 2), dtype=int)
        object.__setattr__(self, "centroid", c)
        object.__setattr__(self, "boundary", b)

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def empty(self) -> bool:
        return self.centroid is None

    @property
    def area(self) -> int:
        return int(self.mask.sum())


def largest_component(mask: np.ndarray) -> np.ndarray:
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n <= 1:
        return mask.astype(bool)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    # ties resolve to the lowest label, i.e. first in raster order
    return labels == int(np.argmax(sizes))


def threshold(img, T: float, largest: bool = True) -> Silhouette:
    """Pixels at or above ``T``, reduced to the largest 8-connected blob.

    An image with nothing above ``T`` yields an empty silhouette
    (``sil.empty``); callers decide whether to skip the frame.
    """
    data = img.data if isinstance(img, ThermalImage) else np.asarray(img)
    mask = data >= T
    if largest and mask.any():
        mask = largest_component(mask)
    return Silhouette(mask)


def trace_boundary(mask) -> np.ndarray:
    """Moore-neighbour trace of the outer contour of the largest component.

    Starts at the topmost-leftmost pixel and runs counter-clockwise as
    displayed. Returns an (N, 2) int array of (x, y) with implicit closure.
    """
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return np.zeros((0, 2), dtype=int)
    m = largest_component(m)
    H, W = m.shape
    ys, xs = np.nonzero(m)
    start = (int(xs[0]), int(ys[0]))  # nonzero is raster order

    def on(x, y):
        return 0 <= x < W and 0 <= y < H and m[y, x]

    # nothing lies above the start pixel, so backtrack from north
    contour = [start]
    cur, back = start, _NBRS_CCW.index((0, -1))
    first_move = None
    for _ in range(4 * m.size + 8):
        found = False
        for k in range(1, 9):
            d = (back + k) % 8
            dx, dy = _NBRS_CCW[d]
            nx, ny = cur[0] + dx, cur[1] + dy
            if on(nx, ny):
                # new backtrack: the neighbour examined just before, seen from the new pixel
                pdx, pdy = _NBRS_CCW[(d - 1) % 8]
                px, py = cur[0] + pdx, cur[1] + pdy
                back = _NBRS_CCW.index((px - nx, py - ny))
                nxt = (nx, ny)
                found = True
                break
        if not found:
            break  # isolated pixel
        if cur == start and first_move is None:
            first_move = nxt
        elif cur == start and nxt == first_move:
            contour.pop()
            break
        contour.append(nxt)
        cur = nxt
    return np.array(contour, dtype=int)


def is_boundary_pixel(mask: np.ndarray, x: int, y: int) -> bool:
    H, W = mask.shape
    if not mask[y, x]:
        return False
    if x == 0 or y == 0 or x == W - 1 or y == H - 1:
        return True
    return not mask[y - 1:y + 2, x - 1:x + 2].all()


def _masks(a, b):
    ma = a.mask if isinstance(a, Silhouette) else np.asarray(a, dtype=bool)
    mb = b.mask if isinstance(b, Silhouette) else np.asarray(b, dtype=bool)
    if ma.shape != mb.shape:
        raise DimensionMismatchError(f"mask shapes differ: {ma.shape} vs {mb.shape}")
    return ma, mb


def mask_iou(a, b) -> float:
    ma, mb = _masks(a, b)
    union = np.count_nonzero(ma | mb)
    if union == 0:
        return 1.0
    return np.count_nonzero(ma & mb) / union


def mask_precision(pred, gt) -> float:
    mp, mg = _masks(pred, gt)
    n = np.count_nonzero(mp)
    if n == 0:
        return 1.0 if not mg.any() else 0.0
    return np.count_nonzero(mp & mg) / n


def mask_recall(pred, gt) -> float:
    mp, mg = _masks(pred, gt)
    n = np.count_nonzero(mg)
    if n == 0:
        return 1.0 if not mp.any() else 0.0
    return np.count_nonzero(mp & mg) / n
