"""Reprojection scoring, dataset mAP and the straight-versus-arc comparison.

mAP here is the mean over frames of the per-frame pixel precision of the
reprojected masks against the thresholded images, with the two views of a
frame averaged first. ``pooled=True`` instead divides total true-positive
pixels by total predicted pixels over the whole group.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyGroupError, FlameError
from .estimate import EstimatorConfig, StereoObservation, fit_flame_full
from .render import render_mask
from .silhouette import _masks, mask_iou, mask_precision

log = logging.getLogger(__name__)

LABELS = ("light-wind", "strong-wind", "unlabeled")
KINDS = ("line", "arc")
CSV_COLUMNS = ("frame_id", "label", "model_kind", "precision1", "precision2", "iou1", "iou2")

# synthetic stand-ins for the qualitative wind labels (bend angle, rad)
LIGHT_WIND_MAX_ALPHA = 0.3
STRONG_WIND_ALPHA = (0.5, 1.2)


def wind_label(alpha: float) -> str:
    if alpha <= LIGHT_WIND_MAX_ALPHA:
        return "light-wind"
    if STRONG_WIND_ALPHA[0] <= alpha <= STRONG_WIND_ALPHA[1]:
        return "strong-wind"
    return "unlabeled"


@dataclass(frozen=True)
class FrameScore:
    iou1: float
    iou2: float
    precision1: float
    precision2: float
    label: str = "unlabeled"
    # pixel counts kept for the pooled variant
    hits: tuple = (0, 0)
    predicted: tuple = (0, 0)

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        for v in (self.iou1, self.iou2, self.precision1, self.precision2):
            if not 0.0 <= v <= 1.0:
                raise ValueError("scores must lie in [0, 1]")

    @property
    def precision(self) -> float:
        return 0.5 * (self.precision1 + self.precision2)


def frame_score(pred1, pred2, gt1, gt2, label: str = "unlabeled") -> FrameScore:
    """Per-view IoU and precision of two reprojected masks."""
    hits, predicted = [], []
    for p, g in ((pred1, gt1), (pred2, gt2)):
        mp, mg = _masks(p, g)
        hits.append(int(np.count_nonzero(mp & mg)))
        predicted.append(int(np.count_nonzero(mp)))
    return FrameScore(mask_iou(pred1, gt1), mask_iou(pred2, gt2),
                      mask_precision(pred1, gt1), mask_precision(pred2, gt2),
                      label, tuple(hits), tuple(predicted))


def _in_group(s: FrameScore, group) -> bool:
    if group is None or group == "all":
        return True
    if isinstance(group, str):
        return s.label == group
    return s.label in group


def dataset_map(scores, group=None, pooled: bool = False) -> float:
    """Mean precision over the frames whose label matches ``group``.

    ``group`` is None/"all", a single label or a collection of labels.
    """
    sel = [s for s in scores if _in_group(s, group)]
    if not sel:
        raise EmptyGroupError(f"no frames in group {group!r}")
    if pooled:
        hits = sum(sum(s.hits) for s in sel)
        n = sum(sum(s.predicted) for s in sel)
        return hits / n if n else 0.0
    # math.fsum keeps the result independent of frame order
    return math.fsum(s.precision for s in sel) / len(sel)


# --------------------------------------------------------------------------
# comparison harness

@dataclass
class Frame:
    frame_id: str
    label: str = "unlabeled"
    obs: StereoObservation | None = None
    error: str | None = None  # set when the frame could not be loaded


@dataclass
class FrameResult:
    frame_id: str
    label: str
    scores: dict = field(default_factory=dict)  # kind -> FrameScore
    errors: dict = field(default_factory=dict)  # kind -> message
    masks: dict = field(default_factory=dict)  # kind -> (mask1, mask2)
    gt: tuple = ()  # observed (mask1, mask2)


@dataclass
class Report:
    results: list
    skipped: dict  # frame_id -> load error
    kinds: tuple
    pooled: bool = False
    config: dict = field(default_factory=dict)

    def scores(self, kind: str) -> list:
        return [r.scores[kind] for r in self.results if kind in r.scores]

    def summary(self) -> dict:
        groups = {}
        for g in ("all",) + LABELS:
            row = {}
            for kind in self.kinds:
                try:
                    row[kind] = dataset_map(self.scores(kind), g, self.pooled)
                except EmptyGroupError:
                    continue
            if row:
                row["frames"] = sum(1 for s in self.scores(self.kinds[0]) if _in_group(s, g))
                groups[g] = row
        failures = {r.frame_id: r.errors for r in self.results if r.errors}
        return {"map": groups, "kinds": list(self.kinds), "pooled": self.pooled,
                "frames": len(self.results), "skipped": self.skipped,
                "fit_failures": failures, "config": self.config}

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.results:
            for kind in self.kinds:
                s = r.scores[kind]
                w.writerow([r.frame_id, r.label, kind] +
                           [f"{v:.6f}" for v in (s.precision1, s.precision2, s.iou1, s.iou2)])
        return buf.getvalue()

    def json_text(self) -> str:
        return json.dumps(_rounded(self.summary()), indent=2, sort_keys=True) + "\n"


def _rounded(x):
    if isinstance(x, float):
        return round(x, 6)
    if isinstance(x, dict):
        return {k: _rounded(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_rounded(v) for v in x]
    return x


def _score_frame(args) -> FrameResult:
    frame, cfg, kinds = args
    obs = frame.obs
    res = FrameResult(frame.frame_id, frame.label, gt=(obs.sil1.mask, obs.sil2.mask))
    for kind in kinds:
        try:
            fm = fit_flame_full(obs, cfg, kind)[0]
            m1 = render_mask(fm.curve, fm.curve_w, obs.cam1)
            m2 = render_mask(fm.curve, fm.curve_w, obs.cam2)
        except FlameError as e:
            # a failed fit predicts nothing, which scores zero precision
            res.errors[kind] = f"{type(e).__name__}: {e}"
            m1 = np.zeros_like(obs.sil1.mask)
            m2 = np.zeros_like(obs.sil2.mask)
        res.scores[kind] = frame_score(m1, m2, obs.sil1, obs.sil2, frame.label)
        res.masks[kind] = (m1, m2)
    return res


def compare_models(frames, cfg: EstimatorConfig = EstimatorConfig(), kinds=KINDS,
                   jobs: int = 1, pooled: bool = False) -> Report:
    """Fit every requested model kind to every frame and score the reprojections.

    ``frames`` holds :class:`Frame` records or bare observations. Frames that
    failed to load are listed as skipped; fit failures are recorded per kind.
    Results keep input order regardless of ``jobs``.
    """
    frames = [f if isinstance(f, Frame) else Frame(f"{i:04d}", obs=f)
              for i, f in enumerate(frames)]
    if not frames:
        raise EmptyGroupError("no observations to compare")
    kinds = tuple(kinds)
    for k in kinds:
        if k not in KINDS:
            raise ValueError(f"unknown model kind {k!r}")
    skipped = {f.frame_id: f.error or "no observation" for f in frames if f.obs is None}
    todo = [(f, cfg, kinds) for f in frames if f.obs is not None]
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_score_frame, todo))
    else:
        results = [_score_frame(t) for t in todo]
    for r in results:
        for kind, msg in r.errors.items():
            log.warning("frame %s (%s): %s", r.frame_id, kind, msg)
    return Report(results, skipped, kinds, pooled, cfg.to_dict())


def write_report(report: Report, out_dir, figures: bool = True) -> list:
    """Write report.csv, summary.json and (optionally) figures; returns the paths."""
    from pathlib import Path
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.csv", out / "summary.json"]
    paths[0].write_text(report.csv_text())
    paths[1].write_text(report.json_text())
    if figures and report.results:
        from .plotting import save_report_figures
        paths += save_report_figures(report, out)
    return paths

