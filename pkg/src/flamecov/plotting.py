"""Report figures: per-group mAP bars and silhouette overlays."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = {"line": "tab:orange", "arc": "tab:blue"}
# PNG metadata without the matplotlib version keeps figures byte-stable
_META = {"Software": None}


def plot_map_bars(summary: dict, ax=None):
    groups = list(summary["map"])
    kinds = summary["kinds"]
    if ax is None:
        _, ax = plt.subplots(figsize=(5.5, 3.5))
    x = np.arange(len(groups))
    wbar = 0.8 / max(len(kinds), 1)
    for i, kind in enumerate(kinds):
        vals = [summary["map"][g].get(kind, np.nan) for g in groups]
        bars = ax.bar(x + (i - (len(kinds) - 1) / 2) * wbar, vals, wbar,
                      label="straight" if kind == "line" else kind, color=COLORS.get(kind))
        for b, v in zip(bars, vals):
            if np.isfinite(v):
                ax.text(b.get_x() + b.get_width() / 2, v + 0.01, f"{v:.3f}",
                        ha="center", va="bottom", fontsize=7)
    ax.set_xticks(x)
    ax.set_xticklabels([f"{g}\n(n={summary['map'][g]['frames']})" for g in groups], fontsize=8)
    ax.set_ylim(0, 1.1)
    ax.set_ylabel("mAP (pixel precision)")
    ax.legend(loc="lower right", fontsize=8)
    return ax


def plot_overlay(ax, gt, preds: dict, title: str = ""):
    """Observed silhouette in grey with predicted mask outlines on top."""
    ax.imshow(np.asarray(gt, dtype=float), cmap="gray_r", vmin=0, vmax=2.5,
              interpolation="nearest")
    for kind, m in preds.items():
        if np.any(m):
            ax.contour(np.asarray(m, dtype=float), levels=[0.5], colors=COLORS.get(kind),
                       linewidths=0.8)
    ax.set_title(title, fontsize=7)
    ax.set_xticks([])
    ax.set_yticks([])


def save_report_figures(report, out_dir, max_frames: int = 6) -> list:
    """Write map.png and overlays.png for a comparison report."""
    out = Path(out_dir)
    paths = []
    summary = report.summary()
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    plot_map_bars(summary, ax)
    fig.tight_layout()
    p = out / "map.png"
    fig.savefig(p, dpi=120, metadata=_META)
    plt.close(fig)
    paths.append(p)

    # frames where the two models disagree most are the informative ones
    res = list(report.results)
    if len(report.kinds) == 2:
        res.sort(key=lambda r: -abs(r.scores[report.kinds[0]].precision
                                    - r.scores[report.kinds[1]].precision))
    res = res[:max_frames]
    fig, axes = plt.subplots(len(res), 2, figsize=(5.0, 1.9 * len(res)), squeeze=False)
    for row, r in zip(axes, res):
        for view in (0, 1):
            preds = {k: r.masks[k][view] for k in report.kinds}
            text = ", ".join(f"{k} {getattr(r.scores[k], f'precision{view + 1}'):.2f}"
                             for k in report.kinds)
            plot_overlay(row[view], r.gt[view], preds, f"{r.frame_id} view {view + 1}: {text}")
    fig.tight_layout()
    p = out / "overlays.png"
    fig.savefig(p, dpi=120, metadata=_META)
    plt.close(fig)
    paths.append(p)
    return paths

