"""Command-line front end: synth, estimate, render and eval.

Exit codes: 0 ok, 2 bad input, 3 I/O failure, 4 empty silhouette,
5 degenerate geometry, 6 insufficient surface points. Machine-readable
results go to stdout, human diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import errors
from .errors import (DimensionMismatchError, EmptySilhouetteError, FlameError,
                     InsufficientPointsError)
from .estimate import EstimatorConfig, StereoObservation, fit_flame_full
from .evaluate import Frame, compare_models, wind_label, write_report
from .geom import load_rig, save_rig
from .model import FlameModel
from .pgm import read_pgm, write_mask, write_pgm
from .render import render_mask
from .silhouette import ThermalImage, threshold
from .synth import SceneSpec, render_scene, scene_grid

log = logging.getLogger("flamecov")

EXIT_OK, EXIT_INPUT, EXIT_IO = 0, 2, 3
EXIT_EMPTY, EXIT_DEGENERATE, EXIT_POINTS = 4, 5, 6
BASELINES = {"straight": ("line",), "arc": ("arc",), "both": ("line", "arc")}
SYNTH_THRESHOLD = 32768


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, CliError):
        return exc.code
    if isinstance(exc, EmptySilhouetteError):
        return EXIT_EMPTY
    if isinstance(exc, InsufficientPointsError):
        return EXIT_POINTS
    if isinstance(exc, DimensionMismatchError):
        return EXIT_INPUT
    if isinstance(exc, FlameError):
        return EXIT_DEGENERATE
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_INPUT


@dataclass
class RunConfig:
    rig: str | None = None
    threshold: float | None = None
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    inputs: list = field(default_factory=list)
    out: str | None = None
    seed: int | None = None
    jobs: int = 1
    baseline: str = "both"
    pooled: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ValueError("config must be a JSON object")
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        d["estimator"] = EstimatorConfig.from_dict(d.get("estimator", {}))
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {sorted(BASELINES)}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.threshold is not None and self.threshold < 0:
            raise ValueError("threshold must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimator"] = self.estimator.to_dict()
        return d


def _read_json(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot read {p}: {e.strerror or e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise CliError(EXIT_INPUT, f"{p}: invalid JSON ({e})") from e


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_IO, f"{what} not found: {p}")
    return p


def build_config(args) -> RunConfig:
    """Config file values overridden by whichever flags were given."""
    try:
        cfg = RunConfig.from_dict(_read_json(args.config)) if getattr(args, "config", None) \
            else RunConfig()
        for name in ("rig", "threshold", "out", "seed", "jobs", "baseline"):
            v = getattr(args, name, None)
            if v is not None:
                setattr(cfg, name, v)
        if getattr(args, "pooled", False):
            cfg.pooled = True
        if getattr(args, "no_refine", False):
            cfg.estimator = cfg.estimator.replace(refine=False)
        cfg.validate()
    except (ValueError, TypeError) as e:
        raise CliError(EXIT_INPUT, f"bad configuration: {e}") from e
    return cfg


def _load_thermal(path) -> ThermalImage:
    p = _require_file(path, "image")
    try:
        return ThermalImage(read_pgm(p))
    except ValueError as e:
        raise CliError(EXIT_INPUT, str(e)) from e


def _load_rig(path):
    p = _require_file(path, "rig")
    try:
        return load_rig(p)
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
        raise CliError(EXIT_INPUT, f"{p}: malformed rig ({e})") from e


def _emit(payload: dict, out):
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# synth

def _write_scene(spec: SceneSpec, out: Path) -> list:
    out.mkdir(parents=True, exist_ok=True)
    im1, im2 = render_scene(spec)
    paths = [out / "view1.pgm", out / "view2.pgm", out / "rig.json", out / "model.json"]
    write_pgm(paths[0], im1.data)
    write_pgm(paths[1], im2.data)
    save_rig(paths[2], spec.cam1, spec.cam2)
    paths[3].write_text(json.dumps(spec.model.to_dict(), indent=2))
    return paths


def cmd_synth(args) -> int:
    cfg = build_config(args)
    out = Path(cfg.out or ".")
    if args.grid:
        specs = scene_grid(args.grid, jitter=args.jitter, seed=cfg.seed or 0)
        frames = []
        for i, spec in enumerate(specs):
            name = f"scene_{i:03d}"
            _write_scene(spec, out / name)
            frames.append({"id": name, "img1": f"{name}/view1.pgm", "img2": f"{name}/view2.pgm",
                           "rig": f"{name}/rig.json",
                           "label": wind_label(spec.model.params.alpha)})
        manifest = {"threshold": SYNTH_THRESHOLD, "frames": frames}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
        _emit({"manifest": str(out / "manifest.json"), "scenes": len(frames)}, None)
        return EXIT_OK
    if not args.spec:
        raise CliError(EXIT_INPUT, "synth needs a scene spec or --grid")
    data = _read_json(args.spec)
    try:
        if cfg.seed is not None:
            data = {**data, "seed": cfg.seed}
        spec = SceneSpec.from_dict(data)
    except (ValueError, KeyError, TypeError, FlameError) as e:
        raise CliError(EXIT_INPUT, f"{args.spec}: malformed scene spec ({e})") from e
    paths = _write_scene(spec, out)
    _emit({"files": [str(p) for p in paths]}, None)
    return EXIT_OK


# --------------------------------------------------------------------------
# estimate

def cmd_estimate(args) -> int:
    cfg = build_config(args)
    if cfg.rig is None:
        raise CliError(EXIT_INPUT, "--rig is required")
    if cfg.threshold is None:
        raise CliError(EXIT_INPUT, "--threshold is required")
    for p in (args.img1, args.img2):
        _require_file(p, "image")
    cam1, cam2 = _load_rig(cfg.rig)
    im1, im2 = _load_thermal(args.img1), _load_thermal(args.img2)
    sil1, sil2 = threshold(im1, cfg.threshold), threshold(im2, cfg.threshold)
    if sil1.empty or sil2.empty:
        raise EmptySilhouetteError("no pixel reaches the threshold in "
                                   + ("view 1" if sil1.empty else "view 2"))
    try:
        obs = StereoObservation(sil1, sil2, cam1, cam2)
    except ValueError as e:
        raise CliError(EXIT_INPUT, str(e)) from e
    # a single fit: "both" means the full arc model
    kind = "line" if cfg.baseline == "straight" else "arc"
    fm, diag, _ = fit_flame_full(obs, cfg.estimator, kind)
    log.info("fit %s: %d two-view + %d one-view points, IoU %.3f / %.3f, refined=%s",
             kind, diag.n_two_view, diag.n_one_view, diag.iou1, diag.iou2, diag.refined)
    _emit({**fm.to_dict(), "diagnostics": diag.to_dict()}, cfg.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# render

def cmd_render(args) -> int:
    cfg = build_config(args)
    if cfg.rig is None:
        raise CliError(EXIT_INPUT, "--rig is required")
    if args.view not in (1, 2):
        raise CliError(EXIT_INPUT, f"view index {args.view} not in rig (views are 1 and 2)")
    if not cfg.out:
        raise CliError(EXIT_INPUT, "--out is required for the mask PGM")
    data = _read_json(_require_file(args.model, "model"))
    try:
        fm = FlameModel.from_dict(data)
    except (ValueError, KeyError, TypeError, FlameError) as e:
        raise CliError(EXIT_INPUT, f"{args.model}: malformed model ({e})") from e
    cam = _load_rig(cfg.rig)[args.view - 1]
    mask = render_mask(fm.curve, fm.curve_w, cam)
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    write_mask(cfg.out, mask)
    _emit({"mask": str(cfg.out), "pixels": int(mask.sum())}, None)
    return EXIT_OK


# --------------------------------------------------------------------------
# eval

def load_manifest(path, cfg: RunConfig) -> list:
    """Frames of a manifest; unreadable frames come back with ``error`` set."""
    man = _read_json(_require_file(path, "manifest"))
    base = Path(path).parent
    if not isinstance(man, dict) or not isinstance(man.get("frames"), list):
        raise CliError(EXIT_INPUT, f"{path}: manifest needs a 'frames' list")
    if not man["frames"]:
        raise CliError(EXIT_INPUT, f"{path}: manifest lists no frames")
    T = cfg.threshold if cfg.threshold is not None else man.get("threshold")
    if T is None:
        raise CliError(EXIT_INPUT, "no threshold in manifest or flags")
    rig_default = cfg.rig or man.get("rig")
    seen = set()
    for i, fr in enumerate(man["frames"]):
        if not isinstance(fr, dict) or "img1" not in fr or "img2" not in fr:
            raise CliError(EXIT_INPUT, f"{path}: frame {i} needs img1 and img2")
        if fr.get("rig", rig_default) is None:
            raise CliError(EXIT_INPUT, f"{path}: frame {i} has no rig")
        fid = str(fr.get("id", f"{i:04d}"))
        if fid in seen:
            raise CliError(EXIT_INPUT, f"{path}: duplicate frame id {fid}")
        seen.add(fid)

    frames = []
    rigs = {}
    for i, fr in enumerate(man["frames"]):
        fid = str(fr.get("id", f"{i:04d}"))
        label = fr.get("label", "unlabeled")
        try:
            rig_path = base / fr.get("rig", rig_default)
            if rig_path not in rigs:
                rigs[rig_path] = _load_rig(rig_path)
            cam1, cam2 = rigs[rig_path]
            sils = [threshold(_load_thermal(base / fr[k]), T) for k in ("img1", "img2")]
            frames.append(Frame(fid, label, StereoObservation(*sils, cam1, cam2)))
        except (CliError, ValueError, FlameError) as e:
            log.warning("frame %s skipped: %s", fid, e)
            frames.append(Frame(fid, label, None, f"{type(e).__name__}: {e}"))
    return frames


def _failure_code(msg: str) -> int:
    exc = getattr(errors, msg.split(":", 1)[0], None)
    return exit_code_for(exc("")) if isinstance(exc, type) else EXIT_INPUT


def cmd_eval(args) -> int:
    cfg = build_config(args)
    frames = load_manifest(args.manifest, cfg)
    out = Path(cfg.out) if cfg.out else Path(args.manifest).parent / "report"
    try:
        report = compare_models(frames, cfg.estimator, BASELINES[cfg.baseline], cfg.jobs,
                                cfg.pooled)
    except ValueError as e:
        raise CliError(EXIT_INPUT, str(e)) from e
    try:
        paths = write_report(report, out, figures=not args.no_figures)
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot write report to {out}: {e}") from e
    summary = report.summary()
    for g, row in summary["map"].items():
        log.info("%-12s %s", g, "  ".join(f"{k} {row[k]:.3f}" for k in report.kinds))
    _emit({"report": [str(p) for p in paths], "map": summary["map"]}, None)

    ok = [r for r in report.results if len(r.errors) < len(report.kinds)]
    if ok:
        return EXIT_OK
    if not report.results:
        log.error("every frame failed to load")
        return EXIT_IO
    log.error("every frame failed to fit")
    return _failure_code(next(iter(report.results[0].errors.values())))


# --------------------------------------------------------------------------

def _common(p, *names):
    if "rig" in names:
        p.add_argument("--rig", help="calibration rig JSON")
    if "threshold" in names:
        p.add_argument("--threshold", type=float, help="radiometric threshold T (counts)")
    p.add_argument("--config", help="RunConfig JSON; flags override it")
    p.add_argument("--out", help="output path")
    p.add_argument("--seed", type=int)
    if "fit" in names:
        p.add_argument("--no-refine", action="store_true", help="skip joint IoU refinement")
        p.add_argument("--baseline", choices=sorted(BASELINES))
        p.add_argument("--jobs", type=int, help="frame-level worker processes")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flamecov",
                                 description="Flame surface estimation from two thermal views.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic scene (or a grid with a manifest)")
    p.add_argument("spec", nargs="?", help="scene spec JSON")
    p.add_argument("--grid", type=int, default=0, help="write N grid scenes plus manifest.json")
    p.add_argument("--jitter", type=float, default=0.0, help="grid boundary jitter (px)")
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="fit a flame model to a thermal pair")
    p.add_argument("img1")
    p.add_argument("img2")
    _common(p, "rig", "threshold", "fit")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("render", help="reproject a model into one rig view")
    p.add_argument("model")
    p.add_argument("--view", type=int, default=1, help="camera index, 1 or 2")
    _common(p, "rig")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("eval", help="straight vs arc mAP over a manifest")
    p.add_argument("manifest")
    p.add_argument("--pooled", action="store_true", help="pool pixels across frames for mAP")
    p.add_argument("--no-figures", action="store_true")
    _common(p, "rig", "threshold", "fit")
    p.set_defaults(func=cmd_eval)
    return ap


def _setup_logging(verbose: bool):
    # a handler bound to the current sys.stderr, replaced on every call
    for h in list(log.handlers):
        if getattr(h, "_flamecov_cli", False):
            log.removeHandler(h)
    h = logging.StreamHandler(sys.stderr)
    h._flamecov_cli = True
    h.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    log.addHandler(h)
    log.setLevel(logging.DEBUG if verbose else logging.INFO)
    log.propagate = False


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except Exception as e:  # noqa: BLE001 - mapped to the exit-code taxonomy
        code = exit_code_for(e)
        if code == EXIT_INPUT and not isinstance(e, (CliError, ValueError, KeyError, TypeError)):
            raise
        log.error("%s", e)
        return code


if __name__ == "__main__":
    sys.exit(main())
