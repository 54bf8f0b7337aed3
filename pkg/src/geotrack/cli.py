"""Command-line surface binding the pipeline stages end to end.

Every stage is a pure function of its input files, configuration, and
seed: re-running a command writes byte-identical outputs. Configuration
lives in one TOML file with per-stage sections ([simulate], [track],
[gallery], [recover], [evaluate], [imprint], [room]); command-line flags
override the corresponding config keys. Malformed inputs exit non-zero
with a machine-readable JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import time
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from . import io as gio
from .association import Tracker
from .imprints import Imprint, ImprintStyle, build_imprint, render_svg
from .metrics import (
    DEFAULT_ALPHAS,
    EvalSequence,
    evaluate,
    predictions_from_tracklets,
    predictions_from_trajectories,
)
from .recovery import DEFAULT_SCORE_FLOOR, recover_trajectories, train_gallery
from .simulator import generate_scenario, render_frames


def parse_alphas(text: str) -> Tuple[float, ...]:
    """Parse localization thresholds: "a,b,c" or an inclusive "start:step:stop"."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"alpha range must be start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("alpha range step must be positive")
        if stop < start:
            raise ValueError("alpha range stop must be >= start")
        count = int(round((stop - start) / step))
        alphas = tuple(round(start + i * step, 10) for i in range(count + 1))
    else:
        alphas = tuple(float(p) for p in text.split(",") if p.strip())
    if not alphas:
        raise ValueError(f"no alphas in {text!r}")
    for a in alphas:
        if not (0.0 < a < 1.0):
            raise ValueError(f"alphas must lie in (0, 1), got {a}")
    return alphas


def _merged_section(
    config_path: Optional[str], section: str, overrides: Mapping[str, Any]
) -> Dict[str, Any]:
    doc = gio.load_config(config_path) if config_path else {}
    merged = dict(doc.get(section, {}))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged


def _room_section(config_path: Optional[str]):
    doc = gio.load_config(config_path) if config_path else {}
    return gio.rois_from_mapping(doc.get("room", {}))


def _safe_name(identity: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", identity)


# ---------------------------------------------------------------------------
# Stages (shared between individual subcommands and `pipeline`)


def _stage_simulate(config_path: str, seed: Optional[int], out_dir: str) -> Dict[str, str]:
    section = _merged_section(config_path, "simulate", {"seed": seed})
    cfg = gio.scenario_config_from_mapping(section)
    scenario = generate_scenario(cfg)
    seq = render_frames(scenario)
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "detections": os.path.join(out_dir, "detections.jsonl"),
        "groundtruth": os.path.join(out_dir, "groundtruth.csv"),
        "enrollment": os.path.join(out_dir, "enrollment.jsonl"),
    }
    gio.write_detections(paths["detections"], seq.frames)
    gio.write_groundtruth(paths["groundtruth"], seq.ground_truth)
    gio.write_enrollment(paths["enrollment"], seq.enrollment)
    n_dets = sum(len(d) for _, d in seq.frames)
    print(
        f"simulated {len(scenario.agents)} agents over {cfg.frame_count} frames "
        f"(seed {cfg.seed}): {n_dets} detections -> {out_dir}"
    )
    return paths


def _stage_track(
    detections_path: str, config_path: Optional[str], overrides: Mapping[str, Any], out: str
) -> str:
    cfg = gio.association_config_from_mapping(
        _merged_section(config_path, "track", overrides)
    )
    frames = gio.read_detections(detections_path)
    tracker = Tracker(cfg)
    t0 = time.perf_counter()
    for frame, dets in frames:
        tracker.step(frame, dets)
    tracklets = tracker.finish()
    elapsed = time.perf_counter() - t0
    fps = len(frames) / elapsed if elapsed > 0 else float("inf")
    gio.write_tracklets(out, tracklets)
    print(
        f"tracked {len(frames)} frames -> {len(tracklets)} tracklets "
        f"in {elapsed:.3f} s ({fps:.1f} frames/s)"
    )
    return out


def _stage_train_gallery(
    enrollment_path: str, config_path: Optional[str], overrides: Mapping[str, Any], out: str
) -> str:
    cfg = gio.gallery_config_from_mapping(_merged_section(config_path, "gallery", overrides))
    samples = gio.read_enrollment(enrollment_path)
    model = train_gallery([(desc, ident) for ident, desc in samples], cfg)
    gio.write_gallery(out, model)
    print(
        f"trained gallery on {len(samples)} samples, {len(model.identities)} identities "
        f"(training accuracy {model.training_accuracy:.4f})"
    )
    return out


def _stage_recover(
    tracklets_path: str,
    gallery_path: str,
    score_floor: Optional[float],
    out: str,
    conflicts_out: str,
) -> str:
    tracklets = gio.read_tracklets(tracklets_path)
    gallery = gio.read_gallery(gallery_path)
    floor = DEFAULT_SCORE_FLOOR if score_floor is None else float(score_floor)
    result = recover_trajectories(tracklets, gallery, score_floor=floor)
    gio.write_trajectories(out, result.trajectories)
    gio.write_conflicts(conflicts_out, result.conflicts, result.excluded)
    print(
        f"recovered {len(result.trajectories)} trajectories from {len(tracklets)} tracklets "
        f"({len(result.conflicts)} conflicts, {len(result.excluded)} excluded)"
    )
    return out


def _stage_evaluate(
    groundtruth_path: str,
    predictions_path: str,
    metric_names: Sequence[str],
    alphas: Sequence[float],
    iou_threshold: float,
    out: str,
) -> dict:
    gt_items = gio.read_groundtruth(groundtruth_path)
    kind, objs = gio.read_predictions_file(predictions_path)
    if kind == "tracklets":
        pred_items = predictions_from_tracklets(objs, by="track")
    else:
        pred_items = predictions_from_trajectories(objs)
    seq = EvalSequence(gt_items, pred_items)
    report = evaluate(seq, metrics=metric_names, alphas=alphas, iou_threshold=iou_threshold)
    gio.write_report(out, report)
    print(gio.format_report_table(report), end="")
    return report


def _stage_imprint(
    trajectories_path: str,
    room_config_path: Optional[str],
    identity: Optional[str],
    t_max: float,
    frame_rate: float,
    out_dir: str,
    style_overrides: Mapping[str, Any],
) -> List[str]:
    trajectories = gio.read_trajectories(trajectories_path)
    _bounds, rois = _room_section(room_config_path)
    style_kwargs = {k: v for k, v in style_overrides.items() if v is not None}
    if _bounds is not None:
        style_kwargs.setdefault("room", _bounds)
    style = ImprintStyle(**style_kwargs)
    if identity is not None:
        trajectories = [t for t in trajectories if t.identity == identity]
        if not trajectories:
            raise ValueError(f"no trajectory with identity {identity!r}")
    os.makedirs(out_dir, exist_ok=True)
    written: List[str] = []
    events = []
    for traj in trajectories:
        in_window = any(
            0.0 <= frame / frame_rate <= t_max
            for t in traj.tracklets
            for frame, _ in t.states
        )
        if in_window:
            imp = build_imprint(traj, frame_rate=frame_rate, t_range=(0.0, t_max), rois=rois)
        else:
            # Nothing inside the window; still emit a minimal document.
            imp = Imprint(
                identity=traj.identity,
                frame_rate=frame_rate,
                t_range=(0.0, t_max),
                paths=(),
                absences=(),
            )
        events.extend(imp.events)
        svg_path = os.path.join(out_dir, f"imprint-{_safe_name(traj.identity)}.svg")
        with open(svg_path, "wb") as fh:
            fh.write(render_svg(imp, rois, style))
        written.append(svg_path)
    events.sort(key=lambda e: (e.enter_s, e.roi, e.identity))
    events_path = os.path.join(out_dir, "events.csv")
    gio.write_events(events_path, events)
    print(f"rendered {len(written)} imprint(s), {len(events)} proximity event(s) -> {out_dir}")
    return written


# ---------------------------------------------------------------------------
# Argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geotrack",
        description="Long-term multi-object tracking with geometric re-identification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic detection stream")
    p.add_argument("config", help="TOML config with a [simulate] section")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out-dir", default=".", help="directory for the output artifacts")

    p = sub.add_parser("track", help="run online frame-to-frame association")
    p.add_argument("detections", help="detections.jsonl input")
    p.add_argument("--config", default=None, help="TOML config with a [track] section")
    p.add_argument("--out", default="tracklets.json")
    p.add_argument("--shape-weight", dest="shape_weight", type=float, default=None)
    p.add_argument("--gate", type=float, default=None)
    p.add_argument("--ema-alpha", dest="ema_alpha", type=float, default=None)
    p.add_argument("--max-lost-frames", dest="max_lost_frames", type=int, default=None)
    p.add_argument("--lost-spatial-horizon", dest="lost_spatial_horizon", type=int, default=None)
    p.add_argument("--min-tracklet-len", dest="min_tracklet_len", type=int, default=None)

    p = sub.add_parser("train-gallery", help="train the identity gallery SVMs")
    p.add_argument("enrollment", help="enrollment.jsonl input")
    p.add_argument("--config", default=None, help="TOML config with a [gallery] section")
    p.add_argument("--out", default="gallery.json")
    p.add_argument("--regularization", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("recover", help="group tracklets into identity trajectories")
    p.add_argument("tracklets", help="tracklets.json input")
    p.add_argument("gallery", help="gallery.json input")
    p.add_argument("--score-floor", dest="score_floor", type=float, default=None)
    p.add_argument("--out", default="trajectories.json")
    p.add_argument("--conflicts-out", dest="conflicts_out", default="conflicts.json")

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("groundtruth", help="groundtruth.csv input")
    p.add_argument("predictions", help="tracklets.json or trajectories.json")
    p.add_argument("--metrics", default="hota,clear,idf1,count")
    p.add_argument("--alphas", default=None, help='e.g. "0.05:0.05:0.50" or "0.3,0.5"')
    p.add_argument("--iou-threshold", dest="iou_threshold", type=float, default=0.5)
    p.add_argument("--out", default="report.json")

    p = sub.add_parser("imprint", help="render temporal pathway imprints")
    p.add_argument("trajectories", help="trajectories.json input")
    p.add_argument("room_config", nargs="?", default=None, help="TOML config with a [room] section")
    p.add_argument("--identity", default=None, help="render only this identity")
    p.add_argument("--t-max", dest="t_max", type=float, default=1000.0)
    p.add_argument("--frame-rate", dest="frame_rate", type=float, default=30.0)
    p.add_argument("--stride", type=int, default=None, help="keep every k-th path sample")
    p.add_argument("--width-px", dest="width_px", type=int, default=None)
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("pipeline", help="run simulate/track/train-gallery/recover/evaluate/imprint")
    p.add_argument("config", help="TOML config with per-stage sections")
    p.add_argument("--seed", type=int, default=None, help="override the simulate seed")
    p.add_argument("--out-dir", default=".")

    return parser


def _run(args: argparse.Namespace) -> int:
    if args.command == "simulate":
        _stage_simulate(args.config, args.seed, args.out_dir)
    elif args.command == "track":
        overrides = {
            k: getattr(args, k)
            for k in (
                "shape_weight",
                "gate",
                "ema_alpha",
                "max_lost_frames",
                "lost_spatial_horizon",
                "min_tracklet_len",
            )
        }
        _stage_track(args.detections, args.config, overrides, args.out)
    elif args.command == "train-gallery":
        overrides = {k: getattr(args, k) for k in ("regularization", "epochs", "seed")}
        _stage_train_gallery(args.enrollment, args.config, overrides, args.out)
    elif args.command == "recover":
        _stage_recover(args.tracklets, args.gallery, args.score_floor, args.out, args.conflicts_out)
    elif args.command == "evaluate":
        names = tuple(m.strip() for m in args.metrics.split(",") if m.strip())
        alphas = parse_alphas(args.alphas) if args.alphas else DEFAULT_ALPHAS
        _stage_evaluate(
            args.groundtruth, args.predictions, names, alphas, args.iou_threshold, args.out
        )
    elif args.command == "imprint":
        _stage_imprint(
            args.trajectories,
            args.room_config,
            args.identity,
            args.t_max,
            args.frame_rate,
            args.out_dir,
            {"stride": args.stride, "width_px": args.width_px},
        )
    elif args.command == "pipeline":
        out = args.out_dir
        paths = _stage_simulate(args.config, args.seed, out)
        tracklets = _stage_track(
            paths["detections"], args.config, {}, os.path.join(out, "tracklets.json")
        )
        gallery = _stage_train_gallery(
            paths["enrollment"], args.config, {}, os.path.join(out, "gallery.json")
        )
        trajectories = _stage_recover(
            tracklets,
            gallery,
            _merged_section(args.config, "recover", {}).get("score_floor"),
            os.path.join(out, "trajectories.json"),
            os.path.join(out, "conflicts.json"),
        )
        ev = _merged_section(args.config, "evaluate", {})
        raw_names = ev.get("metrics", "hota,clear,idf1,count")
        if isinstance(raw_names, (list, tuple)):
            names = tuple(str(m) for m in raw_names)
        else:
            names = tuple(m.strip() for m in str(raw_names).split(",") if m.strip())
        raw_alphas = ev.get("alphas")
        if raw_alphas is None:
            alphas = DEFAULT_ALPHAS
        elif isinstance(raw_alphas, (list, tuple)):
            alphas = tuple(float(a) for a in raw_alphas)
        else:
            alphas = parse_alphas(str(raw_alphas))
        _stage_evaluate(
            paths["groundtruth"],
            trajectories,
            names,
            alphas,
            float(ev.get("iou_threshold", 0.5)),
            os.path.join(out, "report.json"),
        )
        imp = _merged_section(args.config, "imprint", {})
        sim = _merged_section(args.config, "simulate", {})
        _stage_imprint(
            trajectories,
            args.config,
            None,
            float(imp.get("t_max", 1000.0)),
            float(sim.get("frame_rate", 30.0)),
            out,
            {
                "stride": imp.get("stride"),
                "width_px": imp.get("width_px"),
                "padding_m": imp.get("padding_m"),
            },
        )
    else:  # pragma: no cover - argparse enforces the choices
        raise ValueError(f"unknown command {args.command!r}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except gio.SchemaError as exc:
        record = {"error": {"code": exc.code, "message": exc.message}}
    except (ValueError, TypeError) as exc:
        record = {"error": {"code": "bad-value", "message": str(exc)}}
    except OSError as exc:
        record = {"error": {"code": "io-error", "message": str(exc)}}
    print(json.dumps(record), file=sys.stderr)
    return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
