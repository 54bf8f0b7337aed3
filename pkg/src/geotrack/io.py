"""File formats for every pipeline artifact, plus TOML configuration.

Per-frame streams (detections, enrollment) are JSON Lines; descriptors
travel as base64-packed little-endian float32, row-major 8xC — compact and
exact, where large arrays of JSON numbers would be neither. Aggregates
(tracklets, trajectories, gallery, report) are single JSON documents
versioned with "format_version": 1. Ground truth is a plain CSV.

All writers are deterministic (stable key order, fixed separators, "\\n"
newlines) and numerically lossless: floats are emitted via their shortest
round-tripping representation, so write -> read recovers every numeric
field exactly; descriptors round-trip exactly at float32 precision.

Validation failures raise :class:`SchemaError` with one of four stable
codes: ``version-mismatch``, ``bad-blob-length``, ``nan-field``, and
``bad-schema`` for everything structural.
"""

from __future__ import annotations

import base64
import binascii
import csv
import dataclasses
import json
import math
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib  # type: ignore[no-redef]

from .association import AssociationConfig
from .features import temporal_max_pool
from .imprints import ProximityEvent, RegionOfInterest
from .model import (
    BoundingBox3D,
    Detection,
    MultiViewDescriptor,
    NUM_VIEWS,
    Tracklet,
    Trajectory,
)
from .recovery import ConflictRecord, GalleryModel, GalleryTrainingConfig
from .simulator import ScenarioConfig

FORMAT_VERSION = 1

ERR_VERSION = "version-mismatch"
ERR_BLOB = "bad-blob-length"
ERR_NAN = "nan-field"
ERR_SCHEMA = "bad-schema"

GROUNDTRUTH_HEADER = ("frame", "identity", "cx", "cy", "cz", "ex", "ey", "ez")
EVENTS_HEADER = ("roi", "identity", "enter_s", "exit_s", "min_dist_m")


class SchemaError(ValueError):
    """A data file failed validation; ``code`` is stable across releases."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(f"[{code}] {message}")
        self.code = code
        self.message = message


def _require_version(doc: Any, path: str) -> None:
    if not isinstance(doc, dict):
        raise SchemaError(ERR_SCHEMA, f"{path}: top level must be a JSON object")
    got = doc.get("format_version")
    if got != FORMAT_VERSION:
        raise SchemaError(
            ERR_VERSION, f"{path}: format_version {got!r} (expected {FORMAT_VERSION})"
        )


def _finite(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(ERR_SCHEMA, f"{where} must be a number, got {value!r}")
    out = float(value)
    if not math.isfinite(out):
        raise SchemaError(ERR_NAN, f"{where} is not finite")
    return out


def _vec3(value: Any, where: str) -> Tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise SchemaError(ERR_SCHEMA, f"{where} must be a 3-element array")
    x, y, z = (_finite(v, where) for v in value)
    return (x, y, z)


def _box(center: Any, extents: Any, where: str) -> BoundingBox3D:
    try:
        return BoundingBox3D(_vec3(center, f"{where}.c"), _vec3(extents, f"{where}.e"))
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(ERR_SCHEMA, f"{where}: {exc}") from exc


# ---------------------------------------------------------------------------
# Descriptor blobs


def encode_features(descriptor: Union[MultiViewDescriptor, np.ndarray]) -> str:
    """Base64 of the (8, C) view matrix as little-endian float32, row-major."""
    views = descriptor.views if isinstance(descriptor, MultiViewDescriptor) else descriptor
    arr = np.ascontiguousarray(np.asarray(views, dtype=np.float64), dtype="<f4")
    return base64.b64encode(arr.tobytes()).decode("ascii")


def decode_features(blob: Any, where: str) -> MultiViewDescriptor:
    """Decode a feature blob, validating shape, finiteness, and unit norms."""
    if not isinstance(blob, str):
        raise SchemaError(ERR_SCHEMA, f"{where}: feature blob must be a string")
    try:
        raw = base64.b64decode(blob.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise SchemaError(ERR_SCHEMA, f"{where}: feature blob is not valid base64") from exc
    if len(raw) == 0 or len(raw) % (4 * NUM_VIEWS) != 0:
        raise SchemaError(
            ERR_BLOB,
            f"{where}: feature blob of {len(raw)} bytes is not a "
            f"row-major {NUM_VIEWS}xC float32 array",
        )
    views = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(NUM_VIEWS, -1)
    if not np.all(np.isfinite(views)):
        raise SchemaError(ERR_NAN, f"{where}: feature blob contains non-finite values")
    try:
        return MultiViewDescriptor(views)
    except ValueError as exc:
        raise SchemaError(ERR_SCHEMA, f"{where}: {exc}") from exc


# ---------------------------------------------------------------------------
# detections.jsonl


def write_detections(path: str, frames: Iterable[Tuple[int, Sequence[Detection]]]) -> None:
    """One JSON object per frame; empty frames encode as {"t": k, "dets": []}."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t, dets in frames:
            rec = {
                "t": int(t),
                "dets": [
                    {
                        "box": {"c": list(d.box.center), "e": list(d.box.extents)},
                        "feat": encode_features(d.descriptor),
                        "conf": d.confidence,
                    }
                    for d in dets
                ],
            }
            fh.write(json.dumps(rec, allow_nan=False, separators=(",", ":")))
            fh.write("\n")


def read_detections(path: str) -> List[Tuple[int, Tuple[Detection, ...]]]:
    """Parse a detections stream back into per-frame Detection tuples."""
    out: List[Tuple[int, Tuple[Detection, ...]]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(ERR_SCHEMA, f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(rec, dict) or "t" not in rec or "dets" not in rec:
                raise SchemaError(ERR_SCHEMA, f"line {lineno}: expected keys 't' and 'dets'")
            t = rec["t"]
            if isinstance(t, bool) or not isinstance(t, int) or t < 0:
                raise SchemaError(ERR_SCHEMA, f"line {lineno}: 't' must be a non-negative integer")
            if not isinstance(rec["dets"], list):
                raise SchemaError(ERR_SCHEMA, f"frame {t}: 'dets' must be an array")
            dets: List[Detection] = []
            for i, d in enumerate(rec["dets"]):
                where = f"frame {t}, det {i}"
                if not isinstance(d, dict) or not isinstance(d.get("box"), dict):
                    raise SchemaError(ERR_SCHEMA, f"{where}: expected an object with a 'box'")
                box = _box(d["box"].get("c"), d["box"].get("e"), where)
                desc = decode_features(d.get("feat"), where)
                conf = _finite(d.get("conf", 1.0), f"{where}.conf")
                try:
                    dets.append(Detection(frame=t, box=box, descriptor=desc, confidence=conf))
                except ValueError as exc:
                    raise SchemaError(ERR_SCHEMA, f"{where}: {exc}") from exc
            out.append((t, tuple(dets)))
    return out


# ---------------------------------------------------------------------------
# groundtruth.csv


def write_groundtruth(path: str, records: Iterable[Any]) -> None:
    """CSV of present ground-truth states: frame,identity,cx,cy,cz,ex,ey,ez.

    Accepts any records carrying frame/identity/box attributes (or plain
    (frame, identity, box) tuples).
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GROUNDTRUTH_HEADER)
        for rec in records:
            frame, ident, box = _gt_fields(rec)
            writer.writerow([frame, ident, *map(repr, box.center), *map(repr, box.extents)])


def _gt_fields(rec: Any) -> Tuple[int, str, BoundingBox3D]:
    if isinstance(rec, tuple):
        frame, ident, box = rec
    else:
        frame, ident, box = rec.frame, rec.identity, rec.box
    return int(frame), str(ident), box


def read_groundtruth(path: str) -> List[Tuple[int, str, BoundingBox3D]]:
    """Parse ground truth into (frame, identity, box) items for evaluation."""
    out: List[Tuple[int, str, BoundingBox3D]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(GROUNDTRUTH_HEADER):
            raise SchemaError(
                ERR_SCHEMA,
                f"ground-truth header must be {','.join(GROUNDTRUTH_HEADER)}, got {header}",
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 8:
                raise SchemaError(ERR_SCHEMA, f"line {lineno}: expected 8 columns, got {len(row)}")
            try:
                frame = int(row[0])
                values = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise SchemaError(ERR_SCHEMA, f"line {lineno}: {exc}") from exc
            if frame < 0:
                raise SchemaError(ERR_SCHEMA, f"line {lineno}: negative frame index")
            if not all(math.isfinite(v) for v in values):
                raise SchemaError(ERR_NAN, f"line {lineno}: non-finite coordinate")
            box = _box(values[:3], values[3:], f"line {lineno}")
            out.append((frame, row[1], box))
    return out


# ---------------------------------------------------------------------------
# enrollment.jsonl


def write_enrollment(path: str, samples: Iterable[Tuple[str, MultiViewDescriptor]]) -> None:
    """One {"identity", "feat"} object per enrollment sample."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ident, desc in samples:
            rec = {"identity": str(ident), "feat": encode_features(desc)}
            fh.write(json.dumps(rec, allow_nan=False, separators=(",", ":")))
            fh.write("\n")


def read_enrollment(path: str) -> List[Tuple[str, MultiViewDescriptor]]:
    out: List[Tuple[str, MultiViewDescriptor]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(ERR_SCHEMA, f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(rec, dict) or not isinstance(rec.get("identity"), str) or not rec["identity"]:
                raise SchemaError(ERR_SCHEMA, f"line {lineno}: expected a non-empty 'identity'")
            out.append((rec["identity"], decode_features(rec.get("feat"), f"line {lineno}")))
    return out


# ---------------------------------------------------------------------------
# tracklets.json / trajectories.json

# Tracklet files persist one descriptor per tracklet — the temporal max-pool
# of its per-observation descriptors — not the raw per-frame features. That
# is exactly what offline recovery consumes (max-pooling is idempotent, so
# re-pooling the stored signature is a no-op), and it keeps files a few KB
# per tracklet instead of a few MB. Readers rebuild tracklets with the
# pooled signature standing in at every state.


def _tracklet_to_dict(t: Tracklet) -> dict:
    return {
        "tracklet_id": t.tracklet_id,
        "source_track_id": t.source_track_id,
        "frames": [frame for frame, _ in t.states],
        "boxes": [[*box.center, *box.extents] for _, box in t.states],
        "feat": encode_features(temporal_max_pool(t.descriptors)),
    }


def _tracklet_from_dict(d: Any, where: str) -> Tracklet:
    if not isinstance(d, dict):
        raise SchemaError(ERR_SCHEMA, f"{where}: tracklet must be an object")
    for key in ("tracklet_id", "frames", "boxes", "feat"):
        if key not in d:
            raise SchemaError(ERR_SCHEMA, f"{where}: missing key {key!r}")
    frames = d["frames"]
    boxes = d["boxes"]
    if not isinstance(frames, list) or not isinstance(boxes, list) or len(frames) != len(boxes):
        raise SchemaError(ERR_SCHEMA, f"{where}: 'frames' and 'boxes' must be equal-length arrays")
    states: List[Tuple[int, BoundingBox3D]] = []
    for i, (frame, row) in enumerate(zip(frames, boxes)):
        if isinstance(frame, bool) or not isinstance(frame, int):
            raise SchemaError(ERR_SCHEMA, f"{where}: frames[{i}] must be an integer")
        if not isinstance(row, list) or len(row) != 6:
            raise SchemaError(ERR_SCHEMA, f"{where}: boxes[{i}] must have 6 numbers")
        states.append((frame, _box(row[:3], row[3:], f"{where}, boxes[{i}]")))
    desc = decode_features(d["feat"], where)
    src = d.get("source_track_id")
    if src is not None and (isinstance(src, bool) or not isinstance(src, int)):
        raise SchemaError(ERR_SCHEMA, f"{where}: source_track_id must be an integer or null")
    try:
        return Tracklet(
            tracklet_id=int(d["tracklet_id"]),
            states=tuple(states),
            descriptors=(desc,) * len(states),
            source_track_id=src,
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(ERR_SCHEMA, f"{where}: {exc}") from exc


def _dump_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, allow_nan=False, indent=2)
        fh.write("\n")


def _load_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(ERR_SCHEMA, f"{path}: invalid JSON: {exc}") from exc


def write_tracklets(path: str, tracklets: Sequence[Tracklet]) -> None:
    _dump_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "tracklets": [_tracklet_to_dict(t) for t in tracklets],
        },
    )


def read_tracklets(path: str) -> List[Tracklet]:
    doc = _load_json(path)
    _require_version(doc, path)
    items = doc.get("tracklets")
    if not isinstance(items, list):
        raise SchemaError(ERR_SCHEMA, f"{path}: missing 'tracklets' array")
    return [_tracklet_from_dict(d, f"tracklet {i}") for i, d in enumerate(items)]


def write_trajectories(path: str, trajectories: Sequence[Trajectory]) -> None:
    _dump_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "trajectories": [
                {
                    "identity": traj.identity,
                    "tracklets": [_tracklet_to_dict(t) for t in traj.tracklets],
                }
                for traj in trajectories
            ],
        },
    )


def read_trajectories(path: str) -> List[Trajectory]:
    doc = _load_json(path)
    _require_version(doc, path)
    items = doc.get("trajectories")
    if not isinstance(items, list):
        raise SchemaError(ERR_SCHEMA, f"{path}: missing 'trajectories' array")
    out: List[Trajectory] = []
    for i, entry in enumerate(items):
        where = f"trajectory {i}"
        if not isinstance(entry, dict) or not isinstance(entry.get("identity"), str):
            raise SchemaError(ERR_SCHEMA, f"{where}: expected an object with an 'identity'")
        if not isinstance(entry.get("tracklets"), list):
            raise SchemaError(ERR_SCHEMA, f"{where}: missing 'tracklets' array")
        tracklets = [
            _tracklet_from_dict(d, f"{where}, tracklet {j}")
            for j, d in enumerate(entry["tracklets"])
        ]
        try:
            out.append(Trajectory(identity=entry["identity"], tracklets=tuple(tracklets)))
        except ValueError as exc:
            raise SchemaError(ERR_SCHEMA, f"{where}: {exc}") from exc
    return out


def read_predictions_file(path: str) -> Tuple[str, list]:
    """Sniff a predictions file: ("tracklets", [...]) or ("trajectories", [...])."""
    doc = _load_json(path)
    _require_version(doc, path)
    if "tracklets" in doc:
        return "tracklets", read_tracklets(path)
    if "trajectories" in doc:
        return "trajectories", read_trajectories(path)
    raise SchemaError(ERR_SCHEMA, f"{path}: neither a tracklets nor a trajectories file")


# ---------------------------------------------------------------------------
# gallery.json / conflicts.json / report.json


def write_gallery(path: str, model: GalleryModel) -> None:
    _dump_json(path, model.to_dict())


def read_gallery(path: str) -> GalleryModel:
    doc = _load_json(path)
    _require_version(doc, path)
    try:
        return GalleryModel.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(ERR_SCHEMA, f"{path}: {exc}") from exc


def write_conflicts(
    path: str, conflicts: Sequence[ConflictRecord], excluded: Sequence[int]
) -> None:
    _dump_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "conflicts": [
                {
                    "tracklet_id": c.tracklet_id,
                    "identity": c.identity,
                    "action": c.action,
                    "final_identity": c.final_identity,
                    "margin": c.margin,
                }
                for c in conflicts
            ],
            "excluded": list(excluded),
        },
    )


def read_conflicts(path: str) -> Tuple[List[ConflictRecord], List[int]]:
    doc = _load_json(path)
    _require_version(doc, path)
    conflicts = [
        ConflictRecord(
            tracklet_id=int(c["tracklet_id"]),
            identity=str(c["identity"]),
            action=str(c["action"]),
            final_identity=None if c["final_identity"] is None else str(c["final_identity"]),
            margin=float(c["margin"]),
        )
        for c in doc.get("conflicts", [])
    ]
    return conflicts, [int(i) for i in doc.get("excluded", [])]


def write_report(path: str, metrics: Mapping[str, Any]) -> None:
    """Versioned metric report; deliberately carries no wall-clock timing."""
    _dump_json(path, {"format_version": FORMAT_VERSION, "metrics": dict(metrics)})


def read_report(path: str) -> dict:
    doc = _load_json(path)
    _require_version(doc, path)
    metrics = doc.get("metrics")
    if not isinstance(metrics, dict):
        raise SchemaError(ERR_SCHEMA, f"{path}: missing 'metrics' object")
    return metrics


def write_events(path: str, events: Sequence[ProximityEvent]) -> None:
    """CSV event log: roi,identity,enter_s,exit_s,min_dist_m."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENTS_HEADER)
        for e in events:
            writer.writerow([e.roi, e.identity, repr(e.enter_s), repr(e.exit_s), repr(e.min_dist_m)])


# ---------------------------------------------------------------------------
# Configuration (TOML, one file with per-stage sections)


def load_config(path: str) -> Dict[str, Any]:
    """Parse a TOML config file into a plain dict of per-stage sections."""
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise SchemaError(ERR_SCHEMA, f"{path}: invalid TOML: {exc}") from exc


def _listify(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_listify(v) for v in value)
    return value


def _dataclass_from_mapping(cls, section: Mapping[str, Any], where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(section) - names)
    if unknown:
        raise SchemaError(
            ERR_SCHEMA,
            f"{where}: unknown keys {unknown}; valid keys are {sorted(names)}",
        )
    kwargs = {k: _listify(v) for k, v in section.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise SchemaError(ERR_SCHEMA, f"{where}: {exc}") from exc


def scenario_config_from_mapping(section: Mapping[str, Any]) -> ScenarioConfig:
    if "agents" in section:
        raise SchemaError(
            ERR_SCHEMA,
            "[simulate]: explicit agent specs are not supported in config files; "
            "agents are sampled from the seed (build AgentSpec objects in code instead)",
        )
    return _dataclass_from_mapping(ScenarioConfig, section, "[simulate]")


def association_config_from_mapping(section: Mapping[str, Any]) -> AssociationConfig:
    return _dataclass_from_mapping(AssociationConfig, section, "[track]")


def gallery_config_from_mapping(section: Mapping[str, Any]) -> GalleryTrainingConfig:
    return _dataclass_from_mapping(GalleryTrainingConfig, section, "[gallery]")


def rois_from_mapping(
    section: Mapping[str, Any],
) -> Tuple[Optional[Tuple[float, float, float, float]], Tuple[RegionOfInterest, ...]]:
    """Parse a [room] section: optional bounds plus [[room.roi]] polygon entries."""
    bounds: Optional[Tuple[float, float, float, float]] = None
    raw_bounds = section.get("bounds")
    if raw_bounds is not None:
        if not isinstance(raw_bounds, list) or len(raw_bounds) != 4:
            raise SchemaError(ERR_SCHEMA, "[room].bounds must be [xmin, ymin, xmax, ymax]")
        x0, y0, x1, y1 = (_finite(v, "[room].bounds") for v in raw_bounds)
        if x1 <= x0 or y1 <= y0:
            raise SchemaError(ERR_SCHEMA, f"[room].bounds is empty: {raw_bounds}")
        bounds = (x0, y0, x1, y1)
    rois: List[RegionOfInterest] = []
    entries = section.get("roi", [])
    if not isinstance(entries, list):
        raise SchemaError(ERR_SCHEMA, "[room].roi must be an array of tables ([[room.roi]])")
    for i, entry in enumerate(entries):
        where = f"[[room.roi]] #{i}"
        if not isinstance(entry, Mapping):
            raise SchemaError(ERR_SCHEMA, f"{where}: must be a table")
        unknown = sorted(set(entry) - {"name", "polygon", "margin", "kind"})
        if unknown:
            raise SchemaError(ERR_SCHEMA, f"{where}: unknown keys {unknown}")
        polygon = entry.get("polygon")
        if not isinstance(polygon, list) or any(
            not isinstance(p, list) or len(p) != 2 for p in polygon
        ):
            raise SchemaError(ERR_SCHEMA, f"{where}: polygon must be an array of [x, y] pairs")
        kwargs: Dict[str, Any] = {
            "name": entry.get("name", f"roi-{i}"),
            "polygon": tuple((_finite(p[0], where), _finite(p[1], where)) for p in polygon),
        }
        if "margin" in entry:
            kwargs["margin"] = _finite(entry["margin"], f"{where}.margin")
        if "kind" in entry:
            kwargs["kind"] = entry["kind"]
        try:
            rois.append(RegionOfInterest(**kwargs))
        except (TypeError, ValueError) as exc:
            raise SchemaError(ERR_SCHEMA, f"{where}: {exc}") from exc
    return bounds, tuple(rois)


# ---------------------------------------------------------------------------
# Report table


def format_report_table(metrics: Mapping[str, Any]) -> str:
    """Plain-text metric table for terminal output (floats to 6 places)."""
    rows: List[Tuple[str, str]] = []
    if "hota" in metrics:
        h = metrics["hota"]
        rows += [
            ("HOTA", f"{h['HOTA']:.6f}"),
            ("DetA", f"{h['DetA']:.6f}"),
            ("AssA", f"{h['AssA']:.6f}"),
        ]
    if "clear" in metrics:
        c = metrics["clear"]
        rows += [
            ("MOTA", f"{c['MOTA']:.6f}"),
            ("FP", str(c["FP"])),
            ("FN", str(c["FN"])),
            ("IDSW", str(c["IDSW"])),
            ("GT dets", str(c["num_gt"])),
        ]
    if "idf1" in metrics:
        rows.append(("IDF1", f"{metrics['idf1']['IDF1']:.6f}"))
    if "count" in metrics:
        rows += [
            ("% dets", f"{metrics['count']['pct_dets']:.3f}"),
            ("% ids", f"{metrics['count']['pct_ids']:.3f}"),
        ]
    if not rows:
        return "(no metrics selected)\n"
    name_w = max(len(n) for n, _ in rows)
    val_w = max(len(v) for _, v in rows)
    lines = [f"{'metric':<{name_w}}  {'value':>{val_w}}", f"{'-' * name_w}  {'-' * val_w}"]
    lines += [f"{n:<{name_w}}  {v:>{val_w}}" for n, v in rows]
    return "\n".join(lines) + "\n"
