"""Temporal pathway imprints: bird's-eye paths, ROI proximity, SVG rendering.

A trajectory is projected onto the room's X-Y plane as one time-colored
polyline per tracklet, with the gaps between tracklets kept as explicit
absences. Regions of interest (e.g. sterile fields) are simple polygons
with a safety margin; proximity is tested exactly, as distance-to-polygon
<= margin, rather than by offsetting the polygon outline.

SVG output is deterministic: fixed decimal formatting, stable element
ordering, no timestamps — identical inputs produce identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .model import Trajectory

Point2 = Tuple[float, float]

#: 12 inches in metres: the default safety border around sterile fields.
DEFAULT_MARGIN_M = 0.3048

_ROI_KINDS = ("sterile", "station", "other")


def _orient(a: Point2, b: Point2, c: Point2) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a: Point2, b: Point2, p: Point2) -> bool:
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def _segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool:
    """Whether closed segments ab and cd share any point."""
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        return True
    for (u, v, p) in ((a, b, c), (a, b, d), (c, d, a), (c, d, b)):
        if _orient(u, v, p) == 0 and _on_segment(u, v, p):
            return True
    return False


def point_in_polygon(point: Point2, polygon: Sequence[Point2]) -> bool:
    """Ray-casting point-in-polygon test (boundary behavior unspecified)."""
    x, y = point
    inside = False
    n = len(polygon)
    j = n - 1
    for i in range(n):
        xi, yi = polygon[i]
        xj, yj = polygon[j]
        if (yi > y) != (yj > y) and x < (xj - xi) * (y - yi) / (yj - yi) + xi:
            inside = not inside
        j = i
    return inside


def _point_segment_distance(p: Point2, a: Point2, b: Point2) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / seg2
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def distance_to_polygon(point: Point2, polygon: Sequence[Point2]) -> float:
    """Euclidean distance from a point to a polygonal region (0 inside)."""
    if point_in_polygon(point, polygon):
        return 0.0
    n = len(polygon)
    return min(
        _point_segment_distance(point, polygon[i], polygon[(i + 1) % n]) for i in range(n)
    )


@dataclass(frozen=True)
class RegionOfInterest:
    """A named X-Y polygon with a proximity margin, in metres."""

    name: str
    polygon: Tuple[Point2, ...]
    margin: float = DEFAULT_MARGIN_M
    kind: str = "sterile"

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("ROI name must be non-empty")
        if self.kind not in _ROI_KINDS:
            raise ValueError(f"ROI kind must be one of {_ROI_KINDS}, got {self.kind!r}")
        if self.margin < 0:
            raise ValueError("ROI margin must be >= 0")
        poly = tuple((float(x), float(y)) for x, y in self.polygon)
        if len(poly) < 3:
            raise ValueError("ROI polygon needs at least 3 vertices")
        n = len(poly)
        for i in range(n):
            a, b = poly[i], poly[(i + 1) % n]
            if a == b:
                raise ValueError("ROI polygon has a zero-length edge")
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue  # adjacent edges legitimately share a vertex
                c, d = poly[j], poly[(j + 1) % n]
                if _segments_intersect(a, b, c, d):
                    raise ValueError(
                        f"ROI polygon {self.name!r} is self-intersecting (edges {i} and {j})"
                    )
        object.__setattr__(self, "polygon", poly)

    def contains_expanded(self, point: Point2) -> bool:
        """Whether the point is within the polygon grown by the margin."""
        return distance_to_polygon(point, self.polygon) <= self.margin


@dataclass(frozen=True)
class ImprintPath:
    """One tracklet's clipped polyline of (x, y, t_seconds) samples."""

    tracklet_id: int
    points: Tuple[Tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        if len(self.points) == 0:
            raise ValueError("imprint path needs at least one point")
        ts = [p[2] for p in self.points]
        if any(t_next <= t_prev for t_prev, t_next in zip(ts, ts[1:])):
            raise ValueError("imprint path times must be strictly increasing")


@dataclass(frozen=True)
class ProximityEvent:
    """One maximal run of observations inside an expanded ROI."""

    roi: str
    identity: str
    enter_s: float
    exit_s: float
    min_dist_m: float


@dataclass(frozen=True)
class Imprint:
    """A trajectory reduced to its bird's-eye, time-parameterized pathways."""

    identity: str
    frame_rate: float
    t_range: Tuple[float, float]
    paths: Tuple[ImprintPath, ...]
    absences: Tuple[Tuple[float, float], ...]
    events: Tuple[ProximityEvent, ...] = ()


def build_imprint(
    traj: Trajectory,
    frame_rate: float = 30.0,
    t_range: Tuple[float, float] = (0.0, 1000.0),
    rois: Sequence[RegionOfInterest] = (),
) -> Imprint:
    """Clip a trajectory to a time window and project it to X-Y pathways.

    Each tracklet becomes one polyline of (x, y, t) box-center samples with
    frame indices converted to seconds; tracklets falling entirely outside
    [t0, t1] are dropped, and the gaps between surviving consecutive
    polylines are recorded as absences. Proximity events against the given
    ROIs are embedded in the result.

    Raises:
        ValueError: when the clip leaves no samples at all.
    """
    if frame_rate <= 0:
        raise ValueError("frame_rate must be positive")
    t0, t1 = float(t_range[0]), float(t_range[1])
    if t1 < t0:
        raise ValueError(f"empty time range {t_range}")
    paths: List[ImprintPath] = []
    for t in traj.tracklets:
        pts = [
            (box.center[0], box.center[1], frame / frame_rate)
            for frame, box in t.states
            if t0 <= frame / frame_rate <= t1
        ]
        if pts:
            paths.append(ImprintPath(tracklet_id=t.tracklet_id, points=tuple(pts)))
    if not paths:
        raise ValueError(
            f"trajectory {traj.identity!r} has no samples in [{t0}, {t1}] s"
        )
    absences = tuple(
        (a.points[-1][2], b.points[0][2]) for a, b in zip(paths, paths[1:])
    )
    imprint = Imprint(
        identity=traj.identity,
        frame_rate=frame_rate,
        t_range=(t0, t1),
        paths=tuple(paths),
        absences=absences,
    )
    if rois:
        imprint = Imprint(
            identity=imprint.identity,
            frame_rate=frame_rate,
            t_range=imprint.t_range,
            paths=imprint.paths,
            absences=imprint.absences,
            events=tuple(_imprint_events(imprint, rois)),
        )
    return imprint


def _imprint_events(imprint: Imprint, rois: Sequence[RegionOfInterest]) -> List[ProximityEvent]:
    events: List[ProximityEvent] = []
    for roi in rois:
        for path in imprint.paths:
            run: List[Tuple[float, float]] = []  # (t, distance) of the current inside-run
            for x, y, t in path.points:
                dist = distance_to_polygon((x, y), roi.polygon)
                if dist <= roi.margin:
                    run.append((t, dist))
                elif run:
                    events.append(_close_run(roi, imprint.identity, run))
                    run = []
            if run:
                events.append(_close_run(roi, imprint.identity, run))
    events.sort(key=lambda e: (e.enter_s, e.roi))
    return events


def _close_run(roi: RegionOfInterest, identity: str, run: List[Tuple[float, float]]) -> ProximityEvent:
    return ProximityEvent(
        roi=roi.name,
        identity=identity,
        enter_s=run[0][0],
        exit_s=run[-1][0],
        min_dist_m=min(d for _, d in run),
    )


def proximity_events(
    traj: Trajectory,
    rois: Sequence[RegionOfInterest],
    frame_rate: float = 30.0,
    t_range: Tuple[float, float] = (0.0, 1000.0),
) -> List[ProximityEvent]:
    """Maximal runs of observations inside each ROI's expanded polygon.

    A run covers consecutive observations of one tracklet; absences and
    tracklet boundaries end any open run. Events report enter/exit times in
    seconds and the minimum distance to the (unexpanded) polygon, which is
    0 whenever the path entered the polygon itself.
    """
    return list(_imprint_events(build_imprint(traj, frame_rate, t_range), rois))


@dataclass(frozen=True)
class ImprintStyle:
    """Rendering knobs; defaults give an 800px-wide blue-to-red imprint."""

    width_px: int = 800
    room: Optional[Tuple[float, float, float, float]] = None  # (xmin, ymin, xmax, ymax)
    padding_m: float = 0.5
    stride: int = 1
    start_color: Tuple[int, int, int] = (33, 102, 172)  # cool: early in the window
    end_color: Tuple[int, int, int] = (178, 24, 43)  # warm: late in the window
    stroke_px: float = 2.5


def color_for(u: float, style: ImprintStyle = ImprintStyle()) -> str:
    """Hex color for a normalized time u in [0, 1] along the style gradient."""
    u = min(1.0, max(0.0, u))
    channels = (
        round(a + (b - a) * u) for a, b in zip(style.start_color, style.end_color)
    )
    return "#{:02x}{:02x}{:02x}".format(*channels)


def render_svg(
    imprint: Imprint,
    rois: Sequence[RegionOfInterest] = (),
    style: ImprintStyle = ImprintStyle(),
) -> bytes:
    """Render one identity's imprint as a deterministic SVG document.

    Room outline and ROIs are drawn first; each ROI's margin appears as a
    translucent round-joined outline of width 2*margin (the expanded
    border). Every path segment gets a two-stop linear gradient in user
    space, so color is strictly monotone in time; absences are dashed gray
    connectors. An imprint with no paths still yields a valid document with
    the room, ROIs, and legend only.
    """
    if style.stride < 1:
        raise ValueError("stride must be >= 1")
    room = style.room if style.room is not None else _content_bounds(imprint, rois)
    xmin, ymin, xmax, ymax = room
    pad = style.padding_m
    xmin, ymin, xmax, ymax = xmin - pad, ymin - pad, xmax + pad, ymax + pad
    scale = style.width_px / (xmax - xmin)
    height_px = (ymax - ymin) * scale

    def px(x: float, y: float) -> Tuple[float, float]:
        return ((x - xmin) * scale, (ymax - y) * scale)

    t0, t1 = imprint.t_range
    span = t1 - t0 if t1 > t0 else 1.0

    defs: List[str] = []
    body: List[str] = []
    body.append(
        f'<rect x="0" y="0" width="{style.width_px:.3f}" height="{height_px:.3f}" fill="#ffffff"/>'
    )
    rx, ry = px(room[0], room[3])
    body.append(
        f'<rect x="{rx:.3f}" y="{ry:.3f}" width="{(room[2] - room[0]) * scale:.3f}" '
        f'height="{(room[3] - room[1]) * scale:.3f}" fill="none" stroke="#444444" stroke-width="1.5"/>'
    )
    for roi in rois:
        pts = " ".join(f"{px(x, y)[0]:.3f},{px(x, y)[1]:.3f}" for x, y in roi.polygon)
        fill = "#f4cccc" if roi.kind == "sterile" else "#d9ead3"
        if roi.margin > 0:
            body.append(
                f'<polygon points="{pts}" fill="none" stroke="{fill}" '
                f'stroke-opacity="0.6" stroke-width="{2 * roi.margin * scale:.3f}" '
                'stroke-linejoin="round"/>'
            )
        body.append(
            f'<polygon points="{pts}" fill="{fill}" fill-opacity="0.8" '
            'stroke="#993333" stroke-width="1"/>'
        )
        lx, ly = px(*roi.polygon[0])
        body.append(
            f'<text x="{lx:.3f}" y="{ly - 4:.3f}" font-size="10" '
            f'font-family="sans-serif" fill="#993333">{_esc(roi.name)}</text>'
        )

    grad_id = 0
    prev_end: Optional[Tuple[float, float]] = None
    for path in imprint.paths:
        pts = path.points[:: style.stride]
        if pts[-1] != path.points[-1]:
            pts = (*pts, path.points[-1])  # never decimate the endpoint away
        if prev_end is not None:
            ax, ay = prev_end
            bx, by = px(pts[0][0], pts[0][1])
            body.append(
                f'<line x1="{ax:.3f}" y1="{ay:.3f}" x2="{bx:.3f}" y2="{by:.3f}" '
                'stroke="#999999" stroke-width="1" stroke-dasharray="4 3"/>'
            )
        for (x0, y0, ta), (x1, y1, tb) in zip(pts, pts[1:]):
            ax, ay = px(x0, y0)
            bx, by = px(x1, y1)
            ca = color_for((ta - t0) / span, style)
            cb = color_for((tb - t0) / span, style)
            gid = f"g{grad_id}"
            grad_id += 1
            defs.append(
                f'<linearGradient id="{gid}" gradientUnits="userSpaceOnUse" '
                f'x1="{ax:.3f}" y1="{ay:.3f}" x2="{bx:.3f}" y2="{by:.3f}">'
                f'<stop offset="0" stop-color="{ca}"/>'
                f'<stop offset="1" stop-color="{cb}"/></linearGradient>'
            )
            body.append(
                f'<line x1="{ax:.3f}" y1="{ay:.3f}" x2="{bx:.3f}" y2="{by:.3f}" '
                f'stroke="url(#{gid})" stroke-width="{style.stroke_px}" stroke-linecap="round"/>'
            )
        if len(pts) == 1:
            ax, ay = px(pts[0][0], pts[0][1])
            body.append(
                f'<circle cx="{ax:.3f}" cy="{ay:.3f}" r="{style.stroke_px:.3f}" '
                f'fill="{color_for((pts[0][2] - t0) / span, style)}"/>'
            )
        prev_end = px(pts[-1][0], pts[-1][1])

    body.append(
        f'<text x="8" y="{height_px - 8:.3f}" font-size="12" font-family="sans-serif" '
        f'fill="#222222">{_esc(imprint.identity)} — {t0:.0f}s (blue) to {t1:.0f}s (red)</text>'
    )

    doc = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.width_px:.0f}" '
        f'height="{height_px:.3f}" viewBox="0 0 {style.width_px:.3f} {height_px:.3f}">\n'
        + ("<defs>" + "".join(defs) + "</defs>\n" if defs else "")
        + "\n".join(body)
        + "\n</svg>\n"
    )
    return doc.encode("utf-8")


def _content_bounds(
    imprint: Imprint, rois: Sequence[RegionOfInterest]
) -> Tuple[float, float, float, float]:
    xs: List[float] = []
    ys: List[float] = []
    for path in imprint.paths:
        xs.extend(p[0] for p in path.points)
        ys.extend(p[1] for p in path.points)
    for roi in rois:
        xs.extend(p[0] for p in roi.polygon)
        ys.extend(p[1] for p in roi.polygon)
    if not xs:
        return (0.0, 0.0, 1.0, 1.0)
    return (min(xs), min(ys), max(xs), max(ys))


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
