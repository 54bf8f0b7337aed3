"""Online frame-to-frame association and the track lifecycle.

Each frame, live tracks are matched to detections by solving a linear
assignment problem over a weighted cost matrix

    cost(i, j) = lambda * shape_distance(i, j) + (1 - lambda) * spatial_cost(i, j)

followed by gating: matches costlier than gamma are discarded. Matched
tracks absorb the detection (EMA descriptor update), unmatched detections
spawn tracks, unmatched tracks go lost, and lost tracks are retired once
their gap exceeds max_lost_frames. A lost track that re-matches closes its
tracklet and opens a new one: the gap between them is an explicit absence.

The assignment solver is scipy's Jonker-Volgenant implementation plus a
deterministic refinement that, among all minimum-total-cost matchings,
returns the one whose sorted (row, col) pair list is lexicographically
smallest. Optimality is compared within a relative tolerance of 1e-9 so
the rule is stable on float inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .features import _ema_views, descriptors_to_array, multiview_distance_matrix
from .geometry import boxes_to_array, spatial_cost_matrix
from .model import (
    AssociationConfig,
    BoundingBox3D,
    Detection,
    MultiViewDescriptor,
    Tracklet,
)

#: Relative tolerance for "equally optimal" during assignment tie-breaking.
ASSIGNMENT_TIE_TOL = 1e-9


@dataclass(frozen=True)
class AssignmentResult:
    """Outcome of one assignment round, in cost-matrix index space.

    Rows are tracks, columns are detections. The three tuples partition
    all row and column indices: every row appears exactly once in matches
    or unmatched_tracks, every column in matches or unmatched_detections.
    """

    matches: Tuple[Tuple[int, int], ...]
    unmatched_tracks: Tuple[int, ...]
    unmatched_detections: Tuple[int, ...]


def _optimal_cost(cost: np.ndarray) -> float:
    if cost.shape[0] == 0 or cost.shape[1] == 0:
        return 0.0
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum())


def solve_assignment(cost: np.ndarray) -> AssignmentResult:
    """Minimum-cost one-to-one matching covering min(rows, cols) pairs.

    Among matchings whose total cost is within ASSIGNMENT_TIE_TOL (relative)
    of the optimum, returns the one whose sorted pair sequence is smallest
    in (row, col) lexicographic order. The refinement fixes pairs greedily,
    re-checking against the true optimum at every step, so the tolerance
    does not compound.

    Raises:
        ValueError: if the matrix is not 2-D or contains NaN.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {cost.shape}")
    if np.isnan(cost).any():
        raise ValueError("cost matrix contains NaN")
    n, m = cost.shape
    k = min(n, m)
    if k == 0:
        return AssignmentResult((), tuple(range(n)), tuple(range(m)))

    best = _optimal_cost(cost)
    budget = best + ASSIGNMENT_TIE_TOL * max(1.0, abs(best))

    pairs: List[Tuple[int, int]] = []
    fixed = 0.0
    rows = list(range(n))
    cols = list(range(m))
    while len(pairs) < k:
        need = k - len(pairs) - 1  # pairs still to place after the next one
        placed = False
        sub_cost = cost[np.ix_(rows, cols)]
        n_rows, n_cols = sub_cost.shape
        # Suffix column minima: suf[i, j] = min of sub_cost[i:, j]. When the
        # completion must cover every remaining column (need == n_cols - 1,
        # the rows >= cols regime), each column pays at least its suffix
        # minimum — an O(1) admissible bound per candidate.
        suf = np.minimum.accumulate(sub_cost[::-1], axis=0)[::-1]
        suf_sums = suf.sum(axis=1)
        for ri, r in enumerate(rows):
            # Pairs are emitted in increasing row order, so choosing r means
            # rows before it stay unmatched; only later rows remain usable.
            if n_rows - ri - 1 < need:
                break
            for ci, c in enumerate(cols):
                direct = fixed + float(sub_cost[ri, ci])
                if need:
                    if need == n_cols - 1:
                        bound = float(suf_sums[ri + 1] - suf[ri + 1, ci])
                    else:
                        # Rare shape (more columns than pairs left): bound by
                        # the fully-matched side's per-line minima.
                        rest = np.delete(sub_cost[ri + 1 :], ci, axis=1)
                        bound = float(
                            rest.min(axis=1).sum()
                            if rest.shape[0] <= rest.shape[1]
                            else rest.min(axis=0).sum()
                        )
                    # The bound never exceeds the true completion cost, so
                    # this prunes without ever rejecting a feasible candidate.
                    if direct + bound > budget:
                        continue
                    completion = _optimal_cost(np.delete(sub_cost[ri + 1 :], ci, axis=1))
                else:
                    completion = 0.0
                if direct + completion <= budget:
                    pairs.append((r, c))
                    fixed = direct
                    rows = rows[ri + 1 :]
                    cols = cols[:ci] + cols[ci + 1 :]
                    placed = True
                    break
            if placed:
                break
        if not placed:  # cannot happen for finite costs; guard against misuse
            raise ValueError("assignment refinement failed to complete a matching")

    matched_rows = {r for r, _ in pairs}
    matched_cols = {c for _, c in pairs}
    return AssignmentResult(
        tuple(pairs),
        tuple(i for i in range(n) if i not in matched_rows),
        tuple(j for j in range(m) if j not in matched_cols),
    )


def gate(result: AssignmentResult, cost: np.ndarray, gamma: float) -> AssignmentResult:
    """Discard matches with cost strictly above gamma, releasing both sides."""
    cost = np.asarray(cost, dtype=np.float64)
    kept = []
    dropped_rows = []
    dropped_cols = []
    for r, c in result.matches:
        if cost[r, c] > gamma:
            dropped_rows.append(r)
            dropped_cols.append(c)
        else:
            kept.append((r, c))
    return AssignmentResult(
        tuple(kept),
        tuple(sorted((*result.unmatched_tracks, *dropped_rows))),
        tuple(sorted((*result.unmatched_detections, *dropped_cols))),
    )


class Track:
    """Mutable per-identity state of the online tracker.

    run_states/run_descriptors accumulate the current continuous run of
    observations (the tracklet under construction); closed runs are held
    in closed_runs until the track is finished so that the minimum-length
    rule can consider the track's total observation count.

    The matching state (EMA descriptor views) lives as one row of a
    (slots, 8, C) buffer so a Tracker can splice all live tracks into a
    contiguous matrix without restacking per frame; a standalone Track owns
    a private single-row buffer.
    """

    __slots__ = (
        "track_id",
        "status",
        "last_box",
        "last_seen_frame",
        "velocity",
        "run_states",
        "run_descriptors",
        "closed_runs",
        "views_buf",
        "slot",
    )

    def __init__(
        self,
        track_id: int,
        status: str,
        last_box: BoundingBox3D,
        descriptor: MultiViewDescriptor,
        last_seen_frame: int,
        velocity: Optional[np.ndarray] = None,
        run_states: Optional[List[Tuple[int, BoundingBox3D]]] = None,
        run_descriptors: Optional[List[MultiViewDescriptor]] = None,
    ) -> None:
        self.track_id = track_id
        self.status = status  # "active" | "lost"
        self.last_box = last_box
        self.last_seen_frame = last_seen_frame
        self.velocity = velocity
        self.run_states: List[Tuple[int, BoundingBox3D]] = (
            run_states if run_states is not None else []
        )
        self.run_descriptors: List[MultiViewDescriptor] = (
            run_descriptors if run_descriptors is not None else []
        )
        self.closed_runs: List[
            Tuple[List[Tuple[int, BoundingBox3D]], List[MultiViewDescriptor]]
        ] = []
        self.views_buf: np.ndarray = np.array(descriptor.views[None, :, :])
        self.slot: int = 0

    @property
    def descriptor(self) -> MultiViewDescriptor:
        """The track's EMA descriptor state used for matching."""
        return MultiViewDescriptor(self.views_buf[self.slot])

    def __repr__(self) -> str:  # keep logs/debugging readable
        return (
            f"Track(track_id={self.track_id}, status={self.status!r}, "
            f"last_seen_frame={self.last_seen_frame}, "
            f"observations={self.total_observations()})"
        )

    def gap(self, frame: int) -> int:
        """Number of whole frames missed strictly between last sighting and frame."""
        return frame - self.last_seen_frame - 1

    def total_observations(self) -> int:
        return len(self.run_states) + sum(len(s) for s, _ in self.closed_runs)

    def close_run(self) -> None:
        if self.run_states:
            self.closed_runs.append((self.run_states, self.run_descriptors))
            self.run_states = []
            self.run_descriptors = []


@dataclass(frozen=True)
class TrackEvent:
    """Audit record of one lifecycle transition."""

    frame: int
    kind: str  # "spawn" | "lost" | "rematch" | "retire"
    track_id: int


def predict_box(track: Track, frame: int, cfg: AssociationConfig) -> BoundingBox3D:
    """Track's box extrapolated to `frame` (identity unless motion is on)."""
    if cfg.motion_prediction != "constant-velocity" or track.velocity is None:
        return track.last_box
    dt = frame - track.last_seen_frame
    c = track.last_box.center
    v = track.velocity
    return BoundingBox3D(
        (c[0] + v[0] * dt, c[1] + v[1] * dt, c[2] + v[2] * dt), track.last_box.extents
    )


def build_cost_matrix(
    tracks: Sequence[Track],
    detections: Sequence[Detection],
    cfg: AssociationConfig,
    *,
    track_views: Optional[np.ndarray] = None,
    track_boxes: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Weighted shape/spatial cost matrix, tracks as rows, detections as columns.

    Entry (i, j) is lambda * multiview_distance + (1 - lambda) * spatial_cost
    against the track's predicted box. Rows for tracks lost longer than
    lost_spatial_horizon use the shape distance alone (their box is stale and
    should not veto a geometric re-match) — except when lambda is 0, where
    the cost must stay purely spatial to honour the weight degeneracy.

    track_views (n, 8, C) and track_boxes (n, 6) may be passed precomputed
    (the Tracker keeps them buffered); otherwise they are gathered from the
    Track objects.
    """
    if len(tracks) == 0 or len(detections) == 0:
        return np.zeros((len(tracks), len(detections)), dtype=np.float64)
    frame = detections[0].frame
    if any(d.frame != frame for d in detections):
        raise ValueError("detections in one association round must share a frame")

    lam = cfg.shape_weight
    shape: Optional[np.ndarray] = None
    spatial: Optional[np.ndarray] = None
    if lam > 0.0:
        if track_views is None:
            track_views = descriptors_to_array([t.descriptor for t in tracks])
        shape = multiview_distance_matrix(
            track_views,
            descriptors_to_array([d.descriptor for d in detections]),
            cfg.view_compare_mode,
        )
    if lam < 1.0:
        if track_boxes is None:
            track_boxes = boxes_to_array([predict_box(t, frame, cfg) for t in tracks])
        spatial = spatial_cost_matrix(track_boxes, boxes_to_array([d.box for d in detections]))

    if lam == 0.0:
        return spatial  # type: ignore[return-value]
    if lam == 1.0:
        return shape  # type: ignore[return-value]
    cost = lam * shape + (1.0 - lam) * spatial
    stale = [
        i
        for i, t in enumerate(tracks)
        if t.status == "lost" and t.gap(frame) > cfg.lost_spatial_horizon
    ]
    if stale:
        cost[stale, :] = shape[stale, :]  # type: ignore[index]
    return cost


class Tracker:
    """Stateful online tracker; call step() once per frame, then finish().

    State is mutated strictly sequentially — frame order is part of the
    semantics. Run one Tracker per sequence; distinct sequences are
    independent and may run in parallel.
    """

    def __init__(self, cfg: Optional[AssociationConfig] = None) -> None:
        self.cfg = cfg if cfg is not None else AssociationConfig()
        self.tracks: List[Track] = []
        self._next_id = 1
        self._last_frame: Optional[int] = None
        self._finished: List[Track] = []
        # Shared matching-state buffers, one slot per live track: descriptor
        # views in (slots, 8, C), last boxes in (slots, 6) as [center|extents].
        self._views: Optional[np.ndarray] = None
        self._boxes: Optional[np.ndarray] = None
        self._free_slots: List[int] = []

    def _alloc_slot(self, track: Track, det: Detection) -> None:
        """Move a freshly spawned track's matching state into the shared buffers."""
        dim = det.descriptor.dim
        if self._views is None:
            cap = 64
            self._views = np.empty((cap, det.descriptor.views.shape[0], dim))
            self._boxes = np.empty((cap, 6))
            self._free_slots = list(range(cap - 1, -1, -1))
        elif dim != self._views.shape[2]:
            raise ValueError(
                f"descriptor dimension changed mid-sequence: {self._views.shape[2]} -> {dim}"
            )
        if not self._free_slots:
            old = self._views
            cap = 2 * old.shape[0]
            self._views = np.empty((cap, old.shape[1], old.shape[2]))
            self._views[: old.shape[0]] = old
            old_boxes = self._boxes
            self._boxes = np.empty((cap, 6))
            self._boxes[: old_boxes.shape[0]] = old_boxes
            for t in self.tracks:
                t.views_buf = self._views
            self._free_slots = list(range(cap - 1, old.shape[0] - 1, -1))
        slot = self._free_slots.pop()
        self._views[slot] = det.descriptor.views
        self._boxes[slot, :3] = det.box.center
        self._boxes[slot, 3:] = det.box.extents
        track.views_buf = self._views
        track.slot = slot

    def _release_slot(self, track: Track) -> None:
        """Give the track a private copy of its state and recycle the slot."""
        row = track.views_buf[track.slot].copy()
        self._free_slots.append(track.slot)
        track.views_buf = row[None, :, :]
        track.slot = 0

    def step(self, frame: int, detections: Sequence[Detection]) -> List[TrackEvent]:
        """Associate one frame's detections; returns the lifecycle events."""
        frame = int(frame)
        if self._last_frame is not None and frame <= self._last_frame:
            raise ValueError(
                f"out-of-order frame index: {frame} after {self._last_frame}"
            )
        self._last_frame = frame
        if any(d.frame != frame for d in detections):
            raise ValueError("detection frame index disagrees with step frame")
        cfg = self.cfg
        events: List[TrackEvent] = []

        # Retire lost tracks whose gap can no longer close.
        live: List[Track] = []
        for t in self.tracks:
            if t.status == "lost" and t.gap(frame) > cfg.max_lost_frames:
                t.close_run()
                self._release_slot(t)
                self._finished.append(t)
                events.append(TrackEvent(frame, "retire", t.track_id))
            else:
                live.append(t)
        self.tracks = live

        # Lost tracks are matchable only while their gap is within budget;
        # with max_lost_frames = 0 they are retired above before ever
        # becoming candidates, which disables online re-matching entirely.
        # After the retire pass every surviving track satisfies that budget,
        # so the candidate set is exactly the live list.
        candidates = list(self.tracks)

        if candidates and detections:
            slots = np.array([t.slot for t in candidates], dtype=np.intp)
            track_views = self._views[slots] if cfg.shape_weight > 0.0 else None
            if cfg.motion_prediction == "off":
                track_boxes = self._boxes[slots]
            else:
                track_boxes = boxes_to_array(
                    [predict_box(t, frame, cfg) for t in candidates]
                )
            cost = build_cost_matrix(
                candidates, detections, cfg, track_views=track_views, track_boxes=track_boxes
            )
            result = gate(solve_assignment(cost), cost, cfg.gate)
        else:
            result = AssignmentResult(
                (), tuple(range(len(candidates))), tuple(range(len(detections)))
            )

        for r, c in result.matches:
            t = candidates[r]
            det = detections[c]
            if t.status == "lost":
                t.close_run()
                events.append(TrackEvent(frame, "rematch", t.track_id))
            if cfg.motion_prediction == "constant-velocity":
                dt = frame - t.last_seen_frame
                prev = np.asarray(t.last_box.center)
                t.velocity = (np.asarray(det.box.center) - prev) / dt
            t.status = "active"
            t.last_box = det.box
            slot = t.slot
            self._views[slot] = _ema_views(
                self._views[slot], det.descriptor.views, cfg.ema_alpha
            )
            self._boxes[slot, :3] = det.box.center
            self._boxes[slot, 3:] = det.box.extents
            t.last_seen_frame = frame
            t.run_states.append((frame, det.box))
            t.run_descriptors.append(det.descriptor)

        for r in result.unmatched_tracks:
            t = candidates[r]
            if t.status == "active":
                t.status = "lost"
                events.append(TrackEvent(frame, "lost", t.track_id))

        for c in result.unmatched_detections:
            det = detections[c]
            t = Track(
                track_id=self._next_id,
                status="active",
                last_box=det.box,
                descriptor=det.descriptor,
                last_seen_frame=frame,
                run_states=[(frame, det.box)],
                run_descriptors=[det.descriptor],
            )
            self._alloc_slot(t, det)
            self._next_id += 1
            self.tracks.append(t)
            events.append(TrackEvent(frame, "spawn", t.track_id))

        return events

    def finish(self) -> List[Tracklet]:
        """Close all open runs and emit the final tracklet set.

        Tracks whose total observation count is below min_tracklet_len are
        dropped whole (all their runs) as clutter; fragments of longer
        tracks are kept regardless of fragment length, so no detection of a
        surviving track is ever silently lost. Tracklets are sorted by
        (begin_frame, end_frame, source track id) and renumbered from 1.
        """
        for t in self.tracks:
            t.close_run()
            self._release_slot(t)
            self._finished.append(t)
        self.tracks = []

        raw: List[Tuple[int, List[Tuple[int, BoundingBox3D]], List[MultiViewDescriptor]]] = []
        for t in self._finished:
            if t.total_observations() < self.cfg.min_tracklet_len:
                continue
            for states, descs in t.closed_runs:
                raw.append((t.track_id, states, descs))
        raw.sort(key=lambda item: (item[1][0][0], item[1][-1][0], item[0]))
        self._finished = []
        return [
            Tracklet(
                tracklet_id=i + 1,
                states=tuple(states),
                descriptors=tuple(descs),
                source_track_id=tid,
            )
            for i, (tid, states, descs) in enumerate(raw)
        ]


def run_sequence(
    frames: Iterable[Tuple[int, Sequence[Detection]]],
    cfg: Optional[AssociationConfig] = None,
) -> List[Tracklet]:
    """Track a whole sequence of (frame_index, detections) pairs.

    Deterministic: identical inputs and config yield identical tracklets.
    """
    tracker = Tracker(cfg)
    for frame, dets in frames:
        tracker.step(frame, dets)
    return tracker.finish()
