"""Cost assembly, gating, and the online track lifecycle."""

from __future__ import annotations

import numpy as np
import pytest

from geotrack.association import (
    Track,
    Tracker,
    build_cost_matrix,
    predict_box,
    run_sequence,
)
from geotrack.features import ema_update, multiview_distance
from geotrack.geometry import spatial_cost
from geotrack.model import (
    AssociationConfig,
    BoundingBox3D,
    Detection,
    MultiViewDescriptor,
    NUM_VIEWS,
)

from conftest import axis_descriptor, make_detection, person_box, random_descriptor


def tilted_descriptor(dim=4):
    """Unit views at cosine 0.8 from the first axis."""
    views = np.zeros((NUM_VIEWS, dim))
    views[:, 0] = 0.8
    views[:, 1] = 0.6
    return MultiViewDescriptor(views)


def standalone_track(box, descriptor, frame=0, status="active"):
    return Track(
        track_id=1,
        status=status,
        last_box=box,
        descriptor=descriptor,
        last_seen_frame=frame,
    )


# ---------------------------------------------------------------------------
# Cost matrix


def test_cost_hand_example():
    # Shape distance 0.2, GIoU 1/3, lambda 0.5 -> 0.5*0.2 + 0.5*(1 - 1/3)/2.
    track = standalone_track(
        BoundingBox3D((0.5, 0.5, 0.5), (1.0, 1.0, 1.0)), axis_descriptor(0, 4), frame=4
    )
    det = Detection(
        frame=5, box=BoundingBox3D((1.0, 0.5, 0.5), (1.0, 1.0, 1.0)),
        descriptor=tilted_descriptor(),
    )
    cfg = AssociationConfig(shape_weight=0.5)
    cost = build_cost_matrix([track], [det], cfg)
    assert cost.shape == (1, 1)
    assert cost[0, 0] == pytest.approx(4.0 / 15.0, abs=1e-9)
    assert round(float(cost[0, 0]), 4) == 0.2667


def test_cost_weight_degeneracies(rng):
    box_t = person_box(0.0)
    box_d = person_box(0.4)
    det = Detection(frame=1, box=box_d, descriptor=random_descriptor(rng))
    det2 = Detection(frame=1, box=box_d, descriptor=random_descriptor(rng))

    # lambda = 0: the descriptor must not influence the cost at all.
    cfg0 = AssociationConfig(shape_weight=0.0)
    t = standalone_track(box_t, random_descriptor(rng))
    assert np.array_equal(
        build_cost_matrix([t], [det], cfg0), build_cost_matrix([t], [det2], cfg0)
    )

    # lambda = 1: the boxes must not influence the cost at all.
    cfg1 = AssociationConfig(shape_weight=1.0)
    t2 = standalone_track(box_t, det.descriptor)
    far = Detection(frame=1, box=person_box(99.0), descriptor=det.descriptor)
    near = Detection(frame=1, box=box_d, descriptor=det.descriptor)
    assert np.array_equal(
        build_cost_matrix([t2], [near], cfg1), build_cost_matrix([t2], [far], cfg1)
    )


def test_cost_identical_pair_is_zero(rng):
    d = random_descriptor(rng)
    box = person_box(1.0)
    t = standalone_track(box, d)
    det = Detection(frame=1, box=box, descriptor=d)
    cost = build_cost_matrix([t], [det], AssociationConfig())
    assert cost[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_stale_lost_rows_fall_back_to_shape(rng):
    cfg = AssociationConfig(shape_weight=0.5, lost_spatial_horizon=5)
    d_track = random_descriptor(rng)
    d_det = random_descriptor(rng)
    # Lost long ago, far away: spatial term would dominate if present.
    t = standalone_track(person_box(0.0), d_track, frame=0, status="lost")
    det = Detection(frame=20, box=person_box(8.0), descriptor=d_det)
    cost = build_cost_matrix([t], [det], cfg)
    assert cost[0, 0] == pytest.approx(
        multiview_distance(d_track, d_det, cfg.view_compare_mode), abs=1e-12
    )
    # A recently lost track keeps the blended cost.
    recent = standalone_track(person_box(0.0), d_track, frame=16, status="lost")
    blended = build_cost_matrix([recent], [det], cfg)
    expected = 0.5 * multiview_distance(d_track, d_det, cfg.view_compare_mode) + (
        0.5 * spatial_cost(recent.last_box, det.box)
    )
    assert blended[0, 0] == pytest.approx(expected, abs=1e-12)
    # With lambda = 0 there is no shape arm to fall back to.
    cost0 = build_cost_matrix([t], [det], AssociationConfig(shape_weight=0.0))
    same_box = standalone_track(person_box(0.0), random_descriptor(rng), frame=0)
    ref = build_cost_matrix([same_box], [det], AssociationConfig(shape_weight=0.0))
    assert np.array_equal(cost0, ref)


def test_cost_rejects_mixed_frames(rng):
    t = standalone_track(person_box(0.0), random_descriptor(rng))
    dets = [make_detection(3, person_box(0.0)), make_detection(4, person_box(1.0))]
    with pytest.raises(ValueError, match="share a frame"):
        build_cost_matrix([t], dets, AssociationConfig())


def test_cost_empty_sides(rng):
    t = standalone_track(person_box(0.0), random_descriptor(rng))
    assert build_cost_matrix([], [], AssociationConfig()).shape == (0, 0)
    assert build_cost_matrix([t], [], AssociationConfig()).shape == (1, 0)


# ---------------------------------------------------------------------------
# Track bookkeeping


def test_gap_counts_whole_missed_frames(rng):
    t = standalone_track(person_box(0.0), random_descriptor(rng), frame=10)
    assert t.gap(11) == 0
    assert t.gap(12) == 1
    assert t.gap(41) == 30


def test_predict_box_modes(rng):
    t = standalone_track(person_box(0.0), random_descriptor(rng), frame=1)
    t.velocity = np.array([1.0, 0.5, 0.0])
    off = AssociationConfig(motion_prediction="off")
    cv = AssociationConfig(motion_prediction="constant-velocity")
    assert predict_box(t, 3, off) is t.last_box
    predicted = predict_box(t, 3, cv)
    assert predicted.center == pytest.approx((2.0, 1.0, t.last_box.center[2]))
    assert predicted.extents == t.last_box.extents
    t.velocity = None
    assert predict_box(t, 3, cv) is t.last_box


# ---------------------------------------------------------------------------
# Lifecycle


def run_frames(tracker, frames):
    events = []
    for f, dets in frames:
        events.extend(tracker.step(f, dets))
    return events


def test_lifecycle_events_and_fragmentation():
    cfg = AssociationConfig(
        shape_weight=1.0, gate=0.5, max_lost_frames=2, min_tracklet_len=1
    )
    tracker = Tracker(cfg)
    frames = [
        (0, [make_detection(0, person_box(0.0))]),   # spawn
        (1, [make_detection(1, person_box(0.1))]),   # match
        (2, []),                                      # lost
        (3, [make_detection(3, person_box(0.2))]),   # rematch (gap 1 <= 2)
        (4, []),                                      # lost again
        (5, []),
        (6, []),                                      # gap 2, still within budget
        (7, []),                                      # gap 3 > 2 -> retire
    ]
    events = run_frames(tracker, frames)
    kinds = [(e.frame, e.kind) for e in events]
    assert kinds == [(0, "spawn"), (2, "lost"), (3, "rematch"), (4, "lost"), (7, "retire")]
    assert all(e.track_id == 1 for e in events)

    tracklets = tracker.finish()
    assert [(t.begin_frame, t.end_frame) for t in tracklets] == [(0, 1), (3, 3)]
    assert [t.tracklet_id for t in tracklets] == [1, 2]
    assert all(t.source_track_id == 1 for t in tracklets)


def test_absence_beyond_budget_splits_into_two_tracklets():
    # Absence spanning frames 50..120 with a 30-frame budget cannot be
    # bridged online: the second sighting opens a fresh track.
    cfg = AssociationConfig(shape_weight=0.5, max_lost_frames=30)
    tracker = Tracker(cfg)
    for f in range(200):
        dets = []
        if not (50 <= f <= 120):
            dets = [make_detection(f, person_box(1.0 + 0.002 * f))]
        tracker.step(f, dets)
    tracklets = tracker.finish()
    assert [(t.begin_frame, t.end_frame) for t in tracklets] == [(0, 49), (121, 199)]
    assert tracklets[0].source_track_id != tracklets[1].source_track_id


def test_absence_within_budget_rematches_same_track():
    # A 10-frame absence with max_lost_frames = 10 is re-matched (the budget
    # is inclusive), closing the first run and opening a second one on the
    # same track.
    cfg = AssociationConfig(shape_weight=0.5, max_lost_frames=10)
    tracker = Tracker(cfg)
    events = []
    for f in range(100):
        dets = []
        if not (50 <= f <= 59):
            dets = [make_detection(f, person_box(1.0))]
        events.extend(tracker.step(f, dets))
    assert [(e.frame, e.kind) for e in events] == [
        (0, "spawn"), (50, "lost"), (60, "rematch")
    ]
    tracklets = tracker.finish()
    assert [(t.begin_frame, t.end_frame) for t in tracklets] == [(0, 49), (60, 99)]
    assert tracklets[0].source_track_id == tracklets[1].source_track_id


def test_clean_sequence_yields_single_tracklet():
    tracker = Tracker(AssociationConfig())
    for f in range(30):
        tracker.step(f, [make_detection(f, person_box(0.05 * f))])
    tracklets = tracker.finish()
    assert len(tracklets) == 1
    t = tracklets[0]
    assert (t.begin_frame, t.end_frame, len(t)) == (0, 29, 30)
    assert [f for f, _ in t.states] == list(range(30))


def test_every_detection_lands_in_exactly_one_tracklet(rng):
    # Conservation: with no minimum length, states across all tracklets
    # biject with the detections fed in.
    cfg = AssociationConfig(min_tracklet_len=1, gate=0.4)
    tracker = Tracker(cfg)
    fed = 0
    for f in range(60):
        dets = []
        for _ in range(int(rng.integers(0, 4))):
            dets.append(
                Detection(
                    frame=f,
                    box=person_box(float(rng.uniform(0, 10)), float(rng.uniform(0, 8))),
                    descriptor=random_descriptor(rng),
                )
            )
        fed += len(dets)
        tracker.step(f, dets)
    tracklets = tracker.finish()
    assert sum(len(t) for t in tracklets) == fed


def test_min_tracklet_len_filters_whole_tracks():
    # A track totalling 4 observations in two 2-frame runs survives a
    # min length of 4 (the rule applies to the whole track), while a
    # single-hit clutter track is dropped.
    cfg = AssociationConfig(
        shape_weight=1.0, gate=0.3, max_lost_frames=20, min_tracklet_len=4
    )
    tracker = Tracker(cfg)
    a = axis_descriptor(0)
    clutter = axis_descriptor(1)
    schedule = {
        0: [Detection(frame=0, box=person_box(0.0), descriptor=a)],
        1: [Detection(frame=1, box=person_box(0.0), descriptor=a)],
        10: [Detection(frame=10, box=person_box(0.0), descriptor=a)],
        11: [
            Detection(frame=11, box=person_box(0.0), descriptor=a),
            Detection(frame=11, box=person_box(5.0), descriptor=clutter),
        ],
    }
    for f in range(12):
        tracker.step(f, schedule.get(f, []))
    tracklets = tracker.finish()
    assert [(t.begin_frame, t.end_frame) for t in tracklets] == [(0, 1), (10, 11)]
    src = {t.source_track_id for t in tracklets}
    assert len(src) == 1


def test_ema_state_matches_reference_update(rng):
    cfg = AssociationConfig(ema_alpha=0.7)
    d0, d1, d2 = (random_descriptor(rng) for _ in range(3))
    tracker = Tracker(cfg)
    tracker.step(0, [Detection(frame=0, box=person_box(0.0), descriptor=d0)])
    tracker.step(1, [Detection(frame=1, box=person_box(0.0), descriptor=d1)])
    tracker.step(2, [Detection(frame=2, box=person_box(0.0), descriptor=d2)])
    expected = ema_update(ema_update(d0, d1, 0.7), d2, 0.7)
    assert np.array_equal(tracker.tracks[0].descriptor.views, expected.views)


def test_constant_velocity_tracks_accelerating_motion():
    # Quadratic motion: the per-frame hop grows past what an identity
    # prediction tolerates, while the one-frame velocity extrapolation
    # stays within 0.02 m of the truth.
    def frames_for(tracker):
        for f in range(40):
            tracker.step(f, [make_detection(f, person_box(0.01 * f * f))])
        return tracker.finish()

    cv = frames_for(
        Tracker(
            AssociationConfig(
                shape_weight=0.0,
                gate=0.35,
                motion_prediction="constant-velocity",
                min_tracklet_len=1,
            )
        )
    )
    assert len(cv) == 1
    assert len(cv[0]) == 40

    off = frames_for(
        Tracker(AssociationConfig(shape_weight=0.0, gate=0.35, min_tracklet_len=1))
    )
    assert len(off) > 1


def test_out_of_order_and_mismatched_frames_raise():
    tracker = Tracker(AssociationConfig())
    tracker.step(5, [make_detection(5, person_box(0.0))])
    with pytest.raises(ValueError, match="out-of-order"):
        tracker.step(5, [])
    with pytest.raises(ValueError, match="out-of-order"):
        tracker.step(4, [])
    with pytest.raises(ValueError, match="disagrees"):
        tracker.step(6, [make_detection(7, person_box(0.0))])


def test_descriptor_dimension_change_raises(rng):
    tracker = Tracker(AssociationConfig(shape_weight=0.0))
    tracker.step(0, [make_detection(0, person_box(0.0), dim=16)])
    with pytest.raises(ValueError, match="dimension changed"):
        tracker.step(1, [make_detection(1, person_box(9.0), dim=8)])


def test_slot_buffer_growth_beyond_initial_capacity(rng):
    # 70 simultaneous far-apart agents force the 64-slot buffer to double.
    cfg = AssociationConfig(shape_weight=0.0, gate=0.3, min_tracklet_len=3)
    tracker = Tracker(cfg)
    for f in range(3):
        dets = [
            Detection(
                frame=f,
                box=person_box(3.0 * i, 0.0),
                descriptor=random_descriptor(rng),
            )
            for i in range(70)
        ]
        tracker.step(f, dets)
    tracklets = tracker.finish()
    assert len(tracklets) == 70
    assert all(len(t) == 3 for t in tracklets)


# ---------------------------------------------------------------------------
# run_sequence


def crossing_frames(rng, n_frames=50, noise=0.0):
    d_a, d_b = axis_descriptor(0), axis_descriptor(1)
    frames = []
    for f in range(n_frames):
        x = 0.08 * f
        frames.append(
            (
                f,
                [
                    Detection(frame=f, box=person_box(x, 0.0), descriptor=d_a),
                    Detection(frame=f, box=person_box(4.0 - x, 3.0), descriptor=d_b),
                ],
            )
        )
    return frames


def test_run_sequence_is_deterministic(rng):
    frames = crossing_frames(rng)
    a = run_sequence(frames, AssociationConfig())
    b = run_sequence(frames, AssociationConfig())
    assert len(a) == len(b) == 2
    for ta, tb in zip(a, b):
        assert ta.tracklet_id == tb.tracklet_id
        assert ta.source_track_id == tb.source_track_id
        assert ta.states == tb.states
        for da, db in zip(ta.descriptors, tb.descriptors):
            assert np.array_equal(da.views, db.views)


def test_shape_only_runs_ignore_box_rescaling(rng):
    frames = crossing_frames(rng)
    scaled = [
        (
            f,
            [
                Detection(
                    frame=f,
                    box=BoundingBox3D(
                        tuple(3.0 * c for c in d.box.center),
                        tuple(3.0 * e for e in d.box.extents),
                    ),
                    descriptor=d.descriptor,
                )
                for d in dets
            ],
        )
        for f, dets in frames
    ]
    cfg = AssociationConfig(shape_weight=1.0)
    a = run_sequence(frames, cfg)
    b = run_sequence(scaled, cfg)
    assert [(t.begin_frame, t.end_frame, t.source_track_id) for t in a] == [
        (t.begin_frame, t.end_frame, t.source_track_id) for t in b
    ]
    assert [[f for f, _ in t.states] for t in a] == [[f for f, _ in t.states] for t in b]


def test_spatial_only_runs_ignore_descriptor_replacement(rng):
    frames = crossing_frames(rng)
    swapped = [
        (
            f,
            [
                Detection(frame=f, box=d.box, descriptor=random_descriptor(rng))
                for d in dets
            ],
        )
        for f, dets in frames
    ]
    cfg = AssociationConfig(shape_weight=0.0)
    a = run_sequence(frames, cfg)
    b = run_sequence(swapped, cfg)
    assert [[f for f, _ in t.states] for t in a] == [[f for f, _ in t.states] for t in b]
    assert [
        [(s[1].center, s[1].extents) for s in t.states] for t in a
    ] == [[(s[1].center, s[1].extents) for s in t.states] for t in b]
