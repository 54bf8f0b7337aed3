"""Tracking evaluation: HOTA (restricted alpha range), CLEAR, IDF1, Counting.

All metrics compare ground-truth identities against predicted track ids per
frame using 3D IoU as the similarity. Scores are accumulated as exact
rationals (fractions.Fraction) over integer match counts, so results are
reproducible to the last bit and can be checked against brute-force
evaluators.

Matching conventions (shared by the per-frame HOTA and CLEAR matchers):
  * a pair is eligible at level alpha iff IoU >= alpha - 1e-12;
  * the matcher maximizes the number of eligible matches first, then the
    summed secondary score of the matched eligible pairs; implemented as a
    minimum-cost assignment over cost = -(BIG * eligible + score * eligible)
    with BIG = min(rows, cols) + 1, which dominates any possible score sum;
  * remaining ties resolve to the lexicographically smallest (row, col)
    pair list, inherited from solve_assignment.

HOTA follows the two-pass structure of the reference implementation: a
first pass accumulates, per (gt id, pred id), the sum over frames of
IoU / (rowsum + colsum - IoU) into a global alignment score; the second
pass matches each frame per alpha with secondary score = alignment * IoU.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .association import solve_assignment
from .geometry import boxes_to_array, iou3d_matrix
from .model import BoundingBox3D, Tracklet, Trajectory

#: Localization thresholds 0.05, 0.10, ..., 0.50.
DEFAULT_ALPHAS: Tuple[float, ...] = tuple(i / 20 for i in range(1, 11))

#: Slack applied to eligibility comparisons so boxes constructed to sit
#: exactly at a threshold are not lost to float rounding.
ALPHA_EPS = 1e-12

Item = Tuple[int, str, BoundingBox3D]


class _FrameSide:
    """One side (GT or predictions) of a sequence, indexed per frame."""

    def __init__(self, items: Sequence[Item], side: str) -> None:
        ids: List[str] = []
        index: Dict[str, int] = {}
        per_frame: Dict[int, Tuple[List[int], List[BoundingBox3D]]] = {}
        for frame, ident, box in items:
            frame = int(frame)
            if frame < 0:
                raise ValueError(f"{side} frame index must be non-negative, got {frame}")
            if not ident:
                raise ValueError(f"{side} ids must be non-empty strings")
            if not isinstance(box, BoundingBox3D):
                raise TypeError(f"{side} boxes must be BoundingBox3D")
            if ident not in index:
                index[ident] = len(ids)
                ids.append(ident)
            slot = per_frame.setdefault(frame, ([], []))
            if index[ident] in slot[0]:
                raise ValueError(f"{side} id {ident!r} appears twice in frame {frame}")
            slot[0].append(index[ident])
            slot[1].append(box)
        self.ids = ids
        self.count = len(items)
        self.frames = {
            f: (np.array(idx, dtype=np.intp), boxes_to_array(bx))
            for f, (idx, bx) in per_frame.items()
        }
        # Total frames each id is present in.
        self.id_counts = np.zeros(len(ids), dtype=np.int64)
        for idx, _ in self.frames.values():
            self.id_counts[idx] += 1


class EvalSequence:
    """Paired ground-truth and predicted (frame, id, box) items.

    Ids are opaque strings; within one frame each id may appear at most
    once per side. Similarity is 3D IoU throughout.
    """

    def __init__(self, ground_truth: Sequence[Item], predictions: Sequence[Item]) -> None:
        self.gt = _FrameSide(ground_truth, "ground-truth")
        self.pred = _FrameSide(predictions, "prediction")
        self.frames = sorted(set(self.gt.frames) | set(self.pred.frames))

    def frame_sides(self, frame: int):
        """(gt_ids, gt_boxes, pred_ids, pred_boxes) for one frame; empty arrays when absent."""
        empty_i = np.empty(0, dtype=np.intp)
        empty_b = np.empty((0, 6), dtype=np.float64)
        gi, gb = self.gt.frames.get(frame, (empty_i, empty_b))
        pi, pb = self.pred.frames.get(frame, (empty_i, empty_b))
        return gi, gb, pi, pb


def predictions_from_tracklets(
    tracklets: Sequence[Tracklet], by: str = "track"
) -> List[Item]:
    """Flatten tracklets into prediction items.

    by="track" labels states with the originating online track id (so
    re-matched fragments of one track count as one identity); by="tracklet"
    treats every tracklet as its own identity.
    """
    if by not in ("track", "tracklet"):
        raise ValueError(f"by must be 'track' or 'tracklet', got {by!r}")
    items: List[Item] = []
    for t in tracklets:
        if by == "track" and t.source_track_id is not None:
            label = f"track-{t.source_track_id}"
        else:
            label = f"tracklet-{t.tracklet_id}"
        items.extend((frame, label, box) for frame, box in t.states)
    return items


def predictions_from_trajectories(trajectories: Sequence[Trajectory]) -> List[Item]:
    """Flatten recovered trajectories into prediction items labeled by identity."""
    items: List[Item] = []
    for traj in trajectories:
        for t in traj.tracklets:
            items.extend((frame, traj.identity, box) for frame, box in t.states)
    return items


def match_frame(
    gt_boxes: np.ndarray,
    pred_boxes: np.ndarray,
    alpha: float,
    secondary: Optional[np.ndarray] = None,
) -> Tuple[Tuple[int, int], ...]:
    """One-to-one per-frame matching at localization threshold alpha.

    Returns (gt index, pred index) pairs; every returned pair has
    IoU >= alpha - 1e-12. Maximizes match count, then the summed secondary
    score over matched pairs (IoU itself when secondary is None).
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    sim = iou3d_matrix(gt_boxes, pred_boxes)
    if secondary is None:
        secondary = sim
    return _match_eligible(sim >= alpha - ALPHA_EPS, secondary)


def _match_eligible(eligible: np.ndarray, score: np.ndarray) -> Tuple[Tuple[int, int], ...]:
    """Max-count, then max-score matching over an eligibility mask."""
    if eligible.size == 0 or not eligible.any():
        return ()
    big = min(eligible.shape) + 1.0
    cost = -(big * eligible + score * eligible)
    result = solve_assignment(cost)
    return tuple((r, c) for r, c in result.matches if eligible[r, c])


@dataclass(frozen=True)
class HotaResult:
    """HOTA and its detection/association parts, averaged over alphas."""

    hota: float
    det_a: float
    ass_a: float
    alphas: Tuple[float, ...]
    hota_per_alpha: Tuple[float, ...]
    det_a_per_alpha: Tuple[float, ...]
    ass_a_per_alpha: Tuple[float, ...]
    empty_gt: bool = False


def hota(seq: EvalSequence, alphas: Sequence[float] = DEFAULT_ALPHAS) -> HotaResult:
    """HOTA over the given localization thresholds (mean of per-alpha scores).

    Per alpha: DetA = TP/(TP+FN+FP); each TP pair (g, p) carries an
    association score A = m/(gc + pc - m) where m is the number of frames
    (g, p) were matched together at this alpha and gc, pc the ids' total
    frame counts; AssA is the mean of A over TPs; HOTA_alpha is the
    geometric mean sqrt(DetA * AssA). An empty ground truth yields zeros
    with empty_gt set.
    """
    alphas = tuple(float(a) for a in alphas)
    if len(alphas) == 0:
        raise ValueError("need at least one alpha")
    for a in alphas:
        if not (0.0 < a < 1.0):
            raise ValueError(f"alpha must be in (0, 1), got {a}")
    n_gt_ids = len(seq.gt.ids)
    n_pr_ids = len(seq.pred.ids)
    if seq.gt.count == 0:
        zeros = tuple(0.0 for _ in alphas)
        return HotaResult(0.0, 0.0, 0.0, alphas, zeros, zeros, zeros, empty_gt=True)

    # Pass 1: global alignment scores between every (gt id, pred id).
    potential = np.zeros((n_gt_ids, n_pr_ids), dtype=np.float64)
    sims: Dict[int, np.ndarray] = {}
    for frame in seq.frames:
        gi, gb, pi, pb = seq.frame_sides(frame)
        if len(gi) == 0 or len(pi) == 0:
            continue
        sim = iou3d_matrix(gb, pb)
        sims[frame] = sim
        denom = sim.sum(axis=0, keepdims=True) + sim.sum(axis=1, keepdims=True) - sim
        ratio = np.divide(sim, denom, out=np.zeros_like(sim), where=sim > ALPHA_EPS)
        potential[np.ix_(gi, pi)] += ratio
    gc = seq.gt.id_counts
    pc = seq.pred.id_counts
    if n_gt_ids and n_pr_ids:
        align = potential / (gc[:, None] + pc[None, :] - potential)
    else:
        align = np.zeros((n_gt_ids, n_pr_ids))

    # Pass 2: per-alpha matching; identical eligibility masks within one
    # frame are matched once and reused across alphas.
    k = len(alphas)
    tp = [0] * k
    matches = [np.zeros((n_gt_ids, n_pr_ids), dtype=np.int64) for _ in range(k)]
    for frame in seq.frames:
        gi, gb, pi, pb = seq.frame_sides(frame)
        if len(gi) == 0 or len(pi) == 0:
            continue
        sim = sims[frame]
        score = align[np.ix_(gi, pi)] * sim
        cache: Dict[bytes, Tuple[Tuple[int, int], ...]] = {}
        for ai, a in enumerate(alphas):
            eligible = sim >= a - ALPHA_EPS
            key = eligible.tobytes()
            pairs = cache.get(key)
            if pairs is None:
                pairs = _match_eligible(eligible, score)
                cache[key] = pairs
            tp[ai] += len(pairs)
            for r, c in pairs:
                matches[ai][gi[r], pi[c]] += 1

    det_pa: List[float] = []
    ass_pa: List[float] = []
    hota_pa: List[float] = []
    for ai in range(k):
        tp_a = tp[ai]
        fn_a = seq.gt.count - tp_a
        fp_a = seq.pred.count - tp_a
        det = Fraction(tp_a, tp_a + fn_a + fp_a) if tp_a + fn_a + fp_a else Fraction(0)
        if tp_a:
            acc = Fraction(0)
            g_idx, p_idx = np.nonzero(matches[ai])
            for g, p in zip(g_idx.tolist(), p_idx.tolist()):
                m = int(matches[ai][g, p])
                acc += m * Fraction(m, int(gc[g]) + int(pc[p]) - m)
            ass = acc / tp_a
        else:
            ass = Fraction(0)
        det_pa.append(float(det))
        ass_pa.append(float(ass))
        hota_pa.append(math.sqrt(float(det * ass)))
    return HotaResult(
        hota=math.fsum(hota_pa) / k,
        det_a=math.fsum(det_pa) / k,
        ass_a=math.fsum(ass_pa) / k,
        alphas=alphas,
        hota_per_alpha=tuple(hota_pa),
        det_a_per_alpha=tuple(det_pa),
        ass_a_per_alpha=tuple(ass_pa),
    )


@dataclass(frozen=True)
class ClearResult:
    """CLEAR counts; MOTA is unclamped and may be negative."""

    mota: float
    fp: int
    fn: int
    idsw: int
    num_gt: int


def clear_mot(seq: EvalSequence, iou_threshold: float = 0.5) -> ClearResult:
    """CLEAR evaluation: MOTA = 1 - (FP + FN + IDSW) / num_gt.

    Per frame, pairs matched in the immediately preceding frame are kept
    when both reappear with IoU >= threshold (carry-over preference); the
    remainder is matched maximizing count then summed IoU. An identity
    switch is counted whenever a ground-truth id matches a different
    predicted id than the last one it was ever matched to.
    """
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    fp = fn = idsw = 0
    prev_frame: Dict[int, int] = {}  # gt id index -> pred id index, previous frame only
    last_known: Dict[int, int] = {}  # gt id index -> pred id index, persists through gaps
    for frame in seq.frames:
        gi, gb, pi, pb = seq.frame_sides(frame)
        if len(gi) == 0 and len(pi) == 0:
            prev_frame = {}
            continue
        sim = iou3d_matrix(gb, pb) if len(gi) and len(pi) else np.zeros((len(gi), len(pi)))
        eligible = sim >= iou_threshold - ALPHA_EPS

        matched: List[Tuple[int, int]] = []
        free_g = list(range(len(gi)))
        free_p = list(range(len(pi)))
        pred_pos = {int(p): j for j, p in enumerate(pi)}
        for r in list(free_g):
            want = prev_frame.get(int(gi[r]))
            if want is None or want not in pred_pos:
                continue
            c = pred_pos[want]
            if c in free_p and eligible[r, c]:
                matched.append((r, c))
                free_g.remove(r)
                free_p.remove(c)
        if free_g and free_p:
            rest = _match_eligible(eligible[np.ix_(free_g, free_p)], sim[np.ix_(free_g, free_p)])
            matched.extend((free_g[r], free_p[c]) for r, c in rest)

        fp += len(pi) - len(matched)
        fn += len(gi) - len(matched)
        prev_frame = {}
        for r, c in matched:
            g, p = int(gi[r]), int(pi[c])
            if g in last_known and last_known[g] != p:
                idsw += 1
            last_known[g] = p
            prev_frame[g] = p
    num_gt = seq.gt.count
    mota = float(1 - Fraction(fp + fn + idsw, num_gt)) if num_gt else 0.0
    return ClearResult(mota=mota, fp=fp, fn=fn, idsw=idsw, num_gt=num_gt)


def idf1(seq: EvalSequence, iou_threshold: float = 0.5) -> float:
    """IDF1 over a sequence-global identity matching.

    co_det[g, p] counts frames where ids g and p are both present with
    IoU >= threshold; a maximum-weight bipartite matching over co_det gives
    IDTP, and IDF1 = 2*IDTP / (2*IDTP + IDFP + IDFN).
    """
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    co = _co_detection_counts(seq, iou_threshold)
    idtp = _max_matching_total(co)
    total = seq.gt.count + seq.pred.count
    return float(Fraction(2 * idtp, total)) if total else 0.0


def _co_detection_counts(seq: EvalSequence, iou_threshold: float) -> np.ndarray:
    co = np.zeros((len(seq.gt.ids), len(seq.pred.ids)), dtype=np.int64)
    for frame in seq.frames:
        gi, gb, pi, pb = seq.frame_sides(frame)
        if len(gi) == 0 or len(pi) == 0:
            continue
        sim = iou3d_matrix(gb, pb)
        hits = np.nonzero(sim >= iou_threshold - ALPHA_EPS)
        co[gi[hits[0]], pi[hits[1]]] += 1
    return co


def _max_matching_total(counts: np.ndarray) -> int:
    if counts.size == 0:
        return 0
    result = solve_assignment(-counts.astype(np.float64))
    return int(sum(counts[r, c] for r, c in result.matches))


def counting(seq: EvalSequence) -> Tuple[float, float]:
    """Counting metrics: (% of GT detections emitted, % of GT identities emitted).

    100 * predicted detections / GT detections and 100 * distinct predicted
    ids / distinct GT identities; both may exceed 100.
    """
    if seq.gt.count == 0:
        raise ValueError("counting metrics need a non-empty ground truth")
    pct_dets = float(100 * Fraction(seq.pred.count, seq.gt.count))
    pct_ids = float(100 * Fraction(len(seq.pred.ids), len(seq.gt.ids)))
    return pct_dets, pct_ids


def evaluate(
    seq: EvalSequence,
    metrics: Sequence[str] = ("hota", "clear", "idf1", "count"),
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    iou_threshold: float = 0.5,
) -> dict:
    """Run the selected metric families and collect a plain-dict report."""
    known = {"hota", "clear", "idf1", "count"}
    bad = [m for m in metrics if m not in known]
    if bad:
        raise ValueError(f"unknown metrics: {bad}; valid names are {sorted(known)}")
    out: dict = {}
    if "hota" in metrics:
        h = hota(seq, alphas)
        out["hota"] = {
            "HOTA": h.hota,
            "DetA": h.det_a,
            "AssA": h.ass_a,
            "alphas": list(h.alphas),
            "HOTA_per_alpha": list(h.hota_per_alpha),
            "DetA_per_alpha": list(h.det_a_per_alpha),
            "AssA_per_alpha": list(h.ass_a_per_alpha),
            "empty_gt": h.empty_gt,
        }
    if "clear" in metrics:
        c = clear_mot(seq, iou_threshold)
        out["clear"] = {
            "MOTA": c.mota,
            "FP": c.fp,
            "FN": c.fn,
            "IDSW": c.idsw,
            "num_gt": c.num_gt,
        }
    if "idf1" in metrics:
        out["idf1"] = {"IDF1": idf1(seq, iou_threshold)}
    if "count" in metrics:
        pct_dets, pct_ids = counting(seq)
        out["count"] = {"pct_dets": pct_dets, "pct_ids": pct_ids}
    return out
