"""Offline trajectory recovery: gallery training, voting, tracklet grouping.

Each tracklet is pooled to a single descriptor (temporal max pooling),
classified against a gallery of enrolled identities, and same-identity
tracklets are merged into one Trajectory per person. The gallery is a set
of per-view linear one-vs-rest SVMs trained by deterministic Pegasos-style
subgradient descent; classification is a majority vote over the 8 views.

Two same-identity tracklets that overlap in time cannot both belong to one
person: the one with the smaller classification margin is reassigned to
its runner-up identity, and excluded (with a conflict record) if it
overlaps there too. Recovery therefore always emits trajectories that
satisfy the non-overlap invariant, and every input tracklet lands in
exactly one trajectory or in the conflict report's excluded set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .features import temporal_max_pool
from .model import MultiViewDescriptor, NUM_VIEWS, Tracklet, Trajectory

logger = logging.getLogger(__name__)

#: Summed decision score below which a descriptor is treated as an
#: un-enrolled identity during recovery.
DEFAULT_SCORE_FLOOR = -0.2


@dataclass(frozen=True)
class GalleryTrainingConfig:
    """Hyper-parameters of the gallery SVM training run.

    The step schedule is eta_t = 1 / (regularization * t) over a global
    step counter t, the classic Pegasos schedule; it is recorded here so a
    serialized model documents how it was produced.
    """

    regularization: float = 1e-3
    epochs: int = 200
    seed: int = 0
    step_schedule: str = "1/(reg*t)"

    def __post_init__(self) -> None:
        if self.regularization <= 0:
            raise ValueError("regularization must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.step_schedule != "1/(reg*t)":
            raise ValueError(f"unsupported step schedule {self.step_schedule!r}")


@dataclass(frozen=True)
class GalleryModel:
    """Per-view one-vs-rest linear classifiers over K enrolled identities.

    weights has shape (8, K, C) and biases (8, K); the identity ordering is
    shared by all views. Decision score of identity k in view v for a unit
    descriptor row x_v is weights[v, k] . x_v + biases[v, k].
    """

    identities: Tuple[str, ...]
    weights: np.ndarray
    biases: np.ndarray
    training_config: GalleryTrainingConfig
    training_accuracy: float = float("nan")

    def __post_init__(self) -> None:
        if len(self.identities) < 2:
            raise ValueError("gallery needs at least 2 identities")
        if len(set(self.identities)) != len(self.identities):
            raise ValueError("gallery identities must be unique")
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.biases, dtype=np.float64)
        k = len(self.identities)
        if w.ndim != 3 or w.shape[0] != NUM_VIEWS or w.shape[1] != k:
            raise ValueError(f"weights must have shape ({NUM_VIEWS}, {k}, C), got {w.shape}")
        if b.shape != (NUM_VIEWS, k):
            raise ValueError(f"biases must have shape ({NUM_VIEWS}, {k}), got {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("gallery weights must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)
        object.__setattr__(self, "identities", tuple(self.identities))

    @property
    def feature_dim(self) -> int:
        return int(self.weights.shape[2])

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "identities": list(self.identities),
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "training_config": {
                "regularization": self.training_config.regularization,
                "epochs": self.training_config.epochs,
                "seed": self.training_config.seed,
                "step_schedule": self.training_config.step_schedule,
            },
            "training_accuracy": self.training_accuracy,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GalleryModel":
        tc = data["training_config"]
        return cls(
            identities=tuple(data["identities"]),
            weights=np.array(data["weights"], dtype=np.float64),
            biases=np.array(data["biases"], dtype=np.float64),
            training_config=GalleryTrainingConfig(
                regularization=tc["regularization"],
                epochs=tc["epochs"],
                seed=tc["seed"],
                step_schedule=tc["step_schedule"],
            ),
            training_accuracy=float(data.get("training_accuracy", float("nan"))),
        )


def train_gallery(
    labeled: Sequence[Tuple[MultiViewDescriptor, str]],
    config: Optional[GalleryTrainingConfig] = None,
) -> GalleryModel:
    """Train per-view one-vs-rest linear SVMs on labeled descriptors.

    Training is bit-deterministic: samples are first brought into a
    canonical order (identity label, then descriptor bytes), so the same
    sample set yields the same model regardless of input order; epoch
    shuffles come from a Philox generator seeded by the config.

    Raises:
        ValueError: fewer than 2 identities, or mixed feature dimensions.
    """
    cfg = config if config is not None else GalleryTrainingConfig()
    if len(labeled) == 0:
        raise ValueError("no training samples")
    dims = {d.dim for d, _ in labeled}
    if len(dims) != 1:
        raise ValueError(f"training descriptors mix feature dimensions: {sorted(dims)}")
    identities = tuple(sorted({ident for _, ident in labeled}))
    if len(identities) < 2:
        raise ValueError("gallery training needs at least 2 identities")

    ordered = sorted(labeled, key=lambda item: (item[1], item[0].views.tobytes()))
    x = np.stack([d.views for d, _ in ordered])  # (n, 8, C)
    index = {ident: i for i, ident in enumerate(identities)}
    k = len(identities)
    n, _, c = x.shape
    y = np.full((n, k), -1.0)
    for i, (_, ident) in enumerate(ordered):
        y[i, index[ident]] = 1.0

    reg = cfg.regularization
    w = np.zeros((NUM_VIEWS, k, c))
    b = np.zeros((NUM_VIEWS, k))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(cfg.seed)])))
    t = 0
    for _ in range(cfg.epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (reg * t)
            xi = x[i]  # (8, C)
            scores = np.einsum("vkc,vc->vk", w, xi) + b
            viol = (y[i][None, :] * scores < 1.0).astype(np.float64) * y[i][None, :]
            w *= 1.0 - 1.0 / t  # (1 - eta*reg) decay of the regularized weights
            w += eta * viol[:, :, None] * xi[:, None, :]
            b += eta * viol

    model = GalleryModel(
        identities=identities, weights=w, biases=b, training_config=cfg
    )
    correct = sum(
        1 for d, ident in ordered if classify_descriptor(model, d).identity == ident
    )
    return GalleryModel(
        identities=identities,
        weights=w,
        biases=b,
        training_config=cfg,
        training_accuracy=correct / n,
    )


@dataclass(frozen=True)
class ClassificationResult:
    """Majority-vote outcome for one descriptor.

    margin is the winner's summed decision score minus the best other
    identity's; total_score is the winner's summed score itself (used for
    the open-set floor). runner_up is the identity that would win if the
    winner were removed.
    """

    identity: str
    vote_count: int
    margin: float
    total_score: float
    runner_up: str


def classify_descriptor(g: GalleryModel, d: MultiViewDescriptor) -> ClassificationResult:
    """Assign an enrolled identity to a descriptor by 8-view majority vote.

    Each view votes for its highest-scoring identity; the winner is the
    most-voted identity, ties broken by larger summed decision score across
    views, then by gallery identity order.
    """
    if d.dim != g.feature_dim:
        raise ValueError(
            f"descriptor dimension {d.dim} does not match gallery {g.feature_dim}"
        )
    scores = np.einsum("vkc,vc->vk", g.weights, d.views) + g.biases  # (8, K)
    votes = np.argmax(scores, axis=1)
    counts = np.bincount(votes, minlength=len(g.identities))
    summed = scores.sum(axis=0)
    # Sort key: most votes, then highest summed score, then identity order.
    order = sorted(
        range(len(g.identities)), key=lambda i: (-counts[i], -summed[i], i)
    )
    win, second = order[0], order[1]
    return ClassificationResult(
        identity=g.identities[win],
        vote_count=int(counts[win]),
        margin=float(summed[win] - summed[second]),
        total_score=float(summed[win]),
        runner_up=g.identities[second],
    )


@dataclass(frozen=True)
class ConflictRecord:
    """How one temporally conflicting tracklet was handled."""

    tracklet_id: int
    identity: str  # identity it originally classified as
    action: str  # "reassigned" | "excluded"
    final_identity: Optional[str]  # None when excluded
    margin: float


@dataclass(frozen=True)
class RecoveryResult:
    trajectories: Tuple[Trajectory, ...]
    conflicts: Tuple[ConflictRecord, ...]
    excluded: Tuple[int, ...]  # tracklet ids left out of every trajectory


def recover_trajectories(
    tracklets: Sequence[Tracklet],
    gallery: GalleryModel,
    score_floor: float = DEFAULT_SCORE_FLOOR,
) -> RecoveryResult:
    """Pool, classify, and group tracklets into per-identity trajectories.

    Tracklets whose winning summed score falls below score_floor are
    treated as un-enrolled people: each becomes its own trajectory labeled
    "unknown#<tracklet id>". Within each identity, overlapping tracklets
    are resolved by keeping the larger classification margin; the loser is
    reassigned to its runner-up identity if it fits there, else excluded.
    """
    if len(tracklets) == 0:
        raise ValueError("recovery needs at least one tracklet")
    labels: Dict[str, List[Tuple[Tracklet, ClassificationResult]]] = {}
    for t in tracklets:
        res = classify_descriptor(gallery, temporal_max_pool(t.descriptors))
        if res.total_score < score_floor:
            label = f"unknown#{t.tracklet_id}"
        else:
            label = res.identity
        labels.setdefault(label, []).append((t, res))

    conflicts: List[ConflictRecord] = []
    accepted: Dict[str, List[Tracklet]] = {}
    losers: List[Tuple[Tracklet, ClassificationResult, str]] = []
    for label in sorted(labels):
        group = sorted(
            labels[label], key=lambda item: (-item[1].margin, item[0].tracklet_id)
        )
        kept: List[Tracklet] = []
        for t, res in group:
            if any(t.overlaps(other) for other in kept):
                losers.append((t, res, label))
            else:
                kept.append(t)
        accepted[label] = kept

    for t, res, label in sorted(losers, key=lambda item: item[0].tracklet_id):
        target = res.runner_up if label == res.identity else None
        if target is not None and not any(
            t.overlaps(other) for other in accepted.get(target, [])
        ):
            accepted.setdefault(target, []).append(t)
            conflicts.append(
                ConflictRecord(t.tracklet_id, label, "reassigned", target, res.margin)
            )
            logger.info(
                "tracklet %d conflicts in %r, reassigned to %r", t.tracklet_id, label, target
            )
        else:
            conflicts.append(
                ConflictRecord(t.tracklet_id, label, "excluded", None, res.margin)
            )
            logger.warning("tracklet %d conflicts in %r, excluded", t.tracklet_id, label)

    enrolled = [i for i in gallery.identities if accepted.get(i)]
    unknown = sorted(label for label in accepted if label.startswith("unknown#") and accepted[label])
    trajectories = tuple(
        Trajectory(identity=label, tracklets=tuple(accepted[label]))
        for label in (*enrolled, *unknown)
    )
    covered = {t.tracklet_id for traj in trajectories for t in traj.tracklets}
    excluded = tuple(sorted(t.tracklet_id for t in tracklets if t.tracklet_id not in covered))
    return RecoveryResult(trajectories=trajectories, conflicts=tuple(conflicts), excluded=excluded)
