"""Core domain types for 3D multi-object tracking with geometric re-identification.

All types here are immutable value objects: once constructed they can be
shared freely between threads. Numeric payloads are float64 numpy arrays
marked read-only, or plain tuples of floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

#: Number of virtual camera viewpoints a descriptor carries.
NUM_VIEWS = 8

#: Default feature dimension per view. A run-level constant: every
#: descriptor in one run must share the same dimension.
DEFAULT_FEATURE_DIM = 128

#: Tolerance for the unit-norm invariant on descriptor views.
UNIT_NORM_TOL = 1e-6

# Rows whose norm is already this close to 1 are left untouched, which makes
# renormalization bitwise idempotent.
_RENORM_SKIP_TOL = 1e-12

Vec3 = Tuple[float, float, float]


def _as_vec3(value: Sequence[float], name: str) -> Vec3:
    vec = tuple(float(v) for v in value)
    if len(vec) != 3:
        raise ValueError(f"{name} must have 3 components, got {len(vec)}")
    if not all(math.isfinite(v) for v in vec):
        raise ValueError(f"{name} must be finite, got {vec}")
    return vec


@dataclass(frozen=True)
class BoundingBox3D:
    """Axis-aligned 3D box: center plus full side lengths, in metres."""

    center: Vec3
    extents: Vec3

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _as_vec3(self.center, "center"))
        extents = _as_vec3(self.extents, "extents")
        if not all(e > 0.0 for e in extents):
            raise ValueError(f"extents must be strictly positive, got {extents}")
        object.__setattr__(self, "extents", extents)

    @property
    def min_corner(self) -> Vec3:
        c, e = self.center, self.extents
        return (c[0] - e[0] / 2.0, c[1] - e[1] / 2.0, c[2] - e[2] / 2.0)

    @property
    def max_corner(self) -> Vec3:
        c, e = self.center, self.extents
        return (c[0] + e[0] / 2.0, c[1] + e[1] / 2.0, c[2] + e[2] / 2.0)


def renormalize_rows(arr: np.ndarray) -> np.ndarray:
    """L2-normalize each row of a float64 array, in place.

    Rows whose norm is within 1e-12 of 1 are skipped so that applying this
    twice is a bitwise no-op. Zero rows raise.
    """
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm view")
    needs = np.abs(norms - 1.0) > _RENORM_SKIP_TOL
    if np.any(needs):
        arr[needs] /= norms[needs, None]
    return arr


@dataclass(frozen=True, eq=False)
class MultiViewDescriptor:
    """A re-identification feature: 8 unit-norm view vectors, shape (8, C).

    Views describe one person's 3D geometry rendered from 8 virtual
    viewpoints arranged in a circle. Each row is L2-normalized so cosine
    similarity reduces to a dot product.
    """

    views: np.ndarray

    def __post_init__(self) -> None:
        views = np.array(self.views, dtype=np.float64)
        if views.ndim != 2 or views.shape[0] != NUM_VIEWS:
            raise ValueError(
                f"descriptor must have shape ({NUM_VIEWS}, C), got {views.shape}"
            )
        if not np.all(np.isfinite(views)):
            raise ValueError("descriptor contains NaN or Inf")
        norms = np.linalg.norm(views, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ValueError(
                "descriptor views must be unit norm (tolerance 1e-6); "
                "use normalize_descriptor for raw features"
            )
        views.setflags(write=False)
        object.__setattr__(self, "views", views)

    @property
    def dim(self) -> int:
        return int(self.views.shape[1])


def normalize_descriptor(raw: Sequence[Sequence[float]]) -> MultiViewDescriptor:
    """Build a MultiViewDescriptor from a raw 8 x C feature array.

    Each view row is L2-normalized; row order is preserved. Rows that are
    already unit norm pass through bit-identically, so the operation is
    idempotent.

    Raises:
        ValueError: on NaN/Inf entries, wrong shape, or a zero row (which
            signals a corrupt feature file).
    """
    arr = np.array(raw, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != NUM_VIEWS:
        raise ValueError(f"raw descriptor must have shape ({NUM_VIEWS}, C), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("descriptor contains NaN or Inf")
    renormalize_rows(arr)
    return MultiViewDescriptor(arr)


@dataclass(frozen=True, eq=False)
class Detection:
    """One per-frame observation: a 3D box plus its multi-view descriptor."""

    frame: int
    box: BoundingBox3D
    descriptor: MultiViewDescriptor
    confidence: float = 1.0
    source_id: Optional[str] = None

    def __post_init__(self) -> None:
        frame = int(self.frame)
        if frame < 0:
            raise ValueError(f"frame index must be non-negative, got {frame}")
        object.__setattr__(self, "frame", frame)
        conf = float(self.confidence)
        if not (0.0 <= conf <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {conf}")
        object.__setattr__(self, "confidence", conf)


@dataclass(frozen=True, eq=False)
class Tracklet:
    """One continuous period of visibility: time-ordered states plus descriptors.

    ``states`` holds (frame, box) pairs with strictly increasing frames;
    ``descriptors`` is aligned one-to-one with states. ``source_track_id``
    records which online track produced this tracklet, when known.
    """

    tracklet_id: int
    states: Tuple[Tuple[int, BoundingBox3D], ...]
    descriptors: Tuple[MultiViewDescriptor, ...]
    source_track_id: Optional[int] = None

    def __post_init__(self) -> None:
        states = tuple((int(f), b) for f, b in self.states)
        descriptors = tuple(self.descriptors)
        if len(states) == 0:
            raise ValueError("tracklet needs at least one state")
        if len(states) != len(descriptors):
            raise ValueError(
                f"states ({len(states)}) and descriptors ({len(descriptors)}) "
                "must have the same length"
            )
        frames = [f for f, _ in states]
        if any(b >= a for b, a in zip(frames, frames[1:])):
            raise ValueError("state frames must be strictly increasing")
        dims = {d.dim for d in descriptors}
        if len(dims) > 1:
            raise ValueError(f"descriptors mix feature dimensions: {sorted(dims)}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "descriptors", descriptors)
        object.__setattr__(self, "tracklet_id", int(self.tracklet_id))

    @property
    def begin_frame(self) -> int:
        return self.states[0][0]

    @property
    def end_frame(self) -> int:
        return self.states[-1][0]

    def __len__(self) -> int:
        return len(self.states)

    def overlaps(self, other: "Tracklet") -> bool:
        return self.begin_frame <= other.end_frame and other.begin_frame <= self.end_frame


@dataclass(frozen=True, eq=False)
class Trajectory:
    """An identity's full history: a set of non-overlapping tracklets.

    Tracklets are stored sorted by begin frame; the gaps between them are
    explicit absences.
    """

    identity: str
    tracklets: Tuple[Tracklet, ...]

    def __post_init__(self) -> None:
        if not self.identity:
            raise ValueError("trajectory identity must be a non-empty label")
        tracklets = tuple(sorted(self.tracklets, key=lambda t: t.begin_frame))
        if len(tracklets) == 0:
            raise ValueError("trajectory needs at least one tracklet")
        for a, b in zip(tracklets, tracklets[1:]):
            if a.end_frame >= b.begin_frame:
                raise ValueError(
                    f"trajectory '{self.identity}' has overlapping tracklets "
                    f"([{a.begin_frame},{a.end_frame}] vs [{b.begin_frame},{b.end_frame}])"
                )
        object.__setattr__(self, "tracklets", tracklets)

    @property
    def begin_frame(self) -> int:
        return self.tracklets[0].begin_frame

    @property
    def end_frame(self) -> int:
        return self.tracklets[-1].end_frame


_VIEW_COMPARE_MODES = ("aligned-mean", "min-over-cyclic-shifts")
_MOTION_MODES = ("off", "constant-velocity")


@dataclass(frozen=True)
class AssociationConfig:
    """Knobs for the online association stage.

    shape_weight is the blend between the descriptor (shape) cost and the
    box (spatial) cost; gate is the cost threshold above which matches are
    discarded. Lost tracks stay matchable for max_lost_frames missed frames
    and fall back to shape-only cost once they have been lost for more than
    lost_spatial_horizon frames.
    """

    shape_weight: float = 0.5
    gate: float = 0.7
    ema_alpha: float = 0.9
    max_lost_frames: int = 150
    lost_spatial_horizon: int = 15
    view_compare_mode: str = "aligned-mean"
    motion_prediction: str = "off"
    min_tracklet_len: int = 3

    def __post_init__(self) -> None:
        if not (0.0 <= self.shape_weight <= 1.0):
            raise ValueError(f"shape_weight must be in [0, 1], got {self.shape_weight}")
        if not (self.gate >= 0.0):
            raise ValueError(f"gate must be >= 0, got {self.gate}")
        if not (0.0 <= self.ema_alpha <= 1.0):
            raise ValueError(f"ema_alpha must be in [0, 1], got {self.ema_alpha}")
        if self.max_lost_frames < 0:
            raise ValueError("max_lost_frames must be >= 0")
        if self.lost_spatial_horizon < 0:
            raise ValueError("lost_spatial_horizon must be >= 0")
        if self.view_compare_mode not in _VIEW_COMPARE_MODES:
            raise ValueError(
                f"view_compare_mode must be one of {_VIEW_COMPARE_MODES}, "
                f"got {self.view_compare_mode!r}"
            )
        if self.motion_prediction not in _MOTION_MODES:
            raise ValueError(
                f"motion_prediction must be one of {_MOTION_MODES}, "
                f"got {self.motion_prediction!r}"
            )
        if self.min_tracklet_len < 1:
            raise ValueError("min_tracklet_len must be >= 1")
