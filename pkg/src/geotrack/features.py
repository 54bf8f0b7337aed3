"""Comparing and aggregating multi-view shape descriptors.

Distances are cosine distances (1 - dot) between unit-norm view vectors,
combined across the 8 views either by aligned mean (view i against view i)
or by the minimum over cyclic view shifts (tolerant to a rotated viewpoint
ring). Scalar paths accumulate with math.fsum, which is exactly rounded and
therefore order-independent: multiview_distance(a, b) == multiview_distance(b, a)
bitwise in both modes.
"""

from __future__ import annotations

import logging
import math
from typing import Sequence, Union

import numpy as np

from .model import MultiViewDescriptor, renormalize_rows

logger = logging.getLogger(__name__)

ViewsLike = Union[MultiViewDescriptor, np.ndarray, Sequence[Sequence[float]]]


def _view_matrix(x: ViewsLike) -> np.ndarray:
    """Accept a descriptor or a raw (k, C) array of unit-norm rows."""
    if isinstance(x, MultiViewDescriptor):
        return x.views
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a (views, C) matrix, got shape {arr.shape}")
    return arr


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - <u, v> for unit vectors, clamped to [0, 2]."""
    d = 1.0 - float(np.dot(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)))
    return min(max(d, 0.0), 2.0)


def multiview_distance(a: ViewsLike, b: ViewsLike, mode: str = "aligned-mean") -> float:
    """Distance between two multi-view descriptors, in [0, 2].

    aligned-mean averages the per-view cosine distances with views paired by
    index. min-over-cyclic-shifts evaluates that average for every cyclic
    rotation of b's view ring and keeps the smallest, which makes the
    distance invariant to a consistent offset in view numbering.
    """
    va = _view_matrix(a)
    vb = _view_matrix(b)
    if va.shape != vb.shape:
        raise ValueError(f"descriptor shapes differ: {va.shape} vs {vb.shape}")
    k = va.shape[0]
    if mode == "aligned-mean":
        total = math.fsum(1.0 - float(np.dot(va[i], vb[i])) for i in range(k))
        dist = total / k
    elif mode == "min-over-cyclic-shifts":
        dist = math.inf
        for s in range(k):
            total = math.fsum(1.0 - float(np.dot(va[i], vb[(i + s) % k])) for i in range(k))
            dist = min(dist, total / k)
    else:
        raise ValueError(f"unknown view compare mode {mode!r}")
    return min(max(dist, 0.0), 2.0)


def descriptors_to_array(descriptors: Sequence[MultiViewDescriptor]) -> np.ndarray:
    """Stack descriptors into an (n, 8, C) float64 array."""
    if len(descriptors) == 0:
        raise ValueError("need at least one descriptor")
    return np.stack([d.views for d in descriptors])


def multiview_distance_matrix(
    a: np.ndarray, b: np.ndarray, mode: str = "aligned-mean"
) -> np.ndarray:
    """Pairwise multi-view distances between (n, k, C) and (m, k, C) stacks.

    Vectorized counterpart of multiview_distance for cost-matrix assembly;
    agrees with the scalar function to float64 rounding.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 3 or b.ndim != 3 or a.shape[1:] != b.shape[1:]:
        raise ValueError(f"descriptor stacks must share (views, C): {a.shape} vs {b.shape}")
    k = a.shape[1]
    if mode == "aligned-mean":
        dist = 1.0 - np.einsum("nkc,mkc->nm", a, b) / k
    elif mode == "min-over-cyclic-shifts":
        dist = np.full((a.shape[0], b.shape[0]), np.inf)
        for s in range(k):
            shifted = np.roll(b, -s, axis=1)
            np.minimum(dist, 1.0 - np.einsum("nkc,mkc->nm", a, shifted) / k, out=dist)
    else:
        raise ValueError(f"unknown view compare mode {mode!r}")
    return np.clip(dist, 0.0, 2.0)


def _ema_views(current: np.ndarray, observation: np.ndarray, alpha: float) -> np.ndarray:
    """Array core of ema_update, shared with the tracker's buffered hot path."""
    blended = alpha * current + (1.0 - alpha) * observation
    norms = np.linalg.norm(blended, axis=1)
    degenerate = norms < 1e-12
    if np.any(degenerate):
        logger.warning(
            "ema_update: %d view(s) cancelled to zero, keeping previous view(s)",
            int(np.sum(degenerate)),
        )
        blended[degenerate] = current[degenerate]
    return renormalize_rows(blended)


def ema_update(
    current: MultiViewDescriptor, observation: MultiViewDescriptor, alpha: float
) -> MultiViewDescriptor:
    """Blend a track's descriptor with a new observation.

    Each view becomes renormalize(alpha * current + (1 - alpha) * observation),
    so alpha is the weight kept on the existing track state. A view pair that
    cancels (blend numerically zero) keeps the current view unchanged, since
    a zero vector carries no direction; this is logged as a warning.
    """
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return MultiViewDescriptor(_ema_views(current.views, observation.views, alpha))


def temporal_max_pool(
    descriptors: Union[Sequence[MultiViewDescriptor], np.ndarray],
) -> MultiViewDescriptor:
    """Aggregate a tracklet's descriptors into one by per-channel maximum.

    The maximum is taken over time on the raw signed components of each view
    channel, then each view is renormalized. If pooling yields an exact zero
    view (possible only when every frame's channel maxima are all 0.0) that
    view falls back to the first frame's view, with a warning.
    """
    if isinstance(descriptors, np.ndarray):
        stack = np.asarray(descriptors, dtype=np.float64)
        if stack.ndim != 3:
            raise ValueError(f"expected an (n, views, C) stack, got shape {stack.shape}")
        if stack.shape[0] == 0:
            raise ValueError("temporal_max_pool needs at least one descriptor")
    else:
        stack = descriptors_to_array(descriptors)
    pooled = stack.max(axis=0)
    norms = np.linalg.norm(pooled, axis=1)
    zero = norms == 0.0
    if np.any(zero):
        logger.warning(
            "temporal_max_pool: %d view(s) pooled to zero, using first frame",
            int(np.sum(zero)),
        )
        pooled[zero] = stack[0][zero]
    return MultiViewDescriptor(renormalize_rows(pooled))
