"""Axis-aligned 3D box algebra: volumes, overlaps, IoU and Generalized IoU.

Scalar functions operate on BoundingBox3D values with plain float math
(they sit on hot paths and are called per pair). The *_matrix variants are
vectorized over packed (n, 6) arrays of [cx, cy, cz, ex, ey, ez] rows and
are used when whole cost matrices are needed. All functions are pure.

IoU and GIoU compute every volume from the min/max corners of the boxes so
that the identities hold bitwise, not just approximately: giou3d(a, a) is
exactly 1.0, and both measures are exactly symmetric in their arguments
(all intermediate operations are commutative in the swapped operands).
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from .model import BoundingBox3D


def volume(b: BoundingBox3D) -> float:
    """Volume of a box; the product of its extents."""
    e = b.extents
    return e[0] * e[1] * e[2]


def intersection_volume(a: BoundingBox3D, b: BoundingBox3D) -> float:
    """Volume of the axis-wise overlap of two boxes; 0 when disjoint on any axis."""
    amin, amax = a.min_corner, a.max_corner
    bmin, bmax = b.min_corner, b.max_corner
    vol = 1.0
    for i in range(3):
        d = min(amax[i], bmax[i]) - max(amin[i], bmin[i])
        if d <= 0.0:
            return 0.0
        vol *= d
    return vol


def enclosing_box(a: BoundingBox3D, b: BoundingBox3D) -> BoundingBox3D:
    """Smallest axis-aligned box containing both inputs."""
    amin, amax = a.min_corner, a.max_corner
    bmin, bmax = b.min_corner, b.max_corner
    lo = tuple(min(amin[i], bmin[i]) for i in range(3))
    hi = tuple(max(amax[i], bmax[i]) for i in range(3))
    center = tuple((lo[i] + hi[i]) / 2.0 for i in range(3))
    extents = tuple(hi[i] - lo[i] for i in range(3))
    return BoundingBox3D(center, extents)


def _corner_terms(a: BoundingBox3D, b: BoundingBox3D) -> Tuple[float, float, float]:
    """(intersection, union, hull) volumes, all derived from box corners."""
    amin, amax = a.min_corner, a.max_corner
    bmin, bmax = b.min_corner, b.max_corner
    inter = 1.0
    vol_a = 1.0
    vol_b = 1.0
    hull = 1.0
    for i in range(3):
        vol_a *= amax[i] - amin[i]
        vol_b *= bmax[i] - bmin[i]
        hull *= max(amax[i], bmax[i]) - min(amin[i], bmin[i])
        d = min(amax[i], bmax[i]) - max(amin[i], bmin[i])
        inter = inter * d if d > 0.0 else 0.0
    union = vol_a + vol_b - inter
    return inter, union, hull


def iou3d(a: BoundingBox3D, b: BoundingBox3D) -> float:
    """Plain intersection over union, in [0, 1]."""
    inter, union, _ = _corner_terms(a, b)
    return inter / union


def giou3d(a: BoundingBox3D, b: BoundingBox3D) -> float:
    """Generalized IoU between two boxes, in (-1, 1].

    IoU minus the fraction of the enclosing hull not covered by the union.
    Symmetric by construction; equals 1 exactly iff the boxes coincide.
    """
    inter, union, hull = _corner_terms(a, b)
    return inter / union - (hull - union) / hull


def spatial_cost(a: BoundingBox3D, b: BoundingBox3D) -> float:
    """Box dissimilarity (1 - GIoU) / 2, mapping GIoU in (-1, 1] to [0, 1)."""
    return (1.0 - giou3d(a, b)) / 2.0


def boxes_to_array(boxes: Sequence[BoundingBox3D]) -> np.ndarray:
    """Pack boxes into an (n, 6) float64 array of [cx, cy, cz, ex, ey, ez]."""
    out = np.empty((len(boxes), 6), dtype=np.float64)
    for i, b in enumerate(boxes):
        out[i, 0:3] = b.center
        out[i, 3:6] = b.extents
    return out


def box_from_row(row: np.ndarray) -> BoundingBox3D:
    """Inverse of boxes_to_array for one row."""
    return BoundingBox3D(tuple(float(v) for v in row[0:3]), tuple(float(v) for v in row[3:6]))


def _pairwise_terms(a: np.ndarray, b: np.ndarray):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    amin = a[:, None, 0:3] - a[:, None, 3:6] / 2.0
    amax = a[:, None, 0:3] + a[:, None, 3:6] / 2.0
    bmin = b[None, :, 0:3] - b[None, :, 3:6] / 2.0
    bmax = b[None, :, 0:3] + b[None, :, 3:6] / 2.0
    overlap = np.minimum(amax, bmax) - np.maximum(amin, bmin)
    inter = np.where(np.all(overlap > 0.0, axis=2), np.prod(np.maximum(overlap, 0.0), axis=2), 0.0)
    vol_a = np.prod(amax - amin, axis=2)
    vol_b = np.prod(bmax - bmin, axis=2)
    union = vol_a + vol_b - inter
    hull = np.prod(np.maximum(amax, bmax) - np.minimum(amin, bmin), axis=2)
    return inter, union, hull


def iou3d_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between (n, 6) and (m, 6) packed box arrays."""
    inter, union, _ = _pairwise_terms(a, b)
    return inter / union


def giou3d_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise GIoU between (n, 6) and (m, 6) packed box arrays."""
    inter, union, hull = _pairwise_terms(a, b)
    return inter / union - (hull - union) / hull


def spatial_cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise (1 - GIoU) / 2 between packed box arrays."""
    return (1.0 - giou3d_matrix(a, b)) / 2.0
