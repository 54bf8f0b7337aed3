"""Shared factories for the test suite."""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
import pytest

from geotrack.model import (
    BoundingBox3D,
    Detection,
    MultiViewDescriptor,
    NUM_VIEWS,
    normalize_descriptor,
)

PERSON_EXTENTS = (0.6, 0.6, 1.8)


def unit_views(rng: np.random.Generator, dim: int = 16) -> np.ndarray:
    """Random (8, dim) matrix with unit-norm rows."""
    raw = rng.normal(size=(NUM_VIEWS, dim))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def random_descriptor(rng: np.random.Generator, dim: int = 16) -> MultiViewDescriptor:
    return MultiViewDescriptor(unit_views(rng, dim))


def axis_descriptor(axis: int, dim: int = 16, sign: float = 1.0) -> MultiViewDescriptor:
    """Descriptor whose every view is +/- the given basis vector."""
    views = np.zeros((NUM_VIEWS, dim))
    views[:, axis] = sign
    return MultiViewDescriptor(views)


def person_box(
    x: float, y: float = 0.0, extents: Sequence[float] = PERSON_EXTENTS
) -> BoundingBox3D:
    return BoundingBox3D((x, y, extents[2] / 2.0), tuple(extents))


def make_detection(
    frame: int,
    box: BoundingBox3D,
    descriptor: Optional[MultiViewDescriptor] = None,
    dim: int = 16,
) -> Detection:
    if descriptor is None:
        descriptor = axis_descriptor(0, dim)
    return Detection(frame=frame, box=box, descriptor=descriptor)


def random_box(
    rng: np.random.Generator,
    center_scale: float = 5.0,
    extent_range: Tuple[float, float] = (0.2, 2.5),
) -> BoundingBox3D:
    center = tuple(rng.uniform(-center_scale, center_scale, size=3))
    extents = tuple(rng.uniform(*extent_range, size=3))
    return BoundingBox3D(center, extents)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
