"""Deterministic synthetic scenarios: moving agents, absences, noisy detections.

Agents walk piecewise-linear paths between waypoints inside a rectangular
room, disappear during configured absence windows ("revolving door"
dynamics), and are observed through a noisy detector model: positional and
box-extent noise, random misses, deterministic proximity occlusion, and
Poisson clutter.

Every random draw comes from a Philox counter-based generator seeded
through named SeedSequence streams derived from (master seed, purpose,
index), so output is bit-reproducible across platforms and independent of
thread count. Identity appearance is a per-identity latent vector shared
by all 8 views plus a global per-view offset; a detection's descriptor is
the L2-normalized sum of latent, offset, and isotropic Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .model import (
    NUM_VIEWS,
    BoundingBox3D,
    Detection,
    MultiViewDescriptor,
    Vec3,
    normalize_descriptor,
)

# Stream labels for the named RNG substreams (stable across versions).
_STREAM_PATHS = 0
_STREAM_LATENTS = 1
_STREAM_DETECTIONS = 2
_STREAM_CLUTTER = 3


def _stream(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for one named substream of the master seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *key])))


@dataclass(frozen=True)
class AgentSpec:
    """One agent's path and schedule.

    waypoints are (frame, x, y) with strictly increasing frames; positions
    between waypoints are linearly interpolated, and clamped to the first/
    last waypoint outside their range. absences are inclusive [start, end]
    frame windows during which the agent is out of the room.
    """

    identity: str
    waypoints: Tuple[Tuple[int, float, float], ...]
    absences: Tuple[Tuple[int, int], ...] = ()
    extents: Vec3 = (0.6, 0.6, 1.8)

    def __post_init__(self) -> None:
        if not self.identity:
            raise ValueError("agent identity must be non-empty")
        wps = tuple((int(f), float(x), float(y)) for f, x, y in self.waypoints)
        if len(wps) == 0:
            raise ValueError("agent needs at least one waypoint")
        frames = [f for f, _, _ in wps]
        if any(b >= a for b, a in zip(frames, frames[1:])):
            raise ValueError("waypoint frames must be strictly increasing")
        absences = tuple((int(a), int(b)) for a, b in self.absences)
        if any(a > b for a, b in absences):
            raise ValueError("absence windows must have start <= end")
        object.__setattr__(self, "waypoints", wps)
        object.__setattr__(self, "absences", absences)

    def position(self, frame: int) -> Tuple[float, float]:
        frames = [f for f, _, _ in self.waypoints]
        x = float(np.interp(frame, frames, [w[1] for w in self.waypoints]))
        y = float(np.interp(frame, frames, [w[2] for w in self.waypoints]))
        return x, y

    def present(self, frame: int) -> bool:
        return not any(a <= frame <= b for a, b in self.absences)

    def box(self, frame: int) -> BoundingBox3D:
        x, y = self.position(frame)
        e = self.extents
        return BoundingBox3D((x, y, e[2] / 2.0), e)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to synthesize one scenario (paths + detector model).

    room is (xmin, ymin, xmax, ymax) in metres. When agents is None,
    generate_scenario samples num_agents agents with num_waypoints random
    waypoints each and absences_per_agent absence windows of duration
    uniform in [absence_min_s, absence_max_s], one per equal split of the
    timeline. All randomness derives from the seed passed to
    generate_scenario (falling back to the seed field here).
    """

    room: Tuple[float, float, float, float] = (0.0, 0.0, 12.0, 9.0)
    num_agents: int = 5
    frame_count: int = 3000
    frame_rate: float = 30.0
    agents: Optional[Tuple[AgentSpec, ...]] = None
    num_waypoints: int = 6
    absences_per_agent: int = 2
    absence_min_s: float = 10.0
    absence_max_s: float = 30.0
    agent_extents: Vec3 = (0.6, 0.6, 1.8)
    # Feature model.
    feature_dim: int = 128
    view_offset_scale: float = 0.5
    feature_noise: float = 0.05
    # Detector model.
    position_noise: float = 0.02
    extent_jitter: float = 0.02
    miss_prob: float = 0.1
    occlusion_distance: float = 0.4
    clutter_rate: float = 0.2
    n_enroll: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        xmin, ymin, xmax, ymax = self.room
        if not (xmax > xmin and ymax > ymin):
            raise ValueError(f"room bounds must be non-empty, got {self.room}")
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")
        if self.num_agents < 1 and self.agents is None:
            raise ValueError("need at least one agent")
        for name in ("feature_noise", "position_noise", "extent_jitter", "view_offset_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not (0.0 <= self.miss_prob <= 1.0):
            raise ValueError("miss_prob must be in [0, 1]")
        if self.clutter_rate < 0 or self.occlusion_distance < 0:
            raise ValueError("clutter_rate and occlusion_distance must be >= 0")
        if self.absences_per_agent < 0:
            raise ValueError("absences_per_agent must be >= 0")
        if self.absence_max_s < self.absence_min_s or self.absence_min_s < 0:
            raise ValueError("need 0 <= absence_min_s <= absence_max_s")
        if self.feature_dim < 2:
            raise ValueError("feature_dim must be >= 2")
        if self.n_enroll < 1:
            raise ValueError("n_enroll must be >= 1")


@dataclass(frozen=True)
class GroundTruthRecord:
    frame: int
    identity: str
    box: BoundingBox3D
    present: bool = True


@dataclass(frozen=True)
class Scenario:
    """Materialized agent schedules for one (config, seed) pair."""

    config: ScenarioConfig
    seed: int
    agents: Tuple[AgentSpec, ...]


def generate_scenario(cfg: ScenarioConfig, seed: Optional[int] = None) -> Scenario:
    """Materialize agent paths and absence windows; deterministic in (cfg, seed)."""
    seed = cfg.seed if seed is None else int(seed)
    if cfg.agents is not None:
        agents = tuple(cfg.agents)
    else:
        agents = tuple(
            _sample_agent(cfg, _stream(seed, _STREAM_PATHS, i), i) for i in range(cfg.num_agents)
        )
    if len({a.identity for a in agents}) != len(agents):
        raise ValueError("agent identities must be unique")
    xmin, ymin, xmax, ymax = cfg.room
    for agent in agents:
        for f, x, y in agent.waypoints:
            if not (xmin <= x <= xmax and ymin <= y <= ymax):
                raise ValueError(
                    f"waypoint ({x}, {y}) of {agent.identity!r} is outside room bounds {cfg.room}"
                )
    return Scenario(config=cfg, seed=seed, agents=agents)


def _sample_agent(cfg: ScenarioConfig, rng: np.random.Generator, index: int) -> AgentSpec:
    xmin, ymin, xmax, ymax = cfg.room
    inset = min(0.5, (xmax - xmin) / 4, (ymax - ymin) / 4)
    times = np.linspace(0, cfg.frame_count - 1, max(2, cfg.num_waypoints)).astype(int)
    xs = rng.uniform(xmin + inset, xmax - inset, size=len(times))
    ys = rng.uniform(ymin + inset, ymax - inset, size=len(times))
    waypoints = tuple((int(t), float(x), float(y)) for t, x, y in zip(times, xs, ys))

    absences: List[Tuple[int, int]] = []
    k = cfg.absences_per_agent
    if k > 0:
        seg = cfg.frame_count / k
        for s in range(k):
            lo = int(round(s * seg))
            hi = int(round((s + 1) * seg)) - 1
            max_dur = hi - lo  # keep at least one present frame per segment
            dur = int(round(rng.uniform(cfg.absence_min_s, cfg.absence_max_s) * cfg.frame_rate))
            dur = max(1, min(dur, max_dur))
            start = int(rng.integers(lo, hi - dur + 1)) if hi - dur + 1 > lo else lo
            absences.append((start, start + dur - 1))
    return AgentSpec(
        identity=f"agent-{index + 1}",
        waypoints=waypoints,
        absences=tuple(absences),
        extents=cfg.agent_extents,
    )


def scenario_ground_truth(scenario: Scenario) -> List[GroundTruthRecord]:
    """Ground-truth records for every frame each agent is present."""
    records: List[GroundTruthRecord] = []
    for frame in range(scenario.config.frame_count):
        for agent in scenario.agents:
            if agent.present(frame):
                records.append(GroundTruthRecord(frame, agent.identity, agent.box(frame)))
    return records


@dataclass(frozen=True)
class SimulatedSequence:
    """render_frames output: detector stream, ground truth, enrollment samples."""

    frames: Tuple[Tuple[int, Tuple[Detection, ...]], ...]
    ground_truth: Tuple[GroundTruthRecord, ...]
    enrollment: Tuple[Tuple[str, MultiViewDescriptor], ...]


def _identity_raw_signatures(scenario: Scenario) -> Dict[str, np.ndarray]:
    """Unnormalized (8, C) signature of each identity: latent + per-view offset.

    The per-view offsets are one global draw shared by all identities (the
    virtual camera ring is the same for everyone); the latent is what tells
    identities apart. Feature noise is added to this raw signature, so its
    scale is relative to the latent's ~sqrt(C) norm, not to a unit vector.
    """
    cfg = scenario.config
    rng = _stream(scenario.seed, _STREAM_LATENTS)
    offsets = rng.normal(size=(NUM_VIEWS, cfg.feature_dim))
    out: Dict[str, np.ndarray] = {}
    for agent in scenario.agents:
        latent = rng.normal(size=cfg.feature_dim)
        out[agent.identity] = latent[None, :] + cfg.view_offset_scale * offsets
    return out


def identity_descriptors(scenario: Scenario) -> Dict[str, MultiViewDescriptor]:
    """Noise-free descriptor of each identity (normalized raw signature)."""
    return {
        ident: normalize_descriptor(raw)
        for ident, raw in _identity_raw_signatures(scenario).items()
    }


def render_frames(scenario: Scenario) -> SimulatedSequence:
    """Run the detector model over the scenario.

    Per frame: each present agent is dropped with miss_prob, or
    deterministically when within occlusion_distance (X-Y) of a present
    lower-index agent; survivors yield a Detection with noisy box and
    descriptor. Poisson(clutter_rate) clutter detections carry random boxes
    and random unit descriptors and source_id "clutter". Enrollment collects
    the first n_enroll emitted descriptors of each identity.
    """
    cfg = scenario.config
    bases = _identity_raw_signatures(scenario)
    clean = {ident: normalize_descriptor(raw) for ident, raw in bases.items()}
    rng_det = _stream(scenario.seed, _STREAM_DETECTIONS)
    rng_clutter = _stream(scenario.seed, _STREAM_CLUTTER)
    xmin, ymin, xmax, ymax = cfg.room

    # One vectorized interpolation per agent instead of one per agent-frame;
    # np.interp applies the same arithmetic elementwise, so values match
    # AgentSpec.position exactly.
    time_axis = np.arange(cfg.frame_count, dtype=float)
    path_table: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
    for a in scenario.agents:
        wp_frames = [f for f, _, _ in a.waypoints]
        path_table[a.identity] = (
            np.interp(time_axis, wp_frames, [w[1] for w in a.waypoints]),
            np.interp(time_axis, wp_frames, [w[2] for w in a.waypoints]),
        )

    def agent_box(a: AgentSpec, frame: int) -> BoundingBox3D:
        xs, ys = path_table[a.identity]
        e = a.extents
        return BoundingBox3D((float(xs[frame]), float(ys[frame]), e[2] / 2.0), e)

    frames: List[Tuple[int, Tuple[Detection, ...]]] = []
    ground_truth: List[GroundTruthRecord] = []
    enroll: Dict[str, List[MultiViewDescriptor]] = {a.identity: [] for a in scenario.agents}

    for frame in range(cfg.frame_count):
        present = [a for a in scenario.agents if a.present(frame)]
        positions = {
            a.identity: (
                float(path_table[a.identity][0][frame]),
                float(path_table[a.identity][1][frame]),
            )
            for a in present
        }
        for a in present:
            ground_truth.append(GroundTruthRecord(frame, a.identity, agent_box(a, frame)))

        occluded = set()
        for i in range(len(present)):
            xi, yi = positions[present[i].identity]
            for j in range(i + 1, len(present)):
                xj, yj = positions[present[j].identity]
                if (xi - xj) ** 2 + (yi - yj) ** 2 < cfg.occlusion_distance**2:
                    occluded.add(present[j].identity)

        dets: List[Detection] = []
        for a in present:
            missed = rng_det.random() < cfg.miss_prob
            if missed or a.identity in occluded:
                continue
            true_box = agent_box(a, frame)
            if cfg.position_noise > 0 or cfg.extent_jitter > 0:
                center = np.asarray(true_box.center) + cfg.position_noise * rng_det.normal(size=3)
                ext = np.asarray(true_box.extents) * np.maximum(
                    1.0 + cfg.extent_jitter * rng_det.normal(size=3), 0.2
                )
                box = BoundingBox3D(tuple(center), tuple(ext))
            else:
                box = true_box
            if cfg.feature_noise > 0:
                raw = bases[a.identity] + cfg.feature_noise * rng_det.normal(
                    size=(NUM_VIEWS, cfg.feature_dim)
                )
                desc = normalize_descriptor(raw)
            else:
                desc = clean[a.identity]
            det = Detection(frame=frame, box=box, descriptor=desc, source_id=a.identity)
            dets.append(det)
            if len(enroll[a.identity]) < cfg.n_enroll:
                enroll[a.identity].append(desc)

        n_clutter = int(rng_clutter.poisson(cfg.clutter_rate)) if cfg.clutter_rate > 0 else 0
        for _ in range(n_clutter):
            cx = rng_clutter.uniform(xmin, xmax)
            cy = rng_clutter.uniform(ymin, ymax)
            ex, ey, ez = rng_clutter.uniform(0.3, 1.0, size=3)
            box = BoundingBox3D((cx, cy, ez / 2.0), (ex, ey, ez))
            desc = normalize_descriptor(rng_clutter.normal(size=(NUM_VIEWS, cfg.feature_dim)))
            dets.append(
                Detection(frame=frame, box=box, descriptor=desc, source_id="clutter")
            )
        frames.append((frame, tuple(dets)))

    enrollment = tuple(
        (ident, d) for ident in sorted(enroll) for d in enroll[ident]
    )
    return SimulatedSequence(
        frames=tuple(frames), ground_truth=tuple(ground_truth), enrollment=enrollment
    )
