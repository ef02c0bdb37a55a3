"""Scene data model, JSONL (de)serialization, neighbor selection, and synthetic scenes.

A scene holds one track per agent over ``t_obs + t_horizon`` uniformly sampled
steps.  All types are immutable after construction and safe to share across
threads; every operation here is a pure function.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InvariantViolation, IoError, ParseError, SpecError, UnknownAgent
from .geometry import heading_of, wrap_angle

# Below this speed the heading is held from the last moving step instead of
# being recomputed from the (noisy) velocity direction.
V_HEADING_MIN = 0.1  # m/s

# Tolerance when validating that a stored heading matches the stored velocity
# direction for moving agents.
_HEADING_TOL = 1e-3  # rad

SYNTHETIC_PROFILES = (
    "constant-velocity",
    "constant-acceleration",
    "circular-arc",
    "lateral-step",
    "stop-and-go",
)


class AgentClass(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    CYCLIST = "cyclist"


@dataclass(frozen=True)
class AgentState:
    """2D pose plus velocity of one agent at one timestep."""

    x: float
    y: float
    vx: float
    vy: float
    heading: float
    valid: bool = True

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy], dtype=float)

    @staticmethod
    def occluded() -> "AgentState":
        """An invalid (not observed) step; all numeric fields are zeroed."""
        return AgentState(0.0, 0.0, 0.0, 0.0, 0.0, valid=False)


def make_state(x: float, y: float, vx: float, vy: float,
               held_heading: float = 0.0) -> AgentState:
    """Build a valid state whose heading follows the velocity convention."""
    heading = heading_of(vx, vy) if math.hypot(vx, vy) > V_HEADING_MIN else held_heading
    return AgentState(x, y, vx, vy, heading)


@dataclass(frozen=True)
class AgentTrack:
    agent_id: str
    agent_class: AgentClass
    states: tuple[AgentState, ...]
    metadata: Mapping[str, str] | None = None

    def valid_at(self, t: int) -> bool:
        return 0 <= t < len(self.states) and self.states[t].valid

    def positions(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        sl = self.states[start:stop]
        return np.array([[s.x, s.y] for s in sl], dtype=float)


@dataclass(frozen=True)
class Scene:
    scene_id: str
    dt: float
    t_obs: int
    t_horizon: int
    tracks: tuple[AgentTrack, ...]
    focal_ids: tuple[str, ...]
    _by_id: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (self.dt > 0):
            raise InvariantViolation("dt must be > 0", self.scene_id)
        if self.t_obs < 1 or self.t_horizon < 1:
            raise InvariantViolation("t_obs and t_horizon must be >= 1", self.scene_id)
        total = self.t_obs + self.t_horizon
        by_id: dict[str, AgentTrack] = {}
        for track in self.tracks:
            if track.agent_id in by_id:
                raise InvariantViolation(
                    f"duplicate agent_id {track.agent_id!r}", self.scene_id)
            if len(track.states) != total:
                raise InvariantViolation(
                    f"track {track.agent_id!r} has {len(track.states)} states, "
                    f"expected {total}", self.scene_id)
            _check_headings(track, self.scene_id)
            by_id[track.agent_id] = track
        for focal in self.focal_ids:
            track = by_id.get(focal)
            if track is None:
                raise InvariantViolation(f"focal_id {focal!r} has no track", self.scene_id)
            if not track.valid_at(self.t_obs - 1):
                raise InvariantViolation(
                    f"focal agent {focal!r} is not valid at the last observed step",
                    self.scene_id)
            _check_observed_gaps(track, self.t_obs, self.scene_id)
        object.__setattr__(self, "_by_id", by_id)

    @property
    def t_total(self) -> int:
        return self.t_obs + self.t_horizon

    def track(self, agent_id: str) -> AgentTrack:
        try:
            return self._by_id[agent_id]
        except KeyError:
            raise UnknownAgent(agent_id, f"scene {self.scene_id}") from None


def _check_headings(track: AgentTrack, scene_id: str) -> None:
    for t, s in enumerate(track.states):
        if not s.valid:
            continue
        if s.speed > V_HEADING_MIN:
            expected = heading_of(s.vx, s.vy)
            if abs(wrap_angle(s.heading - expected)) > _HEADING_TOL:
                raise InvariantViolation(
                    f"track {track.agent_id!r} step {t}: heading {s.heading:.6f} "
                    f"inconsistent with velocity direction {expected:.6f}", scene_id)


def _check_observed_gaps(track: AgentTrack, t_obs: int, scene_id: str) -> None:
    valid_steps = [t for t in range(t_obs) if track.states[t].valid]
    if not valid_steps:
        return
    first, last = valid_steps[0], valid_steps[-1]
    if len(valid_steps) != last - first + 1:
        raise InvariantViolation(
            f"focal track {track.agent_id!r} has gaps in the observed window", scene_id)


@dataclass(frozen=True)
class NeighborSet:
    focal_id: str
    neighbor_ids: tuple[str, ...]

    def __post_init__(self):
        if self.focal_id in self.neighbor_ids:
            raise InvariantViolation(
                f"neighbor set of {self.focal_id!r} must exclude the focal agent")
        if len(set(self.neighbor_ids)) != len(self.neighbor_ids):
            raise InvariantViolation("neighbor ids must be unique")

    def __len__(self) -> int:
        return len(self.neighbor_ids)


def knn_neighbors(scene: Scene, focal: str, k: int) -> NeighborSet:
    """The up-to-k nearest agents to ``focal`` at the last observed step.

    Only agents valid at step ``t_obs - 1`` are eligible.  Ordering is by
    ascending Euclidean distance; exact ties fall back to lexicographic
    agent-id order.
    """
    t = scene.t_obs - 1
    focal_track = scene.track(focal)
    if not focal_track.valid_at(t):
        raise InvariantViolation(
            f"agent {focal!r} is not valid at step {t}", scene.scene_id)
    fs = focal_track.states[t]
    candidates = []
    for track in scene.tracks:
        if track.agent_id == focal or not track.valid_at(t):
            continue
        s = track.states[t]
        dist = math.hypot(s.x - fs.x, s.y - fs.y)
        candidates.append((dist, track.agent_id))
    candidates.sort()
    return NeighborSet(focal, tuple(aid for _, aid in candidates[: max(k, 0)]))


# ---------------------------------------------------------------------------
# JSON Lines serialization
# ---------------------------------------------------------------------------

def _state_to_dict(t: int, s: AgentState) -> dict:
    return {"t": t, "x": s.x, "y": s.y, "vx": s.vx, "vy": s.vy,
            "heading": s.heading, "valid": s.valid}


def scene_to_dict(scene: Scene) -> dict:
    tracks = []
    for track in scene.tracks:
        rec = {
            "agent_id": track.agent_id,
            "class": track.agent_class.value,
            "states": [_state_to_dict(t, s) for t, s in enumerate(track.states)],
        }
        if track.metadata:
            rec["metadata"] = dict(track.metadata)
        tracks.append(rec)
    return {
        "scene_id": scene.scene_id,
        "dt": scene.dt,
        "t_obs": scene.t_obs,
        "t_horizon": scene.t_horizon,
        "focal_ids": list(scene.focal_ids),
        "tracks": tracks,
    }


def _require(record: Mapping, key: str, kind) -> object:
    if key not in record:
        raise ParseError(None, f"missing key {key!r}")
    value = record[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(None, f"key {key!r} must be a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(None, f"key {key!r} must be an integer")
        return value
    if not isinstance(value, kind):
        raise ParseError(None, f"key {key!r} has wrong type")
    return value


def scene_from_dict(record: Mapping) -> Scene:
    scene_id = _require(record, "scene_id", str)
    dt = _require(record, "dt", float)
    t_obs = _require(record, "t_obs", int)
    t_horizon = _require(record, "t_horizon", int)
    focal_ids = tuple(_require(record, "focal_ids", list))
    tracks = []
    for trec in _require(record, "tracks", list):
        agent_id = _require(trec, "agent_id", str)
        cls_name = _require(trec, "class", str)
        try:
            agent_class = AgentClass(cls_name)
        except ValueError:
            raise ParseError(None, f"unknown agent class {cls_name!r}") from None
        states = []
        for i, srec in enumerate(_require(trec, "states", list)):
            if _require(srec, "t", int) != i:
                raise ParseError(None, f"track {agent_id!r}: states must cover "
                                       f"t = 0..T-1 in order")
            valid = _require(srec, "valid", bool)
            state = AgentState(
                x=_require(srec, "x", float), y=_require(srec, "y", float),
                vx=_require(srec, "vx", float), vy=_require(srec, "vy", float),
                heading=_require(srec, "heading", float), valid=valid)
            if not valid and (state.x or state.y or state.vx or state.vy
                              or state.heading):
                raise ParseError(None, f"track {agent_id!r} step {i}: invalid "
                                       f"steps must carry zeroed fields")
            states.append(state)
        metadata = trec.get("metadata")
        tracks.append(AgentTrack(agent_id, agent_class, tuple(states),
                                 metadata=dict(metadata) if metadata else None))
    return Scene(scene_id, dt, t_obs, t_horizon, tuple(tracks), focal_ids)


def load_scenes(path: str | Path, format: str = "jsonl") -> list[Scene]:
    """Parse a JSON Lines scene file; malformed records are rejected, not fixed."""
    if format != "jsonl":
        raise SpecError(f"unsupported scene format {format!r}")
    scenes = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    raise ParseError(line_no, "blank line")
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(line_no, f"invalid JSON: {exc.msg}") from None
                try:
                    scenes.append(scene_from_dict(record))
                except ParseError as exc:
                    raise ParseError(line_no, exc.reason) from None
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return scenes


def save_scenes(scenes: Sequence[Scene], path: str | Path) -> None:
    """Write scenes as JSON Lines; floats round-trip exactly through repr."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for scene in scenes:
                fh.write(json.dumps(scene_to_dict(scene)))
                fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Synthetic scene generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AgentSpec:
    """One group of synthetic agents that share a motion profile."""

    profile: str
    agent_class: AgentClass = AgentClass.VEHICLE
    count: int = 1
    speed: tuple[float, float] = (1.0, 8.0)       # m/s, sampled uniformly
    accel: tuple[float, float] = (0.2, 1.2)       # m/s^2 (constant-acceleration)
    curvature: tuple[float, float] = (-0.2, 0.2)  # 1/m (circular-arc)
    step_offset: float = 2.0                      # m, lateral jump (lateral-step)
    jump_step: int | None = None                  # default: middle of the horizon
    go_steps: int = 20                            # stop-and-go phase lengths
    stop_steps: int = 15


@dataclass(frozen=True)
class SyntheticSpec:
    agents: tuple[AgentSpec, ...]
    scene_count: int = 1
    dt: float = 0.1
    t_obs: int = 50
    t_horizon: int = 60
    spawn_radius: float = 30.0
    focal_count: int = 1


def _validate_spec(spec: SyntheticSpec) -> None:
    if not spec.agents:
        raise SpecError("spec needs at least one agent group")
    if spec.scene_count < 1:
        raise SpecError("scene_count must be >= 1")
    if spec.dt <= 0:
        raise SpecError("dt must be > 0")
    if spec.t_obs < 1 or spec.t_horizon < 1:
        raise SpecError("t_obs and t_horizon must be >= 1")
    total = 0
    for group in spec.agents:
        if group.count < 1:
            raise SpecError("agent count must be >= 1")
        if group.profile not in SYNTHETIC_PROFILES:
            raise SpecError(f"unknown motion profile {group.profile!r}")
        if group.speed[0] > group.speed[1] or group.speed[0] < 0:
            raise SpecError("speed range must be 0 <= lo <= hi")
        total += group.count
    if spec.focal_count < 1 or spec.focal_count > total:
        raise SpecError("focal_count must be in [1, total agent count]")


def _profile_velocities(group: AgentSpec, rng: np.random.Generator,
                        n_steps: int, dt: float) -> np.ndarray:
    """Per-step velocity vectors (n_steps, 2) for one agent of the group."""
    angle = rng.uniform(-math.pi, math.pi)
    direction = np.array([math.cos(angle), math.sin(angle)])
    speed = rng.uniform(*group.speed)
    vel = np.tile(speed * direction, (n_steps, 1))
    if group.profile in ("constant-velocity", "lateral-step"):
        return vel
    if group.profile == "constant-acceleration":
        mag = rng.uniform(*group.accel)
        accel = mag * direction
        steps = np.arange(n_steps)[:, None]
        return vel + steps * dt * accel
    if group.profile == "circular-arc":
        kappa = rng.uniform(*group.curvature)
        dtheta = kappa * speed * dt
        thetas = angle + dtheta * np.arange(n_steps)
        return speed * np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
    if group.profile == "stop-and-go":
        period = group.go_steps + group.stop_steps
        phase = np.arange(n_steps) % period
        moving = (phase < group.go_steps).astype(float)
        return vel * moving[:, None]
    raise SpecError(f"unknown motion profile {group.profile!r}")


def _build_track(agent_id: str, group: AgentSpec, rng: np.random.Generator,
                 spec: SyntheticSpec) -> AgentTrack:
    n_steps = spec.t_obs + spec.t_horizon
    start = rng.uniform(-spec.spawn_radius, spec.spawn_radius, size=2)
    vel = _profile_velocities(group, rng, n_steps, spec.dt)

    positions = np.empty((n_steps, 2))
    positions[0] = start
    for t in range(n_steps - 1):
        positions[t + 1] = positions[t] + vel[t] * spec.dt
    if group.profile == "lateral-step":
        jump = group.jump_step
        if jump is None:
            jump = spec.t_obs + spec.t_horizon // 2
        if not (0 < jump < n_steps):
            raise SpecError(f"jump_step {jump} outside track")
        normal = np.array([-vel[0, 1], vel[0, 0]])
        norm = np.linalg.norm(normal)
        if norm > 0:
            positions[jump:] += group.step_offset * normal / norm

    states = []
    held = heading_of(vel[0, 0], vel[0, 1])
    for t in range(n_steps):
        speed = math.hypot(vel[t, 0], vel[t, 1])
        if speed > V_HEADING_MIN:
            held = heading_of(vel[t, 0], vel[t, 1])
        states.append(AgentState(float(positions[t, 0]), float(positions[t, 1]),
                                 float(vel[t, 0]), float(vel[t, 1]), held))
    return AgentTrack(agent_id, group.agent_class, tuple(states),
                      metadata={"profile": group.profile})


def generate_synthetic(spec: SyntheticSpec, seed: int) -> list[Scene]:
    """Deterministic synthetic scenes; profile tracks are Euler-consistent.

    Except at a lateral-step jump, every generated track satisfies
    ``p[t+1] == p[t] + v[t] * dt`` exactly, so position differencing recovers
    the generating velocities bit-for-bit.
    """
    _validate_spec(spec)
    rng = np.random.default_rng(seed)
    scenes = []
    for s in range(spec.scene_count):
        tracks = []
        idx = 0
        for group in spec.agents:
            for _ in range(group.count):
                tracks.append(_build_track(f"a{idx}", group, rng, spec))
                idx += 1
        focal_ids = tuple(t.agent_id for t in tracks[: spec.focal_count])
        scenes.append(Scene(f"synth-{s:05d}", spec.dt, spec.t_obs,
                            spec.t_horizon, tuple(tracks), focal_ids))
    return scenes


def synthetic_spec_from_dict(record: Mapping) -> SyntheticSpec:
    """Build a :class:`SyntheticSpec` from a parsed JSON object."""
    try:
        groups = []
        for g in record.get("agents", []):
            kwargs = dict(g)
            if "agent_class" in kwargs:
                kwargs["agent_class"] = AgentClass(kwargs["agent_class"])
            for key in ("speed", "accel", "curvature"):
                if key in kwargs:
                    lo, hi = kwargs[key]
                    kwargs[key] = (float(lo), float(hi))
            groups.append(AgentSpec(**kwargs))
        top = {k: v for k, v in record.items() if k != "agents"}
        spec = SyntheticSpec(agents=tuple(groups), **top)
    except (TypeError, ValueError, KeyError) as exc:
        raise SpecError(f"malformed synthetic spec: {exc}") from exc
    _validate_spec(spec)
    return spec
