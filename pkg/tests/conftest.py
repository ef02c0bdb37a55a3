import math

import pytest

from trajtrust.geometry import wrap_angle
from trajtrust.scene import AgentClass, AgentState, AgentTrack, Scene


def build_scene(agents, dt=0.1, t_obs=2, t_horizon=1, scene_id="s",
                focal_ids=None):
    """Constant-velocity mini-scene from per-agent rows.

    Each row is (agent_id, agent_class, x, y, vx, vy[, heading]) giving the
    state at the last observed step; positions are extrapolated linearly so
    the track is Euler-consistent.  An explicit heading is only meaningful
    for slow agents, moving agents get the velocity direction.
    """
    total = t_obs + t_horizon
    tracks = []
    for row in agents:
        agent_id, cls, x, y, vx, vy, *rest = row
        if math.hypot(vx, vy) > 0.1:
            heading = math.atan2(vy, vx)
        else:
            heading = rest[0] if rest else 0.0
        states = []
        for t in range(total):
            offset = (t - (t_obs - 1)) * dt
            states.append(AgentState(x + vx * offset, y + vy * offset,
                                     vx, vy, heading))
        tracks.append(AgentTrack(agent_id, AgentClass(cls), tuple(states)))
    if focal_ids is None:
        focal_ids = (agents[0][0],)
    return Scene(scene_id, dt, t_obs, t_horizon, tuple(tracks), tuple(focal_ids))


def rigid_transform(scene, angle, tx, ty):
    """Rotate and translate every state of a scene (independent of package code)."""
    c, s = math.cos(angle), math.sin(angle)
    tracks = []
    for track in scene.tracks:
        states = []
        for st in track.states:
            if not st.valid:
                states.append(st)
                continue
            states.append(AgentState(
                c * st.x - s * st.y + tx, s * st.x + c * st.y + ty,
                c * st.vx - s * st.vy, s * st.vx + c * st.vy,
                wrap_angle(st.heading + angle)))
        tracks.append(AgentTrack(track.agent_id, track.agent_class,
                                 tuple(states), track.metadata))
    return Scene(scene_id=scene.scene_id, dt=scene.dt, t_obs=scene.t_obs,
                 t_horizon=scene.t_horizon, tracks=tuple(tracks),
                 focal_ids=scene.focal_ids)


@pytest.fixture
def two_neighbor_scene():
    """Focal at the origin with neighbors 1 m and 3 m ahead, all stationary."""
    return build_scene([
        ("f", "vehicle", 0.0, 0.0, 0.0, 0.0, 0.0),
        ("n1", "vehicle", 1.0, 0.0, 0.0, 0.0, 0.0),
        ("n2", "vehicle", 3.0, 0.0, 0.0, 0.0, 0.0),
    ])
