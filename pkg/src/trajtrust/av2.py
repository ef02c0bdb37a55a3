"""Converter stub for Argoverse 2 motion-forecasting scenarios.

The dataset itself is not bundled and its parquet parsing is out of scope;
this module documents the expected mapping and converts already-extracted
track rows into :class:`~trajtrust.scene.Scene` objects.

Mapping from an AV2 scenario to the scene JSONL schema
------------------------------------------------------

==========================  =================================================
AV2 field                   scene field
==========================  =================================================
scenario_id                 scene_id
0.1 s sampling              dt = 0.1
50 observed steps           t_obs = 50
60 future steps             t_horizon = 60
track.track_id              track.agent_id
track.object_type           "vehicle" | "pedestrian" | "cyclist" (bus and
                            motorcyclist map to vehicle/cyclist; other object
                            types are dropped)
object_state.position       x, y
object_state.velocity       vx, vy
object_state.heading        heading (recomputed from velocity when the agent
                            moves faster than 0.1 m/s, held otherwise)
object_state.observed       valid (missing timesteps become invalid zeroed
                            states)
focal_track_id              focal_ids = [focal_track_id]
==========================  =================================================

With the ``av2`` package installed, feed
``scenario_serialization.load_argoverse_scenario_parquet`` output through
:func:`scene_from_track_rows` one scenario at a time and save the result with
:func:`~trajtrust.scene.save_scenes`.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

from .errors import ParseError
from .geometry import heading_of
from .scene import V_HEADING_MIN, AgentClass, AgentState, AgentTrack, Scene

_CLASS_MAP = {
    "vehicle": AgentClass.VEHICLE,
    "bus": AgentClass.VEHICLE,
    "motorcyclist": AgentClass.CYCLIST,
    "cyclist": AgentClass.CYCLIST,
    "pedestrian": AgentClass.PEDESTRIAN,
}


def scene_from_track_rows(scene_id: str, rows: Iterable[Mapping],
                          focal_ids: list[str], dt: float = 0.1,
                          t_obs: int = 50, t_horizon: int = 60) -> Scene:
    """Assemble a scene from per-observation rows.

    Each row needs ``track_id``, ``object_type``, ``timestep`` (0-based),
    ``x``, ``y``, ``vx``, ``vy``.  Timesteps missing from a track become
    invalid states; object types outside the class map are skipped.
    """
    total = t_obs + t_horizon
    per_track: dict[str, dict] = {}
    for row in rows:
        object_type = str(row["object_type"]).lower()
        if object_type not in _CLASS_MAP:
            continue
        t = int(row["timestep"])
        if not 0 <= t < total:
            raise ParseError(None, f"timestep {t} outside [0, {total})")
        entry = per_track.setdefault(
            str(row["track_id"]),
            {"cls": _CLASS_MAP[object_type], "steps": {}})
        entry["steps"][t] = (float(row["x"]), float(row["y"]),
                             float(row["vx"]), float(row["vy"]))

    tracks = []
    for track_id, entry in per_track.items():
        states: list[AgentState] = []
        held = 0.0
        for t in range(total):
            if t not in entry["steps"]:
                states.append(AgentState.occluded())
                continue
            x, y, vx, vy = entry["steps"][t]
            if math.hypot(vx, vy) > V_HEADING_MIN:
                held = heading_of(vx, vy)
            states.append(AgentState(x, y, vx, vy, held))
        tracks.append(AgentTrack(track_id, entry["cls"], tuple(states)))
    return Scene(scene_id, dt, t_obs, t_horizon, tuple(tracks),
                 tuple(focal_ids))
