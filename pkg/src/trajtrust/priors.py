"""Rule-based interaction importance scores.

Three priors, each mapping a focal agent's neighbor set to a softmax-normalized
score distribution evaluated at the last observed step:

* ``dgsfm``  -- directed-gradient social-force prior.  Combines the value of
  the focal agent's egg-shaped repulsive potential at the neighbor with the
  change over time of the neighbor's potential at the focal agent, so fast
  rear-approachers can outrank nearby parked agents.
* ``skgacn`` -- front-gated inverse distance plus closing speed (variant of a
  pedestrian-interaction baseline; see README).
* ``l2``     -- plain inverse Euclidean distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation
from .scene import AgentState, NeighborSet, Scene, V_HEADING_MIN

PRIOR_NAMES = ("dgsfm", "skgacn", "l2")


@dataclass(frozen=True)
class PriorConfig:
    """Parameters shared by the rule-based priors.

    ``v0``/``sigma_pot`` shape the repulsive potential, ``k_stretch`` controls
    how far it is stretched ahead of a moving agent, ``n_dg`` is the number of
    timesteps used for the forward extrapolation of the directed gradient, and
    ``eps_d``/``g_back`` parameterize the distance-based baselines.
    """

    v0: float = 1.0
    sigma_pot: float = 5.0
    k_stretch: float = 0.5
    w_a: float = 0.5
    w_b: float = 0.5
    n_dg: int = 10
    softmax_temp: float = 1.0
    eps_d: float = 0.1
    g_back: float = 0.01

    def __post_init__(self):
        if self.v0 <= 0 or self.sigma_pot <= 0:
            raise InvariantViolation("v0 and sigma_pot must be > 0")
        if self.k_stretch < 0:
            raise InvariantViolation("k_stretch must be >= 0")
        if self.n_dg < 1:
            raise InvariantViolation("n_dg must be >= 1")
        if self.softmax_temp <= 0:
            raise InvariantViolation("softmax_temp must be > 0")
        if self.w_a < 0 or self.w_b < 0 or self.w_a + self.w_b <= 0:
            raise InvariantViolation("weights must be >= 0 and not both zero")
        if self.eps_d <= 0:
            raise InvariantViolation("eps_d must be > 0")
        if not 0 <= self.g_back <= 1:
            raise InvariantViolation("g_back must be in [0, 1]")


@dataclass(frozen=True)
class ScoreVector:
    """Normalized per-neighbor scores, aligned with the NeighborSet order."""

    focal_id: str
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if not self.entries:
            return
        total = 0.0
        for _, score in self.entries:
            if not (0.0 <= score <= 1.0 + 1e-9):
                raise InvariantViolation(f"score {score} outside [0, 1]")
            total += score
        if abs(total - 1.0) > 1e-9:
            raise InvariantViolation(f"scores sum to {total}, expected 1")

    @property
    def neighbor_ids(self) -> tuple[str, ...]:
        return tuple(nid for nid, _ in self.entries)

    @property
    def scores(self) -> np.ndarray:
        return np.array([s for _, s in self.entries], dtype=float)

    def __len__(self) -> int:
        return len(self.entries)


def softmax(raw: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    z = np.asarray(raw, dtype=float) / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def v_egg(target_pos, source_pos, source_vel, cfg: PriorConfig) -> float:
    """Repulsive potential of ``source`` evaluated at ``target``.

    The isotropic exponential ``v0 * exp(-d / sigma)`` is stretched along the
    source's direction of motion: the longitudinal distance ahead of the
    source is divided by ``1 + k_stretch * speed``, while lateral and rear
    distances are left unchanged, producing an egg-shaped equipotential.
    """
    d = np.asarray(target_pos, dtype=float) - np.asarray(source_pos, dtype=float)
    v = np.asarray(source_vel, dtype=float)
    speed = math.hypot(v[0], v[1])
    if speed < V_HEADING_MIN:
        b = math.hypot(d[0], d[1])
    else:
        ex, ey = v[0] / speed, v[1] / speed
        lon = d[0] * ex + d[1] * ey
        lat_sq = max(d[0] * d[0] + d[1] * d[1] - lon * lon, 0.0)
        if lon >= 0.0:
            stretch = 1.0 + cfg.k_stretch * speed
            b = math.sqrt((lon / stretch) ** 2 + lat_sq)
        else:
            b = math.sqrt(lon * lon + lat_sq)
    return cfg.v0 * math.exp(-b / cfg.sigma_pot)


def _states_at_obs(scene: Scene, neighbors: NeighborSet
                   ) -> tuple[AgentState, list[AgentState]]:
    t = scene.t_obs - 1
    focal = scene.track(neighbors.focal_id).states[t]
    if not focal.valid:
        raise InvariantViolation(
            f"focal agent {neighbors.focal_id!r} invalid at step {t}",
            scene.scene_id)
    states = []
    for nid in neighbors.neighbor_ids:
        state = scene.track(nid).states[t]
        if not state.valid:
            raise InvariantViolation(
                f"neighbor {nid!r} invalid at step {t}", scene.scene_id)
        states.append(state)
    return focal, states


def _to_score_vector(neighbors: NeighborSet, raw: np.ndarray,
                     cfg: PriorConfig) -> ScoreVector:
    scores = softmax(raw, cfg.softmax_temp)
    entries = tuple(zip(neighbors.neighbor_ids, (float(s) for s in scores)))
    return ScoreVector(neighbors.focal_id, entries)


def dgsfm_scores(scene: Scene, neighbors: NeighborSet,
                 cfg: PriorConfig = PriorConfig()) -> ScoreVector:
    """Directed-gradient social-force prior over the neighbor set.

    For each neighbor j the raw score is a weighted sum of

    * the focal agent's egg potential evaluated at j (is j inside the focal
      agent's personal space?), and
    * the change of j's potential at the focal agent between now and
      ``n_dg * dt`` seconds ahead under constant-velocity extrapolation
      (is the focal agent intruding into j's personal space?).
    """
    if not neighbors.neighbor_ids:
        return ScoreVector(neighbors.focal_id, ())
    focal, states = _states_at_obs(scene, neighbors)
    horizon = cfg.n_dg * scene.dt
    r_i = focal.position
    v_i = focal.velocity
    r_i_future = r_i + v_i * horizon
    raw = np.empty(len(states))
    for idx, s in enumerate(states):
        r_j = s.position
        v_j = s.velocity
        beta_a = v_egg(r_j, r_i, v_i, cfg)
        beta_b = (v_egg(r_i_future, r_j + v_j * horizon, v_j, cfg)
                  - v_egg(r_i, r_j, v_j, cfg))
        raw[idx] = cfg.w_a * beta_a + cfg.w_b * beta_b
    return _to_score_vector(neighbors, raw, cfg)


def skgacn_scores(scene: Scene, neighbors: NeighborSet,
                  cfg: PriorConfig = PriorConfig()) -> ScoreVector:
    """Front-gated inverse distance plus closing speed, softmax-normalized.

    Neighbors behind the focal agent's heading axis are attenuated by
    ``g_back``; approach speed adds to the raw score, receding motion does
    not.
    """
    if not neighbors.neighbor_ids:
        return ScoreVector(neighbors.focal_id, ())
    focal, states = _states_at_obs(scene, neighbors)
    hx, hy = math.cos(focal.heading), math.sin(focal.heading)
    raw = np.empty(len(states))
    for idx, s in enumerate(states):
        dx, dy = s.x - focal.x, s.y - focal.y
        dist = math.hypot(dx, dy)
        gate = 1.0 if dx * hx + dy * hy >= 0.0 else cfg.g_back
        if dist > 1e-12:
            rel_vx, rel_vy = s.vx - focal.vx, s.vy - focal.vy
            closing = -(dx * rel_vx + dy * rel_vy) / dist
        else:
            closing = 0.0
        raw[idx] = gate * (1.0 / (dist + cfg.eps_d) + max(0.0, closing))
    return _to_score_vector(neighbors, raw, cfg)


def l2_scores(scene: Scene, neighbors: NeighborSet,
              cfg: PriorConfig = PriorConfig()) -> ScoreVector:
    """Inverse-distance prior: softmax of ``1 / (dist + eps_d)``."""
    if not neighbors.neighbor_ids:
        return ScoreVector(neighbors.focal_id, ())
    focal, states = _states_at_obs(scene, neighbors)
    raw = np.array([1.0 / (math.hypot(s.x - focal.x, s.y - focal.y) + cfg.eps_d)
                    for s in states])
    return _to_score_vector(neighbors, raw, cfg)


PRIOR_FUNCTIONS = {
    "dgsfm": dgsfm_scores,
    "skgacn": skgacn_scores,
    "l2": l2_scores,
}
