"""Greedy reproduction of ground-truth trajectories under kinematic limits.

For each step the exact control that tracks the ground truth is computed in
closed form; if it violates the control limits, the best feasible control is
substituted (radial projection for the integrator models, a grid plus
coordinate-descent search for the unicycle) and the step is flagged as
clamped.  The residual displacement quantifies how much a kinematic model
must give up to stay feasible.

The models integrate with an explicit Euler step, so a control influences
positions starting one step after it is applied; the greedy targets are
therefore the next reachable position together with the next heading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import TooShort
from .geometry import wrap_angle
from .kinematics import ControlSequence, KinematicLimits, KinModel, default_limits
from .scene import AgentClass, Scene

W_THETA_DEFAULT = 1.0   # weight of the squared heading error, rad^-2 m^2
GRID_POINTS = 51        # per axis, unicycle fallback search
DESCENT_ITERS = 20

MISS_THRESHOLD = 2.0    # m, endpoint miss for the MR column


def _unit(theta: float) -> tuple[float, float]:
    return math.cos(theta), math.sin(theta)


def _radial_clamp(vec: np.ndarray, bound: float) -> tuple[np.ndarray, bool]:
    norm = math.hypot(vec[0], vec[1])
    if norm <= bound:
        return vec, False
    return vec * (bound / norm), True


def _golden_min(f: Callable[[float], float], lo: float, hi: float,
                iters: int = 30) -> float:
    """Deterministic golden-section line search on [lo, hi]."""
    if hi <= lo:
        return lo
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def _grid_descent(cost: Callable[[float, float], float],
                  a_bounds: tuple[float, float],
                  k_bounds: tuple[float, float]) -> tuple[float, float]:
    """Coarse grid over the control box followed by coordinate descent."""
    a_grid = np.linspace(a_bounds[0], a_bounds[1], GRID_POINTS)
    k_grid = np.linspace(k_bounds[0], k_bounds[1], GRID_POINTS)
    best = (float("inf"), a_grid[0], k_grid[0])
    for a in a_grid:
        for k in k_grid:
            c = cost(a, k)
            if c < best[0]:
                best = (c, a, k)
    _, a, k = best
    a_cell = (a_bounds[1] - a_bounds[0]) / (GRID_POINTS - 1)
    k_cell = (k_bounds[1] - k_bounds[0]) / (GRID_POINTS - 1)
    for _ in range(DESCENT_ITERS):
        a = _golden_min(lambda aa: cost(aa, k),
                        max(a_bounds[0], a - a_cell), min(a_bounds[1], a + a_cell))
        k = _golden_min(lambda kk: cost(a, kk),
                        max(k_bounds[0], k - k_cell), min(k_bounds[1], k + k_cell))
    return a, k


def _check_gt(gt) -> np.ndarray:
    gt = np.asarray(gt, dtype=float)
    if gt.ndim != 2 or gt.shape[1] != 3:
        raise TooShort(f"ground truth must have shape (N, 3), got {gt.shape}")
    if gt.shape[0] < 2:
        raise TooShort("need at least 2 poses to fit controls")
    return gt


def _invert_single(gt: np.ndarray, dt: float, limits: KinematicLimits,
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = gt.shape[0]
    controls = np.zeros((n - 1, 2))
    clamped = np.zeros(n - 1, dtype=bool)
    repro = gt.copy()
    p = gt[0, :2].copy()
    held = gt[0, 2]
    for t in range(n - 1):
        u_exact = (gt[t + 1, :2] - p) / dt
        u, was_clamped = _radial_clamp(u_exact, limits.v_max)
        p = p + u * dt
        if math.hypot(u[0], u[1]) > 0.1:
            held = math.atan2(u[1], u[0])
        controls[t] = u
        clamped[t] = was_clamped
        repro[t + 1] = (p[0], p[1], held)
    return controls, repro, clamped


def _invert_double(gt: np.ndarray, dt: float, limits: KinematicLimits,
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = gt.shape[0]
    controls = np.zeros((n - 1, 2))
    clamped = np.zeros(n - 1, dtype=bool)
    repro = gt.copy()
    a_bound = min(-limits.a_min, limits.a_max)
    p = gt[0, :2].copy()
    v = (gt[1, :2] - gt[0, :2]) / dt
    v, _ = _radial_clamp(v, limits.v_max)
    held = gt[0, 2]
    for t in range(n - 1):
        p_next = p + v * dt
        if t + 2 < n:
            v_target = (gt[t + 2, :2] - p_next) / dt
        else:
            v_target = (gt[n - 1, :2] - gt[n - 2, :2]) / dt
        a_exact = (v_target - v) / dt
        a, accel_clamped = _radial_clamp(a_exact, a_bound)
        v_new = v + a * dt
        v_new, speed_clipped = _radial_clamp(v_new, limits.v_max)
        p, v = p_next, v_new
        if math.hypot(v[0], v[1]) > 0.1:
            held = math.atan2(v[1], v[0])
        controls[t] = a
        clamped[t] = accel_clamped or speed_clipped
        repro[t + 1] = (p[0], p[1], held)
    return controls, repro, clamped


def _invert_unicycle(gt: np.ndarray, dt: float, limits: KinematicLimits,
                     w_theta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = gt.shape[0]
    controls = np.zeros((n - 1, 2))
    clamped = np.zeros(n - 1, dtype=bool)
    repro = gt.copy()
    p = gt[0, :2].copy()
    theta = gt[0, 2]
    ex, ey = _unit(theta)
    diff = (gt[1, :2] - p) / dt
    v = min(max(diff[0] * ex + diff[1] * ey, limits.v_min), limits.v_max)

    for t in range(n - 1):
        theta_target = gt[t + 1, 2]
        pos_target = gt[t + 2, :2] if t + 2 < n else None
        ex, ey = _unit(theta)
        p_next = p + np.array([v * ex, v * ey]) * dt

        if abs(v) * dt > 1e-9:
            kappa_exact = wrap_angle(theta_target - theta) / (v * dt)
        else:
            kappa_exact = 0.0
        theta_exact = theta + kappa_exact * v * dt
        nex, ney = _unit(theta_exact)
        if pos_target is not None:
            v_req = ((pos_target[0] - p_next[0]) * nex
                     + (pos_target[1] - p_next[1]) * ney) / dt
        else:
            last = (gt[n - 1, :2] - gt[n - 2, :2]) / dt
            v_req = last[0] * nex + last[1] * ney
        a_exact = (v_req - v) / dt

        exact_ok = (limits.a_min <= a_exact <= limits.a_max
                    and limits.kappa_min <= kappa_exact <= limits.kappa_max
                    and limits.v_min <= v + a_exact * dt <= limits.v_max)
        if exact_ok:
            a, kappa = a_exact, kappa_exact
        else:
            def cost(a_c: float, k_c: float) -> float:
                th = theta + k_c * v * dt
                vv = min(max(v + a_c * dt, limits.v_min), limits.v_max)
                total = w_theta * wrap_angle(th - theta_target) ** 2
                if pos_target is not None:
                    cx, cy = _unit(th)
                    px = p_next[0] + vv * cx * dt
                    py = p_next[1] + vv * cy * dt
                    total += (px - pos_target[0]) ** 2 + (py - pos_target[1]) ** 2
                return total

            a, kappa = _grid_descent(cost, (limits.a_min, limits.a_max),
                                     (limits.kappa_min, limits.kappa_max))
            clamped[t] = True

        theta = wrap_angle(theta + kappa * v * dt)
        v = min(max(v + a * dt, limits.v_min), limits.v_max)
        p = p_next
        controls[t] = (a, kappa)
        repro[t + 1] = (p[0], p[1], theta)
    return controls, repro, clamped


def invert_controls(model: KinModel, gt, dt: float, limits: KinematicLimits,
                    w_theta: float = W_THETA_DEFAULT
                    ) -> tuple[ControlSequence, np.ndarray, np.ndarray]:
    """Fit feasible controls tracking ``gt`` poses (x, y, theta) greedily.

    Returns the fitted controls, the reproduced (N, 3) pose array (first pose
    equals the ground truth), and per-step clamped flags.  The reproduced
    state starts at the first ground-truth pose with its velocity taken from
    the first position difference (clipped into the feasible set).
    """
    gt = _check_gt(gt)
    if dt <= 0:
        raise TooShort("dt must be > 0")
    model = KinModel(model)
    if model is KinModel.SINGLE_INTEGRATOR:
        controls, repro, clamped = _invert_single(gt, dt, limits)
    elif model is KinModel.DOUBLE_INTEGRATOR:
        controls, repro, clamped = _invert_double(gt, dt, limits)
    else:
        controls, repro, clamped = _invert_unicycle(gt, dt, limits, w_theta)
    return ControlSequence(model, controls), repro, clamped


@dataclass
class ReproductionRow:
    """Aggregated reproduction statistics for one (class, model) pair."""

    agent_class: AgentClass
    model: KinModel
    traj_count: int = 0
    skipped: int = 0
    sum_ade: float = 0.0
    sum_fde: float = 0.0
    miss_count: int = 0
    clamped_steps: int = 0
    step_count: int = 0

    @property
    def min_ade(self) -> float:
        return self.sum_ade / self.traj_count if self.traj_count else 0.0

    @property
    def min_fde(self) -> float:
        return self.sum_fde / self.traj_count if self.traj_count else 0.0

    @property
    def miss_rate(self) -> float:
        return self.miss_count / self.traj_count if self.traj_count else 0.0

    @property
    def clamped_rate(self) -> float:
        return self.clamped_steps / self.step_count if self.step_count else 0.0

    def to_dict(self) -> dict:
        return {"agent_class": self.agent_class.value, "model": self.model.value,
                "traj_count": self.traj_count, "skipped": self.skipped,
                "min_ade": self.min_ade, "min_fde": self.min_fde,
                "miss_rate": self.miss_rate, "clamped_rate": self.clamped_rate}


@dataclass
class ReproductionReport:
    rows: dict[tuple[AgentClass, KinModel], ReproductionRow] = field(default_factory=dict)

    def row(self, agent_class: AgentClass, model: KinModel) -> ReproductionRow:
        key = (agent_class, model)
        if key not in self.rows:
            self.rows[key] = ReproductionRow(agent_class, model)
        return self.rows[key]

    @property
    def overall_min_ade(self) -> float:
        count = sum(r.traj_count for r in self.rows.values())
        total = sum(r.sum_ade for r in self.rows.values())
        return total / count if count else 0.0

    def to_dict(self) -> dict:
        rows = [row.to_dict() for _, row in
                sorted(self.rows.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value))]
        return {"rows": rows, "overall_min_ade": self.overall_min_ade}

    def to_csv(self) -> str:
        lines = ["agent_class,model,traj_count,min_ade,min_fde,miss_rate,clamped_rate"]
        for _, row in sorted(self.rows.items(),
                             key=lambda kv: (kv[0][0].value, kv[0][1].value)):
            lines.append(f"{row.agent_class.value},{row.model.value},"
                         f"{row.traj_count},{row.min_ade},{row.min_fde},"
                         f"{row.miss_rate},{row.clamped_rate}")
        return "\n".join(lines) + "\n"


DEFAULT_MODEL_MAP: dict[AgentClass, KinModel] = {
    AgentClass.VEHICLE: KinModel.UNICYCLE,
    AgentClass.CYCLIST: KinModel.UNICYCLE,
    AgentClass.PEDESTRIAN: KinModel.DOUBLE_INTEGRATOR,
}


def reproduction_report(scenes: Sequence[Scene],
                        model_by_class: Mapping[AgentClass, KinModel] | None = None,
                        limits_by_class: Mapping[AgentClass, KinematicLimits] | None = None,
                        w_theta: float = W_THETA_DEFAULT,
                        trajectory_sink: list | None = None) -> ReproductionReport:
    """Fit each focal agent's horizon under its class's kinematic model.

    The fitted segment starts at the last observed pose and spans the
    prediction horizon; tracks with invalid horizon steps are skipped and
    counted.  Error columns follow the accuracy metrics (single mode, so the
    min over modes is the value itself).  When ``trajectory_sink`` is a list,
    one record per reproduced trajectory is appended in a shape the
    feasibility auditor accepts.
    """
    models = dict(DEFAULT_MODEL_MAP)
    if model_by_class:
        models.update({AgentClass(k): KinModel(v) for k, v in model_by_class.items()})
    report = ReproductionReport()
    for scene in scenes:
        start = scene.t_obs - 1
        for focal in scene.focal_ids:
            track = scene.track(focal)
            model = models[track.agent_class]
            row = report.row(track.agent_class, model)
            states = track.states[start:]
            if any(not s.valid for s in states):
                row.skipped += 1
                continue
            gt = np.array([[s.x, s.y, s.heading] for s in states])
            if limits_by_class and track.agent_class in limits_by_class:
                limits = limits_by_class[track.agent_class]
            else:
                limits = default_limits(track.agent_class, model)
            _, repro, clamped = invert_controls(model, gt, scene.dt, limits, w_theta)
            if trajectory_sink is not None:
                trajectory_sink.append({
                    "scene_id": scene.scene_id, "agent_id": focal,
                    "agent_class": track.agent_class.value,
                    "model": model.value, "dt": scene.dt,
                    "states": [{"x": float(x), "y": float(y), "theta": float(th)}
                               for x, y, th in repro],
                    "clamped": [bool(c) for c in clamped],
                })
            errors = np.hypot(repro[1:, 0] - gt[1:, 0], repro[1:, 1] - gt[1:, 1])
            row.traj_count += 1
            row.sum_ade += float(errors.mean())
            row.sum_fde += float(errors[-1])
            row.miss_count += int(errors[-1] > MISS_THRESHOLD)
            row.clamped_steps += int(clamped.sum())
            row.step_count += int(clamped.shape[0])
    return report
