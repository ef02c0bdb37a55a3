"""Kinematic-limit auditing of trajectories.

Derivatives are estimated from position differences only, so the auditor works
identically on ground-truth tracks and model rollouts:

* speed      ``|p[t+1] - p[t]| / dt``
* accel      ``(speed[t+1] - speed[t]) / dt`` -- the signed change of speed
  along the motion.  The magnitude of the full velocity-difference vector is
  reported alongside as a diagnostic; it is not checked against the limit
  because it folds in centripetal velocity change, which for a turning agent
  exceeds any reasonable longitudinal bound at speed.
* curvature  ``wrap(theta[t+1] - theta[t]) / (speed[t] * dt)`` with headings
  taken from the velocity estimates.  Curvature is undefined (and excluded)
  when either endpoint speed is below ``V_CURV_MIN`` or the motion reverses
  between the two steps (a cusp has no curvature).

Checks whose limit is infinite are skipped, which is how class differences are
expressed: pedestrians carry no curvature bound, integrator models no
curvature, the single integrator no acceleration bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import TooShort
from .kinematics import KinematicLimits
from .scene import AgentClass, Scene

# Curvature is excluded below this speed: dividing a heading difference by a
# near-zero arc length manufactures violations out of noise.
V_CURV_MIN = 0.1  # m/s

# Slack applied to every limit check so estimates that sit exactly on a bound
# (velocity clips, clamped controls) are not flagged by float roundoff.
AUDIT_TOL = 1e-9


@dataclass(frozen=True)
class TrackDerivatives:
    """Finite-difference derivative estimates for one trajectory segment."""

    speeds: np.ndarray          # (N-1,)
    accel_long: np.ndarray      # (N-2,) signed speed change per second
    accel_mag: np.ndarray       # (N-2,) |dv|/dt, diagnostic only
    curvature: np.ndarray       # (N-2,) NaN where undefined
    curvature_defined: np.ndarray  # (N-2,) bool


def estimate_derivatives(positions, dt: float) -> TrackDerivatives:
    """Per-step speed, longitudinal acceleration, and curvature estimates."""
    p = np.asarray(positions, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise TooShort(f"positions must have shape (N, 2), got {p.shape}")
    if p.shape[0] < 3:
        raise TooShort(f"need >= 3 positions, got {p.shape[0]}")
    if dt <= 0:
        raise TooShort("dt must be > 0")
    vel = np.diff(p, axis=0) / dt
    speeds = np.hypot(vel[:, 0], vel[:, 1])
    accel_long = np.diff(speeds) / dt
    dvel = np.diff(vel, axis=0)
    accel_mag = np.hypot(dvel[:, 0], dvel[:, 1]) / dt

    thetas = np.arctan2(vel[:, 1], vel[:, 0])
    dtheta = np.arctan2(np.sin(np.diff(thetas)), np.cos(np.diff(thetas)))
    moving = (speeds[:-1] >= V_CURV_MIN) & (speeds[1:] >= V_CURV_MIN)
    forward = np.einsum("ij,ij->i", vel[:-1], vel[1:]) >= 0.0
    defined = moving & forward
    curvature = np.full(dtheta.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = dtheta / (speeds[:-1] * dt)
    curvature[defined] = kappa[defined]
    return TrackDerivatives(speeds, accel_long, accel_mag, curvature, defined)


@dataclass
class AuditCounts:
    """Violation tallies for one agent class (or the overall union)."""

    step_count: int = 0
    infeasible_accel_steps: int = 0
    infeasible_curv_steps: int = 0
    infeasible_speed_steps: int = 0
    infeasible_any_steps: int = 0
    traj_count: int = 0
    infeasible_accel_trajs: int = 0
    infeasible_curv_trajs: int = 0
    infeasible_speed_trajs: int = 0
    infeasible_any_trajs: int = 0
    skipped_trajs: int = 0

    def add(self, other: "AuditCounts") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))

    @staticmethod
    def _pct(count: int, total: int) -> float:
        return 100.0 * count / total if total else 0.0

    def to_dict(self) -> dict:
        d = {name: getattr(self, name) for name in self.__dataclass_fields__}
        d["infeasible_accel_steps_pct"] = self._pct(self.infeasible_accel_steps, self.step_count)
        d["infeasible_curv_steps_pct"] = self._pct(self.infeasible_curv_steps, self.step_count)
        d["infeasible_speed_steps_pct"] = self._pct(self.infeasible_speed_steps, self.step_count)
        d["infeasible_any_steps_pct"] = self._pct(self.infeasible_any_steps, self.step_count)
        d["infeasible_accel_trajs_pct"] = self._pct(self.infeasible_accel_trajs, self.traj_count)
        d["infeasible_curv_trajs_pct"] = self._pct(self.infeasible_curv_trajs, self.traj_count)
        d["infeasible_speed_trajs_pct"] = self._pct(self.infeasible_speed_trajs, self.traj_count)
        d["infeasible_any_trajs_pct"] = self._pct(self.infeasible_any_trajs, self.traj_count)
        return d


@dataclass
class AuditReport:
    per_class: dict[AgentClass, AuditCounts] = field(default_factory=dict)
    overall: AuditCounts = field(default_factory=AuditCounts)

    def to_dict(self) -> dict:
        return {
            "per_class": {cls.value: counts.to_dict()
                          for cls, counts in sorted(self.per_class.items(),
                                                    key=lambda kv: kv[0].value)},
            "overall": self.overall.to_dict(),
        }

    def to_csv(self) -> str:
        header = ("group,step_count,accel_steps_pct,curv_steps_pct,"
                  "speed_steps_pct,any_steps_pct,traj_count,accel_trajs_pct,"
                  "curv_trajs_pct,speed_trajs_pct,any_trajs_pct")
        lines = [header]
        rows = [(cls.value, counts) for cls, counts
                in sorted(self.per_class.items(), key=lambda kv: kv[0].value)]
        rows.append(("overall", self.overall))
        for name, c in rows:
            d = c.to_dict()
            lines.append(
                f"{name},{c.step_count},{d['infeasible_accel_steps_pct']},"
                f"{d['infeasible_curv_steps_pct']},{d['infeasible_speed_steps_pct']},"
                f"{d['infeasible_any_steps_pct']},{c.traj_count},"
                f"{d['infeasible_accel_trajs_pct']},{d['infeasible_curv_trajs_pct']},"
                f"{d['infeasible_speed_trajs_pct']},{d['infeasible_any_trajs_pct']}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AuditTrajectory:
    """Input to :func:`audit`: one trajectory with an optional validity mask."""

    agent_class: AgentClass
    positions: np.ndarray
    valid: np.ndarray | None = None

    def segments(self) -> list[np.ndarray]:
        """Contiguous valid runs; differencing across occlusions is meaningless."""
        p = np.asarray(self.positions, dtype=float)
        if self.valid is None:
            return [p]
        mask = np.asarray(self.valid, dtype=bool)
        segments = []
        start = None
        for i, ok in enumerate(mask):
            if ok and start is None:
                start = i
            elif not ok and start is not None:
                segments.append(p[start:i])
                start = None
        if start is not None:
            segments.append(p[start:])
        return segments


def _audit_segment(seg: np.ndarray, limits: KinematicLimits, dt: float,
                   counts: AuditCounts) -> tuple[bool, bool, bool]:
    der = estimate_derivatives(seg, dt)
    n_steps = seg.shape[0] - 1
    accel_bad = np.zeros(n_steps, dtype=bool)
    curv_bad = np.zeros(n_steps, dtype=bool)
    speed_bad = np.zeros(n_steps, dtype=bool)

    if math.isfinite(limits.a_min) or math.isfinite(limits.a_max):
        bad = ((der.accel_long > limits.a_max + AUDIT_TOL)
               | (der.accel_long < limits.a_min - AUDIT_TOL))
        accel_bad[: n_steps - 1] = bad
    if math.isfinite(limits.kappa_min) or math.isfinite(limits.kappa_max):
        kappa = der.curvature
        bad = der.curvature_defined & ((kappa > limits.kappa_max + AUDIT_TOL)
                                       | (kappa < limits.kappa_min - AUDIT_TOL))
        curv_bad[: n_steps - 1] = bad
    if math.isfinite(limits.v_max):
        speed_cap = max(limits.v_max, -limits.v_min if math.isfinite(limits.v_min) else 0.0)
        speed_bad[:] = der.speeds > speed_cap + AUDIT_TOL

    any_bad = accel_bad | curv_bad | speed_bad
    counts.step_count += n_steps
    counts.infeasible_accel_steps += int(accel_bad.sum())
    counts.infeasible_curv_steps += int(curv_bad.sum())
    counts.infeasible_speed_steps += int(speed_bad.sum())
    counts.infeasible_any_steps += int(any_bad.sum())
    return bool(accel_bad.any()), bool(curv_bad.any()), bool(speed_bad.any())


def audit(trajectories: Iterable[AuditTrajectory],
          limits_by_class: Mapping[AgentClass, KinematicLimits],
          dt: float) -> AuditReport:
    """Count limit violations per step and per trajectory, per agent class.

    A trajectory is infeasible if any of its steps is; trajectories too short
    to differentiate are skipped and counted separately.
    """
    report = AuditReport()
    for traj in trajectories:
        cls = AgentClass(traj.agent_class)
        counts = report.per_class.setdefault(cls, AuditCounts())
        limits = limits_by_class[cls]
        flags = (False, False, False)
        audited = False
        for seg in traj.segments():
            if seg.shape[0] < 3:
                continue
            seg_flags = _audit_segment(seg, limits, dt, counts)
            flags = tuple(a or b for a, b in zip(flags, seg_flags))
            audited = True
        if not audited:
            counts.skipped_trajs += 1
            continue
        counts.traj_count += 1
        accel, curv, speed = flags
        counts.infeasible_accel_trajs += int(accel)
        counts.infeasible_curv_trajs += int(curv)
        counts.infeasible_speed_trajs += int(speed)
        counts.infeasible_any_trajs += int(accel or curv or speed)
    for counts in report.per_class.values():
        report.overall.add(counts)
    return report


def scene_audit_trajectories(scene: Scene) -> list[AuditTrajectory]:
    """All of a scene's tracks as audit inputs, with their validity masks."""
    out = []
    for track in scene.tracks:
        positions = track.positions()
        valid = np.array([s.valid for s in track.states], dtype=bool)
        out.append(AuditTrajectory(track.agent_class, positions, valid))
    return out
