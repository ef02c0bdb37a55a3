"""Class-specific kinematic models as deterministic, differentiable rollouts.

Three models share one interface: a T x 2 control matrix is squashed into the
feasible set with per-channel tanh rescaling and then integrated with an
explicit Euler step, so positions respond to a control one step after it is
applied.

* ``unicycle``          -- controls (acceleration, curvature); speed clamped.
* ``single_integrator`` -- controls are the velocity itself.
* ``double_integrator`` -- controls (ax, ay); the velocity is radially clipped
  to the speed limit.

For the two integrator models the tanh channels are scaled to ``limit/sqrt(2)``
so the control **vector** magnitude stays inside the scalar class limit no
matter how the trajectory is later rotated.  Together with the clipping this
makes every squashed rollout pass the feasibility audit with zero violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvariantViolation, NonFiniteInput
from .geometry import wrap_angle
from .scene import AgentClass


class KinModel(str, Enum):
    UNICYCLE = "unicycle"
    SINGLE_INTEGRATOR = "single_integrator"
    DOUBLE_INTEGRATOR = "double_integrator"


@dataclass(frozen=True)
class KinematicLimits:
    """Control and state bounds; infinities disable the matching check."""

    a_min: float = -8.0
    a_max: float = 8.0
    kappa_min: float = -0.3
    kappa_max: float = 0.3
    v_min: float = 0.0
    v_max: float = 10.0

    def __post_init__(self):
        if not self.a_min < self.a_max:
            raise InvariantViolation("a_min must be < a_max")
        if not self.kappa_min < self.kappa_max:
            raise InvariantViolation("kappa_min must be < kappa_max")
        if not self.v_min < self.v_max:
            raise InvariantViolation("v_min must be < v_max")

    def to_dict(self) -> dict:
        return {"a_min": self.a_min, "a_max": self.a_max,
                "kappa_min": self.kappa_min, "kappa_max": self.kappa_max,
                "v_min": self.v_min, "v_max": self.v_max}


# Vehicles get a generous speed cap (the data gives none) and may reverse
# slowly; cyclists reuse the vehicle envelope, pedestrian curvature reuses the
# vehicle bound for lack of anything better (see README).
VEHICLE_V_MIN = -2.0
VEHICLE_V_MAX = 50.0
INF = float("inf")


def default_limits(agent_class: AgentClass, model: KinModel) -> KinematicLimits:
    """Per-class control limits for the given model."""
    model = KinModel(model)
    agent_class = AgentClass(agent_class)
    if agent_class in (AgentClass.VEHICLE, AgentClass.CYCLIST):
        v_min, v_max = VEHICLE_V_MIN, VEHICLE_V_MAX
    else:
        v_min, v_max = 0.0, 10.0
    if model is KinModel.UNICYCLE:
        return KinematicLimits(-8.0, 8.0, -0.3, 0.3, v_min, v_max)
    if model is KinModel.DOUBLE_INTEGRATOR:
        return KinematicLimits(-8.0, 8.0, -INF, INF, v_min, v_max)
    # Single integrator: plain velocity control, accelerations unconstrained.
    return KinematicLimits(-INF, INF, -INF, INF, v_min, v_max)


def control_channel_bounds(model: KinModel, limits: KinematicLimits
                           ) -> tuple[tuple[float, float], tuple[float, float]]:
    """Per-channel (lo, hi) squashing bounds for the model's controls."""
    model = KinModel(model)
    if model is KinModel.UNICYCLE:
        for value in (limits.a_min, limits.a_max, limits.kappa_min, limits.kappa_max):
            if not math.isfinite(value):
                raise InvariantViolation("unicycle squashing needs finite a/kappa bounds")
        return ((limits.a_min, limits.a_max), (limits.kappa_min, limits.kappa_max))
    if model is KinModel.DOUBLE_INTEGRATOR:
        mag = min(-limits.a_min, limits.a_max)
        if not math.isfinite(mag):
            raise InvariantViolation("double integrator squashing needs finite a bounds")
        half = mag / math.sqrt(2.0)
        return ((-half, half), (-half, half))
    if not math.isfinite(limits.v_max):
        raise InvariantViolation("single integrator squashing needs a finite v_max")
    half = limits.v_max / math.sqrt(2.0)
    return ((-half, half), (-half, half))


@dataclass(frozen=True)
class ControlSequence:
    """Controls for one trajectory, before and/or after squashing."""

    model: KinModel
    squashed: np.ndarray
    raw: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "squashed", np.asarray(self.squashed, dtype=float))
        if self.raw is not None:
            object.__setattr__(self, "raw", np.asarray(self.raw, dtype=float))


@dataclass(frozen=True)
class KinState:
    """Rollout state; ``v`` is the unicycle's scalar speed, vx/vy the rest."""

    x: float
    y: float
    theta: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    v: float = 0.0

    @staticmethod
    def unicycle(x: float, y: float, theta: float, v: float) -> "KinState":
        return KinState(x, y, theta, v * math.cos(theta), v * math.sin(theta), v)

    @staticmethod
    def integrator(x: float, y: float, vx: float = 0.0, vy: float = 0.0) -> "KinState":
        theta = math.atan2(vy, vx) if (vx or vy) else 0.0
        return KinState(x, y, theta, vx, vy, math.hypot(vx, vy))

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "theta": self.theta,
                "vx": self.vx, "vy": self.vy}


def squash_controls(raw, model: KinModel, limits: KinematicLimits) -> np.ndarray:
    """Map unbounded controls into the feasible set, channel by channel.

    ``out = lo + (hi - lo) * (tanh(raw) + 1) / 2`` per channel; the image is
    the open interval (lo, hi) up to float saturation.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != 2:
        raise InvariantViolation(f"controls must have shape (T, 2), got {raw.shape}")
    out = np.empty_like(raw)
    for c, (lo, hi) in enumerate(control_channel_bounds(model, limits)):
        out[:, c] = lo + (hi - lo) * (np.tanh(raw[:, c]) + 1.0) / 2.0
    return out


def _check_finite(initial: KinState, controls: np.ndarray) -> None:
    fields = (initial.x, initial.y, initial.theta, initial.vx, initial.vy, initial.v)
    if not all(math.isfinite(f) for f in fields) or not np.isfinite(controls).all():
        raise NonFiniteInput("rollout inputs must be finite")


def _rollout_unicycle(initial: KinState, controls: np.ndarray, dt: float,
                      limits: KinematicLimits):
    T = controls.shape[0]
    xs = np.empty(T); ys = np.empty(T); thetas = np.empty(T); vs = np.empty(T)
    clamped = np.zeros(T, dtype=bool)
    x, y, theta, v = initial.x, initial.y, initial.theta, initial.v
    for t in range(T):
        a, kappa = controls[t, 0], controls[t, 1]
        x += v * math.cos(theta) * dt
        y += v * math.sin(theta) * dt
        theta = wrap_angle(theta + kappa * v * dt)
        v_new = v + a * dt
        if v_new < limits.v_min:
            v_new = limits.v_min
            clamped[t] = True
        elif v_new > limits.v_max:
            v_new = limits.v_max
            clamped[t] = True
        v = v_new
        xs[t], ys[t], thetas[t], vs[t] = x, y, theta, v
    return xs, ys, thetas, vs, clamped


def _rollout_double(initial: KinState, controls: np.ndarray, dt: float,
                    limits: KinematicLimits):
    T = controls.shape[0]
    xs = np.empty(T); ys = np.empty(T)
    vxs = np.empty(T); vys = np.empty(T)
    clipped = np.zeros(T, dtype=bool)
    x, y, vx, vy = initial.x, initial.y, initial.vx, initial.vy
    for t in range(T):
        x += vx * dt
        y += vy * dt
        nvx = vx + controls[t, 0] * dt
        nvy = vy + controls[t, 1] * dt
        speed = math.hypot(nvx, nvy)
        if speed > limits.v_max:
            scale = limits.v_max / speed
            nvx *= scale
            nvy *= scale
            clipped[t] = True
        vx, vy = nvx, nvy
        xs[t], ys[t], vxs[t], vys[t] = x, y, vx, vy
    return xs, ys, vxs, vys, clipped


def _rollout_single(initial: KinState, controls: np.ndarray, dt: float):
    T = controls.shape[0]
    xs = np.empty(T); ys = np.empty(T)
    x, y = initial.x, initial.y
    for t in range(T):
        x += controls[t, 0] * dt
        y += controls[t, 1] * dt
        xs[t], ys[t] = x, y
    return xs, ys


def rollout(model: KinModel, initial: KinState, controls, dt: float,
            limits: KinematicLimits) -> list[KinState]:
    """Integrate already-squashed controls; returns the T post-step states."""
    model = KinModel(model)
    controls = np.asarray(controls, dtype=float)
    if controls.ndim != 2 or controls.shape[1] != 2:
        raise InvariantViolation(f"controls must have shape (T, 2), got {controls.shape}")
    if dt <= 0:
        raise InvariantViolation("dt must be > 0")
    _check_finite(initial, controls)
    states: list[KinState] = []
    if model is KinModel.UNICYCLE:
        xs, ys, thetas, vs, _ = _rollout_unicycle(initial, controls, dt, limits)
        for t in range(controls.shape[0]):
            states.append(KinState.unicycle(xs[t], ys[t], thetas[t], vs[t]))
    elif model is KinModel.DOUBLE_INTEGRATOR:
        xs, ys, vxs, vys, _ = _rollout_double(initial, controls, dt, limits)
        held = initial.theta
        for t in range(controls.shape[0]):
            if math.hypot(vxs[t], vys[t]) > 0.1:
                held = math.atan2(vys[t], vxs[t])
            states.append(KinState(xs[t], ys[t], held, vxs[t], vys[t],
                                   math.hypot(vxs[t], vys[t])))
    else:
        xs, ys = _rollout_single(initial, controls, dt)
        held = initial.theta
        for t in range(controls.shape[0]):
            vx, vy = controls[t, 0], controls[t, 1]
            if math.hypot(vx, vy) > 0.1:
                held = math.atan2(vy, vx)
            states.append(KinState(xs[t], ys[t], held, vx, vy, math.hypot(vx, vy)))
    return states


def rollout_positions(model: KinModel, initial: KinState, controls, dt: float,
                      limits: KinematicLimits) -> np.ndarray:
    """Positions only, shape (T, 2); same integration as :func:`rollout`."""
    model = KinModel(model)
    controls = np.asarray(controls, dtype=float)
    _check_finite(initial, controls)
    if model is KinModel.UNICYCLE:
        xs, ys, _, _, _ = _rollout_unicycle(initial, controls, dt, limits)
    elif model is KinModel.DOUBLE_INTEGRATOR:
        xs, ys, _, _, _ = _rollout_double(initial, controls, dt, limits)
    else:
        xs, ys = _rollout_single(initial, controls, dt)
    return np.stack([xs, ys], axis=1)


def rollout_jacobian(model: KinModel, initial: KinState, controls, dt: float,
                     limits: KinematicLimits) -> np.ndarray:
    """d positions / d squashed controls, shape (T, 2, T, 2).

    ``J[k, :, t, :]`` is the sensitivity of the position after step ``k + 1``
    to the control applied at step ``t``; the explicit Euler update makes the
    result lower-block-triangular in time.  Engaged speed clips/clamps follow
    the projection convention and carry zero gradient.
    """
    model = KinModel(model)
    controls = np.asarray(controls, dtype=float)
    if controls.ndim != 2 or controls.shape[1] != 2:
        raise InvariantViolation(f"controls must have shape (T, 2), got {controls.shape}")
    _check_finite(initial, controls)
    T = controls.shape[0]
    J = np.zeros((T, 2, T, 2))

    if model is KinModel.SINGLE_INTEGRATOR:
        for k in range(T):
            for t in range(k + 1):
                J[k, 0, t, 0] = dt
                J[k, 1, t, 1] = dt
        return J

    if model is KinModel.DOUBLE_INTEGRATOR:
        _, _, _, _, clipped = _rollout_double(initial, controls, dt, limits)
        # Sensitivities of (x, y) and (vx, vy) w.r.t. each control entry;
        # the two coordinates never mix, so one (T, 2) array per axis pair.
        sp = np.zeros((T, 2))
        sv = np.zeros((T, 2))
        for t in range(T):
            sp = sp + dt * sv
            J[t, 0, :, 0] = sp[:, 0]
            J[t, 1, :, 1] = sp[:, 1]
            if clipped[t]:
                sv = np.zeros((T, 2))
            else:
                sv = sv.copy()
                sv[t, 0] += dt
                sv[t, 1] += dt
        return J

    xs, ys, thetas, vs, clamped = _rollout_unicycle(initial, controls, dt, limits)
    sx = np.zeros((T, 2)); sy = np.zeros((T, 2))
    sth = np.zeros((T, 2)); sv = np.zeros((T, 2))
    theta, v = initial.theta, initial.v
    for t in range(T):
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        sx = sx + dt * (cos_t * sv - v * sin_t * sth)
        sy = sy + dt * (sin_t * sv + v * cos_t * sth)
        J[t, 0] = sx
        J[t, 1] = sy
        sth = sth + dt * controls[t, 1] * sv
        sth[t, 1] += dt * v
        if clamped[t]:
            sv = np.zeros((T, 2))
        else:
            sv = sv.copy()
            sv[t, 0] += dt
        theta, v = thetas[t], vs[t]
    return J
