"""Small planar-geometry helpers used throughout the package."""

import math


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.atan2(math.sin(theta), math.cos(theta))


def heading_of(vx: float, vy: float) -> float:
    """Direction of travel of a velocity vector, in (-pi, pi]."""
    return math.atan2(vy, vx)
