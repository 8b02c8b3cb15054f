"""Egocentric coordinate transforms and the smooth pose-following control law.

The planner steers a differential-drive robot toward a target pose by
expressing the target in an egocentric frame (r, theta, delta): distance to
the target, target heading relative to the line of sight, and robot heading
relative to the line of sight. A nonlinear feedback law maps that frame to a
path curvature; a modulation rule maps curvature and target distance to a
linear velocity. All angles are radians wrapped to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Below this target distance the line of sight is undefined; the curvature
# is clamped instead of dividing by ~0.
R_EPSILON = 1e-6
KAPPA_MAX = 20.0

# Linear slowdown radius: v scales with min(1, r / R_SLOWDOWN) so trajectories
# terminate at rest at the target. 0.5 m keeps worst-case convergence of the
# closed loop from tight start poses under a minute.
R_SLOWDOWN = 0.5


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(angle, math.tau)
    if w <= -math.pi:
        return math.pi
    return w


@dataclass(frozen=True)
class Pose:
    """Planar pose: position in meters, heading in radians in (-pi, pi]."""

    x: float
    y: float
    heading: float

    def wrapped(self) -> "Pose":
        return Pose(self.x, self.y, wrap_angle(self.heading))

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)


@dataclass(frozen=True)
class EgocentricCoords:
    """Target expressed relative to the robot: distance r >= 0, angles in (-pi, pi]."""

    r: float
    theta: float
    delta: float


@dataclass(frozen=True)
class ControlGains:
    """Gains of the pose-following law plus the velocity-modulation shape.

    k1 weighs the target-heading correction, k2 the line-of-sight convergence
    rate. curvature_beta/curvature_lambda shape v = v_max / (1 + beta*|kappa|^lambda)
    so the commanded angular rate stays bounded on tight turns.
    """

    k1: float = 1.2
    k2: float = 3.0
    curvature_beta: float = 0.4
    curvature_lambda: float = 2.0

    def __post_init__(self) -> None:
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be strictly positive")
        if self.curvature_beta < 0:
            raise ValueError("curvature_beta must be >= 0")
        if self.curvature_lambda < 1:
            raise ValueError("curvature_lambda must be >= 1")


def egocentric_coords(robot: Pose, target: Pose) -> EgocentricCoords:
    """Express `target` in the robot's egocentric (r, theta, delta) frame.

    r is the Euclidean distance to the target. theta is the target heading
    minus the line-of-sight direction, delta the robot heading minus the
    line-of-sight direction. Coincident positions are allowed: the line of
    sight then defaults to the robot heading, giving delta = 0.
    """
    dx = target.x - robot.x
    dy = target.y - robot.y
    r = math.hypot(dx, dy)
    if r < R_EPSILON:
        los = robot.heading
    else:
        los = math.atan2(dy, dx)
    return EgocentricCoords(
        r=r,
        theta=wrap_angle(target.heading - los),
        delta=wrap_angle(robot.heading - los),
    )


def target_from_param(robot: Pose, r: float, theta: float, delta: float) -> Pose:
    """Inverse of `egocentric_coords`: world-frame target pose for (r, theta, delta)."""
    if r < 0:
        raise ValueError("r must be >= 0")
    los = wrap_angle(robot.heading - delta)
    return Pose(
        x=robot.x + r * math.cos(los),
        y=robot.y + r * math.sin(los),
        heading=wrap_angle(los + theta),
    )


def control_law_curvature(coords: EgocentricCoords, gains: ControlGains) -> float:
    """Path curvature kappa (1/m) of the pose-following law at `coords`.

    Returns -(1/r) * [k2*(delta - atan(-k1*theta)) + (1 + k1/(1+(k1*theta)^2)) * sin(delta)].
    For r below R_EPSILON the result is clamped to +-KAPPA_MAX.
    """
    k1, k2 = gains.k1, gains.k2
    theta, delta = coords.theta, coords.delta
    bracket = k2 * (delta - math.atan(-k1 * theta))
    bracket += (1.0 + k1 / (1.0 + (k1 * theta) ** 2)) * math.sin(delta)
    if coords.r < R_EPSILON:
        kappa = -bracket / R_EPSILON
        return min(KAPPA_MAX, max(-KAPPA_MAX, kappa))
    return -bracket / coords.r


def velocity_modulation(kappa: float, z_vmax: float, r: float, gains: ControlGains) -> float:
    """Linear velocity command in [0, z_vmax].

    Velocity drops on high-curvature arcs, 1/(1 + beta*|kappa|^lambda), and
    linearly inside R_SLOWDOWN of the target so the robot arrives at rest.
    """
    if z_vmax < 0:
        raise ValueError("z_vmax must be >= 0")
    v = z_vmax / (1.0 + gains.curvature_beta * abs(kappa) ** gains.curvature_lambda)
    return v * min(1.0, r / R_SLOWDOWN)
