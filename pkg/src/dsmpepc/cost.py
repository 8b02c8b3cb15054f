"""Expected trajectory cost: baseline and distance+TTC ("ds") modes.

Per segment the cost combines progress toward the goal, actuation effort, and
a collision penalty, weighted by survivability (the running product of
per-segment non-collision probabilities). The ds mode scales the distance-
based collision probability by an anticipatory factor driven by
time-to-collision and adds a bounded terminal bonus in [-1, 0] that prefers
safe re-orientations, which is what resolves deadlocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose
from .kinematics import PlannerConfig, RobotState, Trajectory
from .world import (
    NavigationField,
    World,
    _ttc_assuming_clear,
    distance_to_nearest_batch,
    time_to_collision,
)

BASELINE_MPEPC = "baseline_mpepc"
DS_MPEPC = "ds_mpepc"

# When the distance-based probability is below this, the anticipatory factor
# scales something negligible; the TTC query is skipped and recorded as +inf.
_P_C_SKIP = 1e-12


@dataclass(frozen=True)
class CostParams:
    """Weights and scales of the trajectory cost.

    sigma_d shapes the distance-based collision probability; `a` in [0, 1)
    limits how much a long time-to-collision can discount it. The w_* weights
    and c_collision set the progress/effort/collision trade-off;
    include_terminal exists so the terminal bonus can be ablated.
    """

    sigma_d: float = 0.2
    a: float = 0.7
    sigma_inv_ttc: float = 0.5
    sigma_inv_ttg: float = 1e-3
    w_progress: float = 5.0
    w_action_v: float = 0.02
    w_action_w: float = 0.02
    c_collision: float = 1.0
    mode: str = DS_MPEPC
    include_terminal: bool = True
    goal_tolerance: float = 0.3
    v_epsilon: float = 1e-3

    def __post_init__(self) -> None:
        if self.sigma_d <= 0:
            raise ValueError("sigma_d must be positive")
        if not 0.0 <= self.a < 1.0:
            raise ValueError("a must be in [0, 1)")
        if self.sigma_inv_ttc <= 0 or self.sigma_inv_ttg <= 0:
            raise ValueError("sigma_inv_ttc and sigma_inv_ttg must be positive")
        for name in ("w_progress", "w_action_v", "w_action_w", "c_collision"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.mode not in (BASELINE_MPEPC, DS_MPEPC):
            raise ValueError(f"unknown cost mode {self.mode!r}")
        if self.goal_tolerance <= 0 or self.v_epsilon <= 0:
            raise ValueError("goal_tolerance and v_epsilon must be positive")


@dataclass(frozen=True)
class SegmentEvaluation:
    """Hazard and cost terms of one trajectory segment.

    p_c is the collision probability effective in the evaluated mode (the
    modified one in ds mode); ttc is None in baseline mode. The j_* terms are
    stored unweighted by survivability.
    """

    index: int
    d_o: float
    d_g: float
    ttc: float | None
    p_c: float
    p_s: float
    j_progress: float
    j_action: float
    j_collision: float


@dataclass(frozen=True)
class TerminalEvaluation:
    """Terminal-state bonus: j_terminal = -p_s_N * C_TTG * C_TTC in [-1, 0]."""

    ttg: float
    ttc_terminal: float
    c_ttg: float
    c_ttc: float
    p_s_N: float
    j_terminal: float


@dataclass(frozen=True)
class CostBreakdown:
    """Per-segment evaluations, optional terminal evaluation, and the total."""

    segments: tuple[SegmentEvaluation, ...]
    terminal: TerminalEvaluation | None
    total: float


def collision_probability(d_o: float, params: CostParams) -> float:
    """Bell-shaped distance-based collision probability exp(-d_o^2 / sigma_d^2)."""
    if d_o < 0:
        raise ValueError("d_o must be >= 0")
    return math.exp(-(d_o * d_o) / (params.sigma_d * params.sigma_d))


def _inverse(value: float) -> float:
    """1/value with the exact conventions 1/inf = 0 and 1/0 = inf."""
    if value == 0.0:
        return math.inf
    if math.isinf(value):
        return 0.0
    return 1.0 / value


def anticipatory_factor(ttc: float, params: CostParams) -> float:
    """(1 - a * exp(-(1/ttc)^2 / sigma_inv_ttc^2)) in [1 - a, 1].

    Equals 1 exactly at ttc = 0 (contact: no discount) and 1 - a exactly at
    ttc = +inf (motion that never collides earns the full discount).
    """
    if ttc < 0:
        raise ValueError("ttc must be >= 0")
    inv = _inverse(ttc)
    sig = params.sigma_inv_ttc
    return 1.0 - params.a * math.exp(-(inv * inv) / (sig * sig))


def modified_collision_probability(d_o: float, ttc: float, params: CostParams) -> float:
    """Distance-based probability discounted by the anticipatory factor.

    Satisfies (1 - a) * p_c <= result <= p_c for every ttc.
    """
    return collision_probability(d_o, params) * anticipatory_factor(ttc, params)


def survivability(p_c_sequence) -> list[float]:
    """Running products prod_{k<=i} (1 - p_c_k); index 0 of the result is
    survivability after the first segment."""
    out = []
    p_s = 1.0
    for p_c in p_c_sequence:
        if not 0.0 <= p_c <= 1.0:
            raise ValueError("collision probabilities must lie in [0, 1]")
        p_s = p_s * (1.0 - p_c)
        out.append(p_s)
    return out


def expected_time_to_goal(terminal: RobotState, goal: tuple[float, float],
                          params: CostParams) -> float:
    """Distance to goal over the velocity component toward it.

    0 when already within goal_tolerance; +inf when the terminal state is
    (nearly) stopped or moving with no component toward the goal.
    """
    dx = goal[0] - terminal.pose.x
    dy = goal[1] - terminal.pose.y
    d = math.hypot(dx, dy)
    if d <= params.goal_tolerance:
        return 0.0
    v_goal = terminal.v * (
        math.cos(terminal.pose.heading) * dx + math.sin(terminal.pose.heading) * dy
    ) / d
    if v_goal > params.v_epsilon:
        return d / v_goal
    return math.inf


def terminal_ttc(terminal: RobotState, world: World, t_N: float, v_limit: float) -> float:
    """Time to collision if the robot drove from the terminal state at full
    speed along its terminal heading, with obstacles predicted from t_N."""
    velocity = (
        v_limit * math.cos(terminal.pose.heading),
        v_limit * math.sin(terminal.pose.heading),
    )
    return time_to_collision(world, (terminal.pose.x, terminal.pose.y), velocity, t_N)


def terminal_bonus(p_s_N: float, ttg: float, ttc: float,
                   params: CostParams) -> tuple[float, float, float]:
    """(C_TTG, C_TTC, j_terminal) with j_terminal = -p_s_N * C_TTG * C_TTC.

    Both C factors reach 1 exactly at infinite TTG/TTC, so the -1 bound is
    attainable; j_terminal is exactly 0 whenever p_s_N is 0.
    """
    if not 0.0 <= p_s_N <= 1.0:
        raise ValueError("p_s_N must lie in [0, 1]")
    inv_g = _inverse(ttg)
    inv_c = _inverse(ttc)
    c_ttg = math.exp(-(inv_g * inv_g) / (params.sigma_inv_ttg * params.sigma_inv_ttg))
    c_ttc = math.exp(-(inv_c * inv_c) / (params.sigma_inv_ttc * params.sigma_inv_ttc))
    if p_s_N == 0.0:
        return (c_ttg, c_ttc, 0.0)
    return (c_ttg, c_ttc, -(p_s_N * c_ttg * c_ttc))


def terminal_cost(terminal: RobotState, p_s_N: float, goal: tuple[float, float],
                  world: World, params: CostParams, v_limit: float) -> TerminalEvaluation:
    """Evaluate the terminal bonus at a trajectory's last state."""
    ttg = expected_time_to_goal(terminal, goal, params)
    ttc = terminal_ttc(terminal, world, terminal.t, v_limit)
    c_ttg, c_ttc, j_term = terminal_bonus(p_s_N, ttg, ttc, params)
    return TerminalEvaluation(
        ttg=ttg, ttc_terminal=ttc, c_ttg=c_ttg, c_ttc=c_ttc,
        p_s_N=p_s_N, j_terminal=j_term,
    )


def _goal_xy(goal) -> tuple[float, float]:
    if isinstance(goal, Pose):
        return (goal.x, goal.y)
    return (float(goal[0]), float(goal[1]))


def trajectory_cost(
    traj: Trajectory,
    goal,
    world: World,
    params: CostParams,
    cfg: PlannerConfig,
    nav: NavigationField | None = None,
) -> CostBreakdown:
    """Evaluate a rolled-out trajectory under the configured cost mode.

    Segment hazards are evaluated at both endpoints against obstacles
    predicted at the matching times; the closer endpoint defines the
    segment's d_o, and its TTC feeds the anticipatory factor (so an
    in-contact endpoint forces probability 1 exactly). Baseline mode uses the
    distance-only probability and no terminal term.
    """
    states = traj.states
    n = len(states) - 1
    if n < 1:
        raise ValueError("trajectory must contain at least two states")
    xs = np.array([s.pose.x for s in states])
    ys = np.array([s.pose.y for s in states])
    ts = np.array([s.t for s in states])
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise ValueError("trajectory contains non-finite states")

    goal_xy = _goal_xy(goal)
    if nav is None:
        nav = NavigationField(world.grid, goal_xy)
    nf = nav.distance_batch(xs, ys)
    point_d = distance_to_nearest_batch(world, xs, ys, ts)

    ds_mode = params.mode == DS_MPEPC
    point_ttc: dict[int, float] = {}

    def ttc_at(j: int) -> float:
        if j not in point_ttc:
            if point_d[j] <= 0.0:
                point_ttc[j] = 0.0
            else:
                s = states[j]
                point_ttc[j] = _ttc_assuming_clear(
                    world, s.pose.x, s.pose.y,
                    s.v * math.cos(s.pose.heading), s.v * math.sin(s.pose.heading),
                    s.t,
                )
        return point_ttc[j]

    h = cfg.step_h
    segments = []
    p_s = 1.0
    total = 0.0
    for i in range(1, n + 1):
        j_star = i - 1 if point_d[i - 1] <= point_d[i] else i
        d_o = float(point_d[j_star])
        p_c_reactive = collision_probability(d_o, params)
        if ds_mode:
            if p_c_reactive >= _P_C_SKIP:
                ttc: float | None = ttc_at(j_star)
            else:
                ttc = math.inf
            p_c = p_c_reactive * anticipatory_factor(ttc, params)
        else:
            ttc = None
            p_c = p_c_reactive
        p_s = p_s * (1.0 - p_c)
        j_progress = params.w_progress * float(nf[i] - nf[i - 1])
        j_action = h * (
            params.w_action_v * states[i].v ** 2 + params.w_action_w * states[i].omega ** 2
        )
        j_collision = params.c_collision
        total += p_s * j_progress + j_action + (1.0 - p_s) * j_collision
        segments.append(
            SegmentEvaluation(
                index=i, d_o=d_o, d_g=float(nf[i]), ttc=ttc, p_c=p_c, p_s=p_s,
                j_progress=j_progress, j_action=j_action, j_collision=j_collision,
            )
        )

    terminal_eval = None
    if ds_mode and params.include_terminal:
        terminal_eval = terminal_cost(
            states[-1], p_s, goal_xy, world, params, cfg.v_limit
        )
        total += terminal_eval.j_terminal
    return CostBreakdown(segments=tuple(segments), terminal=terminal_eval, total=total)
