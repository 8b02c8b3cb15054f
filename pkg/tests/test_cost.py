import math
import random
from dataclasses import replace

import numpy as np
import pytest

from dsmpepc.cost import (
    BASELINE_MPEPC,
    DS_MPEPC,
    CostParams,
    anticipatory_factor,
    collision_probability,
    expected_time_to_goal,
    modified_collision_probability,
    survivability,
    terminal_bonus,
    terminal_cost,
    terminal_ttc,
    trajectory_cost,
)
from dsmpepc.geometry import Pose, wrap_angle
from dsmpepc.kinematics import PlannerConfig, RobotState, TrajectoryParam, rollout
from dsmpepc.world import DynamicObstacle, OccupancyGrid, World

PARAMS = CostParams()
CFG = PlannerConfig()


def open_world(obstacles=(), robot_radius=0.35, size=60, res=0.25):
    grid = OccupancyGrid(np.zeros((size, size), dtype=bool), res)
    return World(grid=grid, obstacles=tuple(obstacles), robot_radius=robot_radius)


def random_world(rng, n_obstacles=3):
    obstacles = tuple(
        DynamicObstacle(
            id=f"o{i}",
            radius=rng.uniform(0.2, 0.6),
            position=(rng.uniform(1, 11), rng.uniform(1, 11)),
            velocity=(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)),
        )
        for i in range(n_obstacles)
    )
    return open_world(obstacles, size=48, res=0.25)


def random_state_param(rng, center=(6.0, 6.0)):
    start = RobotState(
        pose=Pose(center[0] + rng.uniform(-3, 3), center[1] + rng.uniform(-3, 3),
                  wrap_angle(rng.uniform(-math.pi, math.pi))),
        v=rng.uniform(0, 0.5),
        omega=rng.uniform(-0.5, 0.5),
    )
    z = TrajectoryParam(rng.uniform(0, 6), wrap_angle(rng.uniform(-math.pi, math.pi)),
                        wrap_angle(rng.uniform(-math.pi, math.pi)), rng.uniform(0, 1))
    return start, z


def test_collision_probability_examples():
    assert collision_probability(0.0, PARAMS) == 1.0
    assert collision_probability(PARAMS.sigma_d, PARAMS) == pytest.approx(
        math.exp(-1.0), rel=1e-12
    )
    assert collision_probability(10 * PARAMS.sigma_d, PARAMS) < 1e-40
    with pytest.raises(ValueError):
        collision_probability(-0.1, PARAMS)


def test_anticipatory_factor_limits():
    assert anticipatory_factor(0.0, PARAMS) == 1.0
    assert anticipatory_factor(math.inf, PARAMS) == 1.0 - PARAMS.a
    for ttc in (0.1, 0.5, 2.0, 50.0):
        f = anticipatory_factor(ttc, PARAMS)
        assert 1.0 - PARAMS.a <= f <= 1.0


def test_modified_probability_examples():
    for d in (0.0, 0.1, 0.5, 2.0):
        p = collision_probability(d, PARAMS)
        assert modified_collision_probability(d, 0.0, PARAMS) == p
        assert modified_collision_probability(d, math.inf, PARAMS) == (1 - PARAMS.a) * p
    no_anticipation = replace(PARAMS, a=0.0)
    for ttc in (0.0, 0.3, 7.0, math.inf):
        assert modified_collision_probability(0.4, ttc, no_anticipation) == \
            collision_probability(0.4, no_anticipation)


def test_modified_probability_bounds_random():
    rng = random.Random(0)
    for _ in range(5000):
        d = rng.uniform(0, 3)
        ttc = rng.choice([0.0, math.inf, rng.uniform(0, 80)])
        p = collision_probability(d, PARAMS)
        p_mod = modified_collision_probability(d, ttc, PARAMS)
        assert (1 - PARAMS.a) * p <= p_mod * (1 + 1e-12)
        assert p_mod <= p * (1 + 1e-12)


def test_survivability_examples():
    assert survivability([0.0, 0.0, 0.0]) == [1.0, 1.0, 1.0]
    assert survivability([1.0, 0.2]) == [0.0, 0.0]
    got = survivability([0.1, 0.2, 0.5])
    assert got[0] == pytest.approx(0.9, rel=1e-15)
    assert got[1] == pytest.approx(0.72, rel=1e-15)
    assert got[2] == pytest.approx(0.36, rel=1e-15)
    with pytest.raises(ValueError):
        survivability([1.5])


def test_survivability_non_increasing():
    rng = random.Random(1)
    for _ in range(200):
        seq = [rng.random() for _ in range(30)]
        p_s = survivability(seq)
        assert all(b <= a for a, b in zip(p_s, p_s[1:]))


def test_expected_time_to_goal():
    stopped = RobotState(pose=Pose(0, 0, 0), v=0.0)
    assert expected_time_to_goal(stopped, (3.0, 0.0), PARAMS) == math.inf
    head_on = RobotState(pose=Pose(0, 0, 0), v=1.0)
    assert expected_time_to_goal(head_on, (4.0, 0.0), PARAMS) == pytest.approx(4.0)
    perpendicular = RobotState(pose=Pose(0, 0, math.pi / 2), v=1.0)
    assert expected_time_to_goal(perpendicular, (4.0, 0.0), PARAMS) == math.inf
    at_goal = RobotState(pose=Pose(3.9, 0, 0), v=0.5)
    assert expected_time_to_goal(at_goal, (4.0, 0.0), PARAMS) == 0.0


def test_terminal_ttc_cases():
    world = open_world()
    free = RobotState(pose=Pose(7, 7, 0.3), v=0.0, t=2.0)
    assert terminal_ttc(free, world, 2.0, v_limit=1.0) == math.inf
    # nearest wall cell centers at x = 10.5; robot at 8.15 with radius 0.35
    # leaves a 2.0 m gap
    rows = ["." * 52 + "#" * 2] * 40
    grid = OccupancyGrid.from_ascii(rows, 0.2)
    wall_world = World(grid=grid, obstacles=(), robot_radius=0.35)
    facing = RobotState(pose=Pose(8.15, 4.0, 0.0), v=0.0, t=0.0)
    assert terminal_ttc(facing, wall_world, 0.0, v_limit=1.0) == pytest.approx(
        2.0, abs=grid.resolution
    )
    contact = RobotState(pose=Pose(10.3, 4.0, 0.0), v=0.0, t=0.0)
    assert terminal_ttc(contact, wall_world, 0.0, v_limit=1.0) == 0.0


def test_terminal_bonus_exact_points():
    c_ttg, c_ttc, j = terminal_bonus(1.0, math.inf, math.inf, PARAMS)
    assert (c_ttg, c_ttc, j) == (1.0, 1.0, -1.0)
    _, _, j0 = terminal_bonus(0.0, math.inf, math.inf, PARAMS)
    assert j0 == 0.0
    params = replace(PARAMS, sigma_inv_ttc=0.5)
    _, _, j_e = terminal_bonus(1.0, math.inf, 2.0, params)
    assert j_e == pytest.approx(-math.exp(-1.0), abs=1e-9)


def test_terminal_bonus_bounds_and_monotonicity():
    rng = random.Random(5)
    for _ in range(2000):
        p = rng.random()
        ttg = rng.choice([0.0, math.inf, rng.uniform(0, 1000)])
        ttc = rng.choice([0.0, math.inf, rng.uniform(0, 1000)])
        _, _, j = terminal_bonus(p, ttg, ttc, PARAMS)
        assert -1.0 <= j <= 0.0
    # more ttc / ttg never makes the bonus less negative
    grid_vals = [0.0, 0.5, 1.0, 2.0, 5.0, 50.0, math.inf]
    for ttg in grid_vals:
        for t1, t2 in zip(grid_vals, grid_vals[1:]):
            _, _, j1 = terminal_bonus(1.0, ttg, t1, PARAMS)
            _, _, j2 = terminal_bonus(1.0, ttg, t2, PARAMS)
            assert j2 <= j1
            _, _, g1 = terminal_bonus(1.0, t1, ttg, PARAMS)
            _, _, g2 = terminal_bonus(1.0, t2, ttg, PARAMS)
            assert g2 <= g1


def test_cost_params_validation():
    with pytest.raises(ValueError):
        CostParams(a=1.0)
    with pytest.raises(ValueError):
        CostParams(sigma_d=0.0)
    with pytest.raises(ValueError):
        CostParams(mode="something")
    with pytest.raises(ValueError):
        CostParams(w_progress=-1.0)


def total_from_segments(breakdown):
    """Straight-line re-evaluation of the cost sum from stored fields."""
    total = 0.0
    for seg in breakdown.segments:
        total += seg.p_s * seg.j_progress + seg.j_action + (1 - seg.p_s) * seg.j_collision
    if breakdown.terminal is not None:
        total += breakdown.terminal.j_terminal
    return total


def test_obstacle_free_straight_run():
    world = open_world()
    start = RobotState(pose=Pose(4.0, 7.5, 0.0))
    traj = rollout(start, TrajectoryParam(9.0, 0.0, 0.0, 1.0), CFG)
    goal = Pose(13.0, 7.5, 0.0)
    breakdown = trajectory_cost(traj, goal, world, PARAMS, CFG)
    for seg in breakdown.segments:
        assert seg.p_s == pytest.approx(1.0, abs=1e-12)
    assert breakdown.total < 0.0
    assert breakdown.terminal is not None


def test_baseline_mode_shape():
    world = open_world()
    start = RobotState(pose=Pose(4.0, 7.5, 0.0))
    traj = rollout(start, TrajectoryParam(5.0, 0.3, -0.2, 0.8), CFG)
    breakdown = trajectory_cost(
        traj, Pose(12.0, 7.5, 0.0), world, replace(PARAMS, mode=BASELINE_MPEPC), CFG
    )
    assert breakdown.terminal is None
    assert all(seg.ttc is None for seg in breakdown.segments)


def test_total_self_consistency_randomized():
    rng = random.Random(7)
    for _ in range(40):
        world = random_world(rng)
        start, z = random_state_param(rng)
        traj = rollout(start, z, CFG)
        goal = Pose(rng.uniform(2, 10), rng.uniform(2, 10), 0.0)
        for mode in (DS_MPEPC, BASELINE_MPEPC):
            params = replace(PARAMS, mode=mode)
            breakdown = trajectory_cost(traj, goal, world, params, CFG)
            assert breakdown.total == total_from_segments(breakdown)
            assert len(breakdown.segments) == CFG.n_steps


def test_stored_segment_fields_reproduce_p_c():
    rng = random.Random(8)
    for _ in range(25):
        world = random_world(rng)
        start, z = random_state_param(rng)
        traj = rollout(start, z, CFG)
        goal = Pose(6.0, 6.0, 0.0)
        breakdown = trajectory_cost(traj, goal, world, PARAMS, CFG)
        for seg in breakdown.segments:
            assert seg.p_c == modified_collision_probability(seg.d_o, seg.ttc, PARAMS)


def test_discount_bounds_on_trajectories():
    rng = random.Random(9)
    for _ in range(30):
        world = random_world(rng)
        start, z = random_state_param(rng)
        traj = rollout(start, z, CFG)
        goal = Pose(6.0, 6.0, 0.0)
        ds = trajectory_cost(traj, goal, world, PARAMS, CFG)
        base = trajectory_cost(traj, goal, world, replace(PARAMS, mode=BASELINE_MPEPC), CFG)
        for seg_ds, seg_b in zip(ds.segments, base.segments):
            assert seg_ds.d_o == seg_b.d_o
            p_c = seg_b.p_c
            assert (1 - PARAMS.a) * p_c <= seg_ds.p_c * (1 + 1e-12)
            assert seg_ds.p_c <= p_c * (1 + 1e-12)
            assert seg_ds.p_s * (1 + 1e-12) >= seg_b.p_s


def test_contact_start_zeroes_survivability_exactly():
    world = open_world(
        (DynamicObstacle(id="o", radius=0.5, position=(5.0, 5.0)),)
    )
    start = RobotState(pose=Pose(5.2, 5.0, 0.0))  # inside the inflated disk
    for z in (TrajectoryParam(0, 0, 0, 0), TrajectoryParam(4, 0.4, -0.3, 1.0)):
        traj = rollout(start, z, CFG)
        for mode in (DS_MPEPC, BASELINE_MPEPC):
            breakdown = trajectory_cost(
                traj, Pose(9, 5, 0), world, replace(PARAMS, mode=mode), CFG
            )
            assert breakdown.segments[0].p_c == 1.0
            for seg in breakdown.segments:
                assert seg.p_s == 0.0


def test_in_contact_modes_agree_exactly():
    world = open_world(
        (DynamicObstacle(id="o", radius=0.5, position=(5.0, 5.0)),)
    )
    start = RobotState(pose=Pose(5.2, 5.0, 0.0))
    rng = random.Random(11)
    goal = Pose(9.0, 5.0, 0.0)
    for _ in range(50):
        _, z = random_state_param(rng)
        traj = rollout(start, z, CFG)
        ds = trajectory_cost(traj, goal, world, PARAMS, CFG)
        base = trajectory_cost(traj, goal, world, replace(PARAMS, mode=BASELINE_MPEPC), CFG)
        assert ds.terminal.j_terminal == 0.0
        assert ds.total == base.total


def test_mode_consistency_a_zero_no_terminal():
    rng = random.Random(13)
    params_ds = replace(PARAMS, a=0.0, include_terminal=False)
    params_base = replace(PARAMS, mode=BASELINE_MPEPC)
    for _ in range(25):
        world = random_world(rng)
        start, z = random_state_param(rng)
        traj = rollout(start, z, CFG)
        goal = Pose(6.0, 6.0, 0.0)
        ds = trajectory_cost(traj, goal, world, params_ds, CFG)
        base = trajectory_cost(traj, goal, world, params_base, CFG)
        assert ds.terminal is None
        assert ds.total == base.total


def test_segment_survivability_non_increasing():
    rng = random.Random(17)
    for _ in range(30):
        world = random_world(rng)
        start, z = random_state_param(rng)
        traj = rollout(start, z, CFG)
        breakdown = trajectory_cost(traj, Pose(6, 6, 0), world, PARAMS, CFG)
        p_s = [seg.p_s for seg in breakdown.segments]
        assert all(b <= a for a, b in zip(p_s, p_s[1:]))
        assert all(0.0 <= p <= 1.0 for p in p_s)


def test_trajectory_cost_rejects_short_trajectory():
    from dsmpepc.kinematics import Trajectory
    start = RobotState(pose=Pose(0, 0, 0))
    bad = Trajectory(states=(start,), param=TrajectoryParam(1, 0, 0, 1),
                     target=Pose(1, 0, 0))
    with pytest.raises(ValueError):
        trajectory_cost(bad, Pose(1, 0, 0), open_world(), PARAMS, CFG)


def test_terminal_cost_wrapper():
    world = open_world()
    terminal = RobotState(pose=Pose(6, 6, 0), v=0.0, t=5.0)
    ev = terminal_cost(terminal, 1.0, (12.0, 6.0), world, PARAMS, v_limit=1.0)
    # stopped far from the goal facing open space: full bonus
    assert ev.ttg == math.inf
    assert ev.ttc_terminal == math.inf
    assert ev.j_terminal == -1.0
    ev0 = terminal_cost(terminal, 0.0, (12.0, 6.0), world, PARAMS, v_limit=1.0)
    assert ev0.j_terminal == 0.0
