"""Command-line surface: run scenarios, compare cost modes, render landscapes.

Commands: `run`, `compare`, `landscape`, `list-builtins`. Scenario arguments
accept either a JSON file path or a built-in scenario name. Exit codes:
0 success (run: all agents reached), 1 non-reached outcome, 2 load/usage
error, 3 artifact write failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace

from . import scenarios as scen
from .cost import BASELINE_MPEPC, DS_MPEPC, trajectory_cost
from .geometry import Pose
from .kinematics import RobotState, rollout
from .optimizer import plan
from .simulator import SimResult, run
from .svg import AGENT_COLOR, OBSTACLE_COLOR, SceneRenderer
from .world import predict_obstacle

SCHEMA_VERSION = 1

_MODE_ALIASES = {"ds": DS_MPEPC, "mpepc": BASELINE_MPEPC,
                 DS_MPEPC: DS_MPEPC, BASELINE_MPEPC: BASELINE_MPEPC}


def _default_out() -> str:
    return os.environ.get("DSMPEPC_OUT", "runs")


def _load_scenario(source: str, mode: str | None, seed: int | None) -> scen.ScenarioConfig:
    if os.path.exists(source):
        config = scen.load(source)
    elif source in scen.BUILTINS:
        config = scen.builtin(source)
    else:
        raise scen.ScenarioError(
            f"{source!r} is neither a readable file nor a built-in scenario"
        )
    if seed is not None:
        config = replace(config, seed=seed)
    if mode is not None:
        agents = tuple(
            replace(a, mode=mode, cost=replace(a.cost, mode=mode)) for a in config.agents
        )
        config = replace(config, agents=agents)
    return config


def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def _trace_csv(result_agent) -> str:
    lines = ["t,x,y,heading,v,omega,d_o,nf_distance"]
    for s in result_agent.trace:
        lines.append(
            f"{s.t:.3f},{s.x:.6f},{s.y:.6f},{s.heading:.6f},"
            f"{s.v:.6f},{s.omega:.6f},{s.d_o:.6f},{s.nf_distance:.6f}"
        )
    return "\n".join(lines) + "\n"


def _diag_csv(result_agent) -> str:
    lines = ["t,r,theta,delta,v_max,cost,n_evaluated"]
    for rec in result_agent.replans:
        p = rec.param
        lines.append(
            f"{rec.t:.3f},{p.r:.6f},{p.theta:.6f},{p.delta:.6f},{p.v_max:.6f},"
            f"{rec.cost:.9f},{rec.n_evaluated}"
        )
    return "\n".join(lines) + "\n"


def _render_result(config: scen.ScenarioConfig, result: SimResult,
                   with_fans: bool) -> str:
    r = SceneRenderer(config.grid)
    if with_fans and result.diag_fans:
        for agent_fans in result.diag_fans.values():
            for _, polylines in agent_fans:
                for line in polylines:
                    r.add_fan(line)
    final_t = max(s.trace[-1].t for s in result.agents)
    for obs in config.scripted_obstacles:
        steps = max(2, int(final_t / 0.5) + 1)
        pts = [predict_obstacle(obs, final_t * k / (steps - 1)) for k in range(steps)]
        r.add_path(pts, color=OBSTACLE_COLOR, width=1.5)
        r.add_disk(*predict_obstacle(obs, final_t), obs.radius, OBSTACLE_COLOR)
    for spec, agent in zip(config.agents, result.agents):
        r.add_path([(s.x, s.y) for s in agent.trace])
        last = agent.trace[-1]
        r.add_disk(last.x, last.y, spec.radius, AGENT_COLOR)
        r.add_goal_marker(spec.goal.x, spec.goal.y)
    return r.to_svg()


def _metrics_json(config: scen.ScenarioConfig, result: SimResult,
                  wall_clock_s: float, artifacts: list[str]) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "scenario": config.name,
        "seed": result.seed,
        "modes": {a.id: a.mode for a in config.agents},
        "result": result.to_dict(),
        "parameters": {
            "agents": [scen._agent_to_dict(a) for a in config.agents],
        },
        "wall_clock_s": round(wall_clock_s, 3),
        "artifacts": artifacts,
    }
    return json.dumps(doc, indent=2) + "\n"


def cmd_run(args) -> int:
    try:
        config = _load_scenario(args.scenario, _MODE_ALIASES.get(args.mode), args.seed)
    except scen.ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    result = run(config, diag_every=25 if args.diag else None)
    wall = time.perf_counter() - t0
    out = args.out
    artifacts: list[str] = []
    try:
        if args.csv:
            for agent in result.agents:
                path = os.path.join(out, f"trace_{agent.id}.csv")
                _write_text(path, _trace_csv(agent))
                artifacts.append(path)
        if args.diag:
            for agent in result.agents:
                path = os.path.join(out, f"diag_{agent.id}.csv")
                _write_text(path, _diag_csv(agent))
                artifacts.append(path)
        if args.svg:
            path = os.path.join(out, "scene.svg")
            _write_text(path, _render_result(config, result, with_fans=args.diag))
            artifacts.append(path)
        _write_text(
            os.path.join(out, "metrics.json"),
            _metrics_json(config, result, wall, artifacts),
        )
    except OSError as exc:
        print(f"error writing artifacts: {exc}", file=sys.stderr)
        return 3
    for agent in result.agents:
        ttg = "-" if agent.time_to_goal is None else f"{agent.time_to_goal:.1f}s"
        clear = ("-" if math.isinf(agent.min_clearance)
                 else f"{agent.min_clearance:.3f}m")
        print(
            f"{agent.id}: {agent.outcome} time_to_goal={ttg} "
            f"path={agent.path_length:.2f}m min_clearance={clear}"
        )
    return 0 if result.all_reached else 1


def _compare_rows(config: scen.ScenarioConfig, n_seeds: int):
    rows = []
    for mode in (DS_MPEPC, BASELINE_MPEPC):
        stats = {"success": 0, "deadlock": 0, "collision": 0}
        ttgs: list[float] = []
        clearances: list[float] = []
        for k in range(n_seeds):
            agents = tuple(
                replace(a, mode=mode, cost=replace(a.cost, mode=mode))
                for a in config.agents
            )
            cfg = replace(config, agents=agents, seed=config.seed + k)
            result = run(cfg)
            stats["success"] += int(result.all_reached)
            stats["deadlock"] += int(
                any(a.outcome == "deadlocked" for a in result.agents)
            )
            stats["collision"] += int(bool(result.contacts))
            ttgs.extend(
                a.time_to_goal for a in result.agents if a.time_to_goal is not None
            )
            clearances.extend(a.min_clearance for a in result.agents)
        mean_ttg = sum(ttgs) / len(ttgs) if ttgs else math.nan
        mean_clear = sum(clearances) / len(clearances) if clearances else math.nan
        rows.append(
            (mode, n_seeds, stats["success"] / n_seeds, stats["deadlock"] / n_seeds,
             stats["collision"] / n_seeds, mean_ttg, mean_clear)
        )
    return rows


def cmd_compare(args) -> int:
    try:
        config = _load_scenario(args.scenario, None, args.seed)
    except scen.ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = _compare_rows(config, args.seeds)
    lines = ["mode,runs,success_rate,deadlock_rate,collision_rate,"
             "mean_time_to_goal,mean_min_clearance"]
    for mode, runs, succ, dead, coll, ttg, clear in rows:
        ttg_s = "" if math.isnan(ttg) else f"{ttg:.3f}"
        clear_s = "" if math.isnan(clear) else f"{clear:.3f}"
        lines.append(f"{mode},{runs},{succ:.3f},{dead:.3f},{coll:.3f},{ttg_s},{clear_s}")
    table = "\n".join(lines) + "\n"
    try:
        _write_text(os.path.join(args.out, "compare.csv"), table)
    except OSError as exc:
        print(f"error writing artifacts: {exc}", file=sys.stderr)
        return 3
    print(table, end="")
    return 0


def _landscape_candidates(config, agent_spec, state, world, nav):
    """Evaluate the planner's global candidate set at a frozen snapshot."""
    params = replace(agent_spec.cost, mode=DS_MPEPC)
    opt = agent_spec.optimizer
    result = plan(
        state, agent_spec.goal, world, agent_spec.planner, params,
        replace(opt, n_refine_seeds=0, seed=config.seed), nav=nav,
    )
    rows = []
    for z, _cost in result.evaluated:
        traj = rollout(state, z, agent_spec.planner)
        breakdown = trajectory_cost(
            traj, agent_spec.goal, world, params, agent_spec.planner, nav=nav
        )
        term = breakdown.terminal
        rows.append(
            {
                "param": z,
                "trajectory": traj,
                "cost": breakdown.total,
                "ttg": term.ttg,
                "ttc": term.ttc_terminal,
            }
        )
    return rows


def cmd_landscape(args) -> int:
    try:
        config = _load_scenario(args.scenario, _MODE_ALIASES.get(args.mode), args.seed)
    except scen.ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    agent_ids = [a.id for a in config.agents]
    if args.agent not in agent_ids:
        print(f"error: unknown agent {args.agent!r} (have {agent_ids})", file=sys.stderr)
        return 2
    if not 0.0 <= args.t <= config.duration:
        print(f"error: snapshot time {args.t} outside [0, {config.duration}]",
              file=sys.stderr)
        return 2

    spec = next(a for a in config.agents if a.id == args.agent)
    h = spec.planner.step_h
    cycles = int(round(args.t / h))
    from .simulator import _snapshot_for  # shared snapshot construction
    from .world import NavigationField

    if cycles > 0:
        truncated = replace(config, duration=cycles * h)
        sim = run(truncated)
        states = {}
        moving = {}
        for a_spec, a_res in zip(config.agents, sim.agents):
            last = a_res.trace[-1]
            states[a_spec.id] = RobotState(
                pose=Pose(last.x, last.y, last.heading), v=last.v, omega=last.omega,
                t=last.t,
            )
            moving[a_spec.id] = a_res.outcome not in ("reached", "collided")
    else:
        states = {
            a.id: RobotState(pose=a.start.wrapped(), t=0.0) for a in config.agents
        }
        moving = {a.id: True for a in config.agents}
    snapshot_t = cycles * h
    world = _snapshot_for(
        spec.id, list(config.agents), states, moving, config.scripted_obstacles,
        config.grid, spec.radius, snapshot_t,
    )
    nav = NavigationField(config.grid, (spec.goal.x, spec.goal.y))
    rows = _landscape_candidates(config, spec, states[spec.id], world, nav)

    def sort_key(row):
        tie = row["param"].as_tuple()
        if args.rank == "cost":
            return (row["cost"], tie)
        if args.rank == "ttg":
            return (row["ttg"], tie)
        return (-row["ttc"], tie)

    ranked = sorted(rows, key=sort_key)
    top = ranked[: args.top]

    renderer = SceneRenderer(config.grid)
    for row in top:
        renderer.add_fan([(s.pose.x, s.pose.y) for s in row["trajectory"].states])
    for other_id, st in states.items():
        other = next(a for a in config.agents if a.id == other_id)
        color = AGENT_COLOR if other_id == spec.id else OBSTACLE_COLOR
        renderer.add_disk(st.pose.x, st.pose.y, other.radius, color)
    renderer.add_goal_marker(spec.goal.x, spec.goal.y)

    lines = ["rank,r,theta,delta,v_max,cost,ttg,ttc"]
    for i, row in enumerate(ranked):
        p = row["param"]
        lines.append(
            f"{i},{p.r:.6f},{p.theta:.6f},{p.delta:.6f},{p.v_max:.6f},"
            f"{row['cost']:.9f},{row['ttg']:.6g},{row['ttc']:.6g}"
        )
    try:
        _write_text(os.path.join(args.out, "landscape.svg"), renderer.to_svg())
        _write_text(os.path.join(args.out, "landscape.csv"), "\n".join(lines) + "\n")
    except OSError as exc:
        print(f"error writing artifacts: {exc}", file=sys.stderr)
        return 3
    print(f"rendered {len(top)} of {len(rows)} candidates (rank={args.rank})")
    return 0


def cmd_list_builtins(_args) -> int:
    for name in sorted(scen.BUILTINS):
        doc = (scen.BUILTINS[name].__doc__ or "").strip().splitlines()
        blurb = doc[0] if doc else ""
        print(f"{name}: {blurb}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsmpepc",
        description="Receding-horizon robot navigation benchmarks and renders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario JSON path or built-in name")
        p.add_argument("--seed", type=int, default=None, help="override scenario seed")
        p.add_argument("--out", default=_default_out(),
                       help="output directory (env DSMPEPC_OUT)")
        p.add_argument("--mode", choices=sorted(_MODE_ALIASES),
                       default=None, help="force a cost mode on every agent")

    p_run = sub.add_parser("run", help="simulate a scenario and write artifacts")
    common(p_run)
    p_run.add_argument("--svg", action="store_true", help="render the scene to SVG")
    p_run.add_argument("--csv", action="store_true", help="write per-agent trace CSVs")
    p_run.add_argument("--diag", action="store_true",
                       help="record per-cycle planning diagnostics and fans")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run both cost modes over several seeds")
    common(p_cmp)
    p_cmp.add_argument("--seeds", type=int, default=5, help="number of seeds per mode")
    p_cmp.set_defaults(func=cmd_compare)

    p_land = sub.add_parser("landscape", help="render ranked candidate trajectories")
    common(p_land)
    p_land.add_argument("--agent", required=True, help="agent id to sample for")
    p_land.add_argument("--t", type=float, default=0.0, help="snapshot time (s)")
    p_land.add_argument("--rank", choices=("cost", "ttg", "ttc"), default="cost")
    p_land.add_argument("--top", type=int, default=50,
                        help="number of trajectories to render")
    p_land.set_defaults(func=cmd_landscape)

    p_list = sub.add_parser("list-builtins", help="list built-in scenarios")
    p_list.set_defaults(func=cmd_list_builtins)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
