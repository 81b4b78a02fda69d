"""Closed-loop receding-horizon simulation.

The plant integrates the vehicle with RK4 at ``dt_plant``; every ``dt_cycle``
the planner solves the horizon problem from the exact plant state and the
first input of the best plan is held until the next replan. Obstacles move
at constant velocity in the plant world and are reported to the planner
with their true current state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..cost_constraints import MpcProblem
from ..ga_solver import Candidate, GaSolution, solve
from ..obstacles import Obstacle, obstacle_array, obstacle_gap
from ..road_map import RoadMap, road_eval, wrap_angle
from ..vehicle_dynamics import OK, PSI, S, SINGULAR, VX, Y, ControlInput, VehicleState, rk4_step
from .config import ScenarioConfig


class OffMapError(RuntimeError):
    """The vehicle left the region where the road coordinates are defined."""


@dataclass
class PlannerContext:
    """State carried between planner cycles."""
    problem: MpcProblem
    cfg: ScenarioConfig
    prev: Candidate | None = None
    cycle: int = 0

    @classmethod
    def create(cls, cfg: ScenarioConfig, road: RoadMap) -> PlannerContext:
        return cls(MpcProblem(road, cfg.vehicle, cfg.weights, cfg.bounds, cfg.horizon), cfg)


def _check_on_map(x: VehicleState, road: RoadMap, y_abort: float) -> None:
    if not road.cyclic and not 0.0 <= x.s <= road.total_length:
        raise OffMapError(f"s={x.s:.3f} is outside the open road [0, {road.total_length:.3f}]")
    if abs(x.y) > y_abort:
        raise OffMapError(f"|y|={abs(x.y):.3f} exceeds the abort distance {y_abort}")


def mpc_step(x_measured: VehicleState, obstacles, ctx: PlannerContext) -> tuple[ControlInput, GaSolution]:
    """One replan: solve from the measured state and return the first input of the plan."""
    _check_on_map(x_measured, ctx.problem.road, ctx.cfg.run.y_abort)
    problem = ctx.problem.with_obstacles(obstacles)
    seed = np.random.SeedSequence([ctx.cfg.run.seed, ctx.cycle])
    sol = solve(x_measured, ctx.prev, problem, ctx.cfg.ga, shift=ctx.cfg.warm_shift, seed=seed)
    ctx.prev = sol.best
    ctx.cycle += 1
    u1, u2 = sol.first_input
    return ControlInput(u1, u2), sol


@dataclass
class SimLog:
    """Per-plant-step trajectory records and per-cycle solver records."""
    t: list = field(default_factory=list)
    states: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    obs_dist: list = field(default_factory=list)
    active_cost: list = field(default_factory=list)
    cycle_t: list = field(default_factory=list)
    solve_ms: list = field(default_factory=list)
    best_cost: list = field(default_factory=list)
    n_gen: list = field(default_factory=list)
    collision: bool = False
    termination: str = "duration"
    message: str = ""
    track_length: float = 0.0
    y_bounds: tuple = (-1.75, 1.75)
    n_obstacles: int = 0

    def __len__(self):
        return len(self.t)

    def state_array(self) -> np.ndarray:
        return np.array(self.states, dtype=float).reshape(-1, 8)

    def input_array(self) -> np.ndarray:
        return np.array(self.inputs, dtype=float).reshape(-1, 2)

    def distance_array(self) -> np.ndarray:
        return np.array(self.obs_dist, dtype=float).reshape(len(self.t), self.n_obstacles)

    def min_obstacle_distance(self) -> np.ndarray:
        d = self.distance_array()
        if d.shape[1] == 0:
            return np.full(len(self.t), np.inf)
        return d.min(axis=1)

    @property
    def max_abs_y(self) -> float:
        return float(np.max(np.abs(self.state_array()[:, Y]))) if self.t else float("nan")

    @property
    def bound_violation(self) -> bool:
        if not self.t:
            return False
        y = self.state_array()[:, Y]
        return bool(np.any(y < self.y_bounds[0]) or np.any(y > self.y_bounds[1]))

    @property
    def failed(self) -> bool:
        return self.collision or self.bound_violation or self.termination in ("off_map", "diverged")


def plant_gaps(x, road: RoadMap, obs_rows, t, a_ego, b_ego) -> np.ndarray:
    """Ego-to-obstacle gaps in the plant world with the planner's distance routine."""
    if obs_rows.shape[0] == 0:
        return np.empty(0)
    _, _, theta, _, _, _ = road_eval(road.table, road.total_length, road.cyclic, x[S])
    heading = wrap_angle(x[PSI] - theta)
    track_length = road.total_length if road.cyclic else 0.0
    return np.array([obstacle_gap(x[S], x[Y], heading, a_ego, b_ego, obs_rows, i, t, track_length)
                     for i in range(obs_rows.shape[0])])


def obstacles_at(obstacles, t) -> list[Obstacle]:
    return [Obstacle(o.s_obs + o.v_s * t, o.y_obs + o.v_y * t, o.theta_obs, o.v_s, o.v_y, o.a, o.b)
            for o in obstacles]


def initial_state(cfg: ScenarioConfig, road: RoadMap) -> VehicleState:
    _, _, theta, _, _, _ = road.evaluate(cfg.run.s0)
    v0 = cfg.horizon.v_ref_at(cfg.run.s0) if cfg.run.v0 is None else cfg.run.v0
    return VehicleState(s=cfg.run.s0, y=cfg.run.y0, psi=theta, Vx=v0)


def run_scenario(cfg: ScenarioConfig, road: RoadMap | None = None, progress=None) -> SimLog:
    """Simulate until the duration elapses, the lap count or ``s_stop`` is reached,
    a collision happens or the vehicle leaves the map."""
    road = road if road is not None else cfg.map.build(cfg.base_dir)
    ctx = PlannerContext.create(cfg, road)
    log = SimLog(track_length=road.total_length, y_bounds=(road.b_yl, road.b_yh),
                 n_obstacles=len(cfg.obstacles))
    obs_rows = obstacle_array(cfg.obstacles)
    plant_p = cfg.plant
    pp = plant_p.as_array()
    n_steps = int(round(cfg.run.duration / cfg.dt_plant))
    per_cycle = cfg.plant_steps_per_cycle
    s_goal = None
    if cfg.run.laps > 0:
        s_goal = cfg.run.s0 + cfg.run.laps * road.total_length
    if cfg.run.s_stop is not None:
        s_goal = cfg.run.s_stop if s_goal is None else min(s_goal, cfg.run.s_stop)

    x = initial_state(cfg, road).as_array()
    nxt = np.empty(8)
    u = ControlInput(0.0, 0.0)
    cost = float("nan")
    for k in range(n_steps):
        t = k * cfg.dt_plant
        if k % per_cycle == 0:
            try:
                u, sol = mpc_step(VehicleState.from_array(x), obstacles_at(cfg.obstacles, t), ctx)
            except OffMapError as e:
                log.termination, log.message = "off_map", str(e)
                break
            cost = sol.best_cost
            log.cycle_t.append(t)
            log.solve_ms.append(sol.solve_ms)
            log.best_cost.append(sol.best_cost)
            log.n_gen.append(len(sol.fitness_history))
            if progress is not None:
                progress(ctx.cycle, t, x)
        gaps = plant_gaps(x, road, obs_rows, t, 0.5 * plant_p.length, 0.5 * plant_p.width)
        log.t.append(t)
        log.states.append(x.copy())
        log.inputs.append((u.u1, u.u2))
        log.obs_dist.extend(gaps.tolist())
        log.active_cost.append(cost)
        if gaps.size and gaps.min() <= 0.0:
            log.collision = True
            log.termination, log.message = "collision", f"contact at t={t:.2f} s, s={x[S]:.2f} m"
            break
        if s_goal is not None and x[S] >= s_goal:
            log.termination = "goal"
            break
        status = rk4_step(x, u.u1, u.u2, road.table, road.total_length, road.cyclic, pp, cfg.dt_plant, nxt)
        if status != OK:
            reason = "curvature singularity" if status == SINGULAR else "non-finite state"
            log.termination, log.message = "diverged", f"{reason} at t={t:.2f} s"
            break
        if nxt[VX] < 0.0:
            nxt[VX] = 0.0
        x, nxt = nxt, x
        if abs(x[Y]) > cfg.run.y_abort or (not road.cyclic and not 0.0 <= x[S] <= road.total_length):
            log.termination = "off_map"
            log.message = f"left the map at t={t + cfg.dt_plant:.2f} s (s={x[S]:.2f}, y={x[Y]:.2f})"
            break
    return log

