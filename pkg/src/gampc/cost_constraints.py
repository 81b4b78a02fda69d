"""MPC objective: quadratic stage/input costs, exponential soft constraints,
reciprocal obstacle penalties and terminal cost over a discretized horizon.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from numba import njit

from .obstacles import Obstacle, ego_ellipse, obstacle_array, obstacle_gap, predict_obstacle, relative_distance
from .road_map import RoadMap, road_eval, wrap_angle
from .vehicle_dynamics import (DELTA, OK, OMEGA, P_LENGTH, P_WIDTH, PSI, S, TAU, VX, VY, Y,
                               VehicleParams, VehicleState, euler_steps_from)

INFEASIBLE_COST = 1e12

# packed weight layout
(W2, W4, W5, W6, W7, W8, S1, S2, P_YL, P_YH, P_DL, P_DH, P_TL, P_TH,
 P_U1L, P_U1H, P_U2L, P_U2H, P_OBS, EPS_OBS) = range(20)


@dataclass(frozen=True)
class Weights:
    w2: float = 1.0
    w4: float = 0.5
    w5: float = 0.5
    w6: float = 0.2
    w7: float = 5.0
    w8: float = 1e-6
    s1: float = 10.0
    s2: float = 1e-7
    p_yl: float = 8.0
    p_yh: float = 8.0
    p_deltal: float = 20.0
    p_deltah: float = 20.0
    p_taul: float = 0.005
    p_tauh: float = 0.005
    p_u1l: float = 2.0
    p_u1h: float = 2.0
    p_u2l: float = 0.002
    p_u2h: float = 0.002
    p_obs: float = 2.0
    eps_obs: float = 0.01

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"weight {f.name} must be non-negative")
        if not self.eps_obs > 0:
            raise ValueError("eps_obs must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    def scaled(self, factor: float) -> Weights:
        """Quadratic weights (W and S) multiplied by ``factor``; penalties unchanged."""
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        for k in ("w2", "w4", "w5", "w6", "w7", "w8", "s1", "s2"):
            vals[k] *= factor
        return Weights(**vals)


@dataclass(frozen=True)
class Bounds:
    y: tuple[float, float] = (-1.75, 1.75)
    delta: tuple[float, float] = (-0.5, 0.5)
    tau: tuple[float, float] = (-2000.0, 2000.0)
    u1: tuple[float, float] = (-0.5, 0.5)
    u2: tuple[float, float] = (-5000.0, 5000.0)

    def __post_init__(self):
        for f in fields(self):
            lo, hi = getattr(self, f.name)
            if not lo < hi:
                raise ValueError(f"bounds.{f.name}: lower {lo} must be < upper {hi}")

    def as_array(self) -> np.ndarray:
        return np.array([v for f in fields(self) for v in getattr(self, f.name)], dtype=float)


@dataclass(frozen=True)
class HorizonSpec:
    """Prediction horizon. ``v_ref`` is a speed or a sequence of ``(s, v)`` breakpoints."""
    N: int = 20
    dt: float = 0.12
    dt_state: float = 0.06
    v_ref: float | tuple = 8.0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("horizon needs N >= 1")
        if not (self.dt > 0 and self.dt_state > 0):
            raise ValueError("time steps must be positive")
        ratio = self.dt / self.dt_state
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError(f"dt={self.dt} is not an integer multiple of dt_state={self.dt_state}")

    @property
    def n_substeps(self) -> int:
        return int(round(self.dt / self.dt_state))

    def vref_table(self) -> tuple[np.ndarray, np.ndarray]:
        if np.ndim(self.v_ref) == 0:
            return np.array([0.0]), np.array([float(self.v_ref)])
        tab = np.asarray(self.v_ref, dtype=float).reshape(-1, 2)
        order = np.argsort(tab[:, 0])
        return tab[order, 0].copy(), tab[order, 1].copy()

    def v_ref_at(self, s: float) -> float:
        xs, vs = self.vref_table()
        return float(np.interp(s, xs, vs))


# ---------------------------------------------------------------------------
# scalar building blocks
# ---------------------------------------------------------------------------

def slack_values(x: VehicleState, u, bounds: Bounds, distances=()) -> np.ndarray:
    """Slack vector ``Z``: ten state/input margins then one entry per obstacle."""
    u1, u2 = float(u[0]), float(u[1])
    z = [x.y - bounds.y[0], bounds.y[1] - x.y,
         x.delta - bounds.delta[0], bounds.delta[1] - x.delta,
         x.tau - bounds.tau[0], bounds.tau[1] - x.tau,
         u1 - bounds.u1[0], bounds.u1[1] - u1,
         u2 - bounds.u2[0], bounds.u2[1] - u2]
    return np.array(z + [float(d) for d in distances])


def stage_state_cost(x: VehicleState, v_ref: float, W: Weights) -> float:
    return (W.w2 * x.y ** 2 + W.w4 * (x.Vx - v_ref) ** 2 + W.w5 * x.Vy ** 2
            + W.w6 * x.omega ** 2 + W.w7 * x.delta ** 2 + W.w8 * x.tau ** 2)


def input_cost(u, W: Weights) -> float:
    return W.s1 * float(u[0]) ** 2 + W.s2 * float(u[1]) ** 2


def obstacle_penalty(distances, p_obs: float, eps_obs: float) -> float:
    return float(sum(p_obs / (d + eps_obs) for d in distances))


def constraint_penalty(Z, W: Weights) -> float:
    """Exponential penalties on the ten state/input slacks plus obstacle terms."""
    Z = np.asarray(Z, dtype=float)
    p = W.as_array()[P_YL:P_U2H + 1]
    terms = np.exp(1.0 - p * Z[:10])
    return float(terms.sum()) + obstacle_penalty(Z[10:], W.p_obs, W.eps_obs)


# ---------------------------------------------------------------------------
# compiled rollout
# ---------------------------------------------------------------------------

@njit(cache=True)
def _interp(xq, xs, vs):
    """Piecewise-linear lookup clamped at both ends (scalar ``np.interp``)."""
    n = xs.shape[0]
    if n == 1 or xq <= xs[0]:
        return vs[0]
    if xq >= xs[n - 1]:
        return vs[n - 1]
    i = np.searchsorted(xs, xq, side="right") - 1
    f = (xq - xs[i]) / (xs[i + 1] - xs[i])
    return vs[i] + f * (vs[i + 1] - vs[i])


@njit(cache=True)
def _stage_terms(x, u1, u2, vref, w, bnd, with_inputs):
    """Return (quadratic state cost, input cost, exponential state/input penalties)."""
    q = (w[W2] * x[Y] ** 2 + w[W4] * (x[VX] - vref) ** 2 + w[W5] * x[VY] ** 2
         + w[W6] * x[OMEGA] ** 2 + w[W7] * x[DELTA] ** 2 + w[W8] * x[TAU] ** 2)
    pen = (math.exp(1.0 - w[P_YL] * (x[Y] - bnd[0])) + math.exp(1.0 - w[P_YH] * (bnd[1] - x[Y]))
           + math.exp(1.0 - w[P_DL] * (x[DELTA] - bnd[2])) + math.exp(1.0 - w[P_DH] * (bnd[3] - x[DELTA]))
           + math.exp(1.0 - w[P_TL] * (x[TAU] - bnd[4])) + math.exp(1.0 - w[P_TH] * (bnd[5] - x[TAU])))
    ucost = 0.0
    if with_inputs:
        ucost = w[S1] * u1 * u1 + w[S2] * u2 * u2
        pen += (math.exp(1.0 - w[P_U1L] * (u1 - bnd[6])) + math.exp(1.0 - w[P_U1H] * (bnd[7] - u1))
                + math.exp(1.0 - w[P_U2L] * (u2 - bnd[8])) + math.exp(1.0 - w[P_U2H] * (bnd[9] - u2)))
    return q, ucost, pen


@njit(cache=True)
def _obstacle_terms(x, theta_c, t, p, w, obs, track_length, dist_out):
    heading = wrap_angle(x[PSI] - theta_c)
    a_ego = 0.5 * p[P_LENGTH]
    b_ego = 0.5 * p[P_WIDTH]
    total = 0.0
    for i in range(obs.shape[0]):
        d = obstacle_gap(x[S], x[Y], heading, a_ego, b_ego, obs, i, t, track_length)
        dist_out[i] = d
        total += w[P_OBS] / (d + w[EPS_OBS])
    return total


@njit(cache=True)
def rollout_cost(x0, u1s, u2s, table, total, cyclic, p, w, bnd, obs, vref_s, vref_v,
                 dt, dt_state, n_sub):
    """Total horizon cost of one input sequence; ``INFEASIBLE_COST`` on failure."""
    N = u1s.shape[0]
    x = x0.copy()
    work = np.empty(8)
    dist = np.empty(obs.shape[0])
    track_length = total if cyclic else 0.0
    acc = 0.0
    for k in range(N + 1):
        _, _, theta, kappa, _, _ = road_eval(table, total, cyclic, x[S])
        vref = _interp(x[S] % total if cyclic else x[S], vref_s, vref_v)
        terminal = k == N
        u1 = 0.0 if terminal else u1s[k]
        u2 = 0.0 if terminal else u2s[k]
        q, uc, pen = _stage_terms(x, u1, u2, vref, w, bnd, not terminal)
        if obs.shape[0] > 0:
            pen += _obstacle_terms(x, theta, k * dt, p, w, obs, track_length, dist)
        acc += (0.5 * q + 0.5 * uc + pen) * dt
        if terminal:
            break
        status = euler_steps_from(x, u1, u2, theta, kappa, table, total, cyclic, p, dt_state, n_sub, work)
        if status != OK:
            return INFEASIBLE_COST
    if not math.isfinite(acc) or acc > INFEASIBLE_COST:
        return INFEASIBLE_COST
    return acc


@njit(cache=True)
def population_costs(x0, genes, N, table, total, cyclic, p, w, bnd, obs, vref_s, vref_v,
                     dt, dt_state, n_sub, out):
    """Cost of every linear-ramp candidate ``(a1, b1, a2, b2)`` in ``genes``."""
    u1s = np.empty(N)
    u2s = np.empty(N)
    for c in range(genes.shape[0]):
        for k in range(N):
            u1s[k] = genes[c, 0] * k + genes[c, 1]
            u2s[k] = genes[c, 2] * k + genes[c, 3]
        out[c] = rollout_cost(x0, u1s, u2s, table, total, cyclic, p, w, bnd, obs,
                              vref_s, vref_v, dt, dt_state, n_sub)
    return out


# ---------------------------------------------------------------------------
# problem context
# ---------------------------------------------------------------------------

@dataclass
class MpcProblem:
    """Everything the optimizer needs besides the initial state."""
    road: RoadMap
    params: VehicleParams = field(default_factory=VehicleParams)
    weights: Weights = field(default_factory=Weights)
    bounds: Bounds = field(default_factory=Bounds)
    horizon: HorizonSpec = field(default_factory=HorizonSpec)
    obstacles: tuple = ()

    def __post_init__(self):
        self.obstacles = tuple(self.obstacles)
        self._p = self.params.as_array()
        self._w = self.weights.as_array()
        self._b = self.bounds.as_array()
        self._obs = obstacle_array(self.obstacles)
        self._vref_s, self._vref_v = self.horizon.vref_table()

    def with_obstacles(self, obstacles) -> MpcProblem:
        return MpcProblem(self.road, self.params, self.weights, self.bounds, self.horizon, obstacles)

    def rollout_cost(self, x0: VehicleState, U) -> float:
        U = np.asarray(U, dtype=float).reshape(-1, 2)
        if len(U) != self.horizon.N:
            raise ValueError(f"input sequence has {len(U)} steps, horizon N={self.horizon.N}")
        hz = self.horizon
        return rollout_cost(x0.as_array(), np.ascontiguousarray(U[:, 0]), np.ascontiguousarray(U[:, 1]),
                            self.road.table, self.road.total_length, self.road.cyclic,
                            self._p, self._w, self._b, self._obs, self._vref_s, self._vref_v,
                            hz.dt, hz.dt_state, hz.n_substeps)

    def population_costs(self, x0, genes) -> np.ndarray:
        genes = np.ascontiguousarray(genes, dtype=float)
        x0 = x0.as_array() if isinstance(x0, VehicleState) else np.asarray(x0, dtype=float)
        out = np.empty(len(genes))
        hz = self.horizon
        return population_costs(x0, genes, hz.N, self.road.table, self.road.total_length,
                                self.road.cyclic, self._p, self._w, self._b, self._obs,
                                self._vref_s, self._vref_v, hz.dt, hz.dt_state, hz.n_substeps, out)


def total_cost(x0: VehicleState, U, road: RoadMap, obstacles=(), params: VehicleParams | None = None,
               weights: Weights | None = None, bounds: Bounds | None = None,
               horizon: HorizonSpec | None = None) -> float:
    """Horizon cost of input sequence ``U`` (``N`` pairs ``(u1, u2)``) from ``x0``."""
    problem = MpcProblem(road, params or VehicleParams(), weights or Weights(),
                         bounds or Bounds(), horizon or HorizonSpec(), obstacles)
    return problem.rollout_cost(x0, U)


def stage_distances(x: VehicleState, theta_c: float, obstacles, k: int, dt: float,
                    params: VehicleParams, track_length: float = 0.0) -> list[float]:
    """Per-obstacle gaps at horizon step ``k`` (reference Python path, used by tests and logs)."""
    ego = ego_ellipse(0.0, x.y, x.psi, theta_c, params.length, params.width)
    out = []
    for o in obstacles:
        pose = predict_obstacle(o, k, dt)
        ds = pose.center[0] - x.s
        if track_length > 0:
            ds -= track_length * math.floor(ds / track_length + 0.5)
        shifted = type(pose)((ds, pose.center[1]), pose.heading, pose.semi_major, pose.semi_minor)
        out.append(relative_distance(ego, shifted))
    return out


__all__ = [
    "INFEASIBLE_COST", "Weights", "Bounds", "HorizonSpec", "MpcProblem", "Obstacle",
    "slack_values", "stage_state_cost", "input_cost", "obstacle_penalty", "constraint_penalty",
    "total_cost", "stage_distances",
]
