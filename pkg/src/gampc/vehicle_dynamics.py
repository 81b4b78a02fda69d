"""Single-track vehicle model in road coordinates with Pacejka lateral tyres.

State layout: ``[s, y, psi, Vx, Vy, omega, delta, tau]``; input layout:
``[u1, u2]`` = steering rate and torque rate. ``psi`` is the absolute heading,
``delta`` the front steering angle and ``tau`` the torque on the rear wheels.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np
from numba import njit

from .road_map import RoadMap, RoadPose, road_eval, wrap_angle

STATE_FIELDS = ("s", "y", "psi", "Vx", "Vy", "omega", "delta", "tau")
S, Y, PSI, VX, VY, OMEGA, DELTA, TAU = range(8)

# packed parameter vector layout
(P_M, P_J, P_LF, P_LR, P_RR, P_CAERO, P_B, P_C, P_E, P_MU, P_EPS0, P_G,
 P_LENGTH, P_WIDTH) = range(14)

# kernel status codes
OK = 0
SINGULAR = 1
NONFINITE = 2

SINGULARITY_TOL = 1e-6


class CurvatureSingularityError(ArithmeticError):
    """The vehicle sits at the local center of road curvature (1 - kappa*y = 0)."""


@dataclass(frozen=True)
class VehicleState:
    s: float = 0.0
    y: float = 0.0
    psi: float = 0.0
    Vx: float = 0.0
    Vy: float = 0.0
    omega: float = 0.0
    delta: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(getattr(self, f)) for f in STATE_FIELDS):
            raise ValueError(f"non-finite vehicle state: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in STATE_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, x) -> VehicleState:
        return cls(*(float(v) for v in x))


class ControlInput(NamedTuple):
    u1: float  # steering rate, rad/s
    u2: float  # torque rate, N*m/s


@dataclass(frozen=True)
class VehicleParams:
    """Vehicle constants. ``c_aero`` gives ``F_aero = c_aero * Vx**2``.

    Pacejka peak force per wheel is ``mu * M * g / 4`` (equal static load).
    ``length`` and ``width`` size the vehicle ellipse used for obstacle checks.
    """
    M: float = 1200.0
    J: float = 1500.0
    l_f: float = 1.0
    l_r: float = 1.4
    R_r: float = 0.3
    c_aero: float = 0.4
    B: float = 10.0
    C: float = 1.9
    E: float = 0.97
    mu: float = 0.7
    eps0: float = 0.1
    g: float = 9.81
    length: float = 4.0
    width: float = 1.9

    def __post_init__(self):
        for name in ("M", "J", "l_f", "l_r", "R_r", "eps0", "length", "width"):
            if not getattr(self, name) > 0:
                raise ValueError(f"VehicleParams.{name} must be positive")
        if not 0 < self.mu <= 1.2:
            raise ValueError(f"friction coefficient mu={self.mu} outside (0, 1.2]")

    @property
    def D(self) -> float:
        return self.mu * self.M * self.g / 4.0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _pacejka(alpha, B, C, E, D):
    ba = B * alpha
    return -D * math.sin(C * math.atan(ba + E * (math.atan(ba) - ba)))


@njit(cache=True)
def _slips(Vx, Vy, omega, delta, l_f, l_r, eps0):
    den = Vx + eps0 * math.exp(-Vx)
    return (Vy + l_f * omega) / den - delta, (Vy - l_r * omega) / den


@njit(cache=True)
def derivative(x, u1, u2, theta_c, kappa, p, out):
    """Write dx/dt into ``out``; returns a status code."""
    scale = 1.0 - kappa * x[Y]
    if abs(scale) < SINGULARITY_TOL:
        return SINGULAR
    Vx = x[VX]
    Vy = x[VY]
    omega = x[OMEGA]
    delta = x[DELTA]
    M = p[P_M]
    D = p[P_MU] * M * p[P_G] / 4.0
    alpha_f, alpha_r = _slips(Vx, Vy, omega, delta, p[P_LF], p[P_LR], p[P_EPS0])
    F_fc = _pacejka(alpha_f, p[P_B], p[P_C], p[P_E], D)
    F_rc = _pacejka(alpha_r, p[P_B], p[P_C], p[P_E], D)
    F_rl = x[TAU] / p[P_RR]
    F_aero = p[P_CAERO] * Vx * Vx
    # velocity expressed in the road frame: heading error psi - theta_c
    c = math.cos(x[PSI] - theta_c)
    s = math.sin(x[PSI] - theta_c)
    cd = math.cos(delta)
    out[S] = (Vx * c - Vy * s) / scale
    out[Y] = Vx * s + Vy * c
    out[PSI] = omega
    out[VX] = omega * Vy + 2.0 * F_rl / M - 2.0 * F_fc * math.sin(delta) / M - F_aero / M
    out[VY] = -omega * Vx + 2.0 * F_rc / M + 2.0 * F_fc * cd / M
    out[OMEGA] = 2.0 / p[P_J] * (-F_rc * p[P_LR] + F_fc * p[P_LF] * cd)
    out[DELTA] = u1
    out[TAU] = u2
    return OK


@njit(cache=True)
def _finite(x):
    for i in range(x.shape[0]):
        if not math.isfinite(x[i]):
            return False
    return True


@njit(cache=True)
def euler_steps_from(x, u1, u2, theta0, kappa0, table, total, cyclic, p, dt_state, n_sub, work):
    """Like :func:`euler_steps` with the road at the current ``s`` already evaluated."""
    theta = theta0
    kappa = kappa0
    for j in range(n_sub):
        if j > 0:
            _, _, theta, kappa, _, _ = road_eval(table, total, cyclic, x[S])
        status = derivative(x, u1, u2, theta, kappa, p, work)
        if status != OK:
            return status
        for i in range(8):
            x[i] += dt_state * work[i]
        x[PSI] = wrap_angle(x[PSI])
    if not _finite(x):
        return NONFINITE
    return OK


@njit(cache=True)
def euler_steps(x, u1, u2, table, total, cyclic, p, dt_state, n_sub, work):
    """In-place explicit Euler: ``n_sub`` substeps of ``dt_state``."""
    _, _, theta, kappa, _, _ = road_eval(table, total, cyclic, x[S])
    return euler_steps_from(x, u1, u2, theta, kappa, table, total, cyclic, p, dt_state, n_sub, work)


@njit(cache=True)
def rk4_step(x, u1, u2, table, total, cyclic, p, dt, out):
    """Classical RK4 step from ``x`` into ``out``; returns a status code."""
    k1 = np.empty(8)
    k2 = np.empty(8)
    k3 = np.empty(8)
    k4 = np.empty(8)
    tmp = np.empty(8)
    _, _, th, ka, _, _ = road_eval(table, total, cyclic, x[S])
    st = derivative(x, u1, u2, th, ka, p, k1)
    if st != OK:
        return st
    for i in range(8):
        tmp[i] = x[i] + 0.5 * dt * k1[i]
    _, _, th, ka, _, _ = road_eval(table, total, cyclic, tmp[S])
    st = derivative(tmp, u1, u2, th, ka, p, k2)
    if st != OK:
        return st
    for i in range(8):
        tmp[i] = x[i] + 0.5 * dt * k2[i]
    _, _, th, ka, _, _ = road_eval(table, total, cyclic, tmp[S])
    st = derivative(tmp, u1, u2, th, ka, p, k3)
    if st != OK:
        return st
    for i in range(8):
        tmp[i] = x[i] + dt * k3[i]
    _, _, th, ka, _, _ = road_eval(table, total, cyclic, tmp[S])
    st = derivative(tmp, u1, u2, th, ka, p, k4)
    if st != OK:
        return st
    for i in range(8):
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    out[PSI] = wrap_angle(out[PSI])
    if not _finite(out):
        return NONFINITE
    return OK


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def pacejka_lateral(alpha, params: VehicleParams):
    """Magic-formula lateral force (N) for slip angle ``alpha`` (rad)."""
    a = np.asarray(alpha, dtype=float)
    ba = params.B * a
    f = -params.D * np.sin(params.C * np.arctan(ba + params.E * (np.arctan(ba) - ba)))
    return float(f) if f.ndim == 0 else f


def slip_angles(x: VehicleState, params: VehicleParams) -> tuple[float, float]:
    return _slips(x.Vx, x.Vy, x.omega, x.delta, params.l_f, params.l_r, params.eps0)


def state_derivative(x: VehicleState, u: ControlInput, pose: RoadPose,
                     params: VehicleParams) -> np.ndarray:
    out = np.empty(8)
    status = derivative(x.as_array(), float(u[0]), float(u[1]), pose.theta_c,
                        pose.theta_c_prime, params.as_array(), out)
    if status == SINGULAR:
        raise CurvatureSingularityError(
            f"1 - kappa*y vanishes at s={x.s}, y={x.y} (kappa={pose.theta_c_prime})")
    return out


def _raise_status(status, x):
    if status == SINGULAR:
        raise CurvatureSingularityError(f"rollout reached the curvature center near s={x[S]:.3f}")
    if status == NONFINITE:
        raise FloatingPointError("integration produced a non-finite state")


def integrate_planner_step(x: VehicleState, u: ControlInput, road: RoadMap,
                           params: VehicleParams, dt_state: float = 0.06,
                           n_substeps: int = 2) -> VehicleState:
    """Advance by ``n_substeps`` explicit Euler substeps of ``dt_state``."""
    if not dt_state > 0:
        raise ValueError("dt_state must be positive")
    arr = x.as_array()
    work = np.empty(8)
    status = euler_steps(arr, float(u[0]), float(u[1]), road.table, road.total_length,
                         road.cyclic, params.as_array(), float(dt_state), int(n_substeps), work)
    _raise_status(status, arr)
    return VehicleState.from_array(arr)


def integrate_plant_step(x: VehicleState, u: ControlInput, road: RoadMap,
                         params: VehicleParams, dt_plant: float = 0.01) -> VehicleState:
    """One RK4 step of the simulated vehicle; reverse speed is clamped to zero."""
    state, _ = plant_step(x, u, road, params, dt_plant)
    return state


def plant_step(x: VehicleState, u: ControlInput, road: RoadMap, params: VehicleParams,
               dt_plant: float = 0.01) -> tuple[VehicleState, bool]:
    """Like :func:`integrate_plant_step` but also reports whether ``Vx`` was clamped."""
    if not dt_plant > 0:
        raise ValueError("dt_plant must be positive")
    out = np.empty(8)
    arr = x.as_array()
    status = rk4_step(arr, float(u[0]), float(u[1]), road.table, road.total_length,
                      road.cyclic, params.as_array(), float(dt_plant), out)
    _raise_status(status, arr)
    clamped = out[VX] < 0.0
    if clamped:
        out[VX] = 0.0
    return VehicleState.from_array(out), bool(clamped)
