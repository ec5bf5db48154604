"""Planar 3-DOF vehicle model with a low-level velocity controller.

Body state is (surge u, sway v, yaw rate w); pose is (x, y, theta). The
plant follows the standard marine-craft form M v' + C(v)v + D(v)v = tau,
integrated with explicit Euler at a fixed timestep. Restoring forces are
zero (neutrally buoyant, planar motion).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    theta = math.fmod(theta, TWO_PI)
    if theta > math.pi:
        theta -= TWO_PI
    elif theta <= -math.pi:
        theta += TWO_PI
    return theta


@dataclass(frozen=True)
class AuvParams:
    """Plant constants. Inertia/damping values are tunable config for a
    small torpedo-scale hull; caps and timestep are interface limits."""

    m11: float = 30.0
    m22: float = 35.0
    m33: float = 3.5
    d_lin: tuple[float, float, float] = (5.0, 20.0, 4.0)
    d_quad: tuple[float, float, float] = (10.0, 40.0, 6.0)
    v_max: float = 2.4
    w_max: float = 1.0
    k_v: float = 150.0
    k_w: float = 150.0
    dt: float = 0.08
    tau_max: tuple[float, float, float] = (60.0, 0.0, 12.0)

    def __post_init__(self):
        if min(self.m11, self.m22, self.m33) <= 0:
            raise ValueError("inertia entries must be positive")
        if min(self.d_lin) <= 0 or min(self.d_quad) <= 0:
            raise ValueError("damping entries must be positive")
        if self.dt <= 0 or self.v_max <= 0 or self.w_max <= 0:
            raise ValueError("dt, v_max, w_max must be positive")

    def to_dict(self) -> dict:
        return {
            "m11": self.m11, "m22": self.m22, "m33": self.m33,
            "d_lin": list(self.d_lin), "d_quad": list(self.d_quad),
            "v_max": self.v_max, "w_max": self.w_max,
            "k_v": self.k_v, "k_w": self.k_w, "dt": self.dt,
            "tau_max": list(self.tau_max),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuvParams":
        d = dict(d)
        for key in ("d_lin", "d_quad", "tau_max"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class AuvState:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    u: float = 0.0
    v_sway: float = 0.0
    w: float = 0.0

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def world_velocity(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([self.u * c - self.v_sway * s, self.u * s + self.v_sway * c])


@dataclass(frozen=True)
class ControlInput:
    tau_u: float = 0.0
    tau_v: float = 0.0
    tau_w: float = 0.0


def rotation_matrix(theta: float) -> np.ndarray:
    """Body-to-world transform for (u, v, w) rates."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _clamp_tau(tau: ControlInput, params: AuvParams) -> np.ndarray:
    lim = params.tau_max
    return np.array([
        min(max(tau.tau_u, -lim[0]), lim[0]),
        min(max(tau.tau_v, -lim[1]), lim[1]),
        min(max(tau.tau_w, -lim[2]), lim[2]),
    ])


def coriolis_force(v: np.ndarray, params: AuvParams) -> np.ndarray:
    """C(v)v for a diagonal inertia matrix (rigid-body terms)."""
    u, vs, w = v
    return np.array([
        -params.m22 * vs * w,
        params.m11 * u * w,
        (params.m22 - params.m11) * u * vs,
    ])


def damping_force(v: np.ndarray, params: AuvParams) -> np.ndarray:
    lin = np.asarray(params.d_lin)
    quad = np.asarray(params.d_quad)
    return lin * v + quad * np.abs(v) * v


def step(state: AuvState, tau: ControlInput, params: AuvParams) -> AuvState:
    """One explicit-Euler step: pose from the kinematics, body rates from
    the force balance; heading re-wrapped and rate caps applied."""
    eta = np.array([state.x, state.y, state.theta])
    v = np.array([state.u, state.v_sway, state.w])

    eta_next = eta + params.dt * rotation_matrix(state.theta) @ v

    force = _clamp_tau(tau, params) - coriolis_force(v, params) - damping_force(v, params)
    m_inv = np.array([1.0 / params.m11, 1.0 / params.m22, 1.0 / params.m33])
    v_next = v + params.dt * m_inv * force

    v_next[0] = min(max(v_next[0], -params.v_max), params.v_max)
    v_next[2] = min(max(v_next[2], -params.w_max), params.w_max)

    out = AuvState(
        x=float(eta_next[0]), y=float(eta_next[1]), theta=wrap_angle(float(eta_next[2])),
        u=float(v_next[0]), v_sway=float(v_next[1]), w=float(v_next[2]),
    )
    if not all(map(math.isfinite, (out.x, out.y, out.theta, out.u, out.v_sway, out.w))):
        raise FloatingPointError(f"non-finite vehicle state after step: {out}")
    return out


def velocity_controller(state: AuvState, v_des: float, w_des: float,
                        params: AuvParams) -> ControlInput:
    """Proportional surge/yaw law with steady-state drag feedforward on
    surge. Out-of-range commands are clamped, not rejected."""
    v_des = min(max(v_des, 0.0), params.v_max)
    w_des = min(max(w_des, -params.w_max), params.w_max)
    drag_ff = params.d_lin[0] * v_des + params.d_quad[0] * v_des * v_des
    tau_u = params.k_v * (v_des - state.u) + drag_ff
    tau_w = params.k_w * (w_des - state.w)
    return ControlInput(tau_u=tau_u, tau_v=0.0, tau_w=tau_w)


def kinetic_energy(state: AuvState, params: AuvParams) -> float:
    return 0.5 * (params.m11 * state.u ** 2 + params.m22 * state.v_sway ** 2
                  + params.m33 * state.w ** 2)
