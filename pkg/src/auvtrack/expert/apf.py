"""Potential-field controller in the simplified particle world.

Quadratic attraction toward a formation slot on the standoff circle,
inverse-square barrier repulsion from obstacle surfaces (and a short-range
peer term), velocity saturated relative to the target speed. Gains are
tuned so the swarm holds the 12 m standoff while clearing obstacles by
roughly 10-11 m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..env.scenarios import Obstacle
from ..formation import slot_angles


class ApfDomainError(ValueError):
    """Particle inside an obstacle: the potential is undefined there."""


@dataclass(frozen=True)
class ApfParams:
    # attraction is saturated separately so the obstacle barrier can
    # always outvote it; feedforward removes the steady tracking lag
    k_att: float = 1.0
    k_rep: float = 12000.0
    rho0: float = 18.0          # repulsion cutoff from the obstacle surface, m
    standoff: float = 12.0
    formation_angles: tuple[float, ...] | None = None  # None: per-N defaults
    peer_k_rep: float = 12.0
    peer_rho0: float = 4.0
    att_cap_ratio: float = 2.0
    speed_cap_ratio: float = 1.25

    def angles(self, n: int) -> np.ndarray:
        if self.formation_angles is not None:
            if len(self.formation_angles) != n:
                raise ValueError("formation_angles length must equal agent count")
            return np.asarray(self.formation_angles)
        return slot_angles(n)


@dataclass(frozen=True)
class Waypoint:
    position: np.ndarray
    velocity: np.ndarray


def _barrier(rel: np.ndarray, rho: float, k: float, rho0: float) -> np.ndarray:
    """Repulsive velocity along `rel` (which points away from the hazard)."""
    if rho >= rho0:
        return np.zeros(2)
    mag = k * (1.0 / rho - 1.0 / rho0) / (rho * rho)
    n = np.hypot(*rel)
    return mag * rel / n if n > 0 else np.zeros(2)


def apf_step(agent_pos: np.ndarray, target_pos: np.ndarray, target_heading: float,
             target_speed: float, slot_angle: float, peers: np.ndarray,
             obstacles: list[Obstacle], params: ApfParams, dt: float) -> Waypoint:
    """One particle step: next waypoint from the saturated negative
    potential gradient."""
    agent_pos = np.asarray(agent_pos, dtype=np.float64)
    slot = np.asarray(target_pos) + params.standoff * np.array(
        [math.cos(target_heading + slot_angle), math.sin(target_heading + slot_angle)])

    v = params.k_att * (slot - agent_pos) + target_speed * np.array(
        [math.cos(target_heading), math.sin(target_heading)])
    att_cap = params.att_cap_ratio * target_speed
    att_speed = float(np.hypot(*v))
    if att_speed > att_cap:
        v = v * (att_cap / att_speed)
    for o in obstacles:
        rel = agent_pos - o.center()
        rho = float(np.hypot(*rel)) - o.radius
        if rho <= 0.0:
            raise ApfDomainError(f"particle at {agent_pos} is inside obstacle {o}")
        v = v + _barrier(rel, rho, params.k_rep, params.rho0)
    for p in np.asarray(peers).reshape(-1, 2):
        rel = agent_pos - p
        rho = float(np.hypot(*rel))
        if rho > 0.0:
            v = v + _barrier(rel, rho, params.peer_k_rep, params.peer_rho0)

    # floor keeps the field alive when the target is slow or stopped
    cap = params.speed_cap_ratio * max(target_speed, 1.0)
    speed = float(np.hypot(*v))
    if speed > cap:
        v = v * (cap / speed)
    return Waypoint(position=agent_pos + dt * v, velocity=v)


def plan_waypoints(initial_positions: np.ndarray, target_track: np.ndarray,
                   target_speed: float, obstacles: list[Obstacle],
                   params: ApfParams, dt: float) -> list[list[Waypoint]]:
    """Full particle-world rollout: waypoints[t][i] for every step and agent.

    Particles never enter an obstacle; apf_step raises if the field fails
    to keep them out.
    """
    n = len(initial_positions)
    angles = params.angles(n)
    pos = np.array(initial_positions, dtype=np.float64)
    steps = len(target_track) - 1
    out: list[list[Waypoint]] = []
    for t in range(steps):
        tp = target_track[t, :2]
        tv = target_track[t, 2:]
        heading = math.atan2(tv[1], tv[0]) if np.hypot(*tv) > 1e-9 else 0.0
        row = []
        for i in range(n):
            peers = np.delete(pos, i, axis=0)
            wp = apf_step(pos[i], tp, heading, target_speed, angles[i], peers,
                          obstacles, params, dt)
            row.append(wp)
        pos = np.array([wp.position for wp in row])
        out.append(row)
    return out
