"""Multi-agent tracking environment.

Per-agent observations concatenate a target block, one block per peer,
and echo-margin-shaped obstacle blocks, all expressed in the agent's
heading-aligned frame, plus a trailing absorbing-flag bit. Episodes end
normally at the duration limit; collisions and losing the target route
the episode to a self-looping absorbing state with zero metric reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import dynamics
from ..acoustics import active_echo_margin, detection_radius
from ..dynamics import AuvState, velocity_controller
from ..formation import slot_positions
from ..swarm import build_laplacian, algebraic_connectivity
from .scenarios import EpisodeSetup, ScenarioSpec, build_episode

STANDOFF = 12.0          # nominal tracking distance, m
MIN_AGENT_SEPARATION = 1.0   # hard collision floor between vehicles, m
LOST_GRACE_S = 5.0           # target out of detection range this long => lost


@dataclass(frozen=True)
class RewardWeights:
    w1: float = -0.25
    w2: float = -0.4
    w3_per_agent: float = -0.2   # divided by N
    a: float = 1.0
    b: float = 0.0
    d_min_t: float = 12.0
    d_safe: float = 8.0
    lambda_max_per_agent: float = 52.0   # times N
    lambda0_per_agent: float = 50.0      # times N

    @classmethod
    def cooperative(cls) -> "RewardWeights":
        return cls(a=1.0, b=0.0)

    @classmethod
    def mixed(cls) -> "RewardWeights":
        return cls(a=0.5, b=0.5)

    @classmethod
    def split(cls) -> "RewardWeights":
        return cls(a=0.0, b=1.0)

    @classmethod
    def named(cls, setting: str) -> "RewardWeights":
        try:
            return {"cooperative": cls.cooperative, "mixed": cls.mixed,
                    "split": cls.split}[setting]()
        except KeyError:
            raise ValueError(f"unknown reward setting: {setting!r}") from None


@dataclass(frozen=True)
class RewardBreakdown:
    tracking_own: float      # excess distance beyond the standoff
    tracking_swarm: float    # worst excess across the swarm
    proximity_penalty: float
    consistency_term: float
    total: float


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float | None     # blank until a learner relabels it
    next_obs: np.ndarray
    absorbing: bool
    done: bool


def reward_terms(dists_to_target: np.ndarray, peer_dists: np.ndarray,
                 obstacle_clearances: np.ndarray, lam: float, n_agents: int,
                 weights: RewardWeights, agent_i: int) -> RewardBreakdown:
    """Weighted tracking / proximity / consistency reward for one agent.

    `peer_dists` are centre distances to the other agents;
    `obstacle_clearances` are surface clearances for agent_i.
    """
    w3 = weights.w3_per_agent / n_agents
    lam_max = weights.lambda_max_per_agent * n_agents
    lam0 = weights.lambda0_per_agent * n_agents

    excess = np.maximum(dists_to_target - weights.d_min_t, 0.0)
    r_ti = float(excess[agent_i])
    r_tc = float(excess.max())

    near_peers = peer_dists[peer_dists < weights.d_safe]
    near_obs = obstacle_clearances[obstacle_clearances < weights.d_safe]
    r_o = float((weights.d_safe - near_peers).sum() + (weights.d_safe - near_obs).sum())

    r_l = (lam0 - lam_max) if lam >= lam_max else (lam0 - lam)

    total = (weights.w1 * (weights.a * r_tc + weights.b * r_ti)
             + weights.w2 * r_o + w3 * r_l)
    return RewardBreakdown(r_ti, r_tc, r_o, r_l, total)


class TrackingEnv:
    """One episode instance; single-threaded. Instances are independent."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.n = spec.n_agents
        self.obs_dim = 4 * self.n + 2 * spec.n_obs_slots + 1
        self.detection_radius = detection_radius(spec.hydro)
        self.setup: EpisodeSetup | None = None
        self.t = 0
        self.done = False
        self.absorbing = False

    # -- lifecycle -----------------------------------------------------
    def reset(self, episode_seed: int = 0) -> list[np.ndarray]:
        spec = self.spec
        self.setup = build_episode(spec, episode_seed)
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, episode_seed, 0xA6)))

        target0 = self.setup.target_track[0, :2]
        heading0 = math.atan2(self.setup.target_track[0, 3], self.setup.target_track[0, 2])
        slots = slot_positions(self.n, STANDOFF, target0, heading0)
        jitter = rng.normal(0.0, 0.3, size=(self.n, 2))
        self.states = [AuvState(x=float(p[0]), y=float(p[1]), theta=0.0) for p in slots + jitter]

        for st in self.states:
            if np.hypot(st.x - target0[0], st.y - target0[1]) > self.detection_radius:
                raise ValueError(
                    "scenario cannot satisfy the reset constraint: target outside "
                    "an agent's detection radius at t=0")
        self.t = 0
        self.done = False
        self.absorbing = False
        self.done_reason: str | None = None
        self._lost_steps = 0
        return [self.observe(i) for i in range(self.n)]

    # -- geometry helpers ------------------------------------------------
    def target_pos(self) -> np.ndarray:
        return self.setup.target_track[self.t, :2]

    def target_vel(self) -> np.ndarray:
        return self.setup.target_track[self.t, 2:]

    def agent_positions(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.states])

    def dists_to_target(self) -> np.ndarray:
        rel = self.agent_positions() - self.target_pos()[None, :]
        return np.hypot(rel[:, 0], rel[:, 1])

    def obstacle_clearances(self, i: int) -> np.ndarray:
        st = self.states[i]
        out = [math.hypot(st.x - o.x, st.y - o.y) - o.radius for o in self.setup.obstacles]
        return np.asarray(out) if out else np.empty(0)

    def consistency(self) -> float:
        return algebraic_connectivity(build_laplacian(self.agent_positions(), self.spec.hydro))

    def absorbing_obs(self) -> np.ndarray:
        obs = np.zeros(self.obs_dim)
        obs[-1] = 1.0
        return obs

    # -- observation -----------------------------------------------------
    def observe(self, i: int) -> np.ndarray:
        if self.absorbing:
            return self.absorbing_obs()
        st = self.states[i]
        c, s = math.cos(st.theta), math.sin(st.theta)
        rot = np.array([[c, s], [-s, c]])  # world -> body
        own_pos = np.array([st.x, st.y])
        own_vel = st.world_velocity()

        parts = [self._rel_block(rot, self.target_pos() - own_pos,
                                 self.target_vel() - own_vel)]
        for j in range(self.n):
            if j == i:
                continue
            other = self.states[j]
            parts.append(self._rel_block(
                rot,
                np.array([other.x, other.y]) - own_pos,
                other.world_velocity() - own_vel,
            ))

        obstacle_block = np.zeros(2 * self.spec.n_obs_slots)
        detected = []
        for o in self.setup.obstacles:
            rel = o.center() - own_pos
            d = float(np.hypot(*rel))
            em = active_echo_margin(d, self.spec.hydro) if d > 0 else math.inf
            if em >= 0.0:
                detected.append((d, em, rel))
        detected.sort(key=lambda item: item[0])
        for k, (d, em, rel) in enumerate(detected[: self.spec.n_obs_slots]):
            body = rot @ rel
            ang = math.atan2(body[1], body[0])
            obstacle_block[2 * k] = em * math.cos(ang)
            obstacle_block[2 * k + 1] = em * math.sin(ang)
        parts.append(obstacle_block)
        parts.append([0.0])  # absorbing flag
        return np.concatenate(parts)

    @staticmethod
    def _rel_block(rot: np.ndarray, rel_pos: np.ndarray, rel_vel: np.ndarray) -> np.ndarray:
        return np.concatenate([rot @ rel_pos, rot @ rel_vel])

    # -- reward ----------------------------------------------------------
    def reward(self, i: int, weights: RewardWeights) -> tuple[float, RewardBreakdown]:
        if self.absorbing:
            zero = RewardBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)
            return 0.0, zero
        dists = self.dists_to_target()
        pos = self.agent_positions()
        peer = np.hypot(*(pos[np.arange(self.n) != i] - pos[i]).T)
        b = reward_terms(dists, peer, self.obstacle_clearances(i), self.consistency(),
                         self.n, weights, i)
        return b.total, b

    # -- stepping ----------------------------------------------------------
    def clamp_action(self, action) -> np.ndarray:
        p = self.spec.auv_params
        v = min(max(float(action[0]), 0.0), p.v_max)
        w = min(max(float(action[1]), -p.w_max), p.w_max)
        return np.array([v, w])

    def step(self, joint_action) -> tuple[list[Transition], bool]:
        if self.setup is None:
            raise RuntimeError("call reset() before step()")
        weights = RewardWeights.named(self.spec.reward_setting)

        if self.absorbing:
            # self-loop: every action keeps the absorbing state, zero reward
            obs_a = self.absorbing_obs()
            trans = [Transition(obs_a, self.clamp_action(a), None, obs_a, True, True)
                     for a in joint_action]
            self._last_rewards = [0.0] * self.n
            self._last_breakdowns = [RewardBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)] * self.n
            return trans, True
        if self.done:
            raise RuntimeError("episode finished normally; reset() to start a new one")

        prev_obs = [self.observe(i) for i in range(self.n)]
        actions = [self.clamp_action(a) for a in joint_action]
        p = self.spec.auv_params
        for i, (act, st) in enumerate(zip(actions, self.states)):
            tau = velocity_controller(st, act[0], act[1], p)
            self.states[i] = dynamics.step(st, tau, p)
        self.t += 1

        reason = self._termination_reason()
        self.done = reason is not None
        self.absorbing = reason in ("collision", "lost")
        self.done_reason = reason

        rewards, breakdowns = [], []
        for i in range(self.n):
            r, b = self.reward(i, weights)
            rewards.append(r)
            breakdowns.append(b)
        self._last_rewards = rewards
        self._last_breakdowns = breakdowns

        next_obs = [self.observe(i) for i in range(self.n)]
        trans = [Transition(prev_obs[i], actions[i], None, next_obs[i],
                            self.absorbing, self.done) for i in range(self.n)]
        return trans, self.done

    def _termination_reason(self) -> str | None:
        pos = self.agent_positions()
        for i in range(self.n):
            clear = self.obstacle_clearances(i)
            if clear.size and clear.min() < 0.0:
                return "collision"
            for j in range(i + 1, self.n):
                if np.hypot(*(pos[i] - pos[j])) < MIN_AGENT_SEPARATION:
                    return "collision"
        if self.dists_to_target().min() > self.detection_radius:
            self._lost_steps += 1
            if self._lost_steps >= int(round(LOST_GRACE_S / self.spec.auv_params.dt)):
                return "lost"
        else:
            self._lost_steps = 0
        if self.t >= self.spec.duration_steps:
            return "duration"
        return None

    # metric side-channel for the latest step
    def last_env_rewards(self) -> list[float]:
        return list(self._last_rewards)

    def last_breakdowns(self) -> list[RewardBreakdown]:
        return list(self._last_breakdowns)
