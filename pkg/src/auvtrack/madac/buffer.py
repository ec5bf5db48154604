"""Ring buffer of joint transitions, aligned across agents.

Rewards are structurally absent: samples carry (obs, action, next_obs,
absorbing flags) only, and learners relabel on the way out.
"""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    def __init__(self, capacity: int, n_agents: int, obs_dim: int, act_dim: int):
        self.capacity = capacity
        self.n = n_agents
        self.obs = np.zeros((capacity, n_agents, obs_dim))
        self.act = np.zeros((capacity, n_agents, act_dim))
        self.next_obs = np.zeros((capacity, n_agents, obs_dim))
        self.done = np.zeros(capacity)
        self.size = 0
        self._head = 0

    def add(self, obs: np.ndarray, act: np.ndarray, next_obs: np.ndarray,
            done: bool) -> None:
        i = self._head
        self.obs[i] = obs
        self.act[i] = act
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator) -> dict:
        idx = rng.integers(0, self.size, size=batch)
        return {
            "obs": self.obs[idx],
            "act": self.act[idx],
            "next_obs": self.next_obs[idx],
            "done": self.done[idx],
        }


def joint_rows(obs: np.ndarray, act: np.ndarray) -> np.ndarray:
    """Flatten aligned (batch, N, obs) + (batch, N, act) into joint
    discriminator rows (batch, N*obs + N*act)."""
    b = obs.shape[0]
    return np.concatenate([obs.reshape(b, -1), act.reshape(b, -1)], axis=1)
