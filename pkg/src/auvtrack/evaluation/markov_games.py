"""Small two-player Markov games with exact Bellman solves, used to check
the value-consistency identity sum_i sum_s (v_i(s) - E_{a_i~pi_i} q_i(s, a_i)) = 0
numerically."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MarkovGame:
    transition: np.ndarray  # (S, A1, A2, S)
    rewards: np.ndarray     # (2, S, A1, A2)
    gamma: float

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> tuple[int, int]:
        return self.transition.shape[1], self.transition.shape[2]


def random_game(rng: np.random.Generator, n_states: int = 6,
                n_actions: tuple[int, int] = (3, 3), gamma: float = 0.9) -> MarkovGame:
    a1, a2 = n_actions
    raw = rng.uniform(0.05, 1.0, size=(n_states, a1, a2, n_states))
    transition = raw / raw.sum(axis=-1, keepdims=True)
    rewards = rng.normal(0.0, 1.0, size=(2, n_states, a1, a2))
    return MarkovGame(transition=transition, rewards=rewards, gamma=gamma)


def random_policies(rng: np.random.Generator, game: MarkovGame) -> list[np.ndarray]:
    out = []
    for a in game.n_actions:
        raw = rng.uniform(0.05, 1.0, size=(game.n_states, a))
        out.append(raw / raw.sum(axis=1, keepdims=True))
    return out


def _joint_policy(policies: list[np.ndarray]) -> np.ndarray:
    # (S, A1, A2) joint action probabilities under independent policies
    return policies[0][:, :, None] * policies[1][:, None, :]


def solve_values(game: MarkovGame, policies: list[np.ndarray]) -> np.ndarray:
    """Exact v_i from the linear Bellman system (I - gamma P_pi) v = r_pi."""
    joint = _joint_policy(policies)
    p_pi = np.einsum("sxy,sxyt->st", joint, game.transition)
    system = np.eye(game.n_states) - game.gamma * p_pi
    v = np.zeros((2, game.n_states))
    for i in range(2):
        r_pi = np.einsum("sxy,sxy->s", joint, game.rewards[i])
        v[i] = np.linalg.solve(system, r_pi)
    return v


def q_values(game: MarkovGame, policies: list[np.ndarray],
             v: np.ndarray) -> list[np.ndarray]:
    """q_i(s, a_i) with the other agent marginalized under its policy."""
    cont = game.rewards + game.gamma * np.einsum("sxyt,it->isxy", game.transition, v)
    q1 = np.einsum("sy,sxy->sx", policies[1], cont[0])
    q2 = np.einsum("sx,sxy->sy", policies[0], cont[1])
    return [q1, q2]


def policy_value_gap(game: MarkovGame, policies: list[np.ndarray],
                     v: np.ndarray | None = None) -> float:
    """sum_i sum_s (v_i(s) - E_{a_i ~ pi_i} q_i(s, a_i)); zero for the exact v."""
    if v is None:
        v = solve_values(game, policies)
    q = q_values(game, policies, v)
    gap = 0.0
    for i in range(2):
        gap += float((v[i] - (policies[i] * q[i]).sum(axis=1)).sum())
    return gap


def gap_value_sensitivity(game: MarkovGame, policies: list[np.ndarray],
                          agent: int, state: int) -> float:
    """Exact d(gap)/d v_agent[state]: 1 - gamma * sum_s P_pi(state | s)."""
    joint = _joint_policy(policies)
    p_pi = np.einsum("sxy,sxyt->st", joint, game.transition)
    return 1.0 - game.gamma * float(p_pi[:, state].sum())
