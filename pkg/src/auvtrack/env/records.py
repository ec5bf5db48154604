"""Episode logs and their JSON-lines serialization (one episode per line)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class EpisodeRecord:
    scenario_id: str
    n_agents: int
    episode_seed: int
    dt: float
    obs: np.ndarray            # (T+1, N, D); final row may be the absorbing encoding
    actions: np.ndarray        # (T, N, 2)
    rewards: np.ndarray | None  # (T, N) metric rewards, or None (reward-free logs)
    absorbing: np.ndarray      # (T+1,) bool flags on obs rows
    agent_states: np.ndarray   # (T+1, N, 6): x, y, theta, u, v_sway, w
    target: np.ndarray         # (T+1, 4): x, y, vx, vy
    obstacles: list[tuple[float, float, float]]
    done_reason: str

    @property
    def steps(self) -> int:
        return len(self.actions)

    def episode_return(self) -> float:
        """Sum over steps of the agent-mean metric reward."""
        if self.rewards is None:
            raise ValueError("record carries no rewards")
        return float(self.rewards.mean(axis=1).sum())

    def to_json(self) -> str:
        payload = {
            "scenario_id": self.scenario_id,
            "n_agents": self.n_agents,
            "episode_seed": self.episode_seed,
            "dt": self.dt,
            "obs": self.obs.tolist(),
            "actions": self.actions.tolist(),
            "rewards": None if self.rewards is None else self.rewards.tolist(),
            "absorbing": self.absorbing.astype(int).tolist(),
            "agent_states": self.agent_states.tolist(),
            "target": self.target.tolist(),
            "obstacles": [list(o) for o in self.obstacles],
            "done_reason": self.done_reason,
        }
        return json.dumps(payload, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "EpisodeRecord":
        d = json.loads(line)
        rewards = d["rewards"]
        return cls(
            scenario_id=d["scenario_id"],
            n_agents=d["n_agents"],
            episode_seed=d["episode_seed"],
            dt=d["dt"],
            obs=np.asarray(d["obs"], dtype=np.float64),
            actions=np.asarray(d["actions"], dtype=np.float64),
            rewards=None if rewards is None else np.asarray(rewards, dtype=np.float64),
            absorbing=np.asarray(d["absorbing"], dtype=bool),
            agent_states=np.asarray(d["agent_states"], dtype=np.float64),
            target=np.asarray(d["target"], dtype=np.float64),
            obstacles=[tuple(o) for o in d["obstacles"]],
            done_reason=d["done_reason"],
        )


def write_episodes(path: str | Path, episodes: list[EpisodeRecord]) -> None:
    with open(path, "w") as fh:
        for ep in episodes:
            fh.write(ep.to_json())
            fh.write("\n")


def read_episodes(path: str | Path) -> list[EpisodeRecord]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(EpisodeRecord.from_json(line))
    return out


def rollout_episode(env, policy, episode_seed: int, record_rewards: bool = True,
                    max_steps: int | None = None) -> EpisodeRecord:
    """Drive `env` with `policy(obs_list, t) -> list of actions` and log it."""
    obs = env.reset(episode_seed)
    n = env.n
    obs_rows = [np.stack(obs)]
    st_rows = [_states_row(env)]
    absorb_rows = [False]
    act_rows, rew_rows = [], []
    limit = max_steps if max_steps is not None else env.spec.duration_steps
    t = 0
    done = False
    while not done and t < limit:
        actions = policy([row for row in obs_rows[-1]], t)
        trans, done = env.step(actions)
        act_rows.append(np.stack([tr.action for tr in trans]))
        rew_rows.append(np.asarray(env.last_env_rewards()))
        obs_rows.append(np.stack([tr.next_obs for tr in trans]))
        st_rows.append(_states_row(env))
        absorb_rows.append(bool(env.absorbing))
        t += 1
    steps = len(act_rows)
    return EpisodeRecord(
        scenario_id=env.spec.id,
        n_agents=n,
        episode_seed=episode_seed,
        dt=env.spec.auv_params.dt,
        obs=np.stack(obs_rows),
        actions=np.stack(act_rows),
        rewards=np.stack(rew_rows) if record_rewards else None,
        absorbing=np.asarray(absorb_rows, dtype=bool),
        agent_states=np.stack(st_rows),
        target=env.setup.target_track[: steps + 1].copy(),
        obstacles=[(o.x, o.y, o.radius) for o in env.setup.obstacles],
        done_reason=env.done_reason or "duration",
    )


def _states_row(env) -> np.ndarray:
    return np.array([[s.x, s.y, s.theta, s.u, s.v_sway, s.w] for s in env.states])
