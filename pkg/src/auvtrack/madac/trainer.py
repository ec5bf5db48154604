"""Adversarial imitation trainer: per-agent soft actor-critic learners
plus a centralized discriminator over joint state-action rows.

Loop structure per episode: roll the policies in the environment storing
reward-free joint transitions (with absorbing wrapping on abnormal
termination), then run one imitation gradient step and one policy
gradient step per environment step collected (after a warmup).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..env import EpisodeRecord, RewardWeights, ScenarioSpec, TrackingEnv, rollout_episode
from ..nn import load_checkpoint, save_checkpoint
from .buffer import ReplayBuffer, joint_rows
from .discriminator import Discriminator, DiscriminatorConfig
from .sac import ActionMap, SacAgent, SacConfig

log = logging.getLogger("auvtrack.madac")


def obs_scale_vector(n_agents: int, n_obs_slots: int) -> np.ndarray:
    """Fixed physics-derived input scaling: ranges ~detection radius for
    positions, ~max speed for velocities, ~max echo margin for dB terms."""
    block = [1.0 / 25.0, 1.0 / 25.0, 1.0 / 3.0, 1.0 / 3.0]
    return np.array(block * n_agents + [1.0 / 50.0] * (2 * n_obs_slots) + [1.0])


@dataclass(frozen=True)
class MadacConfig:
    budget_steps: int = 60000
    warmup_steps: int = 5000
    explore_steps: int = 1500         # uniform actions before the policy takes over
    batch_size: int = 256
    sac: SacConfig = field(default_factory=SacConfig)
    disc: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    decentralized: bool = False       # ablation: one discriminator per agent
    eval_every_episodes: int = 8
    eval_episodes: int = 3
    random_calibration_episodes: int = 20
    stop_at_normalized: float | None = None
    divergence_floor: float = -1.0
    divergence_patience: int = 50


@dataclass
class TrainResult:
    agents: list[SacAgent]
    action_map: ActionMap
    curve: list[dict]
    final_normalized: float
    env_steps: int
    random_return: float
    expert_return: float


class MadacTrainer:
    def __init__(self, spec: ScenarioSpec, expert_episodes: list[EpisodeRecord],
                 cfg: MadacConfig, seed: int):
        if not expert_episodes:
            raise ValueError("expert buffer is empty")
        self.spec = spec
        self.cfg = cfg
        self.seed = seed
        self.env = TrackingEnv(spec)
        self.n = spec.n_agents
        self.obs_dim = self.env.obs_dim
        self.act_dim = 2
        self.rng = np.random.default_rng(np.random.SeedSequence((seed, 0xDAC)))
        self.action_map = ActionMap(spec.auv_params.v_max, spec.auv_params.w_max)
        self.obs_scale = obs_scale_vector(self.n, spec.n_obs_slots)

        self.agents = [
            SacAgent(self.obs_dim, self.act_dim, cfg.sac,
                     np.random.default_rng(np.random.SeedSequence((seed, 0xA0 + i))),
                     obs_scale=self.obs_scale)
            for i in range(self.n)
        ]
        joint_scale = np.concatenate([np.tile(self.obs_scale, self.n),
                                      np.ones(self.n * self.act_dim)])
        self._joint_scale = joint_scale
        d_rng = np.random.default_rng(np.random.SeedSequence((seed, 0xD0)))
        if cfg.decentralized:
            per_dim = self.obs_dim + self.act_dim
            self.discriminators = [Discriminator(per_dim, cfg.disc,
                                                 np.random.default_rng(np.random.SeedSequence((seed, 0xD1 + i))))
                                   for i in range(self.n)]
            self.discriminator = None
        else:
            self.discriminator = Discriminator(self.n * (self.obs_dim + self.act_dim),
                                               cfg.disc, d_rng)
            self.discriminators = None

        self.buffer = ReplayBuffer(cfg.budget_steps + 4096, self.n, self.obs_dim,
                                   self.act_dim)
        self.expert_rows = self._expert_rows(expert_episodes)
        self.weights = RewardWeights.named(spec.reward_setting)
        self.random_return, self.expert_return = self._calibrate(expert_episodes)

    # -- data plumbing -----------------------------------------------------
    def _expert_rows(self, episodes: list[EpisodeRecord]) -> np.ndarray:
        rows = []
        for ep in episodes:
            T = ep.steps
            obs = ep.obs[:T]                      # (T, N, D)
            act = np.stack([self.action_map.to_unit(ep.actions[t]) for t in range(T)])
            rows.append(joint_rows(obs, act))
        return np.concatenate(rows, axis=0) * self._joint_scale

    def _replay_rows(self, batch: dict) -> np.ndarray:
        return joint_rows(batch["obs"], batch["act"]) * self._joint_scale

    def _calibrate(self, expert_episodes: list[EpisodeRecord]) -> tuple[float, float]:
        from ..evaluation.metrics import episode_metric_return

        rng = np.random.default_rng(np.random.SeedSequence((self.seed, 0xCA1)))
        rand_returns = []
        env = TrackingEnv(self.spec)
        for k in range(self.cfg.random_calibration_episodes):
            def rand_policy(obs_list, t):
                return [self.action_map.to_env(rng.uniform(-1, 1, 2))
                        for _ in range(self.n)]
            rec = rollout_episode(env, rand_policy, episode_seed=90000 + k)
            rand_returns.append(rec.episode_return())
        r_random = float(np.mean(rand_returns))
        r_expert = float(np.mean([episode_metric_return(ep, self.weights)
                                  for ep in expert_episodes]))
        if abs(r_expert - r_random) < 1e-6:
            raise ValueError("degenerate normalization: expert and random returns match")
        return r_random, r_expert

    def normalized(self, metric_return: float) -> float:
        return (metric_return - self.random_return) / (self.expert_return - self.random_return)

    # -- acting ------------------------------------------------------------
    def _policy_actions(self, obs_list, stochastic: bool, rng) -> list[np.ndarray]:
        out = []
        for i, agent in enumerate(self.agents):
            unit = agent.act(obs_list[i], rng if stochastic else None)
            out.append(self.action_map.to_env(unit))
        return out

    # -- training loop -------------------------------------------------------
    def train(self) -> TrainResult:
        cfg = self.cfg
        total_steps = 0
        updates_done = 0
        episode = 0
        curve: list[dict] = []
        recent_train_norm: list[float] = []
        eval_norm = float("nan")
        loss_acc: dict[str, list] = {"d_loss": [], "actor_loss": []}

        while total_steps < cfg.budget_steps:
            episode += 1
            ep_return, steps = self._rollout_training_episode(total_steps)
            total_steps += steps

            if total_steps > cfg.warmup_steps:
                owed = min(total_steps, cfg.budget_steps) - cfg.warmup_steps - updates_done
                for _ in range(max(owed, 0)):
                    stats = self._update_once()
                    updates_done += 1
                    loss_acc["d_loss"].append(stats["d_loss"])
                    loss_acc["actor_loss"].append(stats["actor_loss"])

            norm = self.normalized(ep_return)
            recent_train_norm.append(norm)
            if len(recent_train_norm) >= cfg.divergence_patience and all(
                    v < cfg.divergence_floor
                    for v in recent_train_norm[-cfg.divergence_patience:]):
                raise RuntimeError(
                    f"divergence: normalized reward below {cfg.divergence_floor} "
                    f"for {cfg.divergence_patience} consecutive episodes")

            if episode % cfg.eval_every_episodes == 0 and total_steps > cfg.warmup_steps:
                eval_norm = self.evaluate(cfg.eval_episodes)
                curve.append({
                    "episode": episode,
                    "env_steps": total_steps,
                    "env_reward": ep_return,
                    "normalized_reward": eval_norm,
                    "d_loss": float(np.mean(loss_acc["d_loss"][-2000:])) if loss_acc["d_loss"] else float("nan"),
                    "actor_loss": float(np.mean(loss_acc["actor_loss"][-2000:])) if loss_acc["actor_loss"] else float("nan"),
                })
                log.info("ep %d steps %d eval normalized %.3f", episode, total_steps, eval_norm)
                if (cfg.stop_at_normalized is not None
                        and len(curve) >= 2
                        and curve[-1]["normalized_reward"] >= cfg.stop_at_normalized
                        and curve[-2]["normalized_reward"] >= cfg.stop_at_normalized):
                    break

        final = self.evaluate(max(cfg.eval_episodes, 3))
        return TrainResult(agents=self.agents, action_map=self.action_map,
                           curve=curve, final_normalized=final,
                           env_steps=total_steps,
                           random_return=self.random_return,
                           expert_return=self.expert_return)

    def _rollout_training_episode(self, steps_so_far: int) -> tuple[float, int]:
        env = self.env
        obs = env.reset(episode_seed=int(self.rng.integers(0, 2 ** 31)))
        done = False
        ep_return = 0.0
        steps = 0
        while not done:
            if steps_so_far + steps < self.cfg.explore_steps:
                actions = [self.action_map.to_env(self.rng.uniform(-1, 1, 2))
                           for _ in range(self.n)]
            else:
                actions = self._policy_actions(obs, True, self.rng)
            trans, done = env.step(actions)
            self.buffer.add(
                np.stack([tr.obs for tr in trans]),
                np.stack([self.action_map.to_unit(tr.action) for tr in trans]),
                np.stack([tr.next_obs for tr in trans]),
                done=False,  # bootstrap through both time limits and absorbing
            )
            ep_return += float(np.mean(env.last_env_rewards()))
            obs = [tr.next_obs for tr in trans]
            steps += 1
        if env.absorbing:
            # absorbing wrap: one explicit self-loop so the learners see it
            obs_a = env.absorbing_obs()
            zeros = np.zeros((self.n, self.act_dim))
            self.buffer.add(np.stack([obs_a] * self.n), zeros,
                            np.stack([obs_a] * self.n), done=False)
            steps += 1
        return ep_return, steps

    def _update_once(self) -> dict:
        cfg = self.cfg
        batch = self.buffer.sample(cfg.batch_size, self.rng)
        replay_rows = self._replay_rows(batch)
        idx = self.rng.integers(0, len(self.expert_rows), cfg.batch_size)
        expert_rows = self.expert_rows[idx]

        if self.discriminator is not None:
            d_stats = self.discriminator.update(replay_rows, expert_rows)
            rewards = self.discriminator.relabel(replay_rows)
            reward_per_agent = [rewards] * self.n  # same score to every agent
        else:
            d_losses = []
            reward_per_agent = []
            for i, disc in enumerate(self.discriminators):
                r_i = self._per_agent_rows(batch, i)
                e_i = self._per_agent_expert_rows(i)
                d_losses.append(disc.update(r_i, e_i)["d_loss"])
                reward_per_agent.append(disc.relabel(r_i))
            d_stats = {"d_loss": float(np.mean(d_losses))}

        actor_losses = []
        for i, agent in enumerate(self.agents):
            stats = agent.update(batch["obs"][:, i], batch["act"][:, i],
                                 reward_per_agent[i], batch["next_obs"][:, i],
                                 batch["done"], self.rng)
            actor_losses.append(stats["actor_loss"])
        return {"d_loss": d_stats["d_loss"], "actor_loss": float(np.mean(actor_losses))}

    def _per_agent_rows(self, batch: dict, i: int) -> np.ndarray:
        obs = batch["obs"][:, i] * self.obs_scale
        return np.concatenate([obs, batch["act"][:, i]], axis=1)

    def _per_agent_expert_rows(self, i: int) -> np.ndarray:
        # expert_rows are joint; slice out agent i's obs and action columns
        idx = self.rng.integers(0, len(self.expert_rows), self.cfg.batch_size)
        rows = self.expert_rows[idx]
        o0 = i * self.obs_dim
        a0 = self.n * self.obs_dim + i * self.act_dim
        return np.concatenate([rows[:, o0:o0 + self.obs_dim],
                               rows[:, a0:a0 + self.act_dim]], axis=1)

    # -- evaluation ------------------------------------------------------------
    def evaluate(self, episodes: int, seed_base: int = 77000) -> float:
        env = TrackingEnv(self.spec)
        returns = []
        for k in range(episodes):
            rec = rollout_episode(
                env, lambda obs_list, t: self._policy_actions(obs_list, False, None),
                episode_seed=seed_base + k)
            returns.append(rec.episode_return())
        return self.normalized(float(np.mean(returns)))

    def eval_records(self, episodes: int, seed_base: int = 77000) -> list[EpisodeRecord]:
        env = TrackingEnv(self.spec)
        return [rollout_episode(
                    env, lambda obs_list, t: self._policy_actions(obs_list, False, None),
                    episode_seed=seed_base + k)
                for k in range(episodes)]

    # -- persistence -------------------------------------------------------------
    def save_policies(self, out_dir: str | Path) -> list[Path]:
        out = []
        for i, agent in enumerate(self.agents):
            path = Path(out_dir) / f"agent_{i}.ckpt"
            save_checkpoint(path, agent.state_dict())
            out.append(path)
        return out


def load_policies(spec: ScenarioSpec, paths: list[str | Path],
                  cfg: SacConfig | None = None) -> tuple[list[SacAgent], ActionMap]:
    cfg = cfg or SacConfig()
    env = TrackingEnv(spec)
    scale = obs_scale_vector(spec.n_agents, spec.n_obs_slots)
    agents = []
    for i, p in enumerate(paths):
        agent = SacAgent(env.obs_dim, 2, cfg,
                         np.random.default_rng(np.random.SeedSequence((0, 0xA0 + i))),
                         obs_scale=scale)
        agent.load_state_dict(load_checkpoint(p))
        agents.append(agent)
    return agents, ActionMap(spec.auv_params.v_max, spec.auv_params.w_max)


def export_offline(agents: list[SacAgent], action_map: ActionMap,
                   specs: list[ScenarioSpec], episodes_per_scenario: int,
                   seed: int) -> tuple[list[EpisodeRecord], dict]:
    """Roll the trained policies and consolidate reward-free trajectories
    into one offline dataset with a manifest."""
    episodes: list[EpisodeRecord] = []
    per_scenario = {}
    for spec in specs:
        env = TrackingEnv(spec)

        def policy(obs_list, t):
            return [action_map.to_env(agents[i].act(obs_list[i]))
                    for i in range(spec.n_agents)]

        count = 0
        for k in range(episodes_per_scenario):
            rec = rollout_episode(env, policy, episode_seed=seed * 1000 + k,
                                  record_rewards=False)
            episodes.append(rec)
            count += 1
        per_scenario[spec.id] = count
    manifest = {
        "episodes": len(episodes),
        "per_scenario": per_scenario,
        "seed": seed,
        "scenario_ids": [s.id for s in specs],
    }
    return episodes, manifest


def write_curve(path: str | Path, curve: list[dict]) -> None:
    if not curve:
        Path(path).write_text("episode,env_steps,env_reward,normalized_reward,d_loss,actor_loss\n")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(curve[0].keys()))
        writer.writeheader()
        writer.writerows(curve)
