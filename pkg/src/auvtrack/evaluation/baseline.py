"""Reward-function baseline: soft actor-critic with centralized critics
over joint state-action and decentralized actors, trained directly on the
metric reward under a named weight setting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..env import RewardWeights, ScenarioSpec, TrackingEnv, rollout_episode
from ..madac.sac import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    ActionMap,
    SacConfig,
    gaussian_tanh_logprob_expr,
    gaussian_tanh_sample,
)
from ..madac.trainer import obs_scale_vector
from .metrics import MetricsReport, compute_metrics

log = logging.getLogger("auvtrack.baseline")


@dataclass(frozen=True)
class CtdeConfig:
    budget_steps: int = 20000
    warmup_steps: int = 2000
    explore_steps: int = 1000
    sac: SacConfig = field(default_factory=SacConfig)
    eval_episodes: int = 3
    divergence_return: float = -1e5


class CtdeSac:
    """One actor per agent; per-agent twin critics that see the joint
    observation and joint action."""

    def __init__(self, spec: ScenarioSpec, setting: str, cfg: CtdeConfig, seed: int):
        self.spec = spec
        self.cfg = cfg
        self.weights = RewardWeights.named(setting)
        self.setting = setting
        self.env = TrackingEnv(spec)
        self.n = spec.n_agents
        self.obs_dim = self.env.obs_dim
        self.act_dim = 2
        self.rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC7DE)))
        self.obs_scale = obs_scale_vector(self.n, spec.n_obs_slots)
        self.action_map = ActionMap(spec.auv_params.v_max, spec.auv_params.w_max)

        h1, h2 = cfg.sac.hidden
        joint_dim = self.n * (self.obs_dim + self.act_dim)
        mk = lambda i, tag: np.random.default_rng(np.random.SeedSequence((seed, tag, i)))
        self.actors = [nn.MLP([self.obs_dim, h1, h2, 2 * self.act_dim], mk(i, 1),
                              act="relu", out_scale=0.01) for i in range(self.n)]
        self.q1 = [nn.MLP([joint_dim, h1, h2, 1], mk(i, 2), act="relu") for i in range(self.n)]
        self.q2 = [nn.MLP([joint_dim, h1, h2, 1], mk(i, 3), act="relu") for i in range(self.n)]
        self.q1_t = [nn.MLP([joint_dim, h1, h2, 1], mk(i, 2), act="relu") for i in range(self.n)]
        self.q2_t = [nn.MLP([joint_dim, h1, h2, 1], mk(i, 3), act="relu") for i in range(self.n)]
        for src, dst in list(zip(self.q1, self.q1_t)) + list(zip(self.q2, self.q2_t)):
            dst.load_state_dict(src.state_dict())
        self.log_alpha = [nn.param(np.array(np.log(cfg.sac.alpha_init)))
                          for _ in range(self.n)]
        lr = cfg.sac.lr
        self.opt_actor = [nn.Adam(a.parameters(), lr) for a in self.actors]
        self.opt_q = [nn.Adam(self.q1[i].parameters()
                              + [(f"q2.{k}", p) for k, p in self.q2[i].parameters()], lr)
                      for i in range(self.n)]
        self.opt_alpha = [nn.Adam([("log_alpha", la)], lr) for la in self.log_alpha]

        cap = cfg.budget_steps + 4096
        self.b_obs = np.zeros((cap, self.n, self.obs_dim))
        self.b_act = np.zeros((cap, self.n, self.act_dim))
        self.b_rew = np.zeros((cap, self.n))
        self.b_next = np.zeros((cap, self.n, self.obs_dim))
        self.size = 0

    # -- acting ----------------------------------------------------------
    def _actor_np(self, i: int, obs: np.ndarray):
        out = self.actors[i].forward_np(obs * self.obs_scale)
        return out[..., :self.act_dim], np.clip(out[..., self.act_dim:],
                                                LOG_STD_MIN, LOG_STD_MAX)

    def act(self, i: int, obs: np.ndarray, stochastic: bool) -> np.ndarray:
        mean, log_std = self._actor_np(i, obs[None, :])
        if not stochastic:
            return np.tanh(mean[0])
        eps = self.rng.standard_normal(self.act_dim)
        a, _ = gaussian_tanh_sample(mean[0], log_std[0], eps)
        return a

    def env_actions(self, obs_list, stochastic: bool) -> list[np.ndarray]:
        return [self.action_map.to_env(self.act(i, obs_list[i], stochastic))
                for i in range(self.n)]

    # -- training ----------------------------------------------------------
    def train(self) -> tuple[MetricsReport, list[dict]]:
        cfg = self.cfg
        steps = 0
        updates = 0
        curve = []
        episode = 0
        while steps < cfg.budget_steps:
            episode += 1
            ep_ret, n_steps = self._rollout(steps)
            steps += n_steps
            if ep_ret < cfg.divergence_return:
                raise RuntimeError(f"baseline diverged: return {ep_ret}")
            if steps > cfg.warmup_steps:
                owed = min(steps, cfg.budget_steps) - cfg.warmup_steps - updates
                for _ in range(max(owed, 0)):
                    self._update_once()
                    updates += 1
            curve.append({"episode": episode, "env_steps": steps, "env_reward": ep_ret})
            log.info("ctde %s ep %d steps %d return %.1f", self.setting, episode,
                     steps, ep_ret)
        report = self.evaluate(cfg.eval_episodes)
        return report, curve

    def _rollout(self, steps_so_far: int) -> tuple[float, int]:
        env = self.env
        obs = env.reset(episode_seed=int(self.rng.integers(0, 2 ** 31)))
        done = False
        total = 0.0
        steps = 0
        while not done:
            if steps_so_far + steps < self.cfg.explore_steps:
                acts = [self.action_map.to_env(self.rng.uniform(-1, 1, 2))
                        for _ in range(self.n)]
            else:
                acts = self.env_actions(obs, True)
            trans, done = env.step(acts)
            rewards = np.asarray(env.last_env_rewards())
            i = self.size
            self.b_obs[i] = np.stack([tr.obs for tr in trans])
            self.b_act[i] = np.stack([self.action_map.to_unit(tr.action) for tr in trans])
            self.b_rew[i] = rewards
            self.b_next[i] = np.stack([tr.next_obs for tr in trans])
            self.size += 1
            total += float(rewards.mean())
            obs = [tr.next_obs for tr in trans]
            steps += 1
        return total, steps

    def _joint_rows(self, obs: np.ndarray, act: np.ndarray) -> np.ndarray:
        b = obs.shape[0]
        scaled = obs * self.obs_scale
        return np.concatenate([scaled.reshape(b, -1), act.reshape(b, -1)], axis=1)

    def _update_once(self) -> None:
        cfg = self.cfg.sac
        idx = self.rng.integers(0, self.size, cfg.batch_size)
        obs, act = self.b_obs[idx], self.b_act[idx]
        rew, nxt = self.b_rew[idx], self.b_next[idx]
        b = len(idx)

        # next joint actions from all current policies
        a_next = np.zeros((b, self.n, self.act_dim))
        logp_next = np.zeros((b, self.n))
        for i in range(self.n):
            mean, log_std = self._actor_np(i, nxt[:, i])
            eps = self.rng.standard_normal((b, self.act_dim))
            a_next[:, i], logp_next[:, i] = gaussian_tanh_sample(mean, log_std, eps)
        xn = self._joint_rows(nxt, a_next)

        for i in range(self.n):
            alpha = float(np.exp(self.log_alpha[i].data))
            qn = np.minimum(self.q1_t[i].forward_np(xn), self.q2_t[i].forward_np(xn))[:, 0]
            y = rew[:, i] + cfg.gamma * (qn - alpha * logp_next[:, i])
            x = nn.tensor(self._joint_rows(obs, act))
            y_t = nn.tensor(y[:, None])
            loss = ((self.q1[i](x) - y_t) ** 2).mean() + ((self.q2[i](x) - y_t) ** 2).mean()
            self.opt_q[i].zero_grad()
            nn.backward(loss)
            self.opt_q[i].step()

            # actor i: own action reparameterized, peers' actions held fixed
            obs_t = nn.tensor(obs[:, i] * self.obs_scale)
            out = self.actors[i](obs_t)
            mean = out[:, :self.act_dim]
            log_std = out[:, self.act_dim:].clip(LOG_STD_MIN, LOG_STD_MAX)
            eps = self.rng.standard_normal((b, self.act_dim))
            a_pi, logp_pi = gaussian_tanh_logprob_expr(mean, log_std, eps)
            scaled = obs * self.obs_scale
            before = np.concatenate([scaled.reshape(b, -1),
                                     act[:, :i].reshape(b, -1)], axis=1)
            after = act[:, i + 1:].reshape(b, -1)
            xa = nn.concat([nn.tensor(before), a_pi, nn.tensor(after)], axis=1)
            q_pi = _min_expr(self.q1[i](xa), self.q2[i](xa))[:, 0]
            actor_loss = (logp_pi * alpha - q_pi).mean()
            self.opt_actor[i].zero_grad()
            nn.backward(actor_loss)
            self.opt_actor[i].step()
            self.q1[i].zero_grad()
            self.q2[i].zero_grad()

            target_entropy = -float(self.act_dim)
            alpha_loss = -(self.log_alpha[i] * nn.tensor(logp_pi.data + target_entropy)).mean()
            self.opt_alpha[i].zero_grad()
            nn.backward(alpha_loss)
            self.opt_alpha[i].step()

            self._polyak(self.q1[i], self.q1_t[i])
            self._polyak(self.q2[i], self.q2_t[i])

    def _polyak(self, src: nn.MLP, dst: nn.MLP) -> None:
        tau = self.cfg.sac.polyak
        for (_, ps), (_, pd) in zip(src.parameters(), dst.parameters()):
            pd.data = (1.0 - tau) * pd.data + tau * ps.data

    def evaluate(self, episodes: int) -> MetricsReport:
        env = TrackingEnv(self.spec)
        recs = [rollout_episode(env,
                                lambda obs_list, t: self.env_actions(obs_list, False),
                                episode_seed=88000 + k)
                for k in range(episodes)]
        return compute_metrics(recs, self.spec.hydro)

    def eval_records(self, episodes: int):
        env = TrackingEnv(self.spec)
        return [rollout_episode(env,
                                lambda obs_list, t: self.env_actions(obs_list, False),
                                episode_seed=88000 + k)
                for k in range(episodes)]


def _min_expr(a: nn.Tensor, b: nn.Tensor) -> nn.Tensor:
    diff = a - b
    return (a + b - ((diff * diff) + 1e-24).sqrt()) * 0.5


def sac_ctde_baseline(spec: ScenarioSpec, setting: str, budget: int,
                      seed: int, cfg: CtdeConfig | None = None):
    """Train the baseline and evaluate; returns (trainer, report, curve)."""
    cfg = cfg or CtdeConfig()
    if budget:
        cfg = CtdeConfig(budget_steps=budget, warmup_steps=cfg.warmup_steps,
                         explore_steps=cfg.explore_steps, sac=cfg.sac,
                         eval_episodes=cfg.eval_episodes,
                         divergence_return=cfg.divergence_return)
    spec_for_setting = type(spec).from_dict({**spec.to_dict(),
                                             "reward": {"setting": setting}})
    trainer = CtdeSac(spec_for_setting, setting, cfg, seed)
    report, curve = trainer.train()
    return trainer, report, curve
