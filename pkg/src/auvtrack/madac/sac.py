"""Soft actor-critic: squashed-Gaussian actor, twin critics with polyak
targets, and automatic temperature tuning.

Actions live in [-1, 1]^d inside the learner; ActionMap converts to the
environment's (surge command, yaw-rate command) box.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import nn

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ActionMap:
    """[-1,1]^2 learner box to (surge, yaw-rate) commands. The whole
    negative half of the first axis maps to "stop", so parking does not
    require saturating the squashing nonlinearity."""

    v_max: float
    w_max: float

    def to_env(self, unit: np.ndarray) -> np.ndarray:
        unit = np.clip(unit, -1.0, 1.0)
        return np.array([max(unit[0], 0.0) * self.v_max, unit[1] * self.w_max])

    def to_unit(self, env_action: np.ndarray) -> np.ndarray:
        env_action = np.asarray(env_action)
        v = env_action[..., 0] / self.v_max
        w = env_action[..., 1] / self.w_max
        return np.clip(np.stack([v, w], axis=-1), -1.0, 1.0)


@dataclass(frozen=True)
class SacConfig:
    lr: float = 3e-4
    gamma: float = 0.99
    batch_size: int = 256
    polyak: float = 0.005
    hidden: tuple[int, int] = (128, 128)
    alpha_init: float = 0.2
    target_entropy: float | None = None  # defaults to -act_dim


def gaussian_tanh_sample(mean: np.ndarray, log_std: np.ndarray,
                         eps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reparameterized squashed sample and its log-density (numpy path)."""
    std = np.exp(log_std)
    pre = mean + std * eps
    a = np.tanh(pre)
    logp = (-0.5 * (eps ** 2 + LOG_2PI) - log_std).sum(axis=-1)
    logp = logp - np.log(1.0 - a ** 2 + 1e-6).sum(axis=-1)
    return a, logp


def gaussian_tanh_logprob_expr(mean: nn.Tensor, log_std: nn.Tensor,
                               eps: np.ndarray) -> tuple[nn.Tensor, nn.Tensor]:
    """Tape version of the squashed reparameterized sample."""
    std = log_std.exp()
    pre = mean + std * nn.tensor(eps)
    a = pre.tanh()
    logp = (-0.5 * (nn.tensor(eps ** 2) + LOG_2PI) - log_std).sum(axis=-1)
    logp = logp - ((1.0 - a * a + 1e-6).log()).sum(axis=-1)
    return a, logp


class SacAgent:
    def __init__(self, obs_dim: int, act_dim: int, cfg: SacConfig,
                 rng: np.random.Generator, obs_scale: np.ndarray | None = None):
        self.cfg = cfg
        self.act_dim = act_dim
        self.obs_scale = np.ones(obs_dim) if obs_scale is None else np.asarray(obs_scale)
        h1, h2 = cfg.hidden
        self.actor = nn.MLP([obs_dim, h1, h2, 2 * act_dim], rng, act="relu", out_scale=0.01)
        self.q1 = nn.MLP([obs_dim + act_dim, h1, h2, 1], rng, act="relu")
        self.q2 = nn.MLP([obs_dim + act_dim, h1, h2, 1], rng, act="relu")
        self.q1_target = nn.MLP([obs_dim + act_dim, h1, h2, 1], rng, act="relu")
        self.q2_target = nn.MLP([obs_dim + act_dim, h1, h2, 1], rng, act="relu")
        self.q1_target.load_state_dict(self.q1.state_dict())
        self.q2_target.load_state_dict(self.q2.state_dict())
        self.log_alpha = nn.param(np.array(np.log(cfg.alpha_init)))
        self.target_entropy = (cfg.target_entropy if cfg.target_entropy is not None
                               else -float(act_dim))
        self.opt_actor = nn.Adam(self.actor.parameters(), cfg.lr)
        self.opt_q = nn.Adam(self.q1.parameters() + [(f"q2.{k}", p) for k, p in self.q2.parameters()], cfg.lr)
        self.opt_alpha = nn.Adam([("log_alpha", self.log_alpha)], cfg.lr)

    # -- inference -------------------------------------------------------
    def _actor_out_np(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out = self.actor.forward_np(obs * self.obs_scale)
        mean, log_std = out[..., : self.act_dim], out[..., self.act_dim:]
        return mean, np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)

    def act(self, obs: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        """Unit-box action; stochastic when an rng is supplied."""
        mean, log_std = self._actor_out_np(obs[None, :])
        if rng is None:
            return np.tanh(mean[0])
        eps = rng.standard_normal(self.act_dim)
        a, _ = gaussian_tanh_sample(mean[0], log_std[0], eps)
        return a

    def alpha(self) -> float:
        return float(np.exp(self.log_alpha.data))

    # -- update ------------------------------------------------------------
    def update(self, obs: np.ndarray, act: np.ndarray, rew: np.ndarray,
               next_obs: np.ndarray, done: np.ndarray,
               rng: np.random.Generator) -> dict:
        cfg = self.cfg
        obs_s = obs * self.obs_scale
        next_s = next_obs * self.obs_scale
        b = len(obs)

        # critic target (no tape)
        mean_n, log_std_n = self._actor_out_np(next_obs)
        eps_n = rng.standard_normal((b, self.act_dim))
        a_next, logp_next = gaussian_tanh_sample(mean_n, log_std_n, eps_n)
        xn = np.concatenate([next_s, a_next], axis=1)
        q_next = np.minimum(self.q1_target.forward_np(xn), self.q2_target.forward_np(xn))[:, 0]
        y = rew + cfg.gamma * (1.0 - done) * (q_next - self.alpha() * logp_next)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError("non-finite critic target; training diverged")

        x = nn.tensor(np.concatenate([obs_s, act], axis=1))
        y_t = nn.tensor(y[:, None])
        q1_pred = self.q1(x)
        q2_pred = self.q2(x)
        critic_loss = ((q1_pred - y_t) ** 2).mean() + ((q2_pred - y_t) ** 2).mean()
        self.opt_q.zero_grad()
        nn.backward(critic_loss)
        self.opt_q.step()

        # actor (critics held fixed; gradients flow through the action only)
        obs_t = nn.tensor(obs_s)
        out = self.actor(obs_t)
        mean = out[:, : self.act_dim]
        log_std = out[:, self.act_dim:].clip(LOG_STD_MIN, LOG_STD_MAX)
        eps = rng.standard_normal((b, self.act_dim))
        a_pi, logp_pi = gaussian_tanh_logprob_expr(mean, log_std, eps)
        xa = nn.concat([obs_t, a_pi], axis=1)
        q_pi = _min_t(self.q1(xa), self.q2(xa))[:, 0]
        actor_loss = (logp_pi * self.alpha() - q_pi).mean()
        self.opt_actor.zero_grad()
        self.q1.zero_grad()
        self.q2.zero_grad()
        nn.backward(actor_loss)
        self.opt_actor.step()
        self.q1.zero_grad()
        self.q2.zero_grad()

        # temperature toward the entropy target
        logp_const = logp_pi.data
        alpha_loss = -(self.log_alpha * nn.tensor(logp_const + self.target_entropy)).mean()
        self.opt_alpha.zero_grad()
        nn.backward(alpha_loss)
        self.opt_alpha.step()

        self._polyak(self.q1, self.q1_target)
        self._polyak(self.q2, self.q2_target)
        return {"critic_loss": critic_loss.item() / 2.0,
                "actor_loss": actor_loss.item(),
                "alpha": self.alpha()}

    def _polyak(self, src: nn.MLP, dst: nn.MLP) -> None:
        tau = self.cfg.polyak
        for (_, ps), (_, pd) in zip(src.parameters(), dst.parameters()):
            pd.data = (1.0 - tau) * pd.data + tau * ps.data

    # -- persistence -------------------------------------------------------
    def state_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, mod in (("actor", self.actor), ("q1", self.q1), ("q2", self.q2),
                            ("q1_target", self.q1_target), ("q2_target", self.q2_target)):
            for k, p in mod.parameters():
                out[f"{prefix}.{k}"] = p.data.copy()
        out["log_alpha"] = self.log_alpha.data.copy()
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for prefix, mod in (("actor", self.actor), ("q1", self.q1), ("q2", self.q2),
                            ("q1_target", self.q1_target), ("q2_target", self.q2_target)):
            mod.load_state_dict({k[len(prefix) + 1:]: v for k, v in state.items()
                                 if k.startswith(prefix + ".")})
        self.log_alpha.data = np.asarray(state["log_alpha"]).copy()


def _min_t(a: nn.Tensor, b: nn.Tensor) -> nn.Tensor:
    """Elementwise min as 0.5*(a+b-|a-b|) with |x| = sqrt(x^2 + tiny)."""
    diff = a - b
    return (a + b - ((diff * diff) + 1e-24).sqrt()) * 0.5
