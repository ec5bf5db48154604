"""Per-agent training on offline trajectories and demonstration-
conditioned execution.

Each agent owns an independent (encoder, predictor) pair trained by
action regression on its own trajectories; no parameters are shared.
At execution time the hindsight feature is recomputed every step from
the conditioning demonstration's forward window.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..env import EpisodeRecord, ScenarioSpec, TrackingEnv, rollout_episode
from ..madac.sac import ActionMap
from ..madac.trainer import obs_scale_vector
from .model import GdtConfig, GdtModel, HimEncoder, action_regression_loss

log = logging.getLogger("auvtrack.maigdt")


@dataclass
class AgentTrajectories:
    """One agent's view of the dataset: scaled states and unit actions."""

    states: list[np.ndarray]
    actions: list[np.ndarray]

    @classmethod
    def from_records(cls, episodes: list[EpisodeRecord], agent: int,
                     obs_scale: np.ndarray, action_map: ActionMap) -> "AgentTrajectories":
        states, actions = [], []
        for ep in episodes:
            T = ep.steps
            states.append(ep.obs[:T, agent] * obs_scale)
            actions.append(action_map.to_unit(ep.actions[:, agent, :]))
        return cls(states=states, actions=actions)


def _pad_tail(arr: np.ndarray, length: int) -> tuple[np.ndarray, np.ndarray]:
    t = len(arr)
    valid = np.zeros(length, dtype=bool)
    valid[:t] = True
    if t == length:
        return arr, valid
    pad = np.zeros((length - t,) + arr.shape[1:])
    return np.concatenate([arr, pad], axis=0), valid


def sample_windows(data: AgentTrajectories, batch: int, K: int,
                   rng: np.random.Generator) -> dict:
    """Uniform over (episode, start index); short episodes are left-padded."""
    pairs = []
    for e, s in enumerate(data.states):
        n_starts = max(len(s) - K + 1, 1)
        pairs.append(n_starts)
    weights = np.array(pairs, dtype=np.float64)
    probs = weights / weights.sum()
    eps = rng.choice(len(data.states), size=batch, p=probs)

    s_out = np.zeros((batch, K, data.states[0].shape[1]))
    a_out = np.zeros((batch, K, data.actions[0].shape[1]))
    t_out = np.zeros((batch, K), dtype=np.intp)
    valid = np.zeros((batch, K), dtype=bool)
    sub_states = np.zeros((batch * K, K, data.states[0].shape[1]))
    sub_valid = np.zeros((batch * K, K), dtype=bool)
    for b, e in enumerate(eps):
        s, a = data.states[e], data.actions[e]
        T = len(s)
        if T >= K:
            w = int(rng.integers(0, T - K + 1))
            span = K
            s_out[b], a_out[b] = s[w: w + K], a[w: w + K]
            valid[b] = True
        else:
            # left-pad short episodes so real tokens end at the context tail
            w = 0
            span = T
            s_out[b, K - T:], a_out[b, K - T:] = s, a
            valid[b, K - T:] = True
        t_out[b] = np.maximum(np.arange(w - (K - span), w + span), 0)
        for m in range(K):
            if not valid[b, m]:
                continue
            start = w + (m - (K - span))
            sub = s[start: start + K]
            sub_states[b * K + m], sub_valid[b * K + m] = _pad_tail(sub, K)
    return {"states": s_out, "actions": a_out, "timesteps": t_out, "valid": valid,
            "sub_states": sub_states, "sub_valid": sub_valid}


class GdtPolicy:
    def __init__(self, model: GdtModel, him: HimEncoder, cfg: GdtConfig):
        self.model = model
        self.him = him
        self.cfg = cfg
        self._z_cache: dict[int, np.ndarray] = {}

    def reset_cache(self) -> None:
        self._z_cache = {}

    def hindsight_feature(self, demo_states: np.ndarray, t: int) -> np.ndarray:
        """z summarizing the demonstration's next K states from t."""
        if t not in self._z_cache:
            K = self.cfg.context
            t0 = min(t, len(demo_states) - 1)
            window, valid = _pad_tail(demo_states[t0: t0 + K], K)
            z = self.him.encode(window[None], valid[None])
            self._z_cache[t] = z.data[0, 0].copy()
        return self._z_cache[t]

    def act(self, hist_states: list[np.ndarray], hist_actions: list[np.ndarray],
            demo_states: np.ndarray, t: int) -> np.ndarray:
        """Unit-box action at time t from the agent's own last-K history
        and the demonstration's hindsight features."""
        K = self.cfg.context
        lo = max(t - K + 1, 0)
        span = t - lo + 1
        ds = hist_states[0].shape[0]
        da = self.cfg_act_dim
        s = np.zeros((1, K, ds))
        a = np.zeros((1, K, da))
        z = np.zeros((1, K, self.cfg.dz))
        steps = np.zeros((1, K), dtype=np.intp)
        valid = np.zeros((1, K), dtype=bool)
        for m in range(span):
            j = lo + m
            k = K - span + m
            s[0, k] = hist_states[j]
            if j < len(hist_actions):
                a[0, k] = hist_actions[j]
            z[0, k] = self.hindsight_feature(demo_states, j)
            steps[0, k] = j
            valid[0, k] = True
        pred = self.model.forward(nn.tensor(z), s, a, steps, valid)
        return np.clip(pred.data[0, -1], -1.0, 1.0)

    @property
    def cfg_act_dim(self) -> int:
        return self.model.head.b.shape[0]

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {f"model.{k}": v for k, v in self.model.state_dict().items()}
        out.update({f"him.{k}": v for k, v in self.him.state_dict().items()})
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        self.model.load_state_dict({k[6:]: v for k, v in state.items()
                                    if k.startswith("model.")})
        self.him.load_state_dict({k[4:]: v for k, v in state.items()
                                  if k.startswith("him.")})


def train_step(model: GdtModel, him: HimEncoder, opt: nn.Adam, batch: dict) -> float:
    B, K, _ = batch["states"].shape
    z_all = him.encode(batch["sub_states"], batch["sub_valid"])
    z = z_all[:, 0, :].reshape(B, K, -1)
    pred = model.forward(z, batch["states"], batch["actions"],
                         batch["timesteps"], batch["valid"])
    loss = action_regression_loss(pred, batch["actions"], batch["valid"])
    opt.zero_grad()
    nn.backward(loss)
    opt.step()
    return loss.item()


@dataclass
class GdtTrainResult:
    policies: list[GdtPolicy]
    loss_curves: list[list[float]]
    final_losses: list[float]


def train(episodes: list[EpisodeRecord], n_agents: int, steps: int, seed: int,
          cfg: GdtConfig | None = None, batch_size: int = 32,
          spec: ScenarioSpec | None = None) -> GdtTrainResult:
    """Independent per-agent training; returns one policy per agent."""
    if not episodes:
        raise ValueError("offline dataset is empty")
    if any(ep.n_agents != n_agents for ep in episodes):
        raise ValueError("dataset agent count does not match the requested swarm size")
    cfg = cfg or GdtConfig()
    obs_dim = episodes[0].obs.shape[-1]
    n_obs_slots = (obs_dim - 4 * n_agents - 1) // 2
    if n_obs_slots >= 0 and 4 * n_agents + 2 * n_obs_slots + 1 == obs_dim:
        obs_scale = obs_scale_vector(n_agents, n_obs_slots)
    else:
        obs_scale = np.ones(obs_dim)  # non-environment layouts pass through
    if spec is not None:
        amap = ActionMap(spec.auv_params.v_max, spec.auv_params.w_max)
    else:
        from ..dynamics import AuvParams
        p = AuvParams()
        amap = ActionMap(p.v_max, p.w_max)

    policies, curves, finals = [], [], []
    for i in range(n_agents):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x6D7, i)))
        data = AgentTrajectories.from_records(episodes, i, obs_scale, amap)
        him = HimEncoder(data.states[0].shape[1], cfg, rng)
        model = GdtModel(data.states[0].shape[1], data.actions[0].shape[1], cfg, rng)
        opt = nn.Adam(model.parameters() + [(f"him.{k}", p) for k, p in him.parameters()],
                      cfg.lr)
        curve = []
        for step in range(steps):
            batch = sample_windows(data, batch_size, cfg.context, rng)
            curve.append(train_step(model, him, opt, batch))
            if (step + 1) % 50 == 0:
                log.info("agent %d step %d loss %.5f", i, step + 1,
                         float(np.mean(curve[-50:])))
        policies.append(GdtPolicy(model, him, cfg))
        curves.append(curve)
        finals.append(float(np.mean(curve[-20:])) if curve else float("nan"))
    return GdtTrainResult(policies=policies, loss_curves=curves, final_losses=finals)


def maigdt_rollout(spec: ScenarioSpec, policies: list[GdtPolicy],
                   demo: EpisodeRecord, episode_seed: int) -> EpisodeRecord:
    """Run the swarm conditioned on one demonstration episode."""
    n = spec.n_agents
    obs_scale = obs_scale_vector(n, spec.n_obs_slots)
    amap = ActionMap(spec.auv_params.v_max, spec.auv_params.w_max)
    demo_states = [demo.obs[: demo.steps, i] * obs_scale for i in range(n)]
    hist_s: list[list[np.ndarray]] = [[] for _ in range(n)]
    hist_a: list[list[np.ndarray]] = [[] for _ in range(n)]
    for p in policies:
        p.reset_cache()

    env = TrackingEnv(spec)

    def policy(obs_list, t):
        actions = []
        for i in range(n):
            hist_s[i].append(obs_list[i] * obs_scale)
            unit = policies[i].act(hist_s[i], hist_a[i], demo_states[i], t)
            hist_a[i].append(unit)
            actions.append(amap.to_env(unit))
        return actions

    return rollout_episode(env, policy, episode_seed)
