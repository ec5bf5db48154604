"""Centralized discriminator over joint state-action rows, with
spectral-normalized layers, gradient penalty, and logit-based reward
relabeling (identical value broadcast to every agent)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn

LOGIT_CLAMP = 20.0


@dataclass(frozen=True)
class DiscriminatorConfig:
    hidden: tuple[int, int] = (128, 128)
    lr: float = 3e-4
    gp_coeff: float = 1.0
    # False: expert labelled 1 (reward = expert-likeness). True: the
    # literal replay-positive labelling for comparison runs.
    literal_replay_labels: bool = False


class Discriminator:
    def __init__(self, in_dim: int, cfg: DiscriminatorConfig, rng: np.random.Generator):
        self.cfg = cfg
        h1, h2 = cfg.hidden
        self.net = nn.MLP([in_dim, h1, h2, 1], rng, act="relu", spectral=True)
        for layer in self.net.layers:
            # warm-start the power iteration so the norm bound holds from
            # the very first update
            _, layer.u, _ = nn.power_iteration(layer.W.data, layer.u, steps=30)
        self.opt = nn.Adam(self.net.parameters(), cfg.lr)
        self._gp_rng = rng

    # -- scoring -----------------------------------------------------------
    def logits_np(self, x: np.ndarray) -> np.ndarray:
        return np.clip(self.net.forward_np(x)[:, 0], -LOGIT_CLAMP, LOGIT_CLAMP)

    def prob_np(self, x: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.logits_np(x)))

    def relabel(self, x: np.ndarray) -> np.ndarray:
        """Reward = log D - log(1-D) = the clamped logit."""
        r = self.logits_np(x)
        return -r if self.cfg.literal_replay_labels else r

    # -- training ------------------------------------------------------------
    def update(self, replay_x: np.ndarray, expert_x: np.ndarray) -> dict:
        """One BCE + gradient-penalty step; returns the loss decomposition."""
        if len(replay_x) != len(expert_x):
            raise ValueError("replay and expert batches must match in size")
        pos_x, neg_x = ((replay_x, expert_x) if self.cfg.literal_replay_labels
                        else (expert_x, replay_x))
        logit_pos = self.net(nn.tensor(pos_x)).clip(-LOGIT_CLAMP, LOGIT_CLAMP)[:, 0]
        logit_neg = self.net(nn.tensor(neg_x)).clip(-LOGIT_CLAMP, LOGIT_CLAMP)[:, 0]
        bce = -(logit_pos.sigmoid().log().mean()) - ((1.0 - logit_neg.sigmoid()).log().mean())
        gp = nn.gradient_penalty(self.net, replay_x, expert_x, self.cfg.gp_coeff,
                                 self._gp_rng)
        loss = bce + gp
        self.opt.zero_grad()
        nn.backward(loss)
        self.opt.step()
        return {"d_loss": loss.item(), "bce": bce.item(), "gp": gp.item()}

    def top_singular_values(self) -> list[float]:
        return [float(np.linalg.svd(layer.weight_np(), compute_uv=False)[0])
                for layer in self.net.layers]

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {k: p.data.copy() for k, p in self.net.parameters()}
        for i, layer in enumerate(self.net.layers):
            state[f"u.{i}"] = layer.u.copy()
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        self.net.load_state_dict({k: v for k, v in state.items() if not k.startswith("u.")})
        for i, layer in enumerate(self.net.layers):
            layer.u = state[f"u.{i}"].copy()
