"""Demonstration-conditioned sequence policy.

Two decoder stacks: an anti-causal encoder that reads a reversed state
sequence and emits a per-step hindsight feature z summarizing the states
from t onward, and a causal action predictor over interleaved
(z, state, action) tokens whose heads sit at the state-token positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn


@dataclass(frozen=True)
class GdtConfig:
    embed_dim: int = 128
    n_blocks: int = 3
    n_heads: int = 1
    context: int = 20
    dz: int = 16
    lr: float = 1e-4
    max_timestep: int = 2400


class HimEncoder(nn.Module):
    """Anti-causal feature extractor: z[t] depends only on states at
    times >= t (within the supplied window)."""

    def __init__(self, state_dim: int, cfg: GdtConfig, rng: np.random.Generator):
        self.cfg = cfg
        e = cfg.embed_dim
        self.state_proj = nn.Linear(state_dim, e, rng, 0.02)
        self.pos_emb = nn.param(rng.normal(0.0, 0.02, size=(cfg.context, e)))
        self.blocks = [nn.DecoderBlock(e, cfg.n_heads, rng) for _ in range(cfg.n_blocks)]
        self.ln_f = nn.LayerNorm(e)
        self.head = nn.Linear(e, cfg.dz, rng, 0.02)

    def encode(self, states: np.ndarray, valid: np.ndarray) -> nn.Tensor:
        """states: (B, T, ds) chronological, tail-padded; valid: (B, T).

        Returns z: (B, T, dz); rows at padded positions are meaningless.
        """
        B, T, _ = states.shape
        if T > self.cfg.context:
            raise ValueError(f"window of {T} exceeds context {self.cfg.context}")
        flipped = states[:, ::-1, :]
        valid_f = valid[:, ::-1]
        x = self.state_proj(nn.tensor(np.ascontiguousarray(flipped)))
        # position by rank among the real tokens, so padded windows match
        # their unpadded equivalents exactly
        pads = T - valid.sum(axis=1)
        pos = np.clip(np.arange(T)[None, :] - pads[:, None], 0, self.cfg.context - 1)
        x = x + nn.embedding(self.pos_emb, pos.astype(np.intp))
        mask = nn.causal_mask_bias(T) + nn.pad_mask_bias(valid_f)
        for block in self.blocks:
            x = block(x, mask)
        z = self.head(self.ln_f(x))
        return z[:, ::-1, :]


class GdtModel(nn.Module):
    """Causal decoder over (z, s, a) token triplets; the prediction head
    reads each state-token position."""

    def __init__(self, state_dim: int, act_dim: int, cfg: GdtConfig,
                 rng: np.random.Generator):
        self.cfg = cfg
        e = cfg.embed_dim
        self.z_proj = nn.Linear(cfg.dz, e, rng, 0.02)
        self.s_proj = nn.Linear(state_dim, e, rng, 0.02)
        self.a_proj = nn.Linear(act_dim, e, rng, 0.02)
        self.t_emb = nn.param(rng.normal(0.0, 0.02, size=(cfg.max_timestep + cfg.context + 1, e)))
        self.blocks = [nn.DecoderBlock(e, cfg.n_heads, rng) for _ in range(cfg.n_blocks)]
        self.ln_f = nn.LayerNorm(e)
        self.head = nn.Linear(e, act_dim, rng, 0.02)

    def forward(self, z: nn.Tensor, states: np.ndarray, actions: np.ndarray,
                timesteps: np.ndarray, valid: np.ndarray) -> nn.Tensor:
        """z: (B,K,dz) tensor; states/actions: padded arrays; returns
        predicted actions at every state-token position, (B, K, act)."""
        B, K, _ = states.shape
        steps = np.clip(timesteps, 0, self.t_emb.shape[0] - 1)
        temb = nn.embedding(self.t_emb, steps)   # (B, K, e)
        tok_z = self.z_proj(z) + temb
        tok_s = self.s_proj(nn.tensor(states)) + temb
        tok_a = self.a_proj(nn.tensor(actions)) + temb
        tokens = nn.stack([tok_z, tok_s, tok_a], axis=2).reshape(B, 3 * K, -1)
        valid3 = np.repeat(valid, 3, axis=1)
        mask = nn.causal_mask_bias(3 * K) + nn.pad_mask_bias(valid3)
        x = tokens
        for block in self.blocks:
            x = block(x, mask)
        x = self.ln_f(x)
        return self.head(x[:, 1::3, :])


def action_regression_loss(pred: nn.Tensor, target: np.ndarray,
                           valid: np.ndarray) -> nn.Tensor:
    """Mean squared error over valid positions; padding contributes zero."""
    w = valid[:, :, None].astype(np.float64)
    denom = max(float(w.sum()) * target.shape[-1], 1.0)
    err = (pred - nn.tensor(target)) * nn.tensor(w)
    return (err * err).sum() * (1.0 / denom)
