"""Tracking metric suite over episode records: minimum target distance,
swarm consistency, obstacle clearance, danger time, and the normalized
reward scale anchored at random-policy 0 and expert 1."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..env import EpisodeRecord, RewardWeights, reward_terms
from ..swarm import algebraic_connectivity, build_laplacian
from ..acoustics import HydroParams

DANGER_RADIUS = 8.0

CSV_COLUMNS = ["mean_min_distance", "std_min_distance", "mean_consistency",
               "std_consistency", "min_obstacle_distance", "danger_time_s",
               "episodes"]


@dataclass
class MetricsReport:
    mean_min_distance: float
    std_min_distance: float
    mean_consistency: float
    std_consistency: float
    min_obstacle_distance: float
    danger_time_s: float
    episodes: int
    per_episode: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.danger_time_s < 0 or self.min_obstacle_distance < 0:
            raise ValueError("danger time and obstacle clearance must be nonnegative")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS} | {
            "per_episode": self.per_episode}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self) -> str:
        return ",".join(f"{getattr(self, k)}" for k in CSV_COLUMNS)


def _episode_traces(rec: EpisodeRecord, hydro: HydroParams):
    """Per-step (post-action states) min distance, consistency, and
    worst obstacle clearance."""
    T = rec.steps
    pos = rec.agent_states[1: T + 1, :, :2]
    target = rec.target[1: T + 1, :2]
    dmin = np.hypot(pos[..., 0] - target[:, None, 0],
                    pos[..., 1] - target[:, None, 1]).min(axis=1)
    lam = np.array([
        algebraic_connectivity(build_laplacian(pos[t], hydro)) for t in range(T)
    ])
    if rec.obstacles:
        obst = np.asarray(rec.obstacles)
        d = np.hypot(pos[:, :, None, 0] - obst[None, None, :, 0],
                     pos[:, :, None, 1] - obst[None, None, :, 1]) - obst[None, None, :, 2]
        clearance = d.min(axis=(1, 2))
    else:
        clearance = np.full(T, np.inf)
    return dmin, lam, clearance


def compute_metrics(episodes: list[EpisodeRecord],
                    hydro: HydroParams | None = None) -> MetricsReport:
    if not episodes:
        raise ValueError("no episodes supplied")
    n_agents = {ep.n_agents for ep in episodes}
    scen = {ep.scenario_id for ep in episodes}
    if len(n_agents) > 1 or len(scen) > 1:
        raise ValueError(f"episodes mix scenarios/agent counts: {scen}/{n_agents}")
    hydro = hydro or HydroParams()

    all_dmin, all_lam = [], []
    min_clear = np.inf
    danger_steps = 0
    per_episode = []
    dt = episodes[0].dt
    for rec in episodes:
        dmin, lam, clearance = _episode_traces(rec, hydro)
        all_dmin.append(dmin)
        all_lam.append(lam)
        finite = clearance[np.isfinite(clearance)]
        if finite.size:
            min_clear = min(min_clear, float(finite.min()))
        danger_steps += int((clearance < DANGER_RADIUS).sum())
        per_episode.append({
            "episode_seed": rec.episode_seed,
            "mean_min_distance": float(dmin.mean()),
            "mean_consistency": float(lam.mean()),
            "min_obstacle_distance": float(clearance.min()) if finite.size else None,
            "danger_time_s": float((clearance < DANGER_RADIUS).sum() * dt),
            "done_reason": rec.done_reason,
        })
    dmin = np.concatenate(all_dmin)
    lam = np.concatenate(all_lam)
    return MetricsReport(
        mean_min_distance=float(dmin.mean()),
        std_min_distance=float(dmin.std()),
        mean_consistency=float(lam.mean()),
        std_consistency=float(lam.std()),
        min_obstacle_distance=float(min_clear) if np.isfinite(min_clear) else 0.0,
        danger_time_s=danger_steps * dt,
        episodes=len(episodes),
        per_episode=per_episode,
    )


def recompute_rewards(rec: EpisodeRecord, weights: RewardWeights,
                      hydro: HydroParams | None = None) -> np.ndarray:
    """Metric rewards (T, N) rebuilt from the logged states; absorbing
    steps contribute zero."""
    hydro = hydro or HydroParams()
    T, n = rec.steps, rec.n_agents
    out = np.zeros((T, n))
    obst = np.asarray(rec.obstacles) if rec.obstacles else None
    for t in range(T):
        if rec.absorbing[t + 1]:
            continue
        pos = rec.agent_states[t + 1, :, :2]
        target = rec.target[t + 1, :2]
        dists = np.hypot(*(pos - target).T)
        lam = algebraic_connectivity(build_laplacian(pos, hydro))
        for i in range(n):
            peers = np.hypot(*(pos[np.arange(n) != i] - pos[i]).T)
            if obst is not None:
                clear = np.hypot(pos[i, 0] - obst[:, 0], pos[i, 1] - obst[:, 1]) - obst[:, 2]
            else:
                clear = np.empty(0)
            out[t, i] = reward_terms(dists, peers, clear, lam, n, weights, i).total
    return out


def episode_metric_return(rec: EpisodeRecord, weights: RewardWeights,
                          hydro: HydroParams | None = None) -> float:
    """Agent-mean metric return; uses stored rewards when present."""
    if rec.rewards is not None:
        return rec.episode_return()
    return float(recompute_rewards(rec, weights, hydro).mean(axis=1).sum())


def normalized_reward(returns, random_calibration: float,
                      expert_calibration: float) -> float:
    """Affine rescaling: random policy scores 0, the expert scores 1."""
    span = expert_calibration - random_calibration
    if abs(span) < 1e-9:
        raise ValueError("degenerate calibration: expert and random returns coincide")
    mean_return = float(np.mean(returns))
    return (mean_return - random_calibration) / span
