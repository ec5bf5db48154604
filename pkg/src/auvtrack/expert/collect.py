"""Demonstration collection: plan waypoints in the particle world, drive
the full-physics environment with the waypoint tracker, and record
episodes in the environment's native layout (reward-free)."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..env import EpisodeRecord, ScenarioSpec, TrackingEnv, rollout_episode, write_episodes
from .apf import ApfParams, plan_waypoints
from .tracker import TrackerPolicy

log = logging.getLogger("auvtrack.expert")


@dataclass
class ExpertBuffer:
    episodes: list[EpisodeRecord]
    scenario: ScenarioSpec
    seeds: list[int]
    discarded: int

    def save(self, path: str | Path) -> None:
        write_episodes(path, self.episodes)


def collect_demonstrations(spec: ScenarioSpec, tracker: TrackerPolicy,
                           apf: ApfParams, episodes: int, seed: int,
                           max_attempts_per_episode: int = 5) -> ExpertBuffer:
    """Abnormally terminating episodes are discarded and resampled with a
    fresh seed (logged)."""
    out: list[EpisodeRecord] = []
    seeds: list[int] = []
    discarded = 0
    attempt = 0
    while len(out) < episodes:
        if attempt >= episodes * max_attempts_per_episode:
            raise RuntimeError(
                f"demonstration generation keeps terminating abnormally "
                f"({discarded} discards) on scenario {spec.id}")
        ep_seed = seed * 100003 + attempt
        attempt += 1
        rec = _run_episode(spec, tracker, apf, ep_seed)
        if rec.done_reason != "duration":
            discarded += 1
            log.warning("discarding demonstration (reason=%s, seed=%d)",
                        rec.done_reason, ep_seed)
            continue
        out.append(rec)
        seeds.append(ep_seed)
    return ExpertBuffer(episodes=out, scenario=spec, seeds=seeds, discarded=discarded)


def _run_episode(spec: ScenarioSpec, tracker: TrackerPolicy, apf: ApfParams,
                 ep_seed: int) -> EpisodeRecord:
    env = TrackingEnv(spec)
    env.reset(ep_seed)
    waypoints = plan_waypoints(env.agent_positions(), env.setup.target_track,
                               env.setup.target_speed, env.setup.obstacles,
                               apf, spec.auv_params.dt)

    def policy(obs_list, t):
        return [tracker.action(env.states[i], waypoints[t][i])
                for i in range(env.n)]

    # reward-free logs: demonstrations carry no reward signal
    return rollout_episode(env, policy, ep_seed, record_rewards=False)


def buffer_manifest(buffer: ExpertBuffer, metrics: dict | None = None) -> dict:
    payload = {
        "scenario": buffer.scenario.to_dict(),
        "episodes": len(buffer.episodes),
        "seeds": buffer.seeds,
        "discarded": buffer.discarded,
    }
    if metrics:
        payload["metrics"] = metrics
    return payload
