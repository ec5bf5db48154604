from .core import (
    STANDOFF,
    RewardBreakdown,
    RewardWeights,
    TrackingEnv,
    Transition,
    reward_terms,
)
from .records import EpisodeRecord, read_episodes, rollout_episode, write_episodes
from .scenarios import (
    SCENARIO_IDS,
    EpisodeSetup,
    Obstacle,
    Randomization,
    ScenarioError,
    ScenarioSpec,
    TargetSpec,
    build_episode,
    build_path,
    make_scenario,
)

__all__ = [
    "SCENARIO_IDS", "STANDOFF", "EpisodeRecord", "EpisodeSetup", "Obstacle",
    "Randomization", "RewardBreakdown", "RewardWeights", "ScenarioError",
    "ScenarioSpec", "TargetSpec", "TrackingEnv", "Transition", "build_episode",
    "build_path", "make_scenario", "read_episodes", "reward_terms",
    "rollout_episode", "write_episodes",
]
