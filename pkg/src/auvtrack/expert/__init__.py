from .apf import ApfDomainError, ApfParams, Waypoint, apf_step, plan_waypoints
from .collect import ExpertBuffer, buffer_manifest, collect_demonstrations
from .tracker import (
    TrackerPolicy,
    TrackerResult,
    tracker_observation,
    train_waypoint_tracker,
)

__all__ = [
    "ApfDomainError", "ApfParams", "ExpertBuffer", "TrackerPolicy",
    "TrackerResult", "Waypoint", "apf_step", "buffer_manifest",
    "collect_demonstrations", "plan_waypoints", "tracker_observation",
    "train_waypoint_tracker",
]
