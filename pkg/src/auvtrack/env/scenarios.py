"""Scenario catalogue: target paths, obstacle layouts, and per-episode
randomization.

The catalogue ids mirror the benchmark suite: 1 (line, sparse), 2-cw /
2-ccw (wide clockwise / counterclockwise arcs), 3 (obstacle corridor),
4 (dense obstacle field), 5 (weaving path), and long-horizon randomized
G1 / G2. The exact geometry is configuration, not contract.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..acoustics import HydroParams
from ..dynamics import AuvParams

SCENARIO_IDS = ("1", "2-cw", "2-ccw", "3", "4", "5", "G1", "G2")


class ScenarioError(ValueError):
    """Unknown id or a spec that cannot satisfy its constraints."""


@dataclass(frozen=True)
class Obstacle:
    x: float
    y: float
    radius: float

    def center(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Randomization:
    obstacle_jitter_sd: float = 0.0
    radius_jitter_sd: float = 0.0
    target_speed_range: tuple[float, float] | None = None
    deviation_prob: float = 0.0

    def to_dict(self) -> dict:
        return {
            "obstacle_jitter_sd": self.obstacle_jitter_sd,
            "radius_jitter_sd": self.radius_jitter_sd,
            "target_speed_range": list(self.target_speed_range) if self.target_speed_range else None,
            "deviation_prob": self.deviation_prob,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Randomization":
        rng_range = d.get("target_speed_range")
        return cls(
            obstacle_jitter_sd=d.get("obstacle_jitter_sd", 0.0),
            radius_jitter_sd=d.get("radius_jitter_sd", 0.0),
            target_speed_range=tuple(rng_range) if rng_range else None,
            deviation_prob=d.get("deviation_prob", 0.0),
        )


@dataclass(frozen=True)
class TargetSpec:
    kind: str           # line | sine | arc-cw | arc-ccw | waypoint-spline
    speed: float
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "speed": self.speed, "params": self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "TargetSpec":
        return cls(kind=d["kind"], speed=d["speed"], params=d.get("params", {}))


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    n_agents: int
    duration_s: float
    target: TargetSpec
    obstacles: tuple[Obstacle, ...]
    n_obs_slots: int = 3
    randomization: Randomization = field(default_factory=Randomization)
    seed: int = 0
    hydro: HydroParams = field(default_factory=HydroParams)
    auv_params: AuvParams = field(default_factory=AuvParams)
    reward_setting: str = "cooperative"

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ScenarioError("duration must be positive")
        if not (2 <= self.n_agents <= 8):
            raise ScenarioError("n_agents must be between 2 and 8")
        for i, a in enumerate(self.obstacles):
            for b in self.obstacles[i + 1:]:
                if math.hypot(a.x - b.x, a.y - b.y) < a.radius + b.radius:
                    raise ScenarioError(f"obstacles overlap at spawn: {a} / {b}")

    @property
    def duration_steps(self) -> int:
        return int(round(self.duration_s / self.auv_params.dt))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "n_agents": self.n_agents,
            "duration_s": self.duration_s,
            "hydro": self.hydro.to_dict(),
            "auv_params": self.auv_params.to_dict(),
            "reward": {"setting": self.reward_setting},
            "obstacles": [[o.x, o.y, o.radius] for o in self.obstacles],
            "target": self.target.to_dict(),
            "randomization": self.randomization.to_dict(),
            "n_obs_slots": self.n_obs_slots,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(
            id=d["id"],
            n_agents=d["n_agents"],
            duration_s=d["duration_s"],
            hydro=HydroParams.from_dict(d.get("hydro", {})),
            auv_params=AuvParams.from_dict(d.get("auv_params", {})),
            reward_setting=d.get("reward", {}).get("setting", "cooperative"),
            obstacles=tuple(Obstacle(*row) for row in d.get("obstacles", [])),
            target=TargetSpec.from_dict(d["target"]),
            randomization=Randomization.from_dict(d.get("randomization", {})),
            n_obs_slots=d.get("n_obs_slots", 3),
            seed=d.get("seed", 0),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# target paths


class PolyPath:
    """Arc-length parameterized polyline."""

    def __init__(self, points: np.ndarray):
        self.points = np.asarray(points, dtype=np.float64)
        seg = np.diff(self.points, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.length = float(self.cum[-1])

    def pos(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(i, len(self.points) - 2)
        span = self.cum[i + 1] - self.cum[i]
        t = 0.0 if span <= 0 else (s - self.cum[i]) / span
        return self.points[i] * (1.0 - t) + self.points[i + 1] * t

    def tangent(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.points) - 2)
        d = self.points[i + 1] - self.points[i]
        n = np.hypot(d[0], d[1])
        return d / n if n > 0 else np.array([1.0, 0.0])


def _catmull_rom(waypoints: np.ndarray, samples_per_seg: int = 40) -> np.ndarray:
    """Catmull-Rom spline through the waypoints (endpoint-clamped)."""
    wp = np.asarray(waypoints, dtype=np.float64)
    ext = np.vstack([2 * wp[0] - wp[1], wp, 2 * wp[-1] - wp[-2]])
    out = []
    for i in range(len(wp) - 1):
        p0, p1, p2, p3 = ext[i], ext[i + 1], ext[i + 2], ext[i + 3]
        t = np.linspace(0.0, 1.0, samples_per_seg, endpoint=False)[:, None]
        out.append(
            0.5 * ((2 * p1) + (-p0 + p2) * t + (2 * p0 - 5 * p1 + 4 * p2 - p3) * t ** 2
                   + (-p0 + 3 * p1 - 3 * p2 + p3) * t ** 3)
        )
    out.append(wp[-1][None, :])
    return np.vstack(out)


def build_path(target: TargetSpec, total_length: float) -> PolyPath:
    kind, p = target.kind, target.params
    if kind == "line":
        n = max(int(total_length / 0.5), 2)
        xs = np.linspace(0.0, total_length, n)
        return PolyPath(np.stack([xs, np.zeros_like(xs)], axis=1))
    if kind == "sine":
        amp = p.get("amplitude", 20.0)
        wavelength = p.get("wavelength", 120.0)
        k = 2.0 * math.pi / wavelength
        xs = np.arange(0.0, total_length + 0.25, 0.25)
        return PolyPath(np.stack([xs, amp * np.sin(k * xs)], axis=1))
    if kind in ("arc-cw", "arc-ccw"):
        radius = p.get("radius", 80.0)
        sign = -1.0 if kind == "arc-cw" else 1.0
        phi = np.arange(0.0, total_length / radius + 0.005, 0.005)
        xs = radius * np.sin(phi)
        ys = sign * radius * (1.0 - np.cos(phi))
        return PolyPath(np.stack([xs, ys], axis=1))
    if kind == "waypoint-spline":
        wps = np.asarray(p["waypoints"], dtype=np.float64)
        return PolyPath(_catmull_rom(wps))
    raise ScenarioError(f"unknown target path kind: {kind}")


# ---------------------------------------------------------------------------
# per-episode setup (randomization applied)


@dataclass
class EpisodeSetup:
    """One concrete episode: jittered obstacles and the full target track
    (positions and realized velocities at every step)."""

    obstacles: list[Obstacle]
    target_track: np.ndarray  # (steps + 1, 4): x, y, vx, vy
    target_speed: float


def build_episode(spec: ScenarioSpec, episode_seed: int) -> EpisodeSetup:
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, episode_seed, 0xE9)))
    rnd = spec.randomization

    obstacles = _jitter_obstacles(spec, rng)

    if rnd.target_speed_range is not None:
        lo, hi = rnd.target_speed_range
        speed = float(rng.uniform(lo, hi))
    else:
        speed = spec.target.speed

    steps = spec.duration_steps
    dt = spec.auv_params.dt
    path = build_path(spec.target, total_length=speed * spec.duration_s + 40.0)

    pos = np.zeros((steps + 1, 2))
    s = 0.0
    offset = np.zeros(2)
    deviation = np.zeros(2)  # lateral drift velocity while a deviation pulse is live
    pulse_left = 0
    for t in range(steps + 1):
        base = path.pos(s)
        pos[t] = base + offset
        if t == steps:
            break
        if rnd.deviation_prob > 0.0 and pulse_left == 0 and rng.uniform() < rnd.deviation_prob:
            pulse_left = int(2.5 / dt)
            tangent = path.tangent(s)
            normal = np.array([-tangent[1], tangent[0]])
            deviation = normal * rng.choice([-0.4, 0.4])
        if pulse_left > 0:
            offset = offset + deviation * dt
            pulse_left -= 1
        elif np.hypot(*offset) > 1e-9:
            # relax the offset back to the nominal path
            offset = offset * max(0.0, 1.0 - 0.4 * dt)
        s += speed * dt

    vel = np.zeros((steps + 1, 2))
    vel[1:] = (pos[1:] - pos[:-1]) / dt
    vel[0] = path.tangent(0.0) * speed
    track = np.concatenate([pos, vel], axis=1)
    return EpisodeSetup(obstacles=obstacles, target_track=track, target_speed=speed)


def _jitter_obstacles(spec: ScenarioSpec, rng: np.random.Generator) -> list[Obstacle]:
    rnd = spec.randomization
    out: list[Obstacle] = []
    for o in spec.obstacles:
        for _ in range(40):
            dx, dy = rng.normal(0.0, rnd.obstacle_jitter_sd, 2) if rnd.obstacle_jitter_sd else (0.0, 0.0)
            dr = rng.normal(0.0, rnd.radius_jitter_sd) if rnd.radius_jitter_sd else 0.0
            cand = Obstacle(o.x + dx, o.y + dy, max(o.radius + dr, 0.5))
            if all(math.hypot(cand.x - p.x, cand.y - p.y) >= cand.radius + p.radius + 2.0
                   for p in out):
                out.append(cand)
                break
        else:
            out.append(o)  # jitter kept colliding; fall back to the base layout
    return out


# ---------------------------------------------------------------------------
# catalogue


def make_scenario(scenario_id: str, n_agents: int, seed: int = 0) -> ScenarioSpec:
    sid = str(scenario_id)
    if sid == "2":
        sid = "2-cw"
    if sid not in SCENARIO_IDS:
        raise ScenarioError(f"unknown scenario id: {scenario_id!r} (known: {SCENARIO_IDS})")

    light = Randomization(obstacle_jitter_sd=1.0, radius_jitter_sd=0.2,
                          target_speed_range=(1.1, 1.3), deviation_prob=0.001)
    heavy = Randomization(obstacle_jitter_sd=2.0, radius_jitter_sd=0.3,
                          target_speed_range=(0.8, 1.5), deviation_prob=0.003)

    if sid == "1":
        target = TargetSpec("line", 1.2)
        obstacles = (Obstacle(54.0, 6.0, 3.0),)
        duration, rnd = 90.0, light
    elif sid in ("2-cw", "2-ccw"):
        target = TargetSpec(f"arc-{sid[2:]}", 1.2, {"radius": 80.0})
        side = -1.0 if sid == "2-cw" else 1.0
        obstacles = (Obstacle(55.0, side * 4.0, 3.0), Obstacle(85.0, side * 52.0, 3.0))
        duration, rnd = 90.0, light
    elif sid == "3":
        # corridor: two rows, obstacles every 14 m along the path
        target = TargetSpec("line", 1.2)
        obstacles = tuple(
            Obstacle(x, y, 3.5 if i % 2 == 0 else 4.5)
            for i, x in enumerate((35.0, 49.0, 63.0, 77.0))
            for y in (-16.0, 16.0)
        )
        duration, rnd = 90.0, light
    elif sid == "4":
        target = TargetSpec("line", 1.2)
        obstacles = tuple(
            Obstacle(x, y, 3.0 if i % 2 == 0 else 2.5)
            for i, x in enumerate((42.0, 57.0, 72.0, 87.0, 102.0, 117.0))
            for y in (-21.0, 21.0)
        )
        duration, rnd = 90.0, light
    elif sid == "5":
        target = TargetSpec("sine", 1.2, {"amplitude": 20.0, "wavelength": 120.0})
        obstacles = tuple(
            Obstacle(x, y, 3.0) for x, y in
            ((30.0, -24.0), (55.0, 45.0), (70.0, -38.0), (90.0, 42.0),
             (105.0, -30.0), (120.0, 38.0))
        )
        duration, rnd = 90.0, light
    else:  # G1 / G2
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x61)))
        wiggle = 0.35 if sid == "G1" else 0.55
        n_obs = 8 if sid == "G1" else 10
        waypoints = _random_waypoints(rng, total=420.0, seg=28.0, wiggle=wiggle)
        target = TargetSpec("waypoint-spline", 1.15, {"waypoints": waypoints.tolist()})
        obstacles = _scatter_obstacles(rng, waypoints, n_obs)
        duration, rnd = 180.0, heavy

    return ScenarioSpec(id=sid, n_agents=n_agents, duration_s=duration,
                        target=target, obstacles=obstacles,
                        randomization=rnd, seed=seed)


def _random_waypoints(rng: np.random.Generator, total: float, seg: float,
                      wiggle: float) -> np.ndarray:
    n = int(total / seg) + 2
    pts = [np.zeros(2), np.array([seg, 0.0])]  # first leg along +x so reset faces +x
    heading = 0.0
    for _ in range(n - 2):
        heading += float(rng.uniform(-wiggle, wiggle))
        heading = min(max(heading, -1.2), 1.2)
        pts.append(pts[-1] + seg * np.array([math.cos(heading), math.sin(heading)]))
    return np.array(pts)


def _scatter_obstacles(rng: np.random.Generator, waypoints: np.ndarray,
                       count: int) -> tuple[Obstacle, ...]:
    path = PolyPath(_catmull_rom(waypoints))
    dense = np.array([path.pos(s) for s in np.arange(0.0, path.length, 2.0)])
    out: list[Obstacle] = []
    attempts = 0
    while len(out) < count and attempts < 4000:
        attempts += 1
        s = float(rng.uniform(40.0, path.length - 30.0))
        anchor = path.pos(s)
        tang = path.tangent(s)
        normal = np.array([-tang[1], tang[0]])
        lateral = float(rng.uniform(21.0, 32.0)) * float(rng.choice([-1.0, 1.0]))
        c = anchor + lateral * normal
        r = float(rng.uniform(2.5, 4.0))
        d_path = np.min(np.hypot(dense[:, 0] - c[0], dense[:, 1] - c[1]))
        if d_path - r < 21.0 or np.hypot(*c) < 35.0:
            continue
        if any(math.hypot(c[0] - o.x, c[1] - o.y) < r + o.radius + 14.0 for o in out):
            continue
        out.append(Obstacle(float(c[0]), float(c[1]), r))
    return tuple(out)
