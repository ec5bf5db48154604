"""Formation slot geometry shared by the environment reset and the
potential-field expert.

Slots sit on the standoff circle around the target, trailing it. For
2-4 agents the angular gap between adjacent slots is tuned so that the
slot configuration's algebraic connectivity matches the reference swarm
consistency values (100.1 / 150.2 / 200.2); for larger swarms the slots
spread evenly around the full circle.
"""

from __future__ import annotations

import math

import numpy as np

# adjacent-slot angular gaps (rad) on the 12 m standoff circle
SLOT_GAPS = {
    2: 1.2474413,
    3: 0.7962486,
    4: 0.5877271,
}


def slot_angles(n: int) -> np.ndarray:
    """Slot bearings relative to the target's heading (pi = dead astern)."""
    if n < 2:
        raise ValueError("formation needs at least two agents")
    gap = SLOT_GAPS.get(n, 2.0 * math.pi / n)
    return math.pi + (np.arange(n) - (n - 1) / 2.0) * gap


def slot_offsets(n: int, standoff: float) -> np.ndarray:
    """(n, 2) slot offsets in the target's heading-aligned frame."""
    ang = slot_angles(n)
    return standoff * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def slot_positions(n: int, standoff: float, target_pos: np.ndarray,
                   target_heading: float) -> np.ndarray:
    """World-frame slot positions for a target at `target_pos` moving
    along `target_heading`."""
    c, s = math.cos(target_heading), math.sin(target_heading)
    rot = np.array([[c, -s], [s, c]])
    return np.asarray(target_pos)[None, :] + slot_offsets(n, standoff) @ rot.T
