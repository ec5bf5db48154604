"""Underwater acoustic propagation: seawater absorption, transmission
loss, active/passive sonar margins, and the detection radius they imply.

All levels are in dB; distances in metres; frequency in kHz. The
absorption term converts metres to kilometres via the 1e-3 factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class HydroParams:
    sl: float = 100.0   # source level
    ts: float = 3.0     # target strength
    di: float = 3.0     # directivity index
    dt_thresh: float = 20.0  # detection threshold
    nl: float = 30.0    # noise level
    f: float = 10.0     # centre frequency, kHz

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError("frequency must be positive")

    def to_dict(self) -> dict:
        return {"sl": self.sl, "ts": self.ts, "di": self.di,
                "dt_thresh": self.dt_thresh, "nl": self.nl, "f": self.f}

    @classmethod
    def from_dict(cls, d: dict) -> "HydroParams":
        return cls(**d)


def thorp_alpha(f: float) -> float:
    """Empirical seawater absorption, dB/km, frequency in kHz."""
    if f <= 0:
        raise ValueError(f"frequency must be positive, got {f}")
    f2 = f * f
    return 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003


def transmission_loss(d: float, f: float) -> float:
    """Spherical spreading plus absorption over a one-way path of d metres."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    return 20.0 * math.log10(d) + d * thorp_alpha(f) * 1e-3


def active_echo_margin(d: float, hp: HydroParams) -> float:
    """Echo margin of the active sonar equation (two-way path)."""
    tl = transmission_loss(d, hp.f)
    return hp.sl - 2.0 * tl + hp.ts - (hp.nl - hp.di) - hp.dt_thresh


def passive_snr(d: float, hp: HydroParams) -> float:
    """One-way SNR between two vehicles (passive equation, no threshold)."""
    return hp.sl - transmission_loss(d, hp.f) - hp.nl + hp.di


class NoDetectionError(ValueError):
    """Echo margin is negative everywhere: the sonar cannot detect."""


def detection_radius(hp: HydroParams, tol: float = 1e-3) -> float:
    """Largest range with non-negative echo margin, by bisection.

    The margin is strictly decreasing in range, so a sign change brackets
    the unique root.
    """
    lo = 1e-3
    if active_echo_margin(lo, hp) < 0.0:
        raise NoDetectionError("active echo margin negative even at point-blank range")
    hi = 1.0
    while active_echo_margin(hi, hp) >= 0.0:
        hi *= 2.0
        if hi > 1e7:
            raise NoDetectionError("echo margin does not go negative below 10^7 m")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if active_echo_margin(mid, hp) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
