"""Run-level efficiency metrics: real-time factor and processed samples per second."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import EmptyList, ZeroAudio, ZeroWallClock


@dataclass(frozen=True)
class EfficiencyRecord:
    total_audio_s: float
    wall_clock_s: float
    samples_processed: int

    def __post_init__(self):
        if self.total_audio_s < 0 or self.wall_clock_s < 0 or self.samples_processed < 0:
            raise ValueError("efficiency inputs must be non-negative")


def rtf(e: EfficiencyRecord) -> float:
    """Wall-clock processing time relative to the duration of the processed audio."""
    if e.total_audio_s <= 0:
        raise ZeroAudio("no audio was processed")
    return e.wall_clock_s / e.total_audio_s


def samples_per_second(e: EfficiencyRecord) -> float:
    if e.samples_processed == 0:
        return 0.0
    if e.wall_clock_s <= 0:
        raise ZeroWallClock("wall clock must be positive")
    return e.samples_processed / e.wall_clock_s


def scenario_runtimes(per_dataset_wall) -> dict[str, float]:
    """Sequential (sum) and ideal-parallel (max) runtime over per-dataset walls."""
    walls = list(per_dataset_wall)
    if not walls:
        raise EmptyList("no dataset runtimes")
    return {"sequential": math.fsum(walls), "parallel": max(walls)}
