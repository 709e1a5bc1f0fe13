"""Fluid-capacity transcoding processors."""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .workload import VideoCatalog


@dataclass
class Processor:
    """Transcoding capacity of one MEC server, in Mbps.

    ``busy_integral`` accumulates in-use Mbps times seconds. When a window is
    set, only the part of the timeline inside ``[window_start, window_end]``
    is integrated.
    """

    capacity: float
    in_use: float = 0.0
    busy_integral: float = 0.0
    active: int = 0
    last_time: float = 0.0
    window_start: float = 0.0
    window_end: float = float("inf")

    def advance(self, now: float) -> None:
        if now < self.last_time:
            raise ValueError("time went backwards")
        lo = max(self.last_time, self.window_start)
        hi = min(now, self.window_end)
        if hi > lo:
            self.busy_integral += self.in_use * (hi - lo)
        self.last_time = now

    def fits(self, load: float) -> bool:
        return self.in_use + load <= self.capacity


@dataclass(frozen=True)
class TranscodeJob:
    video_id: int
    from_variant: int
    to_variant: int
    load: float  # Mbps
    start: float
    end: float
    host: int


class Placement(enum.Enum):
    PROVIDER = "provider"
    DELIVERY = "delivery"


def can_transcode(catalog: VideoCatalog, from_variant: int, to_variant: int) -> bool:
    return catalog.bitrate(from_variant) > catalog.bitrate(to_variant)


def job_load(catalog: VideoCatalog, from_variant: int, to_variant: int, costing: str = "input") -> float:
    """Mbps a transcode occupies: the source bitrate by default, the output bitrate if ``costing='output'``."""
    if costing == "input":
        return catalog.bitrate(from_variant)
    if costing == "output":
        return catalog.bitrate(to_variant)
    raise ValueError(f"unknown load costing {costing!r}")


def admit(processor: Processor, load: float, now: float, duration: float) -> bool:
    """All-or-nothing admission. The caller schedules the release at ``now + duration``."""
    if not load > 0:
        raise ValueError("job load must be positive")
    if duration < 0:
        raise ValueError("negative job duration")
    processor.advance(now)
    if not processor.fits(load):
        return False
    processor.in_use += load
    processor.active += 1
    return True


def release(processor: Processor, load: float, now: float) -> None:
    processor.advance(now)
    processor.in_use -= load
    processor.active -= 1
    if processor.active == 0:
        processor.in_use = 0.0  # drop accumulated rounding residue


def pick_transcoder(provider_in_use: float, delivery_in_use: float) -> Placement:
    """Less loaded node; ties go to the delivery node."""
    if provider_in_use < 0 or delivery_in_use < 0:
        raise ValueError("loads must be non-negative")
    return Placement.PROVIDER if provider_in_use < delivery_in_use else Placement.DELIVERY


def utilization(processor: Processor, horizon: float) -> float:
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    return processor.busy_integral / (processor.capacity * horizon)
