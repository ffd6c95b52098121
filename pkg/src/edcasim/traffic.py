"""Per-station traffic sources."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import UnsupportedError
from .policy import AccessCategory

US_PER_S = 1_000_000


class SourceMode(str, enum.Enum):
    SATURATED = "saturated"
    CONSTANT_RATE = "constant_rate"


# VI is nominally 8738.13 bytes; frames must be whole bytes.
DEFAULT_PAYLOAD = {
    AccessCategory.VO: 50,
    AccessCategory.VI: 8738,
    AccessCategory.BE: 100,
}

DEFAULT_QUEUE_CAPACITY = 50


@dataclass(frozen=True)
class TrafficSource:
    mode: SourceMode
    payload_bytes: int
    rate_fps: float | None = None
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY

    def __post_init__(self):
        if self.payload_bytes <= 0:
            raise ValueError("payload_bytes must be positive")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")
        if self.mode == SourceMode.CONSTANT_RATE:
            if self.rate_fps is None or self.rate_fps <= 0:
                raise ValueError("constant-rate source needs rate_fps > 0")

    @property
    def payload_bits(self) -> int:
        return self.payload_bytes * 8

    def arrival_time_us(self, k: int) -> int:
        """Time of the k-th constant-rate arrival (k >= 1), in microseconds."""
        return round(k * US_PER_S / self.rate_fps)

    def first_arrival_index(self, start_us: int) -> int:
        """Smallest k >= 1 whose arrival is at or after ``start_us``."""
        k = max(1, int(start_us * self.rate_fps / US_PER_S))
        while k > 1 and self.arrival_time_us(k - 1) >= start_us:
            k -= 1
        while self.arrival_time_us(k) < start_us:
            k += 1
        return k


def default_source_for(ac: AccessCategory) -> TrafficSource:
    if ac not in DEFAULT_PAYLOAD:
        raise UnsupportedError(f"no traffic model for access category {ac.name}")
    return TrafficSource(SourceMode.SATURATED, DEFAULT_PAYLOAD[ac])


def offered_load_bits(
    source: TrafficSource,
    window: float,
    delivered_frames: int,
    generated_frames: int,
) -> float:
    """Traffic submitted to the MAC during ``window`` seconds.

    A saturated source hands a new frame to the MAC whenever the previous one
    leaves service, so its offered load is the frames that entered service.
    ``delivered_frames`` is accepted for symmetry with the throughput ratio
    but does not enter either definition.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    if source.mode == SourceMode.SATURATED:
        return generated_frames * source.payload_bits
    return source.rate_fps * window * source.payload_bits
