"""Run statistics and CSV export.

A frame is attributed to the measurement window by its arrival time at the
MAC queue: frames that arrive during warm-up are excluded from every sum,
whenever they leave. That keeps the conservation identity
``generated = delivered + dropped + queued`` exact per run.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable

from .errors import UndefinedError
from .policy import AccessCategory

GLOBAL = "global"

CSV_COLUMNS = [
    "scenario_id",
    "policy",
    "seed",
    "scope",
    "normalized_throughput",
    "mean_delay_s",
    "retx_per_frame",
    "generated",
    "delivered",
    "dropped",
    "collisions",
]


@dataclass
class AcStats:
    generated_frames: int = 0
    delivered_frames: int = 0
    dropped_frames: int = 0
    queued_frames: int = 0
    delivered_bits: int = 0
    offered_bits: int = 0
    sum_access_delay: float = 0.0
    sum_retransmissions: int = 0
    collision_events: int = 0

    def merge(self, other: "AcStats") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))


@dataclass
class MetricsLedger:
    """Counters for one simulation run.

    Delays are accumulated in integer microseconds while the run is in
    progress and exposed in seconds through :class:`AcStats`.
    """

    scenario_id: str
    policy: str
    seed: int
    duration: float
    warmup: float = 0.0
    per_ac: dict[AccessCategory, AcStats] = field(default_factory=dict)
    global_collision_events: int = 0
    metadata: dict = field(default_factory=dict)

    def stats(self, ac: AccessCategory) -> AcStats:
        try:
            return self.per_ac[ac]
        except KeyError:
            s = self.per_ac[ac] = AcStats()
            return s

    # -- recording --------------------------------------------------------

    def record_generated(self, ac: AccessCategory, payload_bits: int) -> None:
        s = self.stats(ac)
        s.generated_frames += 1
        s.offered_bits += payload_bits

    def record_delivered(self, ac: AccessCategory, payload_bits: int, delay_s: float, retries: int) -> None:
        s = self.stats(ac)
        s.delivered_frames += 1
        s.delivered_bits += payload_bits
        s.sum_access_delay += delay_s
        s.sum_retransmissions += retries

    def record_dropped(self, ac: AccessCategory, retries: int = 0) -> None:
        s = self.stats(ac)
        s.dropped_frames += 1
        s.sum_retransmissions += retries

    def record_collision(self, acs: Iterable[AccessCategory]) -> None:
        self.global_collision_events += 1
        for ac in set(acs):
            self.stats(ac).collision_events += 1

    def set_queued(self, ac: AccessCategory, n: int) -> None:
        self.stats(ac).queued_frames = n

    # -- views ------------------------------------------------------------

    @property
    def scopes(self) -> list[str]:
        return [GLOBAL] + [ac.name for ac in sorted(self.per_ac, reverse=True)]

    def scope_stats(self, scope: str | AccessCategory) -> AcStats:
        if isinstance(scope, AccessCategory):
            return self.stats(scope)
        if scope == GLOBAL:
            total = AcStats()
            for s in self.per_ac.values():
                total.merge(s)
            total.collision_events = self.global_collision_events
            return total
        return self.stats(AccessCategory.parse(scope))

    def check_conservation(self) -> None:
        for ac, s in self.per_ac.items():
            if s.generated_frames != s.delivered_frames + s.dropped_frames + s.queued_frames:
                raise AssertionError(
                    f"{self.scenario_id}/{self.policy}/{self.seed} {ac.name}: "
                    f"generated {s.generated_frames} != delivered {s.delivered_frames} "
                    f"+ dropped {s.dropped_frames} + queued {s.queued_frames}"
                )


def normalized_throughput(ledger: MetricsLedger, scope: str | AccessCategory = GLOBAL) -> float:
    s = ledger.scope_stats(scope)
    if s.offered_bits <= 0:
        raise UndefinedError(f"no offered load in scope {scope}")
    return s.delivered_bits / s.offered_bits


def mean_access_delay(ledger: MetricsLedger, scope: str | AccessCategory = GLOBAL) -> float:
    """Mean time from MAC-queue arrival to ACK completion, in seconds."""
    s = ledger.scope_stats(scope)
    if s.delivered_frames == 0:
        raise UndefinedError(f"no delivered frames in scope {scope}")
    return s.sum_access_delay / s.delivered_frames


def retransmission_attempts(ledger: MetricsLedger, scope: str | AccessCategory = GLOBAL) -> float:
    """Mean retransmissions per frame that left service (delivered or dropped)."""
    s = ledger.scope_stats(scope)
    done = s.delivered_frames + s.dropped_frames
    if done == 0:
        raise UndefinedError(f"no completed frames in scope {scope}")
    return s.sum_retransmissions / done


def _metric_or_nan(fn, ledger, scope) -> float:
    try:
        return fn(ledger, scope)
    except UndefinedError:
        return math.nan


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def ledger_rows(ledger: MetricsLedger) -> list[list[str]]:
    rows = []
    for scope in ledger.scopes:
        s = ledger.scope_stats(scope)
        rows.append([
            ledger.scenario_id,
            ledger.policy,
            str(ledger.seed),
            scope,
            _fmt(_metric_or_nan(normalized_throughput, ledger, scope)),
            _fmt(_metric_or_nan(mean_access_delay, ledger, scope)),
            _fmt(_metric_or_nan(retransmission_attempts, ledger, scope)),
            str(s.generated_frames),
            str(s.delivered_frames),
            str(s.dropped_frames),
            str(s.collision_events),
        ])
    return rows


def _row_key(row: list[str]):
    return (row[0], row[1], int(row[2]), row[3])


def render_csv(ledgers: Iterable[MetricsLedger]) -> str:
    rows = [row for ledger in ledgers for row in ledger_rows(ledger)]
    rows.sort(key=_row_key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


def export_csv(ledgers: Iterable[MetricsLedger], path: str | os.PathLike) -> None:
    """Write one row per (scenario, policy, seed, scope), sorted, to ``path``.

    Raises OSError if the file cannot be written.
    """
    text = render_csv(ledgers)
    with open(path, "w", newline="") as fh:
        fh.write(text)
