"""Discrete-event EDCA uplink simulation.

Time is kept in integer microseconds. Every busy period (data exchange,
collision or beacon) ends at some instant ``t_free``; idle slot boundaries
then fall at ``t_free + SIFS + k * slot`` for k = 0, 1, 2, ... A contending
station with AIFSN ``a`` and backoff ``b`` transmits at boundary ``a + b``:
it needs ``a`` idle slots before its countdown runs and then one idle slot
per backoff decrement. When the medium turns busy at boundary ``s`` every
other contender has consumed ``max(0, s - a)`` backoff slots and freezes the
remainder.

:func:`arbitrate_slot` applies that rule one slot at a time and is the
literal definition. :class:`Simulator` evaluates it in closed form: since all
stations of one access category share an AIFSN, each category keeps a heap of
backoff counters plus a lazily applied "drift" of consumed slots, so the next
transmission is found without visiting every station.
"""

from __future__ import annotations

import enum
import heapq
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ProtocolError
from .metrics import MetricsLedger
from .policy import (
    AccessCategory,
    AcParams,
    ApPolicy,
    EdcaParamSet,
    PolicyKind,
    QosCapabilityFlags,
)
from .scenario import ScenarioSpec
from .traffic import SourceMode, TrafficSource

US_PER_S = 1_000_000


def to_us(seconds: float) -> int:
    return round(seconds * US_PER_S)


class Phase(enum.Enum):
    IDLE = "idle"
    AIFS_WAIT = "aifs_wait"
    BACKOFF = "backoff"
    TRANSMITTING = "transmitting"


class Departure(NamedTuple):
    """A frame leaving the MAC: its queue arrival time and retransmission count."""

    arrival_us: int
    retries: int


@dataclass
class StationState:
    station_id: int
    ac: AccessCategory
    params: AcParams
    retry_limit: int = 7
    queue: deque = field(default_factory=deque)
    cw_current: int | None = None
    backoff_counter: int = 0
    retry_count: int = 0
    aifsn_remaining: int = 0
    phase: Phase = Phase.IDLE
    params_epoch: int = 0

    def __post_init__(self):
        if self.cw_current is None:
            self.cw_current = self.params.cw_min

    @property
    def contending(self) -> bool:
        return self.phase in (Phase.AIFS_WAIT, Phase.BACKOFF)


@dataclass
class ChannelState:
    busy_until: int = 0
    active_transmitters: set = field(default_factory=set)


@dataclass(frozen=True)
class FrameExchange:
    """Air-time of one DATA/ACK exchange, in microseconds."""

    payload_bits: int
    data_duration: int
    sifs: int
    ack_duration: int

    @property
    def success_occupancy(self) -> int:
        return self.data_duration + self.sifs + self.ack_duration

    @property
    def collision_occupancy(self) -> int:
        # DATA followed by an ACK timeout of SIFS + ACK
        return self.data_duration + self.sifs + self.ack_duration


@dataclass(frozen=True)
class Timing:
    slot: int
    sifs: int
    ack: int
    preamble: int
    phy_rate: float
    beacon_interval: int
    beacon_bytes: int

    @classmethod
    def from_scenario(cls, spec: ScenarioSpec) -> "Timing":
        return cls(
            slot=to_us(spec.slot_time),
            sifs=to_us(spec.sifs),
            ack=to_us(spec.ack_duration),
            preamble=to_us(spec.preamble),
            phy_rate=spec.phy_rate,
            beacon_interval=to_us(spec.beacon_interval),
            beacon_bytes=spec.beacon_bytes,
        )

    def airtime(self, nbytes: int) -> int:
        return self.preamble + math.ceil(nbytes * 8 * US_PER_S / self.phy_rate)

    def exchange(self, payload_bytes: int) -> FrameExchange:
        return FrameExchange(payload_bytes * 8, self.airtime(payload_bytes), self.sifs, self.ack)

    @property
    def beacon_duration(self) -> int:
        return self.airtime(self.beacon_bytes)


# -- per-station MAC operations ----------------------------------------------

def draw_backoff(rng: random.Random, cw_current: int) -> int:
    """Uniform backoff in [0, cw_current], both ends included."""
    if cw_current < 1:
        raise ValueError(f"cw_current must be >= 1, got {cw_current}")
    return rng.randint(0, cw_current)


def on_failure(state: StationState) -> Departure | None:
    """Apply a collision / missing ACK to ``state``.

    The window grows to ``min(2*cw + 1, cw_max)``. Once the retry limit is
    exceeded the head frame is dropped and returned.
    """
    state.retry_count += 1
    if state.retry_count > state.retry_limit:
        dropped = Departure(state.queue.popleft(), state.retry_count - 1)
        state.retry_count = 0
        state.cw_current = state.params.cw_min
        return dropped
    state.cw_current = min(2 * state.cw_current + 1, state.params.cw_max)
    return None


def on_success(state: StationState) -> Departure:
    dep = Departure(state.queue.popleft(), state.retry_count)
    state.cw_current = state.params.cw_min
    state.retry_count = 0
    return dep


class SlotResult(enum.Enum):
    IDLE = "idle"
    SUCCESS = "success"
    COLLISION = "collision"


@dataclass(frozen=True)
class SlotOutcome:
    result: SlotResult
    station_ids: tuple = ()


def arbitrate_slot(stations: Sequence[StationState], channel: ChannelState) -> SlotOutcome:
    """Resolve one idle slot boundary.

    Contenders whose AIFS is complete and whose backoff is zero transmit now;
    everyone else freezes. If nobody transmits, one idle slot elapses: a
    station still in AIFS counts it towards AIFS, otherwise it decrements its
    backoff.
    """
    if channel.active_transmitters:
        raise ValueError("arbitrate_slot requires an idle channel")
    contenders = [s for s in stations if s.contending]
    ready = sorted(s.station_id for s in contenders if s.aifsn_remaining == 0 and s.backoff_counter == 0)
    if ready:
        for s in contenders:
            if s.station_id in ready:
                s.phase = Phase.TRANSMITTING
        channel.active_transmitters = set(ready)
        kind = SlotResult.SUCCESS if len(ready) == 1 else SlotResult.COLLISION
        return SlotOutcome(kind, tuple(ready))
    for s in contenders:
        if s.aifsn_remaining > 0:
            s.aifsn_remaining -= 1
            if s.aifsn_remaining == 0:
                s.phase = Phase.BACKOFF
        else:
            s.backoff_counter -= 1
    return SlotOutcome(SlotResult.IDLE)


def deliver_beacon(stations: Sequence[StationState], param_set: EdcaParamSet) -> list[StationState]:
    """Install ``param_set`` on every station that has not heard it yet.

    Backoff counters in progress are kept; ``cw_current`` is clamped into the
    new range. Returns the stations that changed.
    """
    changed = []
    for s in stations:
        if s.params_epoch == param_set.epoch:
            continue
        p = param_set[s.ac]
        s.params = p
        s.params_epoch = param_set.epoch
        s.cw_current = min(max(s.cw_current, p.cw_min), p.cw_max)
        changed.append(s)
    return changed


def station_rngs(seed: int, n: int) -> list[random.Random]:
    """One independent generator per station, derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [random.Random(int(c.generate_state(2, dtype=np.uint64)[0])) for c in children]


# -- the simulator ------------------------------------------------------------

# event priorities at equal timestamps
_JOIN, _LEAVE, _ARRIVAL, _BEACON = 0, 1, 2, 3


class _AcContenders:
    """Backoff heap of one access category.

    Entries are ``(backoff + drift_at_insert, station_id, token)``; the live
    backoff of an entry is ``key - drift``.
    """

    __slots__ = ("aifsn", "drift", "heap")

    def __init__(self, aifsn: int):
        self.aifsn = aifsn
        self.drift = 0
        self.heap: list = []


@dataclass
class TraceRecord:
    time_us: int
    kind: str
    station_ids: tuple = ()
    epoch: int | None = None


class Simulator:
    """One run of a scenario under one policy and seed."""

    def __init__(self, scenario: ScenarioSpec, policy: PolicyKind | str, seed: int, trace: bool = False):
        scenario.validate()
        self.scenario = scenario
        self.policy_kind = PolicyKind(policy)
        self.seed = seed
        self.timing = Timing.from_scenario(scenario)
        self.end_us = to_us(scenario.duration)
        self.warmup_us = to_us(scenario.warmup)

        self.ap = ApPolicy(self.policy_kind)
        self.advertised: EdcaParamSet = self.ap.pending
        self.ledger = MetricsLedger(
            scenario.scenario_id,
            self.policy_kind.value,
            seed,
            scenario.duration,
            scenario.warmup,
        )
        for ac, n in scenario.station_counts().items():
            if n > 0:
                self.ledger.stats(ac)
        self.trace: list[TraceRecord] | None = [] if trace else None
        self.channel = ChannelState()

        self.stations: dict[int, StationState] = {}
        self.sources: dict[int, TrafficSource] = {}
        self.exchanges: dict[int, FrameExchange] = {}
        self._groups: list = []
        self._tokens: list[int] = []
        self._late: dict[int, tuple[int, int]] = {}
        self._acq = {ac: _AcContenders(self.advertised[ac].aifsn) for ac in AccessCategory}

        self._events: list = []
        self._seq = 0
        self._build_population()
        self.t_free = 0

    # -- setup --------------------------------------------------------------

    def _push(self, t: int, prio: int, kind, payload) -> None:
        heapq.heappush(self._events, (t, prio, self._seq, kind, payload))
        self._seq += 1

    def _build_population(self) -> None:
        sid = 0
        plan = []
        for g in self.scenario.station_groups:
            for _ in range(g.count):
                plan.append((sid, g))
                sid += 1
        self._rngs = station_rngs(self.seed, sid)
        self._tokens = [0] * sid
        self._station_group = {}
        for sid, g in plan:
            self._station_group[sid] = g
            self._push(to_us(g.join_time), _JOIN, "join", sid)
            if g.leave_time is not None:
                self._push(to_us(g.leave_time), _LEAVE, "leave", sid)
        for k in range(self.end_us // self.timing.beacon_interval + 1):
            self._push(k * self.timing.beacon_interval, _BEACON, "beacon", None)

    # -- contention bookkeeping ---------------------------------------------

    def _boundary0(self) -> int:
        return self.t_free + self.timing.sifs

    def _enter_contention(self, sid: int, t: int) -> None:
        st = self.stations[sid]
        b = draw_backoff(self._rngs[sid], st.cw_current)
        st.backoff_counter = b
        st.aifsn_remaining = st.params.aifsn
        st.phase = Phase.AIFS_WAIT
        self._tokens[sid] += 1
        elapsed = t - self._boundary0()
        if elapsed > 0:
            offset = -(-elapsed // self.timing.slot)
            self._late[sid] = (offset, b)
        else:
            q = self._acq[st.ac]
            heapq.heappush(q.heap, (b + q.drift, sid, self._tokens[sid]))

    def _leave_contention(self, sid: int) -> None:
        self._tokens[sid] += 1
        self._late.pop(sid, None)

    def _purge(self, q: _AcContenders) -> None:
        heap, tokens = q.heap, self._tokens
        while heap and tokens[heap[0][1]] != heap[0][2]:
            heapq.heappop(heap)

    def _next_boundary(self) -> int | None:
        best = None
        for q in self._acq.values():
            self._purge(q)
            if q.heap:
                s = q.aifsn + q.heap[0][0] - q.drift
                if best is None or s < best:
                    best = s
        for sid, (offset, b) in self._late.items():
            s = offset + self._acq[self.stations[sid].ac].aifsn + b
            if best is None or s < best:
                best = s
        return best

    def _take_transmitters(self, s: int) -> list[int]:
        txs = []
        for q in self._acq.values():
            target = s - q.aifsn + q.drift
            heap = q.heap
            while heap:
                self._purge(q)
                if not heap or heap[0][0] != target:
                    break
                _, sid, _ = heapq.heappop(heap)
                self._tokens[sid] += 1
                txs.append(sid)
        for sid, (offset, b) in list(self._late.items()):
            if offset + self._acq[self.stations[sid].ac].aifsn + b == s:
                del self._late[sid]
                self._tokens[sid] += 1
                txs.append(sid)
        txs.sort()
        return txs

    def _freeze(self, s: int) -> None:
        """The medium turns busy at idle boundary ``s``: charge consumed slots."""
        for q in self._acq.values():
            if s > q.aifsn:
                q.drift += s - q.aifsn
        for sid, (offset, b) in self._late.items():
            st = self.stations[sid]
            q = self._acq[st.ac]
            b -= max(0, s - offset - q.aifsn)
            heapq.heappush(q.heap, (b + q.drift, sid, self._tokens[sid]))
        self._late.clear()

    def backoff_snapshot(self) -> dict[int, int]:
        """Current backoff counter of every contending station."""
        snap = {}
        for q in self._acq.values():
            for key, sid, token in q.heap:
                if self._tokens[sid] == token:
                    snap[sid] = key - q.drift
        for sid, (_, b) in self._late.items():
            snap[sid] = b
        return snap

    # -- frames -------------------------------------------------------------

    def _in_window(self, t: int) -> bool:
        return t >= self.warmup_us

    def _generate(self, sid: int, t: int) -> None:
        st = self.stations[sid]
        src = self.sources[sid]
        counted = self._in_window(t)
        if counted:
            self.ledger.record_generated(st.ac, src.payload_bits)
        if src.mode == SourceMode.CONSTANT_RATE and len(st.queue) >= src.queue_capacity:
            if counted:
                self.ledger.record_dropped(st.ac, 0)
            return
        st.queue.append(t)
        if st.phase == Phase.IDLE:
            self._enter_contention(sid, t)

    def _finish_departure(self, st: StationState, dep: Departure, delivered: bool, t_end: int) -> None:
        if not self._in_window(dep.arrival_us):
            return
        if delivered:
            ex = self.exchanges[st.station_id]
            self.ledger.record_delivered(st.ac, ex.payload_bits, (t_end - dep.arrival_us) / US_PER_S, dep.retries)
        else:
            self.ledger.record_dropped(st.ac, dep.retries)

    # -- event handlers -----------------------------------------------------

    def process_association_event(self, kind: str, sid: int, t: int) -> None:
        if kind == "join":
            if sid in self.stations:
                raise ProtocolError(f"station {sid} is already associated")
            g = self._station_group[sid]
            params = self.advertised[g.ac]
            st = StationState(sid, g.ac, params, retry_limit=self.scenario.retry_limit)
            st.params_epoch = self.advertised.epoch
            self.stations[sid] = st
            self.sources[sid] = g.source
            self.exchanges[sid] = self.timing.exchange(g.source.payload_bytes)
            self.ap.associate(QosCapabilityFlags.for_ac(g.ac))
            if g.source.mode == SourceMode.SATURATED:
                self._generate(sid, t)
            else:
                k = g.source.first_arrival_index(t)
                self._push(g.source.arrival_time_us(k), _ARRIVAL, "arrival", (sid, k))
        elif kind == "leave":
            st = self.stations.pop(sid, None)
            if st is None:
                raise ProtocolError(f"leave of unknown station {sid}")
            self._leave_contention(sid)
            for i, arrival in enumerate(st.queue):
                if self._in_window(arrival):
                    self.ledger.record_dropped(st.ac, st.retry_count if i == 0 else 0)
            st.queue.clear()
            st.phase = Phase.IDLE
            self.ap.disassociate(QosCapabilityFlags.for_ac(st.ac))
        else:
            raise ValueError(kind)

    def _on_arrival(self, sid: int, k: int, t: int) -> None:
        if sid not in self.stations:
            return
        src = self.sources[sid]
        self._generate(sid, t)
        nxt = src.arrival_time_us(k + 1)
        if nxt < self.end_us:
            self._push(nxt, _ARRIVAL, "arrival", (sid, k + 1))

    def _on_beacon(self, t_sched: int) -> None:
        t = max(t_sched, self.t_free)
        elapsed = t - self._boundary0()
        self._freeze(elapsed // self.timing.slot if elapsed > 0 else 0)
        self.advertised = self.ap.pending
        changed = deliver_beacon(list(self.stations.values()), self.advertised)
        if changed:
            for ac, q in self._acq.items():
                q.aifsn = self.advertised[ac].aifsn
        self.t_free = t + self.timing.beacon_duration
        self.channel.busy_until = self.t_free
        if self.trace is not None:
            self.trace.append(TraceRecord(t, "beacon", (), self.advertised.epoch))

    def _transmit(self, s: int) -> None:
        t_tx = self._boundary0() + s * self.timing.slot
        txs = self._take_transmitters(s)
        self._freeze(s)
        stations = [self.stations[sid] for sid in txs]
        for st in stations:
            st.phase = Phase.TRANSMITTING
        self.channel.active_transmitters = set(txs)

        if len(txs) == 1:
            st = stations[0]
            t_end = t_tx + self.exchanges[st.station_id].success_occupancy
            self._finish_departure(st, on_success(st), True, t_end)
            kind = "success"
        else:
            t_end = t_tx + max(self.exchanges[sid].collision_occupancy for sid in txs)
            if self._in_window(t_tx):
                self.ledger.record_collision(st.ac for st in stations)
            for st in stations:
                dep = on_failure(st)
                if dep is not None:
                    self._finish_departure(st, dep, False, t_end)
            kind = "collision"
        if self.trace is not None:
            self.trace.append(TraceRecord(t_tx, kind, tuple(txs)))

        self.t_free = t_end
        self.channel.busy_until = t_end
        self.channel.active_transmitters = set()
        for st in stations:
            st.phase = Phase.IDLE
            if not st.queue and self.sources[st.station_id].mode == SourceMode.SATURATED:
                self._generate(st.station_id, t_end)
            elif st.queue:
                self._enter_contention(st.station_id, t_end)

    # -- main loop ----------------------------------------------------------

    def run(self) -> MetricsLedger:
        events = self._events
        slot = self.timing.slot
        while True:
            s = self._next_boundary()
            t_tx = self._boundary0() + s * slot if s is not None else None
            if events and (t_tx is None or events[0][0] <= t_tx):
                t, _, _, kind, payload = events[0]
                if t >= self.end_us:
                    break
                heapq.heappop(events)
                if kind == "arrival":
                    self._on_arrival(payload[0], payload[1], t)
                elif kind == "beacon":
                    self._on_beacon(t)
                else:
                    self.process_association_event(kind, payload, t)
            else:
                if t_tx is None or t_tx >= self.end_us:
                    break
                self._transmit(s)
        return self._finalize()

    def _finalize(self) -> MetricsLedger:
        queued: dict[AccessCategory, int] = {}
        for st in self.stations.values():
            n = sum(1 for a in st.queue if self._in_window(a))
            queued[st.ac] = queued.get(st.ac, 0) + n
        for ac in self.ledger.per_ac:
            self.ledger.set_queued(ac, queued.get(ac, 0))
        self.ledger.metadata.update(
            {
                "stations": self.scenario.total_stations,
                "final_epoch": self.advertised.epoch,
                "end_us": self.end_us,
            }
        )
        self.ledger.check_conservation()
        return self.ledger


def run(scenario: ScenarioSpec, policy: PolicyKind | str, seed: int) -> MetricsLedger:
    """Simulate ``scenario`` under ``policy`` and return its ledger."""
    return Simulator(scenario, policy, seed).run()
