"""Scenario descriptions: the in-memory record, the text format, and the grid.

Scenario files are INI documents. A ``[scenario]`` section carries run-wide
settings and every ``[group <name>]`` section adds a batch of identical
stations::

    [scenario]
    id = dense-be
    duration = 10
    warmup = 1

    [group be]
    ac = BE
    count = 128

    [group voice]
    ac = VO
    count = 30
    join_time = 2.0

Times are in seconds, rates in bit/s (``phy_rate``) or frames/s (``rate_fps``).
Omitted group keys fall back to the default saturated source for the
category.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .policy import AccessCategory
from .traffic import SourceMode, TrafficSource, default_source_for

GRID_BE_COUNTS = (32, 64, 128, 256, 512)
# (VO, VI) companions of every BE population
GRID_COMPANIONS = ((0, 0), (5, 0), (15, 0), (30, 0), (0, 5), (0, 15), (0, 30), (15, 15))


@dataclass(frozen=True)
class StationGroup:
    ac: AccessCategory
    count: int
    source: TrafficSource
    join_time: float = 0.0
    leave_time: float | None = None


@dataclass(frozen=True)
class ScenarioSpec:
    scenario_id: str
    station_groups: tuple[StationGroup, ...]
    duration: float = 10.0
    warmup: float = 1.0
    beacon_interval: float = 0.1024
    slot_time: float = 9e-6
    phy_rate: float = 65e6
    retry_limit: int = 7
    sifs: float = 16e-6
    ack_duration: float = 44e-6
    preamble: float = 40e-6
    beacon_bytes: int = 100
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "station_groups", tuple(self.station_groups))

    @property
    def total_stations(self) -> int:
        return sum(g.count for g in self.station_groups)

    def station_counts(self) -> dict[AccessCategory, int]:
        counts: dict[AccessCategory, int] = {}
        for g in self.station_groups:
            counts[g.ac] = counts.get(g.ac, 0) + g.count
        return counts

    def validate(self) -> "ScenarioSpec":
        if not self.scenario_id:
            raise ConfigError("scenario id must be non-empty")
        for g in self.station_groups:
            if g.count < 0:
                raise ConfigError(f"{self.scenario_id}: negative station count {g.count}")
            if g.join_time < 0:
                raise ConfigError(f"{self.scenario_id}: negative join_time {g.join_time}")
            if g.leave_time is not None and not g.join_time < g.leave_time:
                raise ConfigError(
                    f"{self.scenario_id}: join_time {g.join_time} must precede leave_time {g.leave_time}"
                )
        if self.total_stations < 1:
            raise ConfigError(f"{self.scenario_id}: scenario has no stations")
        if self.duration <= 0:
            raise ConfigError(f"{self.scenario_id}: duration must be positive")
        if not 0 <= self.warmup < self.duration:
            raise ConfigError(
                f"{self.scenario_id}: need 0 <= warmup < duration (warmup={self.warmup}, duration={self.duration})"
            )
        for name in ("beacon_interval", "slot_time", "phy_rate", "sifs", "ack_duration"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{self.scenario_id}: {name} must be positive")
        if self.preamble < 0 or self.beacon_bytes < 0:
            raise ConfigError(f"{self.scenario_id}: preamble and beacon_bytes must be >= 0")
        if self.retry_limit < 0:
            raise ConfigError(f"{self.scenario_id}: retry_limit must be >= 0")
        return self


# -- text format ------------------------------------------------------------

_SCENARIO_KEYS = {
    f.name: f.type
    for f in fields(ScenarioSpec)
    if f.name not in ("scenario_id", "station_groups", "metadata")
}
_GROUP_KEYS = {"ac", "count", "mode", "payload_bytes", "rate_fps", "queue_capacity", "join_time", "leave_time"}
_INT_KEYS = {"retry_limit", "beacon_bytes", "count", "payload_bytes", "queue_capacity"}


def _convert(section: str, key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None


def _parse_group(name: str, body: configparser.SectionProxy) -> StationGroup:
    section = f"group {name}"
    unknown = set(body) - _GROUP_KEYS
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(sorted(unknown))}")
    if "ac" not in body or "count" not in body:
        raise ConfigError(f"[{section}] requires 'ac' and 'count'")
    try:
        ac = AccessCategory.parse(body["ac"])
    except ValueError as exc:
        raise ConfigError(f"[{section}] ac: {exc}") from None
    count = _convert(section, "count", body["count"])
    if count < 0:
        raise ConfigError(f"[{section}] count: must be >= 0, got {count}")

    try:
        base = default_source_for(ac)
    except ValueError:
        base = None
    try:
        mode = SourceMode(body.get("mode", "saturated").strip().lower())
    except ValueError:
        raise ConfigError(f"[{section}] mode: expected 'saturated' or 'constant_rate'") from None
    payload = body.get("payload_bytes")
    if payload is None and base is None:
        raise ConfigError(f"[{section}] payload_bytes is required for {ac.name}")
    kwargs = {
        "mode": mode,
        "payload_bytes": _convert(section, "payload_bytes", payload) if payload is not None else base.payload_bytes,
    }
    if "rate_fps" in body:
        kwargs["rate_fps"] = _convert(section, "rate_fps", body["rate_fps"])
    if "queue_capacity" in body:
        kwargs["queue_capacity"] = _convert(section, "queue_capacity", body["queue_capacity"])
    try:
        source = TrafficSource(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}") from None

    join = _convert(section, "join_time", body["join_time"]) if "join_time" in body else 0.0
    leave = _convert(section, "leave_time", body["leave_time"]) if "leave_time" in body else None
    return StationGroup(ac, count, source, join, leave)


def parse_scenario(text: str, default_id: str = "scenario") -> ScenarioSpec:
    """Parse and validate a scenario document.

    Raises ConfigError naming the offending section/key, or the line number for
    syntax errors.
    """
    cp = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"syntax error: {exc}") from None

    settings: dict = {}
    groups: list[StationGroup] = []
    scenario_id = default_id
    for name in cp.sections():
        body = cp[name]
        if name == "scenario":
            for key, raw in body.items():
                if key == "id":
                    scenario_id = raw.strip()
                elif key in _SCENARIO_KEYS:
                    settings[key] = _convert(name, key, raw)
                else:
                    raise ConfigError(f"[scenario] unknown key: {key}")
        elif name.startswith("group "):
            groups.append(_parse_group(name[len("group "):].strip(), body))
        else:
            raise ConfigError(f"unknown section [{name}]")
    if not groups:
        raise ConfigError("scenario defines no [group ...] section")
    return ScenarioSpec(scenario_id, tuple(groups), **settings).validate()


def load_scenario(path) -> ScenarioSpec:
    with open(path) as fh:
        text = fh.read()
    stem = str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return parse_scenario(text, default_id=stem)


# -- the evaluation grid ----------------------------------------------------

def grid_id(n_be: int, n_vo: int, n_vi: int, scale: int = 1) -> str:
    parts = [f"be{n_be:03d}"]
    if n_vo:
        parts.append(f"vo{n_vo:02d}")
    if n_vi:
        parts.append(f"vi{n_vi:02d}")
    sid = "_".join(parts)
    return sid if scale == 1 else f"{sid}_s{scale}"


def standard_grid(scale: int = 1, duration: float = 10.0, warmup: float = 1.0) -> list[ScenarioSpec]:
    """The 5 x 8 BE-population x (VO, VI) companion grid, counts divided by ``scale``.

    Ids always name the unscaled populations; a ``_s<k>`` suffix marks scaled runs.
    """
    if scale < 1:
        raise ConfigError(f"scale must be >= 1, got {scale}")
    grid = []
    for n_be in GRID_BE_COUNTS:
        for n_vo, n_vi in GRID_COMPANIONS:
            groups = []
            for ac, n in ((AccessCategory.BE, n_be), (AccessCategory.VO, n_vo), (AccessCategory.VI, n_vi)):
                if n:
                    groups.append(StationGroup(ac, max(1, n // scale), default_source_for(ac)))
            spec = ScenarioSpec(
                grid_id(n_be, n_vo, n_vi, scale),
                tuple(groups),
                duration=duration,
                warmup=warmup,
                metadata={"scale": scale, "base_counts": {"BE": n_be, "VO": n_vo, "VI": n_vi}},
            )
            grid.append(spec.validate())
    return grid


def with_overrides(spec: ScenarioSpec, **changes) -> ScenarioSpec:
    return replace(spec, **changes).validate()
