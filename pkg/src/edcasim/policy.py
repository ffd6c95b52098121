"""EDCA parameter policies.

Two policies are provided:

* static EDCA, which always advertises the default parameter table;
* QCAAAE, which counts associated stations per access category, sizes the
  contention window from those counts and reassigns AIFSN values depending on
  which categories are currently active.

Everything in here is a pure function over small immutable records so the
AP model in :mod:`edcasim.kernel` can rebuild a parameter set whenever an
association event arrives and hold it until the next beacon.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, NamedTuple

from .errors import DomainError, UnderflowError

PHY_CW_MAX = 1023


class AccessCategory(enum.IntEnum):
    """EDCA access categories; integer order follows priority (VO highest)."""

    BK = 0
    BE = 1
    VI = 2
    VO = 3

    @classmethod
    def parse(cls, text: str) -> "AccessCategory":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown access category {text!r}") from None


#: Categories the adaptive policy tracks, highest priority first.
ADAPTED = (AccessCategory.VO, AccessCategory.VI, AccessCategory.BE)


class PolicyKind(str, enum.Enum):
    EDCA = "edca"
    QCAAAE = "qcaaae"


def _is_pow2_minus_1(x: int) -> bool:
    return x >= 1 and (x + 1) & x == 0


@dataclass(frozen=True)
class AcParams:
    aifsn: int
    cw_min: int
    cw_max: int

    def __post_init__(self):
        if self.aifsn < 2:
            raise ValueError(f"aifsn must be >= 2, got {self.aifsn}")
        if not 1 <= self.cw_min <= self.cw_max <= PHY_CW_MAX:
            raise ValueError(f"need 1 <= cw_min <= cw_max <= {PHY_CW_MAX}: {self}")
        if not (_is_pow2_minus_1(self.cw_min) and _is_pow2_minus_1(self.cw_max)):
            raise ValueError(f"cw bounds must have the form 2^k - 1: {self}")


class _Counts(NamedTuple):
    n_vo: int = 0
    n_vi: int = 0
    n_be: int = 0


class AcCounters(_Counts):
    """Associated-station count per adapted access category (immutable)."""

    __slots__ = ()

    def __new__(cls, n_vo: int = 0, n_vi: int = 0, n_be: int = 0):
        if not (isinstance(n_vo, int) and isinstance(n_vi, int) and isinstance(n_be, int)) or min(n_vo, n_vi, n_be) < 0:
            raise ValueError(f"counters must be non-negative integers, got {(n_vo, n_vi, n_be)}")
        return tuple.__new__(cls, (n_vo, n_vi, n_be))

    def count(self, ac: AccessCategory) -> int:
        if ac == AccessCategory.BK:
            return 0
        return getattr(self, _COUNTER_FIELD[ac])

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.n_vo, self.n_vi, self.n_be)


_COUNTER_FIELD = {
    AccessCategory.VO: "n_vo",
    AccessCategory.VI: "n_vi",
    AccessCategory.BE: "n_be",
}


@dataclass(frozen=True)
class QosCapabilityFlags:
    """Per-AC flags from the QoS capability field of an association request.

    Bit layout of the octet: B0 VO, B1 VI, B2 BK, B3 BE.
    """

    vo: bool = False
    vi: bool = False
    be: bool = False
    bk: bool = False

    _BITS = {"vo": 0, "vi": 1, "bk": 2, "be": 3}

    @classmethod
    def for_ac(cls, ac: AccessCategory) -> "QosCapabilityFlags":
        return cls(**{ac.name.lower(): True})

    @classmethod
    def from_octet(cls, octet: int) -> "QosCapabilityFlags":
        if not 0 <= octet <= 0xFF:
            raise ValueError(f"octet out of range: {octet}")
        return cls(**{name: bool(octet >> bit & 1) for name, bit in cls._BITS.items()})

    def to_octet(self) -> int:
        return sum(1 << bit for name, bit in self._BITS.items() if getattr(self, name))

    def is_set(self, ac: AccessCategory) -> bool:
        return getattr(self, ac.name.lower())


def register_association(counters: AcCounters, flags: QosCapabilityFlags) -> AcCounters:
    """Increment the counter of every flagged category. BK is ignored."""
    # sums of non-negative ints are valid by construction; skip re-validation
    return tuple.__new__(AcCounters, (counters[0] + flags.vo, counters[1] + flags.vi, counters[2] + flags.be))


def register_disassociation(counters: AcCounters, flags: QosCapabilityFlags) -> AcCounters:
    """Decrement the counter of every flagged category.

    Raises UnderflowError if a flagged counter is already zero; in that case
    ``counters`` is left as it was (no partial update).
    """
    out = (counters[0] - flags.vo, counters[1] - flags.vi, counters[2] - flags.be)
    if min(out) < 0:
        empty = [ac.name for ac, n in zip(ADAPTED, out) if n < 0]
        raise UnderflowError(f"disassociation for {', '.join(empty)} with no associated station")
    return tuple.__new__(AcCounters, out)


def activity_status(counters: AcCounters) -> tuple[bool, bool, bool]:
    """(VO, VI, BE) activity: a category is active iff its counter is positive."""
    return (counters.n_vo > 0, counters.n_vi > 0, counters.n_be > 0)


def compute_aifsn(active: tuple[bool, bool, bool]) -> dict[AccessCategory, int]:
    """AIFSN for each active category given (VO, VI, BE) activity.

    Higher-priority categories that are absent hand their AIFSN slot down, so
    the active categories always occupy consecutive values starting at 2.
    """
    vo, vi, be = active
    if vo and vi:
        table = {AccessCategory.VO: 2, AccessCategory.VI: 3, AccessCategory.BE: 4}
    elif vo:
        table = {AccessCategory.VO: 2, AccessCategory.BE: 3}
    elif vi:
        table = {AccessCategory.VI: 2, AccessCategory.BE: 3}
    else:
        table = {AccessCategory.BE: 2}
    flags = dict(zip(ADAPTED, active))
    return {ac: v for ac, v in table.items() if flags[ac]}


def _ceil_log2(n: int) -> int:
    # exact ceil(log2(n)) for integer n >= 1
    return (n - 1).bit_length()


def compute_cw(n_ac: int) -> tuple[int, int]:
    """Contention window bounds for ``n_ac`` associated stations.

    ``cw_min = 2**ceil(log2(n/2)) - 1`` and ``cw_max = min(2**ceil(log2(2n)) - 1, 1023)``,
    evaluated in integer arithmetic. ``cw_min`` is clamped into ``[1, cw_max]``
    so tiny populations still randomise and huge ones stay within the PHY limit.
    """
    if isinstance(n_ac, bool) or not isinstance(n_ac, int) or n_ac < 1:
        raise DomainError(f"n_ac must be an integer >= 1, got {n_ac!r}")
    # ceil(log2(n/2)) == ceil(log2(n)) - 1
    exp_min = _ceil_log2(n_ac) - 1
    cw_min = (1 << exp_min) - 1 if exp_min >= 0 else 0
    cw_max = min((1 << (_ceil_log2(n_ac) + 1)) - 1, PHY_CW_MAX)
    return min(max(1, cw_min), cw_max), cw_max


@dataclass(frozen=True)
class EdcaParamSet:
    """The EDCA parameter set carried by a beacon."""

    params: Mapping[AccessCategory, AcParams]
    epoch: int = 0

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    def __getitem__(self, ac: AccessCategory) -> AcParams:
        return self.params[ac]

    def same_values(self, other: "EdcaParamSet") -> bool:
        return dict(self.params) == dict(other.params)


_DEFAULT_PARAMS = {
    AccessCategory.VO: AcParams(2, 3, 7),
    AccessCategory.VI: AcParams(2, 7, 15),
    AccessCategory.BE: AcParams(3, 15, 1023),
    AccessCategory.BK: AcParams(7, 15, 1023),
}


def static_edca_params() -> EdcaParamSet:
    return EdcaParamSet(_DEFAULT_PARAMS, epoch=0)


def build_param_set(counters: AcCounters, previous: EdcaParamSet | None = None) -> EdcaParamSet:
    """Adapted parameter set for the current association counters.

    Inactive categories and BK keep their static defaults. The epoch of
    ``previous`` is bumped only when some value actually changed.
    """
    if previous is None:
        previous = static_edca_params()
    aifsn = compute_aifsn(activity_status(counters))
    params = dict(_DEFAULT_PARAMS)
    for ac, a in aifsn.items():
        cw_min, cw_max = compute_cw(counters.count(ac))
        params[ac] = AcParams(a, cw_min, cw_max)
    candidate = EdcaParamSet(params, previous.epoch)
    if candidate.same_values(previous):
        return previous
    return EdcaParamSet(params, previous.epoch + 1)


@dataclass
class ApPolicy:
    """AP-side policy state: association counters plus the pending parameter set.

    The pending set is what the next beacon will carry.
    """

    kind: PolicyKind
    counters: AcCounters = field(default_factory=AcCounters)
    pending: EdcaParamSet = field(default_factory=static_edca_params)

    def associate(self, flags: QosCapabilityFlags) -> None:
        self.counters = register_association(self.counters, flags)
        self._rebuild()

    def disassociate(self, flags: QosCapabilityFlags) -> None:
        self.counters = register_disassociation(self.counters, flags)
        self._rebuild()

    def _rebuild(self) -> None:
        if self.kind == PolicyKind.QCAAAE:
            self.pending = build_param_set(self.counters, self.pending)
