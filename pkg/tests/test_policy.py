import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edcasim.errors import DomainError, UnderflowError
from edcasim.policy import (
    AccessCategory as AC,
    AcCounters,
    AcParams,
    ApPolicy,
    PolicyKind,
    QosCapabilityFlags,
    activity_status,
    build_param_set,
    compute_aifsn,
    compute_cw,
    register_association,
    register_disassociation,
    static_edca_params,
)


def pow2_at_least(x: Fraction) -> int:
    """Smallest power of two >= x, by doubling (independent of bit tricks)."""
    p = Fraction(1, 1024)
    while p < x:
        p *= 2
    return p


def cw_oracle(n):
    lo = pow2_at_least(Fraction(n, 2)) - 1
    hi = min(pow2_at_least(Fraction(2 * n)) - 1, 1023)
    return int(min(max(lo, 1), hi)), int(hi)


# hand-evaluated: ceil(log2(n/2)) and ceil(log2(2n)) per row
HAND_TABLE = {
    1: (1, 1),
    2: (1, 3),
    4: (1, 7),
    8: (3, 15),
    15: (7, 31),
    16: (7, 31),
    30: (15, 63),
    64: (31, 127),
    128: (63, 255),
    256: (127, 511),
    512: (255, 1023),
    1000: (511, 1023),
}

# AIFSN assignment transcribed row by row: (VO, VI, BE) activity -> AIFSN of active ACs
AIFSN_TABLE = {
    (False, False, True): {AC.BE: 2},
    (False, True, False): {AC.VI: 2},
    (False, True, True): {AC.VI: 2, AC.BE: 3},
    (True, False, False): {AC.VO: 2},
    (True, False, True): {AC.VO: 2, AC.BE: 3},
    (True, True, False): {AC.VO: 2, AC.VI: 3},
    (True, True, True): {AC.VO: 2, AC.VI: 3, AC.BE: 4},
}


class TestAccessCategory:
    def test_priority_order(self):
        assert AC.VO > AC.VI > AC.BE > AC.BK
        assert len(set(AC)) == 4

    def test_parse(self):
        assert AC.parse(" vo ") is AC.VO
        with pytest.raises(ValueError):
            AC.parse("XX")


class TestCounters:
    def test_association_increments_flagged(self):
        out = register_association(AcCounters(), QosCapabilityFlags(vo=True, be=True))
        assert out.as_tuple() == (1, 0, 1)

    def test_association_no_flags_is_noop(self):
        c = AcCounters(5, 2, 9)
        assert register_association(c, QosCapabilityFlags()) == c

    def test_thirty_voice_associations(self):
        c = AcCounters()
        for _ in range(30):
            c = register_association(c, QosCapabilityFlags(vo=True))
        assert c.n_vo == 30

    def test_bk_flag_ignored(self):
        assert register_association(AcCounters(), QosCapabilityFlags(bk=True)) == AcCounters()

    def test_disassociation_inverse(self):
        flags = QosCapabilityFlags(vo=True, be=True)
        assert register_disassociation(AcCounters(1, 0, 1), flags) == AcCounters()

    def test_disassociation_decrements(self):
        assert register_disassociation(AcCounters(3, 3, 3), QosCapabilityFlags(vi=True)).as_tuple() == (3, 2, 3)

    def test_underflow(self):
        with pytest.raises(UnderflowError):
            register_disassociation(AcCounters(), QosCapabilityFlags(vo=True))

    def test_underflow_is_atomic(self):
        c = AcCounters(1, 0, 0)
        with pytest.raises(UnderflowError):
            register_disassociation(c, QosCapabilityFlags(vo=True, vi=True))
        assert c.as_tuple() == (1, 0, 0)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            AcCounters(-1, 0, 0)

    @given(st.lists(st.tuples(st.booleans(), st.booleans(), st.booleans(), st.booleans()), max_size=200))
    def test_replay_matches_recount(self, ops):
        # each op: (is_assoc, vo, vi, be); disassociations skipped when they would underflow
        c = AcCounters()
        history = []
        for assoc, vo, vi, be in ops:
            flags = QosCapabilityFlags(vo=vo, vi=vi, be=be)
            if assoc:
                c = register_association(c, flags)
                history.append((+1, flags))
            else:
                try:
                    c = register_disassociation(c, flags)
                except UnderflowError:
                    continue
                history.append((-1, flags))
        expected = [sum(sign for sign, f in history if getattr(f, name)) for name in ("vo", "vi", "be")]
        assert list(c.as_tuple()) == expected


class TestQosFlags:
    def test_octet_layout(self):
        # B0 VO, B1 VI, B2 BK, B3 BE
        assert QosCapabilityFlags(vo=True).to_octet() == 0b0001
        assert QosCapabilityFlags(vi=True).to_octet() == 0b0010
        assert QosCapabilityFlags(bk=True).to_octet() == 0b0100
        assert QosCapabilityFlags(be=True).to_octet() == 0b1000

    @given(st.integers(0, 15))
    def test_octet_roundtrip(self, octet):
        assert QosCapabilityFlags.from_octet(octet).to_octet() == octet

    def test_upper_bits_ignored(self):
        assert QosCapabilityFlags.from_octet(0xF0 | 0b1001) == QosCapabilityFlags(vo=True, be=True)


class TestActivity:
    @pytest.mark.parametrize(
        "counts, expected",
        [((0, 0, 0), (False, False, False)), ((1, 0, 512), (True, False, True)), ((15, 15, 128), (True, True, True))],
    )
    def test_examples(self, counts, expected):
        assert activity_status(AcCounters(*counts)) == expected


class TestAifsn:
    @pytest.mark.parametrize("active, expected", list(AIFSN_TABLE.items()))
    def test_aifsn_rows(self, active, expected):
        assert compute_aifsn(active) == expected

    def test_all_inactive_empty(self):
        assert compute_aifsn((False, False, False)) == {}

    def test_totality(self):
        for active in itertools.product([False, True], repeat=3):
            out = compute_aifsn(active)
            assert set(out) == {ac for ac, on in zip((AC.VO, AC.VI, AC.BE), active) if on}


class TestComputeCw:
    @pytest.mark.parametrize("n", sorted(HAND_TABLE))
    def test_hand_table(self, n):
        assert compute_cw(n) == HAND_TABLE[n]

    @pytest.mark.parametrize("n", sorted(HAND_TABLE))
    def test_hand_table_agrees_with_oracle(self, n):
        assert cw_oracle(n) == HAND_TABLE[n]

    @pytest.mark.parametrize("bad", [0, -3, 1.5, True])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            compute_cw(bad)

    @given(st.integers(1, 10**6))
    def test_matches_oracle(self, n):
        assert compute_cw(n) == cw_oracle(n)

    @given(st.integers(1, 10**6))
    def test_shape(self, n):
        lo, hi = compute_cw(n)
        assert 1 <= lo <= hi <= 1023
        assert (lo + 1) & lo == 0 and (hi + 1) & hi == 0

    @given(st.integers(1, 10**6), st.integers(0, 10**6))
    def test_monotone(self, n1, extra):
        a, b = compute_cw(n1), compute_cw(n1 + extra)
        assert a[0] <= b[0] and a[1] <= b[1]

    def test_exact_powers_of_two(self):
        for k in range(1, 20):
            n = 1 << k
            assert compute_cw(n)[0] == min(max((n >> 1) - 1, 1), 1023)


class TestParamSet:
    def test_static_defaults(self):
        p = static_edca_params()
        assert p.epoch == 0
        assert p[AC.VO] == AcParams(2, 3, 7)
        assert p[AC.VI] == AcParams(2, 7, 15)
        assert p[AC.BE] == AcParams(3, 15, 1023)
        assert p[AC.BK] == AcParams(7, 15, 1023)

    def test_build_vo_be(self):
        p = build_param_set(AcCounters(30, 0, 512), static_edca_params())
        assert p[AC.VO] == AcParams(2, 15, 63)
        assert p[AC.BE] == AcParams(3, 255, 1023)
        assert p[AC.VI] == AcParams(2, 7, 15)
        assert p[AC.BK] == AcParams(7, 15, 1023)
        assert p.epoch == 1

    def test_empty_keeps_defaults_and_epoch(self):
        prev = static_edca_params()
        p = build_param_set(AcCounters(), prev)
        assert p.epoch == prev.epoch
        assert p.same_values(prev)

    def test_all_active_aifsn(self):
        p = build_param_set(AcCounters(15, 15, 128))
        assert (p[AC.VO].aifsn, p[AC.VI].aifsn, p[AC.BE].aifsn) == (2, 3, 4)

    @given(st.integers(0, 600), st.integers(0, 600), st.integers(0, 600))
    def test_idempotent(self, vo, vi, be):
        c = AcCounters(vo, vi, be)
        once = build_param_set(c, static_edca_params())
        twice = build_param_set(c, once)
        assert twice.epoch == once.epoch

    @given(st.integers(1, 10**4))
    def test_priority_preserved_equal_counts(self, n):
        p = build_param_set(AcCounters(n, n, n))
        assert p[AC.VO].aifsn < p[AC.VI].aifsn < p[AC.BE].aifsn

    @given(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40), st.integers(0, 40)), min_size=1, max_size=20))
    def test_epoch_increases_only_on_change(self, seq):
        prev = static_edca_params()
        for counts in seq:
            nxt = build_param_set(AcCounters(*counts), prev)
            if nxt.same_values(prev):
                assert nxt.epoch == prev.epoch
            else:
                assert nxt.epoch == prev.epoch + 1
            prev = nxt

    def test_acparams_validation(self):
        with pytest.raises(ValueError):
            AcParams(1, 3, 7)
        with pytest.raises(ValueError):
            AcParams(2, 4, 7)
        with pytest.raises(ValueError):
            AcParams(2, 15, 7)
        with pytest.raises(ValueError):
            AcParams(2, 3, 2047)


class TestApPolicy:
    def test_static_ignores_counts(self):
        ap = ApPolicy(PolicyKind.EDCA)
        for _ in range(50):
            ap.associate(QosCapabilityFlags(be=True))
        assert ap.counters.n_be == 50
        assert ap.pending.same_values(static_edca_params())

    def test_adaptive_tracks_counts(self):
        ap = ApPolicy(PolicyKind.QCAAAE)
        ap.associate(QosCapabilityFlags(vi=True))
        assert ap.pending[AC.VI] == AcParams(2, 1, 1)
        ap.disassociate(QosCapabilityFlags(vi=True))
        assert ap.pending.same_values(static_edca_params())

    @settings(max_examples=30)
    @given(st.integers(1, 200))
    def test_incremental_equals_batch(self, n):
        ap = ApPolicy(PolicyKind.QCAAAE)
        for _ in range(n):
            ap.associate(QosCapabilityFlags(be=True))
        assert ap.pending.same_values(build_param_set(AcCounters(0, 0, n)))
