import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aes_reference import aes128_encrypt_block
from fogtrace.ids import (
    ASU, RSU, SCHEDULE_LENGTH, SSU, CodeKind, InvalidCodeError, ReferenceCode, classify_code,
    derive_ruerc, epoch_of, epoch_start, is_regular, issue_uerc, rotation_schedule,
)

KEY = ReferenceCode.from_hex("000102030405060708090a0b0c0d0e0f")
# epoch 1 under KEY, computed with tests/aes_reference.py
PINNED_EPOCH_1 = "7346139595c0b41e497bbde365f42d0a"

regular_codes = st.integers(min_value=0, max_value=(1 << 128) - 1).filter(
    lambda v: v not in (0xA1, 0xA2, 0xA3)).map(ReferenceCode)
epochs = st.integers(min_value=0, max_value=(1 << 40))


def test_reference_aes_matches_fips_197_example():
    key = bytes(range(16))
    plaintext = bytes.fromhex("00112233445566778899aabbccddeeff")
    assert aes128_encrypt_block(key, plaintext).hex() == "69c4e0d86a7b0430d8cdb78070b4c55a"


def test_pinned_vector_matches_independent_reference():
    expected = aes128_encrypt_block(KEY.to_bytes(), (1).to_bytes(16, "big")).hex()
    assert expected == PINNED_EPOCH_1
    assert derive_ruerc(KEY, 1).hex == PINNED_EPOCH_1


@pytest.mark.parametrize("epoch", [0, 2, 167, 222223])
def test_derivation_agrees_with_reference_cipher(epoch):
    expected = aes128_encrypt_block(KEY.to_bytes(), epoch.to_bytes(16, "big")).hex()
    assert derive_ruerc(KEY, epoch).hex == expected


def test_hex_roundtrip_and_canonical_form():
    code = ReferenceCode.from_hex("00000000000000000000000000abcdef")
    assert code.hex == "00000000000000000000000000abcdef"
    assert str(code) == code.hex
    assert ReferenceCode.from_bytes(code.to_bytes()) == code
    assert ReferenceCode.from_hex("ABCDEF" + "0" * 26).hex == "abcdef" + "0" * 26


@pytest.mark.parametrize("text", [
    "", "0" * 31, "0" * 33, "g" * 32, " " + "0" * 31, "0x" + "0" * 30, "0_" + "0" * 30,
])
def test_from_hex_rejects_malformed(text):
    with pytest.raises(InvalidCodeError):
        ReferenceCode.from_hex(text)


@pytest.mark.parametrize("value", [-1, 1 << 128, True])
def test_code_range_is_enforced(value):
    with pytest.raises(InvalidCodeError):
        ReferenceCode(value)


@given(st.integers(min_value=0, max_value=(1 << 128) - 1))
def test_hex_roundtrip_property(value):
    code = ReferenceCode(value)
    assert ReferenceCode.from_hex(code.hex) == code
    assert len(code.hex) == 32 and code.hex == code.hex.lower()


def test_classification_is_total_and_disjoint():
    assert classify_code(ASU) is CodeKind.ASU
    assert classify_code(RSU) is CodeKind.RSU
    assert classify_code(SSU) is CodeKind.SSU
    assert ASU.kind is CodeKind.ASU
    assert classify_code(ReferenceCode(0xA4)) is CodeKind.REGULAR
    assert classify_code(ReferenceCode(0)) is CodeKind.REGULAR
    assert len({ASU, RSU, SSU}) == 3


def test_issue_uerc_is_seed_deterministic_and_distinct():
    first = issue_uerc(random.Random(42))
    assert issue_uerc(random.Random(42)) == first
    rng = random.Random(42)
    codes = [issue_uerc(rng) for _ in range(10_000)]
    assert len(set(codes)) == 10_000
    assert all(is_regular(c) for c in codes)


def test_issue_uerc_skips_reserved_values():
    class Rigged(random.Random):
        def __init__(self):
            super().__init__(0)
            self.values = [0xA1, 0xA2, 0xA3, 0x1234]

        def getrandbits(self, k):
            return self.values.pop(0)

    assert issue_uerc(Rigged()) == ReferenceCode(0x1234)


@pytest.mark.parametrize("seconds,epoch", [(0, 0), (7199, 0), (7200, 1), (86399, 11), (86400, 12)])
def test_epoch_of(seconds, epoch):
    assert epoch_of(seconds) == epoch


def test_epoch_of_rejects_negative_and_epoch_start_inverts():
    with pytest.raises(ValueError):
        epoch_of(-1)
    assert epoch_start(5) == 36000
    assert epoch_of(epoch_start(5)) == 5


def test_derive_rejects_reserved_key_and_negative_epoch():
    for special in (ASU, RSU, SSU):
        with pytest.raises(InvalidCodeError):
            derive_ruerc(special, 0)
        with pytest.raises(InvalidCodeError):
            rotation_schedule(special, 0)
    with pytest.raises(ValueError):
        derive_ruerc(KEY, -1)


def test_schedule_shape_and_definition():
    schedule = rotation_schedule(KEY, 100)
    assert len(schedule.codes) == SCHEDULE_LENGTH == 168
    assert schedule.codes[0] == derive_ruerc(KEY, 100)
    assert (schedule.start, schedule.end) == (100, 268)
    assert schedule.covers(100) and schedule.covers(267)
    assert not schedule.covers(99) and not schedule.covers(268)
    assert schedule.code_at(268) is None
    assert list(schedule.items())[5] == (105, derive_ruerc(KEY, 105))


def test_schedule_codes_are_pairwise_distinct():
    codes = rotation_schedule(issue_uerc(random.Random(3)), 0).codes
    assert len(set(codes)) == 168


@settings(max_examples=200)
@given(regular_codes, st.integers(min_value=0, max_value=10_000))
def test_device_and_cloud_schedules_agree(uerc, start):
    schedule = rotation_schedule(uerc, start, length=8)
    assert schedule.codes == tuple(derive_ruerc(uerc, start + i) for i in range(8))


def test_derivation_determinism_over_many_pairs():
    rng = random.Random(11)
    pairs = [(issue_uerc(rng), rng.randrange(1 << 32)) for _ in range(10_000)]
    first = [derive_ruerc(u, e) for u, e in pairs]
    assert first == [derive_ruerc(u, e) for u, e in pairs]
    assert all(is_regular(c) for c in first)


@given(regular_codes, epochs)
def test_derivation_never_leaks_reserved(uerc, epoch):
    assert is_regular(derive_ruerc(uerc, epoch))


def test_reserved_escape_reencrypts_once(monkeypatch):
    import fogtrace.ids as ids

    real = ids._encrypt_blocks
    calls = []

    def fake(key, blocks):
        calls.append(blocks)
        if len(calls) == 1:
            return RSU.to_bytes()  # pretend the first block collides
        return real(key, blocks)

    monkeypatch.setattr(ids, "_encrypt_blocks", fake)
    code = ids.derive_ruerc(KEY, 9)
    assert calls[1] == RSU.to_bytes()
    assert code == ReferenceCode.from_bytes(real(KEY, RSU.to_bytes()))
    assert is_regular(code)
