import hashlib
import os

import pytest
from hypothesis import given, settings, strategies as st

from acrp import keys
from acrp.redactable import (
    AlreadyRedacted,
    ChunkTooLarge,
    ChunkedMessage,
    EmptyMessage,
    FieldTag,
    IndexOutOfRange,
    Present,
    Redacted,
    RedactableSignature,
    RedactedMessage,
    measured_overhead,
    redact,
    sign_redactable,
    signature_overhead,
    tree_depth,
    verify_full,
    verify_redacted,
)

SK, PK = keys.keygen(b"\x00" * 32)


def make_msg(chunks, tag=FieldTag.Description, context=b"\x11" * 32):
    return ChunkedMessage(tag, tuple(chunks), context)


class TestKeygen:
    def test_deterministic_with_seed(self):
        assert keys.keygen(b"\x00" * 32)[1] == keys.keygen(b"\x00" * 32)[1]

    def test_random_without_seed(self):
        assert keys.keygen()[1] != keys.keygen()[1]

    def test_sign_verify_roundtrip(self):
        sk, pk = keys.keygen()
        sig = sk.sign(b"abc")
        assert keys.verify(pk, sig, b"abc")
        assert not keys.verify(pk, sig, b"abd")


class TestSign:
    def test_single_chunk_minimum_tree(self):
        sig = sign_redactable(SK, make_msg([b"only"]))
        assert sig.n == 1 and sig.depth == 1

    def test_five_chunks_padded_to_eight(self):
        sig = sign_redactable(SK, make_msg([bytes([i + 1]) for i in range(5)]))
        assert sig.depth == 3

    def test_depth_table(self):
        for n, d in [(1, 1), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3), (9, 4), (64, 6)]:
            assert tree_depth(n) == d, n

    def test_empty_message_rejected(self):
        with pytest.raises(EmptyMessage):
            sign_redactable(SK, make_msg([]))
        with pytest.raises(EmptyMessage):
            sign_redactable(SK, make_msg([b"x", b""]))

    def test_chunk_size_cap(self):
        with pytest.raises(ChunkTooLarge):
            sign_redactable(SK, make_msg([b"\x00" * (1 << 20 | 1)]))

    def test_golden_signature(self):
        # frozen regression fixture: fixed key, fixed seed, fixed 4-chunk message
        msg = make_msg([b"alpha", b"bravo", b"charlie", b"delta"])
        sig = sign_redactable(SK, msg, root_seed=b"\x22" * 16)
        assert sig.to_bytes().hex() == (
            "040000000222222222222222222222222222222222400000002d41a00547875e"
            "ed26f484971f554c83366d74700f4a70214e449369f7a63687d38a3a4f70d47c"
            "bfd56891eab03e8ea0ee78bcec535952926886052820af3a052000000080790f"
            "6de218a0c8e05b00b53aca67f3d85ea98ba8425779ffe71af4103f7775"
        )
        red = redact(msg, sig, {2})
        assert hashlib.sha256(red.to_bytes()).hexdigest() == (
            "59edb20d7e59ccf1247cc4259667890185477c5032eb96b455d2fa8b0e3b4dc8"
        )

    def test_signature_serialization_roundtrip(self):
        sig = sign_redactable(SK, make_msg([b"a", b"b", b"c"]))
        assert RedactableSignature.from_bytes(sig.to_bytes()) == sig


class TestVerifyFull:
    def test_roundtrip(self):
        msg = make_msg([b"a", b"bb", b"ccc"])
        sig = sign_redactable(SK, msg)
        assert verify_full(PK, msg, sig)

    def test_flipped_byte(self):
        msg = make_msg([b"aa", b"bb", b"cc"])
        sig = sign_redactable(SK, msg)
        tampered = make_msg([b"aa", b"bX", b"cc"])
        assert not verify_full(PK, tampered, sig)

    def test_swapped_chunks(self):
        # position is committed: the leaf hash includes the chunk index, so a
        # brute recompute of the swapped message's leaves cannot match
        msg = make_msg([b"first", b"second", b"third"])
        sig = sign_redactable(SK, msg)
        swapped = make_msg([b"second", b"first", b"third"])
        assert not verify_full(PK, swapped, sig)

    def test_wrong_field_tag(self):
        msg = make_msg([b"a", b"b"])
        sig = sign_redactable(SK, msg)
        assert not verify_full(PK, make_msg([b"a", b"b"], tag=FieldTag.Location), sig)

    def test_wrong_context(self):
        msg = make_msg([b"a", b"b"])
        sig = sign_redactable(SK, msg)
        assert not verify_full(PK, make_msg([b"a", b"b"], context=b"\x12" * 32), sig)


class TestRedact:
    def test_empty_redaction_verifies(self):
        msg = make_msg([b"a", b"b", b"c", b"d"])
        sig = sign_redactable(SK, msg)
        red = redact(msg, sig, set())
        assert verify_redacted(red)
        assert [s.chunk for s in red.slots] == [b"a", b"b", b"c", b"d"]

    def test_single_redaction_cover_bound(self):
        msg = make_msg([b"a", b"b", b"c", b"d"])
        sig = sign_redactable(SK, msg)
        red = redact(msg, sig, {2})
        assert [type(s) for s in red.slots] == [Present, Present, Redacted, Present]
        # k=1, n=4: at most k*ceil(log2 n) + 1 = 3 cover entries
        assert len(red.seed_cover) <= 3
        assert verify_redacted(red)

    def test_full_redaction(self):
        msg = make_msg([b"a", b"b", b"c", b"d"])
        sig = sign_redactable(SK, msg)
        red = redact(msg, sig, {0, 1, 2, 3})
        assert red.seed_cover == ()
        assert all(isinstance(s, Redacted) for s in red.slots)
        assert verify_redacted(red)

    def test_index_out_of_range(self):
        msg = make_msg([b"a", b"b"])
        sig = sign_redactable(SK, msg)
        with pytest.raises(IndexOutOfRange):
            redact(msg, sig, {2})

    def test_already_redacted(self):
        msg = make_msg([b"a", b"b"])
        sig = sign_redactable(SK, msg)
        red = redact(msg, sig, {0})
        with pytest.raises(AlreadyRedacted):
            redact(red, None, {0})

    def test_composition(self):
        msg = make_msg([bytes([i + 1]) * 3 for i in range(8)])
        sig = sign_redactable(SK, msg)
        two_step = redact(redact(msg, sig, {1, 4}), None, {6})
        one_step = redact(msg, sig, {1, 4, 6})
        assert two_step == one_step
        assert verify_redacted(two_step)

    def test_serialization_roundtrip(self):
        msg = make_msg([b"aa", b"bb", b"cc", b"dd", b"ee"])
        sig = sign_redactable(SK, msg)
        red = redact(msg, sig, {1, 3})
        assert RedactedMessage.from_bytes(red.to_bytes()) == red


class TestVerifyRedacted:
    def test_tampered_present_chunk(self):
        msg = make_msg([b"aa", b"bb", b"cc", b"dd"])
        sig = sign_redactable(SK, msg)
        red = redact(msg, sig, {1})
        slots = list(red.slots)
        slots[2] = Present(b"cX")
        bad = RedactedMessage(
            red.field_tag, tuple(slots), red.seed_cover, red.root_signature,
            red.n, red.signer_pk, red.context,
        )
        assert not verify_redacted(bad)

    def test_substituted_digest(self):
        # a digest of different content cannot pass: the recomputed root differs
        msg = make_msg([b"aa", b"bb", b"cc", b"dd"])
        sig = sign_redactable(SK, msg)
        red = redact(msg, sig, {1})
        other = sign_redactable(SK, make_msg([b"aa", b"XX", b"cc", b"dd"]))
        other_red = redact(make_msg([b"aa", b"XX", b"cc", b"dd"]), other, {1})
        slots = list(red.slots)
        slots[1] = other_red.slots[1]
        bad = RedactedMessage(
            red.field_tag, tuple(slots), red.seed_cover, red.root_signature,
            red.n, red.signer_pk, red.context,
        )
        assert not verify_redacted(bad)

    def test_cover_must_not_leak_redacted_subtree(self):
        # handing over a cover that spans a redacted leaf must fail validation
        msg = make_msg([b"aa", b"bb", b"cc", b"dd"])
        sig = sign_redactable(SK, msg)
        red = redact(msg, sig, {1})
        full = redact(msg, sig, set())
        bad = RedactedMessage(
            red.field_tag, red.slots, full.seed_cover, red.root_signature,
            red.n, red.signer_pk, red.context,
        )
        assert not verify_redacted(bad)

    def test_malformed_never_raises(self):
        msg = make_msg([b"aa", b"bb"])
        sig = sign_redactable(SK, msg)
        red = redact(msg, sig, {0})
        garbage = RedactedMessage(
            red.field_tag, red.slots, ((9999, b"\x00" * 16),), red.root_signature,
            red.n, red.signer_pk, red.context,
        )
        assert verify_redacted(garbage) is False


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_random_redactions_verify(self, data):
        n = data.draw(st.integers(1, 16))
        chunks = [data.draw(st.binary(min_size=1, max_size=8)) for _ in range(n)]
        subset = data.draw(st.sets(st.integers(0, n - 1)))
        msg = make_msg(chunks)
        sig = sign_redactable(SK, msg)
        assert verify_full(PK, msg, sig)
        red = redact(msg, sig, subset)
        assert verify_redacted(red)
        assert set(red.redacted_indices()) == subset

    @settings(max_examples=20, deadline=None)
    @given(st.data())
    def test_position_binding(self, data):
        n = data.draw(st.integers(2, 8))
        chunks = [b"chunk-%d" % i for i in range(n)]
        i = data.draw(st.integers(0, n - 1))
        j = data.draw(st.integers(0, n - 1).filter(lambda x: x != i))
        msg = make_msg(chunks)
        sig = sign_redactable(SK, msg)
        permuted = list(chunks)
        permuted[i], permuted[j] = permuted[j], permuted[i]
        assert not verify_full(PK, make_msg(permuted), sig)


class TestHiding:
    def test_no_redacted_substring_leaks(self):
        for trial in range(20):
            chunks = [os.urandom(16) for _ in range(6)]
            msg = make_msg(chunks)
            sig = sign_redactable(SK, msg)
            red = redact(msg, sig, {1, 4})
            wire = red.to_bytes()
            for idx in (1, 4):
                chunk = chunks[idx]
                for off in range(len(chunk) - 4):
                    assert chunk[off : off + 5] not in wire

    def test_commitments_are_salted(self):
        msg = make_msg([b"same content", b"again"])
        a = redact(msg, sign_redactable(SK, msg), {0})
        b = redact(msg, sign_redactable(SK, msg), {0})
        assert a.slots[0].digest != b.slots[0].digest


class TestOverhead:
    def test_baseline(self):
        # n=1, k=0: fixed fields + one present slot prefix + one cover seed
        red = redact(make_msg([b"x"]), sign_redactable(SK, make_msg([b"x"])), set())
        assert measured_overhead(red) == signature_overhead(1, 0)
        assert len(red.seed_cover) == 1

    def test_matches_measurement_for_spread_pattern(self):
        for n, k in [(4, 1), (16, 4), (64, 8), (64, 64)]:
            chunks = [os.urandom(5) for _ in range(n)]
            msg = make_msg(chunks)
            sig = sign_redactable(SK, msg)
            targets = {i * n // k for i in range(k)}
            red = redact(msg, sig, targets)
            assert measured_overhead(red) == signature_overhead(n, k), (n, k)

    def test_cover_entries_scale_linearly_in_k(self):
        base = signature_overhead(64, 1)
        eight = signature_overhead(64, 8)
        assert (eight - signature_overhead(64, 0)) <= 8 * (base - signature_overhead(64, 0))

    def test_large_tree_single_redaction(self):
        from acrp.redactable import _minimal_cover

        present = frozenset(range(1024)) - {512}
        assert len(_minimal_cover(present, 1024)) <= 10 + 1

    def test_log_linear_bound(self):
        import math

        for n in (4, 16, 64, 256):
            ceillog = math.ceil(math.log2(n))
            base = signature_overhead(n, 0)
            for k in (1, n // 4, n):
                extra = signature_overhead(n, k) - base
                assert extra <= (37 + 20) * k * ceillog, (n, k)
