import hashlib

import pytest

from acrp import keys
from acrp.ledger import (
    Block,
    DeletionReason,
    GenesisConfig,
    Status,
    Transaction,
    TxKind,
    VERDICT_ALTERED,
    VERDICT_CONSISTENT,
    VERDICT_HASH_MISMATCH,
    audit_publish_payload,
    audit_reject_payload,
    commit_payload,
    deletion_payload,
    pack_original_blob,
    parse_commit_payload,
    register_authority_payload,
    status_payload,
    tx_merkle_root,
    unpack_original_blob,
    validate_chain,
    verify_dispute,
)
from acrp.redactable import Present, RedactedMessage, SignatureCommitment
from acrp.report import ReportType, report_id, select_auditor

from conftest import make_consortium, tiny_report


def mk_tx(sk, kind=TxKind.Announce, rid=b"\x07" * 32, payload=None, chain="acrp-test"):
    return Transaction.build(sk, kind, rid, payload if payload is not None else rid, chain)


class TestTransaction:
    def test_roundtrip(self):
        sk, _ = keys.keygen(b"t1")
        tx = mk_tx(sk)
        assert Transaction.from_bytes(tx.to_bytes()) == tx

    def test_signature_binds_chain_id(self):
        sk, _ = keys.keygen(b"t2")
        tx = mk_tx(sk, chain="chain-a")
        assert tx.check_signature("chain-a")
        assert not tx.check_signature("chain-b")

    def test_digest_changes_with_payload(self):
        sk, _ = keys.keygen(b"t3")
        a = mk_tx(sk, kind=TxKind.Comment, payload=b"\x01" * 32)
        b = mk_tx(sk, kind=TxKind.Comment, payload=b"\x02" * 32)
        assert a.digest() != b.digest()


class TestMerkleRoot:
    def _oracle(self, digests):
        """Independent recompute: pairwise SHA-256 with interior domain byte."""
        if not digests:
            return hashlib.sha256(b"acrp-empty-block").digest()
        level = list(digests)
        while len(level) > 1:
            if len(level) % 2:
                level.append(level[-1])
            level = [
                hashlib.sha256(b"\x02" + level[i] + level[i + 1]).digest()
                for i in range(0, len(level), 2)
            ]
        return level[0]

    def test_matches_oracle(self):
        sk, _ = keys.keygen(b"m")
        for count in (0, 1, 2, 3, 5, 8):
            txs = [mk_tx(sk, kind=TxKind.Comment, payload=bytes([i]) * 32) for i in range(count)]
            assert tx_merkle_root(txs) == self._oracle([t.digest() for t in txs]), count

    def test_order_sensitive(self):
        sk, _ = keys.keygen(b"m2")
        txs = [mk_tx(sk, kind=TxKind.Comment, payload=bytes([i]) * 32) for i in range(3)]
        assert tx_merkle_root(txs) != tx_merkle_root(list(reversed(txs)))


class TestBlock:
    def test_roundtrip_and_producer_signature(self):
        sk, pk = keys.keygen(b"b")
        block = Block.produce(sk, 0, b"\x00" * 32, 1234, [mk_tx(sk)])
        back = Block.from_bytes(block.to_bytes())
        assert back == block
        assert back.producer_pk == pk

    def test_hash_covers_txs(self):
        sk, _ = keys.keygen(b"b2")
        a = Block.produce(sk, 0, b"\x00" * 32, 1234, [])
        b = Block.produce(sk, 0, b"\x00" * 32, 1234, [mk_tx(sk)])
        assert a.block_hash() != b.block_hash()


class TestGenesis:
    def test_json_roundtrip(self, tmp_path):
        c = make_consortium()
        p = str(tmp_path / "genesis.json")
        c.genesis.save(p)
        assert GenesisConfig.load(p) == c.genesis
        assert GenesisConfig.load(p).genesis_hash() == c.genesis.genesis_hash()

    def test_hash_is_deterministic(self):
        assert make_consortium().genesis.genesis_hash() == make_consortium().genesis.genesis_hash()


class TestLifecycle:
    def test_happy_path(self, consortium):
        c = consortium
        r = tiny_report()
        rid, _sigs = c.publish_flow(r, redactions={1: {2}})
        rs = c.state().reports[rid]
        assert rs.phase == "Published"
        assert rs.redacted == {"Location": [], "Picture": [2], "Description": []}
        assert rs.report_type == int(ReportType.Pothole)
        assert rs.routed_authority == c.authority_sk.public_bytes
        assert rs.location == (r.lat_udeg, r.lon_udeg)
        # full status ladder
        for status in (Status.Acknowledged, Status.InProgress, Status.Resolved):
            c.push(c.tx(c.authority_sk, TxKind.StatusUpdate, rid, status_payload(status, "")))
        assert c.state().reports[rid].phase == "Resolved"
        assert [s for _, s, _ in c.state().reports[rid].status_notes] == [
            "Acknowledged", "InProgress", "Resolved",
        ]

    def test_auditor_binding_matches_selection(self, consortium):
        c = consortium
        rid = c.announce(tiny_report(seed=1))
        c.commit(tiny_report(seed=1), rid)
        rs = c.state().reports[rid]
        beacon = c.network.head.block_hashes[rs.announce_height + 1]
        idx, pk = select_auditor(rid, beacon, c.state().registry(), rs.announce_height)
        assert (rs.auditor_index, rs.auditor_pk) == (idx, pk)

    def test_reject_is_terminal_audited(self, consortium):
        c = consortium
        r = tiny_report(seed=2)
        rid = c.announce(r)
        c.commit(r, rid)
        rs = c.state().reports[rid]
        aud_sk = next(sk for sk in c.auditor_sks if sk.public_bytes == rs.auditor_pk)
        c.push(c.tx(aud_sk, TxKind.AuditDecision, rid,
                    audit_reject_payload(DeletionReason.IllicitContent, "no")))
        rs = c.state().reports[rid]
        assert rs.phase == "Audited"
        assert rs.rejected_reason == int(DeletionReason.IllicitContent)
        # nothing else may touch it
        node = c.network.head
        bad = c.tx(c.authority_sk, TxKind.StatusUpdate, rid,
                   status_payload(Status.Acknowledged, ""))
        assert node.trial_apply(bad) == "WrongPhase"

    def test_deletion_logged(self, consortium):
        c = consortium
        r = tiny_report(seed=3)
        rid, _ = c.publish_flow(r)
        c.push(c.tx(c.authority_sk, TxKind.DeletionLog, rid,
                    deletion_payload(DeletionReason.NotActionable, "dup of other")))
        rs = c.state().reports[rid]
        assert rs.phase == "Deleted"
        assert rs.deleted_reason == int(DeletionReason.NotActionable)
        assert any(s == "Deleted" for _, s, _ in rs.status_notes)
        # but the announce and commit history is still on chain
        assert [k for _, k, _ in rs.history[:2]] == ["Announce", "Commit"]


class TestRejections:
    def test_duplicate_announce(self, consortium):
        c = consortium
        rid = c.announce(tiny_report(seed=4))
        dup = c.tx(c.citizen_sk, TxKind.Announce, rid, rid)
        assert c.network.head.trial_apply(dup) == "WrongPhase"

    def test_announce_payload_must_match_rid(self, consortium):
        c = consortium
        tx = c.tx(c.citizen_sk, TxKind.Announce, b"\x09" * 32, b"\x0a" * 32)
        assert c.network.head.trial_apply(tx) == "HashMismatch"

    def test_commit_from_wrong_key(self, consortium):
        c = consortium
        r = tiny_report(seed=5)
        rid = c.announce(r)
        stranger, _ = keys.keygen(b"stranger")
        from acrp.redactable import sign_redactable

        msgs = [r.location_message().with_context(rid),
                r.picture_message().with_context(rid),
                r.description_message().with_context(rid)]
        sigs = [sign_redactable(stranger, m) for m in msgs]
        payload = commit_payload(
            0, [s.commitment(m.field_tag) for s, m in zip(sigs, msgs)], b"\x00" * 32
        )
        tx = c.tx(stranger, TxKind.Commit, rid, payload)
        assert c.network.head.trial_apply(tx) == "WrongRole"

    def test_commit_wrong_auditor_index(self, consortium):
        c = consortium
        r = tiny_report(seed=6)
        rid = c.announce(r)
        state = c.state()
        rs = state.reports[rid]
        beacon = c.network.head.block_hashes[rs.announce_height + 1]
        idx, _ = select_auditor(rid, beacon, state.registry(), rs.announce_height)
        from acrp.redactable import sign_redactable

        msgs = [r.location_message().with_context(rid),
                r.picture_message().with_context(rid),
                r.description_message().with_context(rid)]
        sigs = [sign_redactable(c.citizen_sk, m) for m in msgs]
        wrong = (idx + 1) % len(state.registry().active_at(rs.announce_height))
        payload = commit_payload(
            wrong, [s.commitment(m.field_tag) for s, m in zip(sigs, msgs)], b"\x00" * 32
        )
        tx = c.tx(c.citizen_sk, TxKind.Commit, rid, payload)
        assert c.network.head.trial_apply(tx) == "AuditorMismatch"

    def test_audit_before_commit(self, consortium):
        c = consortium
        rid = c.announce(tiny_report(seed=7))
        tx = c.tx(c.auditor_sks[0], TxKind.AuditDecision, rid,
                  audit_reject_payload(DeletionReason.NotActionable, ""))
        assert c.network.head.trial_apply(tx) == "WrongPhase"

    def test_audit_by_wrong_auditor(self, consortium):
        c = consortium
        r = tiny_report(seed=8)
        rid = c.announce(r)
        c.commit(r, rid)
        rs = c.state().reports[rid]
        wrong_sk = next(sk for sk in c.auditor_sks if sk.public_bytes != rs.auditor_pk)
        tx = c.tx(wrong_sk, TxKind.AuditDecision, rid,
                  audit_reject_payload(DeletionReason.NotActionable, ""))
        assert c.network.head.trial_apply(tx) == "AuditorMismatch"

    def test_audit_with_substituted_artifact(self, consortium):
        c = consortium
        r = tiny_report(seed=9)
        rid = c.announce(r)
        c.commit(r, rid)
        rs = c.state().reports[rid]
        aud_sk = next(sk for sk in c.auditor_sks if sk.public_bytes == rs.auditor_pk)
        from acrp.redactable import redact, sign_redactable

        # auditor forges a decision over different signatures entirely
        fake = tiny_report(seed=10, desc="innocuous")
        msgs = [fake.location_message().with_context(rid),
                fake.picture_message().with_context(rid),
                fake.description_message().with_context(rid)]
        sigs = [sign_redactable(c.citizen_sk, m) for m in msgs]
        artifacts = [redact(m, s, set()) for m, s in zip(msgs, sigs)]
        tx = c.tx(aud_sk, TxKind.AuditDecision, rid,
                  audit_publish_payload(fake.report_type, artifacts))
        assert c.network.head.trial_apply(tx) == "HashMismatch"

    def test_audit_with_tampered_chunk(self, consortium):
        c = consortium
        r = tiny_report(seed=11)
        rid = c.announce(r)
        sigs = c.commit(r, rid)
        rs = c.state().reports[rid]
        aud_sk = next(sk for sk in c.auditor_sks if sk.public_bytes == rs.auditor_pk)
        from acrp.redactable import redact

        msgs = [r.location_message().with_context(rid),
                r.picture_message().with_context(rid),
                r.description_message().with_context(rid)]
        artifacts = [redact(m, s, set()) for m, s in zip(msgs, sigs)]
        slots = list(artifacts[2].slots)
        slots[0] = Present(b"XXXX ")
        bad = RedactedMessage(
            artifacts[2].field_tag, tuple(slots), artifacts[2].seed_cover,
            artifacts[2].root_signature, artifacts[2].n,
            artifacts[2].signer_pk, artifacts[2].context,
        )
        tx = c.tx(aud_sk, TxKind.AuditDecision, rid,
                  audit_publish_payload(r.report_type, [artifacts[0], artifacts[1], bad]))
        assert c.network.head.trial_apply(tx) == "InvalidRedaction"

    def test_status_order_enforced(self, consortium):
        c = consortium
        rid, _ = c.publish_flow(tiny_report(seed=12))
        skip = c.tx(c.authority_sk, TxKind.StatusUpdate, rid, status_payload(Status.Resolved, ""))
        assert c.network.head.trial_apply(skip) == "WrongPhase"

    def test_status_from_non_authority(self, consortium):
        c = consortium
        rid, _ = c.publish_flow(tiny_report(seed=13))
        tx = c.tx(c.citizen_sk, TxKind.StatusUpdate, rid,
                  status_payload(Status.Acknowledged, ""))
        assert c.network.head.trial_apply(tx) == "WrongRole"

    def test_delete_before_publish(self, consortium):
        c = consortium
        rid = c.announce(tiny_report(seed=14))
        tx = c.tx(c.authority_sk, TxKind.DeletionLog, rid,
                  deletion_payload(DeletionReason.NotActionable, ""))
        assert c.network.head.trial_apply(tx) == "WrongPhase"

    def test_unknown_report(self, consortium):
        c = consortium
        tx = c.tx(c.authority_sk, TxKind.StatusUpdate, b"\x55" * 32,
                  status_payload(Status.Acknowledged, ""))
        assert c.network.head.trial_apply(tx) == "UnknownReport"

    def test_bad_signature(self, consortium):
        c = consortium
        tx = mk_tx(c.citizen_sk, chain="other-chain")
        assert c.network.head.trial_apply(tx) == "BadSignature"

    def test_direct_publish_tx_rejected(self, consortium):
        c = consortium
        rid, _ = c.publish_flow(tiny_report(seed=15))
        tx = c.tx(c.member_sks[0], TxKind.Publish, rid, b"")
        assert c.network.head.trial_apply(tx) == "WrongRole"


class TestVotesAndMerge:
    def _voters(self, n):
        return [keys.keygen(b"voter-%d" % i)[0] for i in range(n)]

    def test_vote_counting_and_duplicates(self, consortium):
        c = consortium
        rid, _ = c.publish_flow(tiny_report(seed=16))
        voters = self._voters(3)
        for v in voters:
            c.push(c.tx(v, TxKind.Vote, rid, b""))
        assert c.state().reports[rid].votes == 3
        dup = c.tx(voters[0], TxKind.Vote, rid, b"")
        assert c.network.head.trial_apply(dup) == "DuplicateVote"

    def test_vote_before_publish(self, consortium):
        c = consortium
        rid = c.announce(tiny_report(seed=17))
        tx = c.tx(self._voters(1)[0], TxKind.Vote, rid, b"")
        assert c.network.head.trial_apply(tx) == "WrongPhase"

    def test_merge_moves_votes_without_double_count(self, consortium):
        c = consortium
        rid_a, _ = c.publish_flow(tiny_report(seed=18, desc="dup a"))
        rid_b, _ = c.publish_flow(tiny_report(seed=19, desc="dup b"))
        voters = self._voters(4)
        # voters 0,1 on a; voters 1,2,3 on b -- voter 1 overlaps
        c.push(c.tx(voters[0], TxKind.Vote, rid_a, b""))
        c.push(c.tx(voters[1], TxKind.Vote, rid_a, b""))
        for v in voters[1:]:
            c.push(c.tx(v, TxKind.Vote, rid_b, b""))
        c.push(c.tx(c.authority_sk, TxKind.Merge, rid_a, rid_b))
        a, b = c.state().reports[rid_a], c.state().reports[rid_b]
        assert a.phase == "Deleted" and a.merge_target == rid_b
        assert a.deleted_reason == int(DeletionReason.Duplicate)
        assert b.merged_from == [rid_a]
        assert set(b.voters) == {v.public_bytes for v in voters}
        # the overlapping voter must not be double counted going forward
        dup = c.tx(voters[1], TxKind.Vote, rid_a, b"")
        assert c.network.head.trial_apply(dup) == "DuplicateVote"

    def test_vote_on_merged_report_redirects(self, consortium):
        c = consortium
        rid_a, _ = c.publish_flow(tiny_report(seed=20, desc="m a"))
        rid_b, _ = c.publish_flow(tiny_report(seed=21, desc="m b"))
        c.push(c.tx(c.authority_sk, TxKind.Merge, rid_a, rid_b))
        v = self._voters(1)[0]
        c.push(c.tx(v, TxKind.Vote, rid_a, b""))
        assert c.state().reports[rid_b].votes == 1
        assert c.state().reports[rid_a].votes == 0

    def test_bad_merge_targets(self, consortium):
        c = consortium
        rid, _ = c.publish_flow(tiny_report(seed=22))
        self_merge = c.tx(c.authority_sk, TxKind.Merge, rid, rid)
        assert c.network.head.trial_apply(self_merge) == "BadMergeTarget"
        missing = c.tx(c.authority_sk, TxKind.Merge, rid, b"\x66" * 32)
        assert c.network.head.trial_apply(missing) == "BadMergeTarget"


class TestTimeouts:
    def test_forced_publish_after_timeout(self):
        c = make_consortium(audit_timeout=3)
        r = tiny_report(seed=23)
        rid = c.announce(r)
        c.commit(r, rid)
        commit_height = c.state().reports[rid].commit_height
        # elapsed == timeout is not enough; strictly greater is required
        while c.state().height < commit_height + 3:
            c.network.step(0)
        assert c.state().reports[rid].phase == "Committed"
        c.network.step(0)
        rs = c.state().reports[rid]
        assert rs.phase == "Published"
        assert rs.forced and rs.manual_routing
        assert any(
            e["event"] == "ForcedPublish" and e["report"] == rid.hex()
            for e in c.state().events
        )

    def test_audited_report_not_forced(self):
        c = make_consortium(audit_timeout=2)
        rid, _ = c.publish_flow(tiny_report(seed=24))
        for _ in range(5):
            c.network.step(0)
        assert not c.state().reports[rid].forced


class TestChainValidation:
    def _build_chain(self):
        c = make_consortium()
        for seed in range(3):
            c.publish_flow(tiny_report(seed=seed, desc=f"chain {seed}"))
        return c

    def test_replay_reproduces_state_on_all_nodes(self):
        c = self._build_chain()
        blobs = {node.state.serialize() for node in c.network.nodes}
        assert len(blobs) == 1
        state, err = validate_chain(c.network.head.blocks, c.genesis)
        assert err is None
        assert state.serialize() == c.state().serialize()

    def test_single_byte_mutation_detected(self):
        c = self._build_chain()
        blocks = c.network.head.blocks
        target = 4
        raw = bytearray(blocks[target].to_bytes())
        raw[len(raw) // 2] ^= 0x01
        mutated = list(blocks)
        try:
            mutated[target] = Block.from_bytes(bytes(raw))
        except Exception:
            return  # mutation broke framing entirely, also a detection
        state, err = validate_chain(mutated, c.genesis)
        assert state is None
        assert err[0] == target

    def test_wrong_producer_detected(self):
        c = self._build_chain()
        blocks = list(c.network.head.blocks)
        h = len(blocks)
        wrong_sk = next(
            sk for sk in c.member_sks if sk.public_bytes != c.genesis.members[h % len(c.genesis.members)]
        )
        prev = blocks[-1].block_hash()
        blocks.append(Block.produce(wrong_sk, h, prev, 0, []))
        state, err = validate_chain(blocks, c.genesis)
        assert state is None and err[0] == h and "turn" in err[1]


class TestRegistration:
    def test_register_auditor_activates_next_height(self, consortium):
        c = consortium
        new_pk = keys.keygen(b"late-auditor")[1]
        c.push(c.tx(c.member_sks[0], TxKind.RegisterAuditor, None, new_pk))
        reg = c.state().registry()
        h = c.state().height
        assert new_pk in reg.active_at(h)
        assert new_pk not in reg.active_at(h - 1)

    def test_register_auditor_requires_member(self, consortium):
        c = consortium
        tx = c.tx(c.citizen_sk, TxKind.RegisterAuditor, None, b"\x01" * 32)
        assert c.network.head.trial_apply(tx) == "WrongRole"

    def test_register_authority_routes_future_reports(self, consortium):
        c = consortium
        pk = keys.keygen(b"pothole-dept")[1]
        payload = register_authority_payload(
            ReportType.Pothole, (50_000_000, 51_000_000, 6_000_000, 7_000_000), pk
        )
        c.push(c.tx(c.member_sks[0], TxKind.RegisterAuthority, None, payload))
        rid, _ = c.publish_flow(tiny_report(seed=25, lat=50_775_300, lon=6_083_900))
        # genesis catch-all is listed first, so it still wins first-match
        assert c.state().reports[rid].routed_authority == c.authority_sk.public_bytes
        entries = c.state().directory().entries
        assert entries[-1].public_key == pk


class TestDispute:
    def _published(self, c, seed=30, redactions=None):
        r = tiny_report(seed=seed, desc="dispute target")
        rid, sigs = c.publish_flow(r, redactions=redactions or {1: {2}, 2: {0}})
        rs = c.state().reports[rid]
        published = [RedactedMessage.from_bytes(a) for a in rs.artifacts]
        from acrp.encoding import Reader

        commitments = [SignatureCommitment.read_from(Reader(cb)) for cb in rs.commitments]
        return r, rid, sigs, commitments, published

    def test_consistent_with_exact_diff(self, consortium):
        r, rid, sigs, commitments, published = self._published(consortium)
        verdict, diff = verify_dispute(r, sigs, rid, commitments, published)
        assert verdict == VERDICT_CONSISTENT
        assert diff == {"Location": [], "Picture": [2], "Description": [0]}

    def test_altered_content(self, consortium):
        r, rid, sigs, commitments, published = self._published(consortium, seed=31)
        tampered = list(published)
        slots = list(tampered[2].slots)
        present_idx = next(i for i, s in enumerate(slots) if isinstance(s, Present))
        slots[present_idx] = Present(b"doctored ")
        tampered[2] = RedactedMessage(
            tampered[2].field_tag, tuple(slots), tampered[2].seed_cover,
            tampered[2].root_signature, tampered[2].n,
            tampered[2].signer_pk, tampered[2].context,
        )
        verdict, _ = verify_dispute(r, sigs, rid, commitments, tampered)
        assert verdict == VERDICT_ALTERED

    def test_hash_mismatch_on_wrong_original(self, consortium):
        r, rid, sigs, commitments, published = self._published(consortium, seed=32)
        other = tiny_report(seed=33, desc="different report")
        verdict, _ = verify_dispute(other, sigs, rid, commitments, published)
        assert verdict == VERDICT_HASH_MISMATCH

    def test_blob_roundtrip(self, consortium):
        c = consortium
        r = tiny_report(seed=34)
        rid = c.announce(r)
        sigs = c.commit(r, rid)
        blob = pack_original_blob(r, sigs)
        back_r, back_sigs = unpack_original_blob(blob)
        assert back_r == r and back_sigs == sigs
        assert hashlib.sha256(blob).digest() == c.state().reports[rid].storage_key

    def test_dispute_evidence_marks_report(self, consortium):
        c = consortium
        rid, _ = c.publish_flow(tiny_report(seed=35))
        key = b"\x44" * 32
        c.push(c.tx(c.citizen_sk, TxKind.DisputeEvidence, rid, key))
        rs = c.state().reports[rid]
        assert rs.disputed and rs.dispute_evidence == [key]
        stranger = keys.keygen(b"not-citizen")[0]
        tx = c.tx(stranger, TxKind.DisputeEvidence, rid, key)
        assert c.network.head.trial_apply(tx) == "WrongRole"


class TestPayloadParsers:
    def test_commit_payload_roundtrip(self, consortium):
        c = consortium
        r = tiny_report(seed=36)
        rid = c.announce(r)
        sigs = c.commit(r, rid)
        rs = c.state().reports[rid]
        _, _, tx = next(
            (h for h in rs.history if h[1] == "Commit")
        )
        height, txo = c.network.head.find_tx(bytes.fromhex(tx))
        idx, commitments, storage_key = parse_commit_payload(txo.payload)
        assert idx == rs.auditor_index
        assert storage_key == rs.storage_key
        assert [cm.to_bytes() for cm in commitments] == rs.commitments
