"""Simulated consortium ledger: typed transactions, round-robin blocks, and
the deterministic report-lifecycle state machine replayed from genesis.

The chain records only hashes, signature commitments and redacted artifacts;
full report content lives in off-chain storage.  Replaying the same block
sequence always yields a byte-identical serialized state, which is how
immutability and auditor-assignment claims are checked.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from . import keys
from .chunking import parse_location_chunk
from .encoding import DecodeError, Reader, i32, lp, u8, u32, u64
from .redactable import (
    ChunkedMessage,
    FieldTag,
    Present,
    RedactableSignature,
    Redacted,
    RedactedMessage,
    SignatureCommitment,
    verify_full,
    verify_redacted,
)
from .report import (
    AuditorRegistry,
    AuthorityDirectory,
    AuthorityEntry,
    NoResponsibleAuthority,
    Report,
    ReportType,
    report_id,
    route,
    select_auditor,
)

MAX_TXS_PER_BLOCK = 1000
DEFAULT_AUDIT_TIMEOUT = 20

FIELD_ORDER = (FieldTag.Location, FieldTag.Picture, FieldTag.Description)


class TxKind(IntEnum):
    Announce = 0
    Commit = 1
    AuditDecision = 2
    Publish = 3
    StatusUpdate = 4
    DeletionLog = 5
    Vote = 6
    Comment = 7
    Merge = 8
    DisputeEvidence = 9
    RegisterAuditor = 10
    RegisterAuthority = 11


class Status(IntEnum):
    Acknowledged = 0
    InProgress = 1
    Resolved = 2


class DeletionReason(IntEnum):
    NotActionable = 0
    IllicitContent = 1
    Duplicate = 2


class Rejection(str):
    pass


WRONG_PHASE = Rejection("WrongPhase")
WRONG_ROLE = Rejection("WrongRole")
HASH_MISMATCH = Rejection("HashMismatch")
BAD_SIGNATURE = Rejection("BadSignature")
UNKNOWN_REPORT = Rejection("UnknownReport")
AUDITOR_MISMATCH = Rejection("AuditorMismatch")
INVALID_REDACTION = Rejection("InvalidRedaction")
DUPLICATE_VOTE = Rejection("DuplicateVote")
BAD_MERGE_TARGET = Rejection("BadMergeTarget")


class TimeoutNotReached(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# transactions


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    report_id: Optional[bytes]
    payload: bytes
    sender_pk: bytes
    signature: bytes

    @staticmethod
    def preimage(kind: TxKind, rid: Optional[bytes], payload: bytes, chain_id: str) -> bytes:
        return u8(kind) + (rid or b"") + lp(payload) + chain_id.encode("utf-8")

    @classmethod
    def build(
        cls,
        sk: keys.SigningKey,
        kind: TxKind,
        rid: Optional[bytes],
        payload: bytes,
        chain_id: str,
    ) -> "Transaction":
        sig = sk.sign(cls.preimage(kind, rid, payload, chain_id))
        return cls(kind, rid, payload, sk.public_bytes, sig)

    def to_bytes(self) -> bytes:
        rid = self.report_id or b""
        return (
            u8(self.kind)
            + u8(1 if self.report_id else 0)
            + rid
            + lp(self.payload)
            + lp(self.sender_pk)
            + lp(self.signature)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Transaction":
        r = Reader(data)
        kind = TxKind(r.u8())
        has_rid = r.u8()
        rid = r.take(32) if has_rid == 1 else None
        payload = r.lp()
        sender_pk = r.lp()
        signature = r.lp()
        r.expect_done()
        return cls(kind, rid, payload, sender_pk, signature)

    def digest(self) -> bytes:
        return hashlib.sha256(self.to_bytes()).digest()

    def check_signature(self, chain_id: str) -> bool:
        return keys.verify(
            self.sender_pk,
            self.signature,
            self.preimage(self.kind, self.report_id, self.payload, chain_id),
        )


# payload builders / parsers, shared by node, gateway and CLI


def commit_payload(
    auditor_index: int, commitments: Sequence[SignatureCommitment], storage_key: bytes
) -> bytes:
    assert len(commitments) == 3 and len(storage_key) == 32
    return u32(auditor_index) + b"".join(c.to_bytes() for c in commitments) + storage_key


def parse_commit_payload(payload: bytes) -> Tuple[int, List[SignatureCommitment], bytes]:
    r = Reader(payload)
    index = r.u32()
    commitments = [SignatureCommitment.read_from(r) for _ in range(3)]
    storage_key = r.take(32)
    r.expect_done()
    return index, commitments, storage_key


def audit_publish_payload(report_type: ReportType, artifacts: Sequence[RedactedMessage]) -> bytes:
    assert len(artifacts) == 3
    return u8(0) + u8(report_type) + b"".join(lp(a.to_bytes()) for a in artifacts)


def audit_reject_payload(reason: DeletionReason, note: str) -> bytes:
    return u8(1) + u8(reason) + lp(note.encode("utf-8"))


def status_payload(status: Status, note: str) -> bytes:
    return u8(status) + lp(note.encode("utf-8"))


def deletion_payload(reason: DeletionReason, note: str) -> bytes:
    return u8(reason) + lp(note.encode("utf-8"))


def register_authority_payload(
    report_type: Optional[ReportType], bbox: Tuple[int, int, int, int], pk: bytes
) -> bytes:
    t = 255 if report_type is None else int(report_type)
    return u8(t) + b"".join(i32(v) for v in bbox) + pk


# ---------------------------------------------------------------------------
# blocks


def tx_merkle_root(txs: Sequence[Transaction]) -> bytes:
    level = [tx.digest() for tx in txs]
    if not level:
        return hashlib.sha256(b"acrp-empty-block").digest()
    while len(level) > 1:
        if len(level) % 2 == 1:
            level.append(level[-1])
        level = [
            hashlib.sha256(b"\x02" + level[i] + level[i + 1]).digest()
            for i in range(0, len(level), 2)
        ]
    return level[0]


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    producer_pk: bytes
    timestamp: int
    txs: Tuple[Transaction, ...]
    producer_signature: bytes

    def header_bytes(self) -> bytes:
        return u64(self.height) + self.prev_hash + lp(self.producer_pk) + u64(self.timestamp)

    def block_hash(self) -> bytes:
        return hashlib.sha256(self.header_bytes() + tx_merkle_root(self.txs)).digest()

    def to_bytes(self) -> bytes:
        out = [self.header_bytes(), u32(len(self.txs))]
        out.extend(lp(tx.to_bytes()) for tx in self.txs)
        out.append(lp(self.producer_signature))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Block":
        r = Reader(data)
        height = r.u64()
        prev_hash = r.take(32)
        producer_pk = r.lp()
        timestamp = r.u64()
        txs = tuple(Transaction.from_bytes(r.lp()) for _ in range(r.u32()))
        producer_signature = r.lp()
        r.expect_done()
        return cls(height, prev_hash, producer_pk, timestamp, txs, producer_signature)

    @classmethod
    def produce(
        cls,
        sk: keys.SigningKey,
        height: int,
        prev_hash: bytes,
        timestamp: int,
        txs: Sequence[Transaction],
    ) -> "Block":
        unsigned = cls(height, prev_hash, sk.public_bytes, timestamp, tuple(txs), b"")
        return cls(
            height, prev_hash, sk.public_bytes, timestamp, tuple(txs),
            sk.sign(unsigned.block_hash()),
        )


# ---------------------------------------------------------------------------
# genesis


@dataclass(frozen=True)
class GenesisConfig:
    chain_id: str
    members: Tuple[bytes, ...]
    auditors: Tuple[bytes, ...]
    authorities: Tuple[AuthorityEntry, ...]
    audit_timeout: int = DEFAULT_AUDIT_TIMEOUT

    def to_json_dict(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "members": [pk.hex() for pk in self.members],
            "auditors": [pk.hex() for pk in self.auditors],
            "authorities": [
                {
                    "type": None if e.report_type is None else int(e.report_type),
                    "bbox": list(e.bbox),
                    "pk": e.public_key.hex(),
                }
                for e in self.authorities
            ],
            "audit_timeout": self.audit_timeout,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "GenesisConfig":
        return cls(
            chain_id=obj["chain_id"],
            members=tuple(bytes.fromhex(pk) for pk in obj["members"]),
            auditors=tuple(bytes.fromhex(pk) for pk in obj["auditors"]),
            authorities=tuple(
                AuthorityEntry(
                    None if e["type"] is None else ReportType(e["type"]),
                    tuple(e["bbox"]),
                    bytes.fromhex(e["pk"]),
                )
                for e in obj["authorities"]
            ),
            audit_timeout=obj.get("audit_timeout", DEFAULT_AUDIT_TIMEOUT),
        )

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":")).encode()

    def genesis_hash(self) -> bytes:
        return hashlib.sha256(self.canonical_bytes()).digest()

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path: str) -> "GenesisConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json_dict(json.load(f))


# ---------------------------------------------------------------------------
# lifecycle state

PHASES = (
    "Announced",
    "Committed",
    "Audited",
    "Published",
    "Acknowledged",
    "InProgress",
    "Resolved",
    "Deleted",
)
LIVE_PUBLISHED = ("Published", "Acknowledged", "InProgress")
STATUS_TO_PHASE = {
    Status.Acknowledged: "Acknowledged",
    Status.InProgress: "InProgress",
    Status.Resolved: "Resolved",
}
STATUS_PRECONDITION = {
    Status.Acknowledged: "Published",
    Status.InProgress: "Acknowledged",
    Status.Resolved: "InProgress",
}


@dataclass
class ReportState:
    phase: str
    announce_height: int
    citizen_pk: bytes
    history: List[Tuple[int, str, str]] = field(default_factory=list)
    commit_height: Optional[int] = None
    auditor_index: Optional[int] = None
    auditor_pk: Optional[bytes] = None
    commitments: Optional[List[bytes]] = None  # serialized SignatureCommitment x3
    storage_key: Optional[bytes] = None
    report_type: Optional[int] = None
    location: Optional[Tuple[int, int]] = None
    artifacts: Optional[List[bytes]] = None  # serialized RedactedMessage x3
    redacted: Optional[Dict[str, List[int]]] = None
    rejected_reason: Optional[int] = None
    forced: bool = False
    routed_authority: Optional[bytes] = None
    manual_routing: bool = False
    status_notes: List[Tuple[int, str, str]] = field(default_factory=list)
    votes: int = 0
    voters: set = field(default_factory=set)
    merge_target: Optional[bytes] = None
    merged_from: List[bytes] = field(default_factory=list)
    deleted_reason: Optional[int] = None
    disputed: bool = False
    dispute_evidence: List[bytes] = field(default_factory=list)
    comments: List[bytes] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "announce_height": self.announce_height,
            "citizen_pk": self.citizen_pk.hex(),
            "history": [[h, k, t] for h, k, t in self.history],
            "commit_height": self.commit_height,
            "auditor_index": self.auditor_index,
            "auditor_pk": self.auditor_pk.hex() if self.auditor_pk else None,
            "commitments": [c.hex() for c in self.commitments] if self.commitments else None,
            "storage_key": self.storage_key.hex() if self.storage_key else None,
            "report_type": self.report_type,
            "location": list(self.location) if self.location else None,
            "artifacts": [a.hex() for a in self.artifacts] if self.artifacts else None,
            "redacted": self.redacted,
            "rejected_reason": self.rejected_reason,
            "forced": self.forced,
            "routed_authority": self.routed_authority.hex() if self.routed_authority else None,
            "manual_routing": self.manual_routing,
            "status_notes": [[h, s, n] for h, s, n in self.status_notes],
            "votes": self.votes,
            "voters": sorted(pk.hex() for pk in self.voters),
            "merge_target": self.merge_target.hex() if self.merge_target else None,
            "merged_from": [m.hex() for m in self.merged_from],
            "deleted_reason": self.deleted_reason,
            "disputed": self.disputed,
            "dispute_evidence": [k.hex() for k in self.dispute_evidence],
            "comments": [c.hex() for c in self.comments],
        }


@dataclass
class LedgerState:
    """Pure fold of apply_tx over all blocks from genesis."""

    genesis: GenesisConfig
    height: int = -1  # height of the last applied block
    reports: Dict[bytes, ReportState] = field(default_factory=dict)
    extra_auditors: List[Tuple[bytes, int]] = field(default_factory=list)
    extra_authorities: List[Tuple[AuthorityEntry, int]] = field(default_factory=list)
    events: List[dict] = field(default_factory=list)

    def registry(self) -> AuditorRegistry:
        base = [(pk, 0) for pk in self.genesis.auditors]
        return AuditorRegistry(tuple(base + self.extra_auditors))

    def directory(self) -> AuthorityDirectory:
        extra = [e for e, _ in self.extra_authorities]
        return AuthorityDirectory(tuple(list(self.genesis.authorities) + extra))

    def authority_pks(self) -> set:
        return {e.public_key for e in self.directory().entries}

    def clone(self) -> "LedgerState":
        return copy.deepcopy(self)

    def to_dict(self) -> dict:
        return {
            "chain_id": self.genesis.chain_id,
            "height": self.height,
            "reports": {rid.hex(): rs.to_dict() for rid, rs in sorted(self.reports.items())},
            "extra_auditors": [[pk.hex(), h] for pk, h in self.extra_auditors],
            "extra_authorities": [
                [
                    None if e.report_type is None else int(e.report_type),
                    list(e.bbox),
                    e.public_key.hex(),
                    h,
                ]
                for e, h in self.extra_authorities
            ],
            "events": self.events,
        }

    def serialize(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class ApplyContext:
    """Per-block context: the containing height and hashes of prior blocks."""

    height: int
    block_hashes: Sequence[bytes]  # block_hashes[i] = hash of block at height i

    def block_hash(self, height: int) -> Optional[bytes]:
        if 0 <= height < len(self.block_hashes):
            return self.block_hashes[height]
        return None


def _record(state: LedgerState, rid: bytes, ctx: ApplyContext, tx: Transaction) -> None:
    state.reports[rid].history.append((ctx.height, tx.kind.name, tx.digest().hex()))


def _routed_or_any_authority(state: LedgerState, rs: ReportState, sender: bytes):
    if rs.routed_authority is not None:
        return sender == rs.routed_authority
    return sender in state.authority_pks()


def _resolve_merge(state: LedgerState, rid: bytes) -> bytes:
    seen = set()
    while rid in state.reports and state.reports[rid].merge_target and rid not in seen:
        seen.add(rid)
        rid = state.reports[rid].merge_target
    return rid


def apply_tx(
    state: LedgerState, tx: Transaction, ctx: ApplyContext
) -> Optional[Rejection]:
    """Apply one transaction to state in place; returns a rejection code or None.

    Role and phase rules mirror the report lifecycle: only the announcing key
    may commit, only the selected auditor may decide, only the routed
    authority may update status or log deletions, and publication is an
    automatic effect of an accepted audit decision.
    """
    if not tx.check_signature(state.genesis.chain_id):
        return BAD_SIGNATURE
    handler = _HANDLERS.get(tx.kind)
    if handler is None:
        return WRONG_ROLE
    return handler(state, tx, ctx)


def _apply_announce(state, tx, ctx):
    rid = tx.report_id
    if rid is None or len(tx.payload) != 32 or tx.payload != rid:
        return HASH_MISMATCH
    if rid in state.reports:
        return WRONG_PHASE
    state.reports[rid] = ReportState(
        phase="Announced", announce_height=ctx.height, citizen_pk=tx.sender_pk
    )
    _record(state, rid, ctx, tx)
    return None


def _apply_commit(state, tx, ctx):
    rid = tx.report_id
    if rid is None or rid not in state.reports:
        return UNKNOWN_REPORT
    rs = state.reports[rid]
    if rs.phase != "Announced":
        return WRONG_PHASE
    if tx.sender_pk != rs.citizen_pk:
        return WRONG_ROLE
    try:
        index, commitments, storage_key = parse_commit_payload(tx.payload)
    except (DecodeError, ValueError):
        return HASH_MISMATCH
    if tuple(c.field_tag for c in commitments) != FIELD_ORDER:
        return HASH_MISMATCH
    if any(c.signer_pk != tx.sender_pk for c in commitments):
        return WRONG_ROLE
    beacon = ctx.block_hash(rs.announce_height + 1)
    if beacon is None:
        return AUDITOR_MISMATCH  # beacon block not yet produced
    try:
        expected_index, expected_pk = select_auditor(
            rid, beacon, state.registry(), height=rs.announce_height
        )
    except Exception:
        return AUDITOR_MISMATCH
    if index != expected_index:
        return AUDITOR_MISMATCH
    rs.phase = "Committed"
    rs.commit_height = ctx.height
    rs.auditor_index = index
    rs.auditor_pk = expected_pk
    rs.commitments = [c.to_bytes() for c in commitments]
    rs.storage_key = storage_key
    _record(state, rid, ctx, tx)
    return None


def _apply_audit_decision(state, tx, ctx):
    rid = tx.report_id
    if rid is None or rid not in state.reports:
        return UNKNOWN_REPORT
    rs = state.reports[rid]
    if rs.phase != "Committed":
        return WRONG_PHASE
    if tx.sender_pk != rs.auditor_pk:
        return AUDITOR_MISMATCH
    r = Reader(tx.payload)
    try:
        decision = r.u8()
        if decision == 1:
            reason = DeletionReason(r.u8())
            note = r.lp().decode("utf-8")
            r.expect_done()
            rs.phase = "Audited"
            rs.rejected_reason = int(reason)
            rs.status_notes.append((ctx.height, "Rejected", note))
            _record(state, rid, ctx, tx)
            return None
        if decision != 0:
            return INVALID_REDACTION
        rtype = ReportType(r.u8())
        artifacts = [RedactedMessage.from_bytes(r.lp()) for _ in range(3)]
        r.expect_done()
    except (DecodeError, ValueError):
        return INVALID_REDACTION
    if tuple(a.field_tag for a in artifacts) != FIELD_ORDER:
        return INVALID_REDACTION
    if any(a.context != rid for a in artifacts):
        return INVALID_REDACTION
    if not all(verify_redacted(a) for a in artifacts):
        return INVALID_REDACTION
    commitments = [
        SignatureCommitment.read_from(Reader(c)) for c in rs.commitments
    ]
    for a, c in zip(artifacts, commitments):
        if a.root_signature != c.root_signature or a.signer_pk != c.signer_pk or a.n != c.n:
            return HASH_MISMATCH
    rs.phase = "Published"
    rs.report_type = int(rtype)
    rs.artifacts = [a.to_bytes() for a in artifacts]
    rs.redacted = {
        a.field_tag.name: list(a.redacted_indices()) for a in artifacts
    }
    loc_slot = artifacts[0].slots[0]
    if isinstance(loc_slot, Present):
        try:
            rs.location = parse_location_chunk(loc_slot.chunk)
        except (DecodeError, ValueError):
            rs.location = None
    if rs.location is not None:
        try:
            rs.routed_authority = route(rtype, rs.location[0], rs.location[1], state.directory())
        except NoResponsibleAuthority:
            rs.manual_routing = True
    else:
        rs.manual_routing = True
    _record(state, rid, ctx, tx)
    return None


def _apply_status_update(state, tx, ctx):
    rid = tx.report_id
    if rid is None or rid not in state.reports:
        return UNKNOWN_REPORT
    rs = state.reports[rid]
    r = Reader(tx.payload)
    try:
        status = Status(r.u8())
        note = r.lp().decode("utf-8")
        r.expect_done()
    except (DecodeError, ValueError):
        return WRONG_PHASE
    if rs.phase != STATUS_PRECONDITION[status]:
        return WRONG_PHASE
    if not _routed_or_any_authority(state, rs, tx.sender_pk):
        return WRONG_ROLE
    rs.phase = STATUS_TO_PHASE[status]
    rs.status_notes.append((ctx.height, status.name, note))
    _record(state, rid, ctx, tx)
    return None


def _apply_deletion_log(state, tx, ctx):
    rid = tx.report_id
    if rid is None or rid not in state.reports:
        return UNKNOWN_REPORT
    rs = state.reports[rid]
    if rs.phase not in LIVE_PUBLISHED:
        return WRONG_PHASE
    r = Reader(tx.payload)
    try:
        reason = DeletionReason(r.u8())
        note = r.lp().decode("utf-8")
        r.expect_done()
    except (DecodeError, ValueError):
        return WRONG_PHASE
    if not _routed_or_any_authority(state, rs, tx.sender_pk):
        return WRONG_ROLE
    rs.phase = "Deleted"
    rs.deleted_reason = int(reason)
    rs.status_notes.append((ctx.height, "Deleted", note))
    _record(state, rid, ctx, tx)
    return None


def _apply_vote(state, tx, ctx):
    rid = tx.report_id
    if rid is None or rid not in state.reports:
        return UNKNOWN_REPORT
    target = _resolve_merge(state, rid)
    rs = state.reports[target]
    if rs.phase not in LIVE_PUBLISHED:
        return WRONG_PHASE
    if tx.sender_pk in rs.voters:
        return DUPLICATE_VOTE
    rs.votes += 1
    rs.voters.add(tx.sender_pk)
    _record(state, target, ctx, tx)
    return None


def _apply_comment(state, tx, ctx):
    rid = tx.report_id
    if rid is None or rid not in state.reports:
        return UNKNOWN_REPORT
    target = _resolve_merge(state, rid)
    rs = state.reports[target]
    if rs.phase not in LIVE_PUBLISHED:
        return WRONG_PHASE
    if len(tx.payload) != 32:
        return HASH_MISMATCH
    rs.comments.append(tx.payload)
    _record(state, target, ctx, tx)
    return None


def _apply_merge(state, tx, ctx):
    rid = tx.report_id
    if rid is None or rid not in state.reports:
        return UNKNOWN_REPORT
    rs = state.reports[rid]
    if rs.phase not in LIVE_PUBLISHED:
        return WRONG_PHASE
    if len(tx.payload) != 32:
        return BAD_MERGE_TARGET
    target_id = tx.payload
    if target_id == rid or target_id not in state.reports:
        return BAD_MERGE_TARGET
    target = state.reports[target_id]
    if target.phase not in LIVE_PUBLISHED:
        return BAD_MERGE_TARGET
    if not _routed_or_any_authority(state, rs, tx.sender_pk):
        return WRONG_ROLE
    # one vote per key across both reports: overlapping voters count once
    target.voters |= rs.voters
    target.votes = len(target.voters)
    target.merged_from.append(rid)
    rs.phase = "Deleted"
    rs.deleted_reason = int(DeletionReason.Duplicate)
    rs.merge_target = target_id
    _record(state, rid, ctx, tx)
    return None


def _apply_dispute_evidence(state, tx, ctx):
    rid = tx.report_id
    if rid is None or rid not in state.reports:
        return UNKNOWN_REPORT
    rs = state.reports[rid]
    if rs.phase not in LIVE_PUBLISHED + ("Resolved",):
        return WRONG_PHASE
    if tx.sender_pk != rs.citizen_pk:
        return WRONG_ROLE
    if len(tx.payload) != 32:
        return HASH_MISMATCH
    rs.disputed = True
    rs.dispute_evidence.append(tx.payload)
    _record(state, rid, ctx, tx)
    return None


def _apply_register_auditor(state, tx, ctx):
    if tx.sender_pk not in state.genesis.members:
        return WRONG_ROLE
    if len(tx.payload) != 32:
        return HASH_MISMATCH
    pk = tx.payload
    existing = set(state.genesis.auditors) | {p for p, _ in state.extra_auditors}
    if pk in existing:
        return WRONG_PHASE
    state.extra_auditors.append((pk, ctx.height))
    return None


def _apply_register_authority(state, tx, ctx):
    if tx.sender_pk not in state.genesis.members:
        return WRONG_ROLE
    r = Reader(tx.payload)
    try:
        t = r.u8()
        bbox = (r.i32(), r.i32(), r.i32(), r.i32())
        pk = r.take(32)
        r.expect_done()
        rtype = None if t == 255 else ReportType(t)
    except (DecodeError, ValueError):
        return HASH_MISMATCH
    state.extra_authorities.append((AuthorityEntry(rtype, bbox, pk), ctx.height))
    return None


def _apply_publish(state, tx, ctx):
    # publication is an automatic state effect of an accepted audit decision
    return WRONG_ROLE


_HANDLERS: Dict[TxKind, Callable] = {
    TxKind.Announce: _apply_announce,
    TxKind.Commit: _apply_commit,
    TxKind.AuditDecision: _apply_audit_decision,
    TxKind.Publish: _apply_publish,
    TxKind.StatusUpdate: _apply_status_update,
    TxKind.DeletionLog: _apply_deletion_log,
    TxKind.Vote: _apply_vote,
    TxKind.Comment: _apply_comment,
    TxKind.Merge: _apply_merge,
    TxKind.DisputeEvidence: _apply_dispute_evidence,
    TxKind.RegisterAuditor: _apply_register_auditor,
    TxKind.RegisterAuthority: _apply_register_authority,
}


def force_publish(state: LedgerState, rid: bytes, ctx: ApplyContext) -> None:
    """Publish a report unredacted after the auditor stalled past the timeout.

    Keeps the accountability guarantee alive when the selected auditor never
    files a decision.  Raises TimeoutNotReached before commit_height +
    audit_timeout blocks have elapsed.
    """
    rs = state.reports.get(rid)
    if rs is None or rs.phase != "Committed":
        raise TimeoutNotReached(f"report not awaiting audit: {rid.hex()}")
    if ctx.height - rs.commit_height <= state.genesis.audit_timeout:
        raise TimeoutNotReached(
            f"only {ctx.height - rs.commit_height} blocks since commit"
        )
    rs.phase = "Published"
    rs.forced = True
    rs.manual_routing = True
    state.events.append(
        {"height": ctx.height, "event": "ForcedPublish", "report": rid.hex()}
    )


def apply_timeouts(state: LedgerState, ctx: ApplyContext) -> None:
    """Deterministically force-publish every report past its audit timeout."""
    for rid in sorted(state.reports):
        rs = state.reports[rid]
        if (
            rs.phase == "Committed"
            and ctx.height - rs.commit_height > state.genesis.audit_timeout
        ):
            force_publish(state, rid, ctx)


# ---------------------------------------------------------------------------
# chain validation / replay


@dataclass
class ChainInvalid(Exception):
    height: int
    reason: str

    def __str__(self):
        return f"invalid at height {self.height}: {self.reason}"


def apply_block(
    state: LedgerState,
    block: Block,
    block_hashes: List[bytes],
    strict: bool = True,
) -> List[Tuple[Transaction, Rejection]]:
    """Validate and apply one block; mutates state and appends the block hash.

    In strict mode any structural defect or rejected transaction raises
    ChainInvalid (replay of a chain produced by honest nodes never rejects).
    Returns the rejection list in non-strict mode.
    """
    members = state.genesis.members
    expected_height = state.height + 1
    if block.height != expected_height:
        raise ChainInvalid(block.height, f"expected height {expected_height}")
    expected_prev = (
        state.genesis.genesis_hash() if expected_height == 0 else block_hashes[-1]
    )
    if block.prev_hash != expected_prev:
        raise ChainInvalid(block.height, "prev_hash does not chain")
    if block.producer_pk != members[block.height % len(members)]:
        raise ChainInvalid(block.height, "not the producer's turn")
    if not keys.verify(block.producer_pk, block.producer_signature, block.block_hash()):
        raise ChainInvalid(block.height, "bad producer signature")
    if len(block.txs) > MAX_TXS_PER_BLOCK:
        raise ChainInvalid(block.height, "too many transactions")
    ctx = ApplyContext(block.height, tuple(block_hashes))
    rejections = []
    for i, tx in enumerate(block.txs):
        code = apply_tx(state, tx, ctx)
        if code is not None:
            if strict:
                raise ChainInvalid(block.height, f"tx {i} rejected: {code}")
            rejections.append((tx, code))
    state.height = block.height
    block_hashes.append(block.block_hash())
    apply_timeouts(state, ctx)
    return rejections


def validate_chain(
    blocks: Sequence[Block], genesis: GenesisConfig
) -> Tuple[Optional[LedgerState], Optional[Tuple[int, str]]]:
    """Full replay from genesis.

    Returns (state, None) for a valid chain, or (None, (first invalid height,
    reason)); any mutated historical byte surfaces at the first divergent
    height.
    """
    state = LedgerState(genesis=genesis)
    block_hashes: List[bytes] = []
    for block in blocks:
        try:
            apply_block(state, block, block_hashes, strict=True)
        except ChainInvalid as e:
            return None, (e.height, e.reason)
    return state, None


# ---------------------------------------------------------------------------
# dispute resolution

VERDICT_CONSISTENT = "Consistent"
VERDICT_ALTERED = "AlteredContent"
VERDICT_HASH_MISMATCH = "HashMismatch"


def pack_original_blob(original: Report, sigs: Sequence[RedactableSignature]) -> bytes:
    """Storage blob a citizen uploads at commit time: report plus full
    redactable signatures (with seeds), the evidence needed for disputes."""
    from .report import canonical_encode

    assert len(sigs) == 3
    return lp(canonical_encode(original)) + b"".join(lp(s.to_bytes()) for s in sigs)


def unpack_original_blob(blob: bytes) -> Tuple[Report, List[RedactableSignature]]:
    from .report import canonical_decode

    r = Reader(blob)
    original = canonical_decode(r.lp())
    sigs = [RedactableSignature.from_bytes(r.lp()) for _ in range(3)]
    r.expect_done()
    return original, sigs


def verify_dispute(
    original: Report,
    orig_sigs: Sequence[RedactableSignature],
    announced_hash: bytes,
    commitments: Sequence[SignatureCommitment],
    published: Sequence[RedactedMessage],
) -> Tuple[str, Dict[str, List[int]]]:
    """Check a published redaction against the citizen-released original.

    Consistent: every redacted slot's commitment matches the digest of the
    original chunk at that index (pure removal); the diff lists the exact
    redacted indices per field.  AlteredContent: some slot was substituted.
    HashMismatch: the supplied original does not match the announced hash or
    the on-chain commitments.
    """
    from .redactable import (
        _content_leaf,
        _leaf_nonces_from_root,
        tree_depth,
    )

    rid = report_id(original)
    if rid != announced_hash:
        return VERDICT_HASH_MISMATCH, {}
    msgs = [
        original.location_message().with_context(rid),
        original.picture_message().with_context(rid),
        original.description_message().with_context(rid),
    ]
    for msg, sig, com in zip(msgs, orig_sigs, commitments):
        if sig.root_signature != com.root_signature or sig.signer_pk != com.signer_pk:
            return VERDICT_HASH_MISMATCH, {}
        if not verify_full(sig.signer_pk, msg, sig):
            return VERDICT_HASH_MISMATCH, {}
    diff: Dict[str, List[int]] = {}
    for msg, sig, com, pub in zip(msgs, orig_sigs, commitments, published):
        if (
            pub.root_signature != com.root_signature
            or pub.signer_pk != com.signer_pk
            or pub.n != com.n
            or pub.context != rid
        ):
            return VERDICT_ALTERED, {}
        if not verify_redacted(pub):
            return VERDICT_ALTERED, {}
        num_leaves = 1 << tree_depth(sig.n)
        nonces = _leaf_nonces_from_root(sig.root_seed, sig.n, num_leaves)
        for i, slot in enumerate(pub.slots):
            if isinstance(slot, Present):
                if slot.chunk != msg.chunks[i]:
                    return VERDICT_ALTERED, {}
            else:
                expected = _content_leaf(nonces[i], i, msg.chunks[i])
                if slot.digest != expected:
                    return VERDICT_ALTERED, {}
        diff[msg.field_tag.name] = list(pub.redacted_indices())
    return VERDICT_CONSISTENT, diff
