"""Shared fixtures: deterministic keys, tiny reports, and a wired-up network."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

import numpy as np
import pytest

from acrp import keys
from acrp.chunking import ChunkingScheme, ChunkMode, ImageDescriptor
from acrp.ledger import (
    GenesisConfig,
    Transaction,
    TxKind,
    audit_publish_payload,
    commit_payload,
    pack_original_blob,
)
from acrp.node import Network
from acrp.redactable import RedactableSignature, sign_redactable, redact
from acrp.report import AuthorityEntry, Report, ReportType, report_id, select_auditor

WORLD_BBOX = (-90_000_000, 90_000_000, -180_000_000, 180_000_000)


def tiny_image(seed: int = 0, size: int = 8) -> ImageDescriptor:
    rng = np.random.default_rng(seed)
    return ImageDescriptor.from_array(rng.integers(0, 256, (size, size, 3), dtype=np.uint8))


def tiny_report(
    seed: int = 0,
    rtype: ReportType = ReportType.Pothole,
    lat: int = 50_775_300,
    lon: int = 6_083_900,
    desc: str = "pothole on Main St.",
    rows: int = 2,
    cols: int = 2,
) -> Report:
    return Report(
        rtype, lat, lon, tiny_image(seed), ChunkingScheme(ChunkMode.GridCoarse, rows, cols), desc
    )


@dataclass
class Consortium:
    genesis: GenesisConfig
    network: Network
    member_sks: List[keys.SigningKey]
    auditor_sks: List[keys.SigningKey]
    authority_sk: keys.SigningKey
    citizen_sk: keys.SigningKey

    @property
    def chain_id(self) -> str:
        return self.genesis.chain_id

    def tx(self, sk, kind, rid, payload) -> Transaction:
        return Transaction.build(sk, kind, rid, payload, self.chain_id)

    def push(self, *txs: Transaction) -> None:
        for tx in txs:
            self.network.submit(tx)
        self.network.step(0)

    def state(self):
        return self.network.head.state

    def announce(self, r: Report, sk=None) -> bytes:
        sk = sk or self.citizen_sk
        rid = report_id(r)
        self.push(self.tx(sk, TxKind.Announce, rid, rid))
        self.network.step(0)  # beacon block
        return rid

    def commit(self, r: Report, rid: bytes, sk=None) -> List[RedactableSignature]:
        sk = sk or self.citizen_sk
        state = self.state()
        rs = state.reports[rid]
        beacon = self.network.head.block_hashes[rs.announce_height + 1]
        index, _ = select_auditor(rid, beacon, state.registry(), height=rs.announce_height)
        msgs = [
            r.location_message().with_context(rid),
            r.picture_message().with_context(rid),
            r.description_message().with_context(rid),
        ]
        sigs = [sign_redactable(sk, m) for m in msgs]
        import hashlib

        storage_key = hashlib.sha256(pack_original_blob(r, sigs)).digest()
        commitments = [s.commitment(m.field_tag) for s, m in zip(sigs, msgs)]
        self.push(self.tx(sk, TxKind.Commit, rid, commit_payload(index, commitments, storage_key)))
        return sigs

    def audit(
        self,
        r: Report,
        rid: bytes,
        sigs: List[RedactableSignature],
        redactions: Optional[Dict[int, Set[int]]] = None,
    ) -> None:
        rs = self.state().reports[rid]
        aud_sk = next(sk for sk in self.auditor_sks if sk.public_bytes == rs.auditor_pk)
        msgs = [
            r.location_message().with_context(rid),
            r.picture_message().with_context(rid),
            r.description_message().with_context(rid),
        ]
        redactions = redactions or {}
        artifacts = [
            redact(m, s, redactions.get(i, set())) for i, (m, s) in enumerate(zip(msgs, sigs))
        ]
        payload = audit_publish_payload(r.report_type, artifacts)
        self.push(self.tx(aud_sk, TxKind.AuditDecision, rid, payload))

    def publish_flow(self, r: Report, redactions=None, sk=None) -> Tuple[bytes, list]:
        rid = self.announce(r, sk=sk)
        sigs = self.commit(r, rid, sk=sk)
        self.audit(r, rid, sigs, redactions)
        return rid, sigs


def make_consortium(
    n_members: int = 4,
    n_auditors: int = 3,
    audit_timeout: int = 20,
    chain_id: str = "acrp-test",
) -> Consortium:
    member_sks = [keys.keygen(f"member-{i}".encode())[0] for i in range(n_members)]
    auditor_sks = [keys.keygen(f"auditor-{i}".encode())[0] for i in range(n_auditors)]
    authority_sk, authority_pk = keys.keygen(b"authority")
    citizen_sk, _ = keys.keygen(b"citizen")
    genesis = GenesisConfig(
        chain_id=chain_id,
        members=tuple(sk.public_bytes for sk in member_sks),
        auditors=tuple(sk.public_bytes for sk in auditor_sks),
        authorities=(AuthorityEntry(None, WORLD_BBOX, authority_pk),),
        audit_timeout=audit_timeout,
    )
    network = Network(genesis, member_sks)
    return Consortium(genesis, network, member_sks, auditor_sks, authority_sk, citizen_sk)


@pytest.fixture
def consortium() -> Consortium:
    return make_consortium()
