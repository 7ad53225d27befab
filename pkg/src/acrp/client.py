"""HTTP client flows shared by the CLI: filing, auditing, handling, disputes.

Signing and auditor-selection recomputation happen here, on the client side;
the gateway is treated as untrusted for integrity.
"""

from __future__ import annotations

import base64
import hashlib
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import httpx

from . import keys
from .chunking import ChunkingScheme, ImageDescriptor
from .ledger import (
    Block,
    DeletionReason,
    GenesisConfig,
    Status,
    Transaction,
    TxKind,
    audit_publish_payload,
    audit_reject_payload,
    commit_payload,
    deletion_payload,
    pack_original_blob,
    status_payload,
    unpack_original_blob,
)
from .redactable import FieldTag, RedactableSignature, redact, sign_redactable
from .report import AuditorRegistry, Report, ReportType, report_id, select_auditor


class GatewayError(RuntimeError):
    def __init__(self, status_code: int, detail: str):
        super().__init__(f"{status_code}: {detail}")
        self.status_code = status_code
        self.detail = detail


class ApiClient:
    def __init__(self, base_url: str, http: Optional[httpx.Client] = None):
        self.http = http or httpx.Client(base_url=base_url, timeout=30.0)

    def _check(self, resp: httpx.Response) -> dict:
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise GatewayError(resp.status_code, detail)
        return resp.json()

    def post_tx(self, path: str, tx: Transaction, extra: Optional[dict] = None) -> str:
        body = dict(extra or {})
        body["tx"] = base64.b64encode(tx.to_bytes()).decode()
        return self._check(self.http.post(path, json=body))["tx_ref"]

    def get(self, path: str, **params) -> dict:
        return self._check(self.http.get(path, params=params or None))

    def head_height(self) -> int:
        return self.get("/v1/chain/head")["height"]

    def block(self, height: int) -> dict:
        return self.get(f"/v1/chain/blocks/{height}")

    def block_raw(self, height: int) -> Block:
        return Block.from_bytes(base64.b64decode(self.block(height)["block_b64"]))

    def wait_for_height(self, height: int, timeout_s: float = 30.0) -> None:
        deadline = time.monotonic() + timeout_s
        while self.head_height() < height:
            if time.monotonic() > deadline:
                raise TimeoutError(f"chain did not reach height {height}")
            time.sleep(0.05)

    def wait_for_tx(self, ref: str, timeout_s: float = 30.0) -> int:
        deadline = time.monotonic() + timeout_s
        while True:
            status = self.get(f"/v1/tx/{ref}")
            if status["status"] == "included":
                return status["height"]
            if time.monotonic() > deadline:
                raise TimeoutError(f"tx {ref} not included")
            time.sleep(0.05)

    def storage_put(self, value: bytes) -> bytes:
        resp = self.http.post("/v1/storage", content=value)
        return bytes.fromhex(self._check(resp)["key"])

    def storage_get(self, key: bytes, sk: Optional[keys.SigningKey] = None) -> bytes:
        headers = {}
        if sk is not None:
            headers = {
                "x-acrp-pk": sk.public_bytes.hex(),
                "x-acrp-signature": sk.sign(key).hex(),
            }
        resp = self.http.get(f"/v1/storage/{key.hex()}", headers=headers)
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise GatewayError(resp.status_code, detail)
        return resp.content


def registry_from_chain(api: ApiClient, genesis: GenesisConfig, up_to_height: int) -> AuditorRegistry:
    """Genesis auditors plus RegisterAuditor txs up to the given height."""
    entries = [(pk, 0) for pk in genesis.auditors]
    for h in range(0, up_to_height + 1):
        block = api.block_raw(h)
        for tx in block.txs:
            if tx.kind == TxKind.RegisterAuditor:
                entries.append((tx.payload, h))
    return AuditorRegistry(tuple(entries))


def signed_field_messages(r: Report, rid: bytes):
    return [
        r.location_message().with_context(rid),
        r.picture_message().with_context(rid),
        r.description_message().with_context(rid),
    ]


@dataclass
class FiledReport:
    report_id: bytes
    announce_ref: str
    commit_ref: str
    storage_key: bytes
    auditor_index: int
    signatures: List[RedactableSignature]


def file_report(
    api: ApiClient, sk: keys.SigningKey, genesis: GenesisConfig, r: Report
) -> FiledReport:
    """The full citizen flow: announce, wait one block, select auditor,
    upload the original, commit."""
    rid = report_id(r)
    chain_id = genesis.chain_id
    announce_tx = Transaction.build(sk, TxKind.Announce, rid, rid, chain_id)
    announce_ref = api.post_tx("/v1/reports/announce", announce_tx)
    announce_height = api.wait_for_tx(announce_ref)
    api.wait_for_height(announce_height + 1)
    beacon = bytes.fromhex(api.block(announce_height + 1)["block_hash"])
    registry = registry_from_chain(api, genesis, announce_height)
    index, _auditor_pk = select_auditor(rid, beacon, registry, height=announce_height)

    msgs = signed_field_messages(r, rid)
    sigs = [sign_redactable(sk, m) for m in msgs]
    blob = pack_original_blob(r, sigs)
    storage_key = api.storage_put(blob)
    commitments = [s.commitment(m.field_tag) for s, m in zip(sigs, msgs)]
    commit_tx = Transaction.build(
        sk, TxKind.Commit, rid, commit_payload(index, commitments, storage_key), chain_id
    )
    commit_ref = api.post_tx(f"/v1/reports/{rid.hex()}/commit", commit_tx)
    api.wait_for_tx(commit_ref)
    return FiledReport(rid, announce_ref, commit_ref, storage_key, index, sigs)


def pending_reports(api: ApiClient, auditor_pk: bytes) -> List[dict]:
    reports = api.get("/v1/reports", phase="Committed")["reports"]
    return [r for r in reports if r.get("auditor_pk") == auditor_pk.hex()]


FIELD_NAMES = {"location": 0, "picture": 1, "description": 2}


def audit_decide(
    api: ApiClient,
    sk: keys.SigningKey,
    genesis: GenesisConfig,
    rid: bytes,
    redact_sets: Dict[int, Set[int]],
) -> str:
    """Fetch the original, redact the requested chunk indices per field,
    and submit the decision."""
    view = api.get(f"/v1/reports/{rid.hex()}")
    storage_key = bytes.fromhex(view["storage_key"])
    blob = api.storage_get(storage_key, sk=sk)
    original, sigs = unpack_original_blob(blob)
    msgs = signed_field_messages(original, rid)
    artifacts = [
        redact(msg, sig, redact_sets.get(i, set()))
        for i, (msg, sig) in enumerate(zip(msgs, sigs))
    ]
    payload = audit_publish_payload(original.report_type, artifacts)
    tx = Transaction.build(sk, TxKind.AuditDecision, rid, payload, genesis.chain_id)
    ref = api.post_tx(f"/v1/reports/{rid.hex()}/audit", tx)
    api.wait_for_tx(ref)
    return ref


def audit_reject(
    api: ApiClient,
    sk: keys.SigningKey,
    genesis: GenesisConfig,
    rid: bytes,
    reason: DeletionReason,
    note: str = "",
) -> str:
    tx = Transaction.build(
        sk, TxKind.AuditDecision, rid, audit_reject_payload(reason, note), genesis.chain_id
    )
    ref = api.post_tx(f"/v1/reports/{rid.hex()}/audit", tx)
    api.wait_for_tx(ref)
    return ref


def authority_update(
    api: ApiClient,
    sk: keys.SigningKey,
    genesis: GenesisConfig,
    rid: bytes,
    status: Status,
    note: str = "",
) -> str:
    tx = Transaction.build(
        sk, TxKind.StatusUpdate, rid, status_payload(status, note), genesis.chain_id
    )
    ref = api.post_tx(f"/v1/reports/{rid.hex()}/status", tx)
    api.wait_for_tx(ref)
    return ref


def authority_delete(
    api: ApiClient,
    sk: keys.SigningKey,
    genesis: GenesisConfig,
    rid: bytes,
    reason: DeletionReason,
    note: str = "",
) -> str:
    tx = Transaction.build(
        sk, TxKind.DeletionLog, rid, deletion_payload(reason, note), genesis.chain_id
    )
    ref = api.post_tx(f"/v1/reports/{rid.hex()}/delete", tx)
    api.wait_for_tx(ref)
    return ref


def dispute(api: ApiClient, rid: bytes, original_blob: bytes) -> Tuple[str, dict]:
    body = {"original": base64.b64encode(original_blob).decode()}
    resp = api._check(api.http.post(f"/v1/reports/{rid.hex()}/dispute", json=body))
    return resp["verdict"], resp["diff"]
