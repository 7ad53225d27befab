"""HTTP/JSON gateway: a thin, stateless mapping onto ledger and storage.

Every mutating endpoint carries one fully client-signed transaction (the
gateway never holds citizen keys and is untrusted for integrity); responses
return the tx digest, pollable via GET /v1/tx/{ref}.  Binary fields travel
base64, digests lowercase hex.
"""

from __future__ import annotations

import base64
import threading
import time
from typing import List, Optional

from fastapi import FastAPI, HTTPException, Request, Response

from . import keys
from .community import UnknownReport, find_duplicates
from .encoding import DecodeError, Reader
from .ledger import (
    BAD_SIGNATURE,
    AUDITOR_MISMATCH,
    Rejection,
    Transaction,
    TxKind,
    UNKNOWN_REPORT,
    WRONG_ROLE,
    unpack_original_blob,
    verify_dispute,
)
from .node import Network
from .redactable import RedactedMessage, SignatureCommitment
from .storage import BlobStore, IntegrityError, TooLarge

_HTTP_STATUS = {
    BAD_SIGNATURE: 401,
    WRONG_ROLE: 403,
    AUDITOR_MISMATCH: 403,
    UNKNOWN_REPORT: 404,
}


def _reject(code: Rejection) -> HTTPException:
    return HTTPException(status_code=_HTTP_STATUS.get(code, 409), detail=str(code))


class Gateway:
    """Owns the network, the blob store and an optional block producer loop."""

    def __init__(self, network: Network, store: BlobStore):
        self.network = network
        self.store = store
        self._stop = threading.Event()
        self._producer: Optional[threading.Thread] = None
        self._lock = threading.Lock()

    @property
    def node(self):
        return self.network.head

    def start_producer(self, interval: float) -> None:
        def loop():
            while not self._stop.is_set():
                with self._lock:
                    self.network.step()
                self._stop.wait(interval)

        self._producer = threading.Thread(target=loop, daemon=True)
        self._producer.start()

    def stop(self) -> None:
        self._stop.set()
        if self._producer:
            self._producer.join()

    def submit_checked(self, tx: Transaction, expect_kind: TxKind, rid: Optional[bytes]) -> bytes:
        if tx.kind != expect_kind:
            raise HTTPException(status_code=400, detail=f"expected {expect_kind.name} transaction")
        if rid is not None and tx.report_id != rid:
            raise HTTPException(status_code=400, detail="transaction report id does not match path")
        with self._lock:
            code = self.node.trial_apply(tx)
            if code is not None:
                raise _reject(code)
            return self.network.submit(tx)

    def protected_keys(self) -> set:
        """Storage keys referenced by commits: the unredacted originals."""
        out = set()
        for rs in self.node.state.reports.values():
            if rs.storage_key is not None:
                out.add(rs.storage_key)
        return out


def _parse_tx(body: dict) -> Transaction:
    try:
        return Transaction.from_bytes(base64.b64decode(body["tx"]))
    except (KeyError, ValueError, DecodeError) as e:
        raise HTTPException(status_code=400, detail=f"malformed transaction: {e}")


def _rid_from_path(report_hex: str) -> bytes:
    try:
        rid = bytes.fromhex(report_hex)
    except ValueError:
        raise HTTPException(status_code=400, detail="report id must be hex")
    if len(rid) != 32:
        raise HTTPException(status_code=400, detail="report id must be 32 bytes")
    return rid


def _report_view(gw: Gateway, rid: bytes) -> dict:
    rs = gw.node.state.reports.get(rid)
    if rs is None:
        raise HTTPException(status_code=404, detail="unknown report")
    view = rs.to_dict()
    view["report_id"] = rid.hex()
    if rs.artifacts:
        view["artifacts_b64"] = [base64.b64encode(a).decode() for a in rs.artifacts]
    return view


def create_app(gw: Gateway) -> FastAPI:
    app = FastAPI(title="acrp gateway")
    app.state.gateway = gw

    @app.post("/v1/reports/announce")
    async def announce(body: dict):
        tx = _parse_tx(body)
        ref = gw.submit_checked(tx, TxKind.Announce, None)
        return {"tx_ref": ref.hex()}

    @app.post("/v1/reports/{report_hex}/commit")
    async def commit(report_hex: str, body: dict):
        rid = _rid_from_path(report_hex)
        tx = _parse_tx(body)
        ref = gw.submit_checked(tx, TxKind.Commit, rid)
        return {"tx_ref": ref.hex()}

    @app.post("/v1/reports/{report_hex}/audit")
    async def audit(report_hex: str, body: dict):
        rid = _rid_from_path(report_hex)
        tx = _parse_tx(body)
        ref = gw.submit_checked(tx, TxKind.AuditDecision, rid)
        return {"tx_ref": ref.hex()}

    @app.post("/v1/reports/{report_hex}/status")
    async def status(report_hex: str, body: dict):
        rid = _rid_from_path(report_hex)
        tx = _parse_tx(body)
        ref = gw.submit_checked(tx, TxKind.StatusUpdate, rid)
        return {"tx_ref": ref.hex()}

    @app.post("/v1/reports/{report_hex}/delete")
    async def delete(report_hex: str, body: dict):
        rid = _rid_from_path(report_hex)
        tx = _parse_tx(body)
        ref = gw.submit_checked(tx, TxKind.DeletionLog, rid)
        return {"tx_ref": ref.hex()}

    @app.post("/v1/reports/{report_hex}/vote")
    async def vote(report_hex: str, body: dict):
        rid = _rid_from_path(report_hex)
        tx = _parse_tx(body)
        ref = gw.submit_checked(tx, TxKind.Vote, rid)
        return {"tx_ref": ref.hex()}

    @app.post("/v1/reports/{report_hex}/merge")
    async def merge(report_hex: str, body: dict):
        rid = _rid_from_path(report_hex)
        tx = _parse_tx(body)
        ref = gw.submit_checked(tx, TxKind.Merge, rid)
        return {"tx_ref": ref.hex()}

    @app.post("/v1/reports/{report_hex}/dispute")
    async def dispute(report_hex: str, body: dict):
        rid = _rid_from_path(report_hex)
        rs = gw.node.state.reports.get(rid)
        if rs is None:
            raise HTTPException(status_code=404, detail="unknown report")
        if rs.artifacts is None:
            raise HTTPException(status_code=409, detail="report has no published artifacts")
        try:
            blob = base64.b64decode(body["original"])
            original, sigs = unpack_original_blob(blob)
        except (KeyError, ValueError, DecodeError) as e:
            raise HTTPException(status_code=400, detail=f"malformed original blob: {e}")
        commitments = [SignatureCommitment.read_from(Reader(c)) for c in rs.commitments]
        published = [RedactedMessage.from_bytes(a) for a in rs.artifacts]
        verdict, diff = verify_dispute(original, sigs, rid, commitments, published)
        if "tx" in body:
            tx = _parse_tx(body)
            gw.submit_checked(tx, TxKind.DisputeEvidence, rid)
        return {"verdict": verdict, "diff": diff}

    @app.get("/v1/reports")
    async def list_reports(
        phase: Optional[str] = None,
        type: Optional[int] = None,
        bbox: Optional[str] = None,
        page: int = 0,
        page_size: int = 50,
    ):
        box = None
        if bbox is not None:
            parts = bbox.split(",")
            if len(parts) != 4:
                raise HTTPException(status_code=400, detail="bbox must be lat_min,lat_max,lon_min,lon_max")
            box = tuple(int(p) for p in parts)
        out = []
        for rid, rs in sorted(gw.node.state.reports.items()):
            if phase is not None and rs.phase != phase:
                continue
            if type is not None and rs.report_type != type:
                continue
            if box is not None:
                if rs.location is None:
                    continue
                lat, lon = rs.location
                if not (box[0] <= lat <= box[1] and box[2] <= lon <= box[3]):
                    continue
            out.append(_report_view(gw, rid))
        total = len(out)
        out = out[page * page_size : (page + 1) * page_size]
        return {"total": total, "page": page, "reports": out}

    @app.get("/v1/reports/{report_hex}")
    async def get_report(report_hex: str):
        rid = _rid_from_path(report_hex)
        return _report_view(gw, rid)

    @app.get("/v1/reports/{report_hex}/duplicates")
    async def duplicates(report_hex: str, threshold_m: float = 50.0):
        rid = _rid_from_path(report_hex)
        try:
            cands = find_duplicates(gw.node.state, rid, threshold_m)
        except UnknownReport:
            raise HTTPException(status_code=404, detail="unknown report")
        return {
            "candidates": [
                {"report_a": c.report_a.hex(), "report_b": c.report_b.hex(), "distance_m": c.distance_m}
                for c in cands
            ]
        }

    @app.post("/v1/storage")
    async def storage_put(request: Request):
        value = await request.body()
        try:
            key = gw.store.put(value)
        except TooLarge as e:
            raise HTTPException(status_code=413, detail=str(e))
        return {"key": key.hex()}

    @app.get("/v1/storage/{key_hex}")
    async def storage_get(key_hex: str, request: Request):
        try:
            key = bytes.fromhex(key_hex)
        except ValueError:
            raise HTTPException(status_code=400, detail="key must be hex")
        if key in gw.protected_keys() and not _original_access_ok(gw, key, request):
            raise HTTPException(status_code=403, detail="original report blobs require the citizen's key")
        try:
            value = gw.store.get(key)
        except IntegrityError as e:
            raise HTTPException(status_code=500, detail=str(e))
        if value is None:
            raise HTTPException(status_code=404, detail="not found")
        return Response(content=value, media_type="application/octet-stream")

    @app.get("/v1/tx/{ref_hex}")
    async def tx_status(ref_hex: str):
        try:
            ref = bytes.fromhex(ref_hex)
        except ValueError:
            raise HTTPException(status_code=400, detail="ref must be hex")
        height = gw.node.tx_inclusion(ref)
        if height is None:
            if ref in gw.node.seen_txs:
                return {"status": "pending"}
            raise HTTPException(status_code=404, detail="unknown transaction")
        return {"status": "included", "height": height}

    @app.get("/v1/chain/head")
    async def chain_head():
        node = gw.node
        head_hash = node.block_hashes[-1].hex() if node.block_hashes else node.genesis.genesis_hash().hex()
        return {"height": node.height, "block_hash": head_hash, "chain_id": node.genesis.chain_id}

    @app.get("/v1/chain/blocks/{height}")
    async def chain_block(height: int):
        node = gw.node
        if not (0 <= height < len(node.blocks)):
            raise HTTPException(status_code=404, detail="no such block")
        block = node.blocks[height]
        return {
            "height": block.height,
            "block_hash": block.block_hash().hex(),
            "prev_hash": block.prev_hash.hex(),
            "producer_pk": block.producer_pk.hex(),
            "timestamp": block.timestamp,
            "txs": [
                {"ref": tx.digest().hex(), "kind": tx.kind.name,
                 "report_id": tx.report_id.hex() if tx.report_id else None}
                for tx in block.txs
            ],
            "block_b64": base64.b64encode(block.to_bytes()).decode(),
        }

    return app


def _original_access_ok(gw: Gateway, key: bytes, request: Request) -> bool:
    """Citizen or assigned-auditor access to an original blob; public once
    disputed."""
    owners = set()
    for rs in gw.node.state.reports.values():
        if rs.storage_key == key:
            if rs.disputed:
                return True
            owners.add(rs.citizen_pk)
            if rs.auditor_pk is not None:
                owners.add(rs.auditor_pk)
    pk_hex = request.headers.get("x-acrp-pk")
    sig_hex = request.headers.get("x-acrp-signature")
    if not pk_hex or not sig_hex:
        return False
    try:
        pk = bytes.fromhex(pk_hex)
        sig = bytes.fromhex(sig_hex)
    except ValueError:
        return False
    return pk in owners and keys.verify(pk, sig, key)
