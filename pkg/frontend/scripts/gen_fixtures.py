"""Regenerate tests/fixtures.json from the reference Python implementation.

Run from the repository root with the acrp package installed:

    python3 frontend/scripts/gen_fixtures.py
"""

import json
import pathlib

import numpy as np

from acrp import keys
from acrp.chunking import (
    ChunkMode,
    ChunkingScheme,
    ImageDescriptor,
    chunk_image_grid,
    chunk_text,
    render_redacted_image,
)
from acrp.ledger import Transaction, TxKind, audit_publish_payload, pack_original_blob
from acrp.redactable import ChunkedMessage, FieldTag, redact, sign_redactable
from acrp.report import Report, ReportType, report_id

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures.json"


def hx(b: bytes) -> str:
    return b.hex()


def main() -> None:
    fixtures = {}

    # --- standalone redaction golden ---
    sk, pk = keys.keygen(b"\x00" * 32)
    chunks = (b"alpha", b"bravo", b"charlie", b"delta")
    msg = ChunkedMessage(FieldTag.Description, chunks, b"\x11" * 32)
    sig = sign_redactable(sk, msg, root_seed=b"\x22" * 16)
    red = redact(msg, sig, {2})
    fixtures["redact_golden"] = {
        "chunks": [hx(c) for c in chunks],
        "context": hx(b"\x11" * 32),
        "field_tag": int(FieldTag.Description),
        "signature": hx(sig.to_bytes()),
        "redact_indices": [2],
        "redacted": hx(red.to_bytes()),
    }

    # --- full audit-decision flow ---
    citizen_sk, citizen_pk = keys.keygen(b"fixture-citizen")
    auditor_sk, auditor_pk = keys.keygen(b"fixture-auditor")
    img = ImageDescriptor.from_array(np.arange(12, dtype=np.uint8).reshape(2, 2, 3))
    r = Report(
        ReportType.TrashDump, -33_868_800, 151_209_300, img,
        ChunkingScheme(ChunkMode.GridCoarse, 2, 2), "bags dumped",
    )
    rid = report_id(r)
    msgs = [
        r.location_message().with_context(rid),
        r.picture_message().with_context(rid),
        r.description_message().with_context(rid),
    ]
    sigs = [sign_redactable(citizen_sk, m, root_seed=bytes([40 + i]) * 16) for i, m in enumerate(msgs)]
    blob = pack_original_blob(r, sigs)
    redactions = [set(), {2}, {0}]
    artifacts = [redact(m, s, t) for m, s, t in zip(msgs, sigs, redactions)]
    payload = audit_publish_payload(r.report_type, artifacts)
    tx = Transaction.build(auditor_sk, TxKind.AuditDecision, rid, payload, "acrp-test")
    fixtures["audit_flow"] = {
        "chain_id": "acrp-test",
        "citizen_seed": hx(b"fixture-citizen"),
        "auditor_seed": hx(b"fixture-auditor"),
        "auditor_pk": hx(auditor_pk),
        "report_id": hx(rid),
        "original_blob": hx(blob),
        "field_chunks": [[hx(c) for c in m.chunks] for m in msgs],
        "redactions": [sorted(t) for t in redactions],
        "artifacts": [hx(a.to_bytes()) for a in artifacts],
        "payload": hx(payload),
        "tx": hx(tx.to_bytes()),
    }

    # --- preview compositor ---
    rng = np.random.default_rng(7)
    arr = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    pimg = ImageDescriptor.from_array(arr)
    pmsg = chunk_image_grid(pimg, 4, 4)
    psk, _ = keys.keygen(b"fixture-preview")
    psig = sign_redactable(psk, pmsg, root_seed=b"\x33" * 16)
    pred = redact(pmsg, psig, {6, 11})
    rendered = render_redacted_image(8, 8, pred)
    fixtures["preview"] = {
        "width": 8,
        "height": 8,
        "chunks": [hx(c) for c in pmsg.chunks],
        "redact_indices": [6, 11],
        "redacted": hx(pred.to_bytes()),
        "rendered": hx(rendered.data),
    }

    # --- text chunking parity ---
    texts = ["bags dumped", "  big pothole near   5th Ave.  ", "", "one"]
    fixtures["text_chunks"] = [
        {"text": t, "chunks": [hx(c) for c in chunk_text(t).chunks]} for t in texts
    ]

    OUT.write_text(json.dumps(fixtures, indent=1))
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
