/** Client-signed ledger transactions and the audit-decision payloads. */

import { SigningKey } from "./crypto.js";
import { concat, lp, u8, utf8 } from "./encoding.js";
import { RedactedMessage, serializeRedacted } from "./redactable.js";

export enum TxKind {
  Announce = 0,
  Commit = 1,
  AuditDecision = 2,
  Publish = 3,
  StatusUpdate = 4,
  DeletionLog = 5,
  Vote = 6,
  Comment = 7,
  Merge = 8,
  DisputeEvidence = 9,
  RegisterAuditor = 10,
  RegisterAuthority = 11,
}

export enum DeletionReason {
  NotActionable = 0,
  IllicitContent = 1,
  Duplicate = 2,
}

export interface Transaction {
  kind: TxKind;
  reportId: Uint8Array | null;
  payload: Uint8Array;
  senderPk: Uint8Array;
  signature: Uint8Array;
}

function preimage(
  kind: TxKind,
  rid: Uint8Array | null,
  payload: Uint8Array,
  chainId: string,
): Uint8Array {
  return concat(u8(kind), rid ?? new Uint8Array(0), lp(payload), utf8(chainId));
}

export function buildTransaction(
  sk: SigningKey,
  kind: TxKind,
  rid: Uint8Array | null,
  payload: Uint8Array,
  chainId: string,
): Transaction {
  return {
    kind,
    reportId: rid,
    payload,
    senderPk: sk.publicBytes,
    signature: sk.sign(preimage(kind, rid, payload, chainId)),
  };
}

export function serializeTransaction(tx: Transaction): Uint8Array {
  return concat(
    u8(tx.kind),
    u8(tx.reportId ? 1 : 0),
    tx.reportId ?? new Uint8Array(0),
    lp(tx.payload),
    lp(tx.senderPk),
    lp(tx.signature),
  );
}

/** Publish decision: the three redacted field artifacts in ledger field
 * order (Location, Picture, Description), with the disclosed report type. */
export function auditPublishPayload(
  reportType: number,
  artifacts: [RedactedMessage, RedactedMessage, RedactedMessage],
): Uint8Array {
  return concat(u8(0), u8(reportType), ...artifacts.map((a) => lp(serializeRedacted(a))));
}

export function auditRejectPayload(reason: DeletionReason, note: string): Uint8Array {
  return concat(u8(1), u8(reason), lp(utf8(note)));
}
