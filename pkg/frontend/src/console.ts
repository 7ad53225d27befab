/** Auditor console state machine.
 *
 * Drives the whole decision workflow against the gateway API: load the
 * pending queue, open an assigned report (downloading and verifying the
 * citizen's original), toggle chunk selections per field, preview the
 * redacted picture, and submit a signed publish or reject decision.
 */

import { GatewayClient, ReportView } from "./api.js";
import { OriginalReport, parseOriginalBlob } from "./chunks.js";
import { SigningKey } from "./crypto.js";
import { Reader, bytesEqual, fromHex } from "./encoding.js";
import { ChunkingScheme, chunkIndexAt, parseSchemeHeader } from "./grid.js";
import { RawImage, renderRedacted } from "./preview.js";
import {
  FieldTag,
  RedactedMessage,
  redactOriginal,
  verifyFull,
} from "./redactable.js";
import {
  DeletionReason,
  TxKind,
  auditPublishPayload,
  auditRejectPayload,
  buildTransaction,
} from "./tx.js";

export class ConsoleError extends Error {}

export interface OpenReport {
  view: ReportView;
  reportId: Uint8Array;
  original: OriginalReport;
  scheme: ChunkingScheme;
  pictureWidth: number;
  pictureHeight: number;
  /** Selected chunk indices per field, keyed by FieldTag. */
  selections: Map<FieldTag, Set<number>>;
}

export class AuditorConsole {
  queue: ReportView[] = [];
  current: OpenReport | null = null;

  constructor(
    private client: GatewayClient,
    private sk: SigningKey,
    private chainId: string,
  ) {}

  async refreshQueue(): Promise<ReportView[]> {
    this.queue = await this.client.pendingForAuditor(this.sk.publicBytes);
    return this.queue;
  }

  /** Open an assigned report: download the original blob, verify all three
   * field signatures against the on-chain report id, derive the picture
   * geometry, and reset the selection state. */
  async openReport(reportId: Uint8Array): Promise<OpenReport> {
    const view = await this.client.getReport(reportId);
    if (view.storage_key === null) {
      throw new ConsoleError("report has no committed original to review");
    }
    const blob = await this.client.fetchOriginal(fromHex(view.storage_key), this.sk);
    const original = parseOriginalBlob(blob);
    if (!bytesEqual(original.reportId, reportId)) {
      throw new ConsoleError("original blob does not match the announced report id");
    }
    for (let f = 0; f < 3; f++) {
      if (!verifyFull(f as FieldTag, original.fieldChunks[f], reportId, original.signatures[f])) {
        throw new ConsoleError(`field ${FieldTag[f]} signature does not verify`);
      }
    }
    const scheme = parseSchemeHeader(original.pictureChunks[0]);
    let pictureWidth = 0;
    let pictureHeight = 0;
    for (const chunk of original.pictureChunks.slice(1)) {
      const r = new Reader(chunk);
      const x = r.u32();
      const y = r.u32();
      const w = r.u32();
      const h = r.u32();
      pictureWidth = Math.max(pictureWidth, x + w);
      pictureHeight = Math.max(pictureHeight, y + h);
    }
    this.current = {
      view,
      reportId,
      original,
      scheme,
      pictureWidth,
      pictureHeight,
      selections: new Map([
        [FieldTag.Location, new Set<number>()],
        [FieldTag.Picture, new Set<number>()],
        [FieldTag.Description, new Set<number>()],
      ]),
    };
    return this.current;
  }

  private mustBeOpen(): OpenReport {
    if (this.current === null) throw new ConsoleError("no report is open");
    return this.current;
  }

  /** Toggle one chunk in or out of the redaction set.  The picture scheme
   * header (chunk 0) is never redactable; the location is all-or-nothing. */
  toggleChunk(field: FieldTag, index: number): Set<number> {
    const open = this.mustBeOpen();
    const chunks = open.original.fieldChunks[field];
    if (index < 0 || index >= chunks.length) {
      throw new ConsoleError(`chunk ${index} out of range for ${FieldTag[field]}`);
    }
    if (field === FieldTag.Picture && index === 0) {
      throw new ConsoleError("the picture scheme header cannot be redacted");
    }
    const sel = open.selections.get(field)!;
    if (sel.has(index)) sel.delete(index);
    else sel.add(index);
    return sel;
  }

  /** Toggle the picture cell under a clicked pixel. */
  togglePictureAt(px: number, py: number): Set<number> {
    const open = this.mustBeOpen();
    const index = chunkIndexAt(open.scheme, open.pictureWidth, open.pictureHeight, px, py);
    if (index === null) throw new ConsoleError("no redactable picture chunk at that pixel");
    return this.toggleChunk(FieldTag.Picture, index);
  }

  private artifactFor(field: FieldTag): RedactedMessage {
    const open = this.mustBeOpen();
    return redactOriginal(
      field,
      open.original.fieldChunks[field],
      open.reportId,
      open.original.signatures[field],
      open.selections.get(field)!,
    );
  }

  /** Render the picture exactly as it would be published with the current
   * selection applied. */
  previewPicture(): RawImage {
    const open = this.mustBeOpen();
    return renderRedacted(open.pictureWidth, open.pictureHeight, this.artifactFor(FieldTag.Picture));
  }

  /** Publish with the current redaction selection. */
  async submitPublish(): Promise<Uint8Array> {
    const open = this.mustBeOpen();
    const payload = auditPublishPayload(open.original.reportType, [
      this.artifactFor(FieldTag.Location),
      this.artifactFor(FieldTag.Picture),
      this.artifactFor(FieldTag.Description),
    ]);
    return this.submit(payload);
  }

  /** Reject the report entirely.  A reason note is mandatory: rejections are
   * on-chain and must be explainable. */
  async submitReject(reason: DeletionReason, note: string): Promise<Uint8Array> {
    if (note.trim() === "") {
      throw new ConsoleError("a rejection requires a written reason");
    }
    return this.submit(auditRejectPayload(reason, note));
  }

  private async submit(payload: Uint8Array): Promise<Uint8Array> {
    const open = this.mustBeOpen();
    const tx = buildTransaction(this.sk, TxKind.AuditDecision, open.reportId, payload, this.chainId);
    const ref = await this.client.submitAuditDecision(open.reportId, tx);
    this.current = null;
    return ref;
  }
}
