/** Field chunking and the citizen's original-blob format.
 *
 * The console downloads the access-controlled original blob for an assigned
 * report, splits each field back into the exact chunk sequence the citizen
 * signed, and redacts from there.  Byte layouts mirror the platform.
 */

import { sha256 } from "./crypto.js";
import { Reader, concat, i32, utf8 } from "./encoding.js";
import {
  FieldTag,
  RedactableSignature,
  parseSignature,
} from "./redactable.js";

// 0xff never occurs in valid UTF-8, so the marker cannot collide with text
export const TEXT_EMPTY_MARKER = Uint8Array.of(0xff);

/** Split free text into word chunks whose concatenation reproduces it
 * byte-exactly; empty input yields a single marker chunk. */
export function chunkTextWords(text: string): Uint8Array[] {
  if (text === "") return [TEXT_EMPTY_MARKER];
  const parts = text.match(/\s*\S+\s*/g) ?? [];
  if (parts.join("") !== text) {
    // whitespace-only or other pathological input stays atomic
    return [utf8(text)];
  }
  return parts.map(utf8);
}

export function reassembleText(chunks: Uint8Array[]): string {
  if (chunks.length === 1 && chunks[0].length === 1 && chunks[0][0] === 0xff) return "";
  return new TextDecoder().decode(concat(...chunks));
}

/** Locations are a single atomic chunk: lat then lon in microdegrees. */
export function locationChunk(latUdeg: number, lonUdeg: number): Uint8Array {
  return concat(i32(latUdeg), i32(lonUdeg));
}

export function parseLocationChunk(chunk: Uint8Array): { lat: number; lon: number } {
  const r = new Reader(chunk);
  const lat = r.i32();
  const lon = r.i32();
  r.expectDone();
  return { lat, lon };
}

export interface OriginalReport {
  reportType: number;
  latUdeg: number;
  lonUdeg: number;
  pictureChunks: Uint8Array[];
  description: string;
  /** Chunk lists in ledger field order: Location, Picture, Description. */
  fieldChunks: [Uint8Array[], Uint8Array[], Uint8Array[]];
  /** Full redactable signatures, one per field in the same order. */
  signatures: [RedactableSignature, RedactableSignature, RedactableSignature];
  /** The report id: digest of the canonical encoding. */
  reportId: Uint8Array;
  canonicalBytes: Uint8Array;
}

export const FIELD_ORDER: FieldTag[] = [
  FieldTag.Location,
  FieldTag.Picture,
  FieldTag.Description,
];

/** Parse the storage blob a citizen uploads at commit time: the canonical
 * report encoding followed by the three full field signatures. */
export function parseOriginalBlob(blob: Uint8Array): OriginalReport {
  const r = new Reader(blob);
  const canonicalBytes = r.lp();
  const signatures = [
    parseSignature(new Reader(r.lp())),
    parseSignature(new Reader(r.lp())),
    parseSignature(new Reader(r.lp())),
  ] as OriginalReport["signatures"];
  r.expectDone();

  const c = new Reader(canonicalBytes);
  const reportType = c.u8();
  const latUdeg = c.i32();
  const lonUdeg = c.i32();
  const pictureStream = new Reader(c.lp());
  const pictureChunks: Uint8Array[] = [];
  while (!pictureStream.done()) pictureChunks.push(pictureStream.lp());
  const description = new TextDecoder().decode(c.lp());
  c.expectDone();

  const fieldChunks: OriginalReport["fieldChunks"] = [
    [locationChunk(latUdeg, lonUdeg)],
    pictureChunks,
    chunkTextWords(description),
  ];
  return {
    reportType,
    latUdeg,
    lonUdeg,
    pictureChunks,
    description,
    fieldChunks,
    signatures,
    reportId: sha256(canonicalBytes),
    canonicalBytes,
  };
}
