/** Render a redacted picture exactly as the platform will publish it:
 * present chunks composited at their scheme rectangles, redacted rectangles
 * filled black. */

import { Reader } from "./encoding.js";
import { ChunkMode, Rect, parseSchemeHeader, schemeRects } from "./grid.js";
import { FieldTag, RedactedMessage } from "./redactable.js";

export class SchemeMismatch extends Error {}

export interface RawImage {
  width: number;
  height: number;
  /** RGB8 row-major pixel data, width*height*3 bytes. */
  data: Uint8Array;
}

function parseCellChunk(chunk: Uint8Array): { rect: Rect; pixels: Uint8Array } {
  const r = new Reader(chunk);
  const rect = { x: r.u32(), y: r.u32(), w: r.u32(), h: r.u32() };
  const pixels = r.take(rect.w * rect.h * 3);
  r.expectDone();
  return { rect, pixels };
}

function blit(canvas: RawImage, rect: Rect, pixels: Uint8Array | null): void {
  for (let row = 0; row < rect.h; row++) {
    const dst = ((rect.y + row) * canvas.width + rect.x) * 3;
    if (pixels === null) {
      canvas.data.fill(0, dst, dst + rect.w * 3);
    } else {
      canvas.data.set(pixels.subarray(row * rect.w * 3, (row + 1) * rect.w * 3), dst);
    }
  }
}

export function renderRedacted(
  width: number,
  height: number,
  redacted: RedactedMessage,
): RawImage {
  if (redacted.fieldTag !== FieldTag.Picture) {
    throw new SchemeMismatch("not a picture message");
  }
  const header = redacted.slots[0];
  if (header.kind !== "present") {
    throw new SchemeMismatch("scheme header chunk was redacted");
  }
  let scheme;
  try {
    scheme = parseSchemeHeader(header.chunk);
  } catch (e) {
    throw new SchemeMismatch(`bad scheme header: ${e}`);
  }
  const rects = schemeRects(scheme, width, height);
  if (rects.length !== redacted.n - 1) {
    throw new SchemeMismatch("chunk count does not match scheme geometry");
  }
  const canvas: RawImage = { width, height, data: new Uint8Array(width * height * 3) };
  let order = Array.from({ length: redacted.n - 1 }, (_, i) => i + 1);
  if (scheme.mode === ChunkMode.ObjectBased) {
    order = [order[order.length - 1], ...order.slice(0, -1)]; // background first
  }
  for (const slotIndex of order) {
    const slot = redacted.slots[slotIndex];
    const want = rects[slotIndex - 1];
    if (slot.kind === "present") {
      const { rect, pixels } = parseCellChunk(slot.chunk);
      if (rect.x !== want.x || rect.y !== want.y || rect.w !== want.w || rect.h !== want.h) {
        throw new SchemeMismatch(`chunk ${slotIndex} rect does not match scheme rect`);
      }
      blit(canvas, rect, pixels);
    } else {
      blit(canvas, want, null);
    }
  }
  return canvas;
}
