/** Picture chunk geometry: grid rectangles, the scheme header chunk, and the
 * mapping from a clicked pixel to the chunk index to redact. */

import { Reader } from "./encoding.js";

export enum ChunkMode {
  GridCoarse = 0,
  GridFine = 1,
  ObjectBased = 2,
  TextWords = 3,
  LocationAtomic = 4,
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface ChunkingScheme {
  mode: ChunkMode;
  gridRows: number;
  gridCols: number;
  regions: Rect[];
}

/** Parse picture chunk 0, which carries the chunking geometry. */
export function parseSchemeHeader(chunk: Uint8Array): ChunkingScheme {
  const r = new Reader(chunk);
  const mode = r.u8() as ChunkMode;
  const gridRows = r.u16();
  const gridCols = r.u16();
  const count = r.u16();
  const regions: Rect[] = [];
  for (let i = 0; i < count; i++) {
    regions.push({ x: r.u32(), y: r.u32(), w: r.u32(), h: r.u32() });
  }
  r.expectDone();
  return { mode, gridRows, gridCols, regions };
}

/** Row-major cell rectangles; last row/col absorb remainder pixels. */
export function gridRects(width: number, height: number, rows: number, cols: number): Rect[] {
  if (rows < 1 || cols < 1) throw new Error("rows and cols must be >= 1");
  if (rows > height || cols > width) {
    throw new Error(`${rows}x${cols} grid too fine for ${width}x${height} image`);
  }
  const baseW = Math.floor(width / cols);
  const baseH = Math.floor(height / rows);
  const rects: Rect[] = [];
  for (let r = 0; r < rows; r++) {
    const y = r * baseH;
    const h = r < rows - 1 ? baseH : height - baseH * (rows - 1);
    for (let c = 0; c < cols; c++) {
      const x = c * baseW;
      const w = c < cols - 1 ? baseW : width - baseW * (cols - 1);
      rects.push({ x, y, w, h });
    }
  }
  return rects;
}

/** Rectangles for content chunks 1..N of a picture message, in chunk order. */
export function schemeRects(scheme: ChunkingScheme, width: number, height: number): Rect[] {
  if (scheme.mode === ChunkMode.ObjectBased) {
    return [...scheme.regions, { x: 0, y: 0, w: width, h: height }];
  }
  return gridRects(width, height, scheme.gridRows, scheme.gridCols);
}

/** Chunk index (into the picture message, header = 0) for a clicked pixel,
 * or null if no redactable chunk covers it.  In object mode the background
 * chunk is never offered for redaction, only the annotated regions. */
export function chunkIndexAt(
  scheme: ChunkingScheme,
  width: number,
  height: number,
  px: number,
  py: number,
): number | null {
  if (px < 0 || py < 0 || px >= width || py >= height) return null;
  if (scheme.mode === ChunkMode.ObjectBased) {
    for (let i = 0; i < scheme.regions.length; i++) {
      const { x, y, w, h } = scheme.regions[i];
      if (px >= x && px < x + w && py >= y && py < y + h) return i + 1;
    }
    return null;
  }
  const rects = gridRects(width, height, scheme.gridRows, scheme.gridCols);
  for (let i = 0; i < rects.length; i++) {
    const { x, y, w, h } = rects[i];
    if (px >= x && px < x + w && py >= y && py < y + h) return i + 1;
  }
  return null;
}
