/** Client-side half of the redactable signature scheme.
 *
 * The console holds the citizen's full signature (root seed included) for an
 * assigned report, removes the chunks the auditor selected, and serializes
 * the redacted artifact byte-for-byte as the ledger expects it.  A seed tree
 * derives one salt nonce per leaf; each chunk is committed as a salted,
 * position-bound hash; one Ed25519 signature covers the Merkle root bound to
 * (chunk count, field tag, report context).
 */

import { sha256, verify } from "./crypto.js";
import { Reader, concat, lp, u32, u8, utf8 } from "./encoding.js";

export const SEED_LEN = 16;
export const DIGEST_LEN = 32;
export const CONTEXT_LEN = 32;
export const MAX_CHUNKS = 4096;
export const MAX_CHUNK_BYTES = 1 << 20;

export enum FieldTag {
  Location = 0,
  Picture = 1,
  Description = 2,
}

// domain separation: 0x00 content leaf, 0x01 padding leaf, 0x02 interior node
const LEAF_CONTENT = u8(0);
const LEAF_PADDING = u8(1);
const NODE = u8(2);

function childSeed(parent: Uint8Array, childIndex: number): Uint8Array {
  return sha256(parent, u8(childIndex), utf8("seed")).slice(0, SEED_LEN);
}

function leafNonce(leafSeed: Uint8Array): Uint8Array {
  return sha256(leafSeed, utf8("nonce"));
}

function contentLeaf(nonce: Uint8Array, index: number, chunk: Uint8Array): Uint8Array {
  return sha256(LEAF_CONTENT, nonce, u32(index), u32(chunk.length), chunk);
}

function paddingLeaf(index: number): Uint8Array {
  return sha256(LEAF_PADDING, u32(index));
}

/** ceil(log2(n)) with a minimum two-leaf tree. */
export function treeDepth(n: number): number {
  return n > 1 ? Math.max(1, Math.ceil(Math.log2(n))) : 1;
}

/** Walk the seed tree from heap position fromPos down to toPos. */
function deriveSeed(seed: Uint8Array, fromPos: number, toPos: number): Uint8Array {
  const path: number[] = [];
  let p = toPos;
  while (p > fromPos) {
    path.push(p & 1);
    p >>= 1;
  }
  if (p !== fromPos) throw new Error(`position ${toPos} not under ${fromPos}`);
  for (let i = path.length - 1; i >= 0; i--) {
    seed = childSeed(seed, path[i]);
  }
  return seed;
}

/** Minimal disjoint set of subtree heap positions spanning exactly present.
 *
 * Heap numbering: root = 1, children of p are 2p and 2p+1, leaf i sits at
 * heap position numLeaves + i.
 */
export function minimalCover(present: Set<number>, numLeaves: number): number[] {
  const out: number[] = [];
  const rec = (pos: number, lo: number, hi: number): void => {
    let count = 0;
    for (const i of present) if (lo <= i && i < hi) count++;
    if (count === 0) return;
    if (count === hi - lo) {
      out.push(pos);
      return;
    }
    const mid = (lo + hi) >> 1;
    rec(2 * pos, lo, mid);
    rec(2 * pos + 1, mid, hi);
  };
  rec(1, 0, numLeaves);
  return out.sort((a, b) => a - b);
}

function merkleRoot(leaves: Uint8Array[]): Uint8Array {
  let level = leaves;
  while (level.length > 1) {
    const next: Uint8Array[] = [];
    for (let i = 0; i < level.length; i += 2) {
      next.push(sha256(NODE, level[i], level[i + 1]));
    }
    level = next;
  }
  return level[0];
}

function binding(
  root: Uint8Array,
  n: number,
  fieldTag: number,
  context: Uint8Array,
): Uint8Array {
  return sha256(root, u32(n), u8(fieldTag), context);
}

/** Full signature as released to the assigned auditor (root seed included). */
export interface RedactableSignature {
  rootSignature: Uint8Array;
  n: number;
  depth: number;
  rootSeed: Uint8Array;
  signerPk: Uint8Array;
}

export function parseSignature(r: Reader): RedactableSignature {
  const n = r.u32();
  const depth = r.u8();
  const rootSeed = r.take(SEED_LEN);
  const rootSignature = r.lp();
  const signerPk = r.lp();
  return { rootSignature, n, depth, rootSeed, signerPk };
}

export function signatureFromBytes(data: Uint8Array): RedactableSignature {
  const r = new Reader(data);
  const sig = parseSignature(r);
  r.expectDone();
  return sig;
}

export type Slot =
  | { kind: "present"; chunk: Uint8Array }
  | { kind: "redacted"; digest: Uint8Array };

export interface RedactedMessage {
  fieldTag: FieldTag;
  slots: Slot[];
  seedCover: Array<{ pos: number; seed: Uint8Array }>;
  rootSignature: Uint8Array;
  n: number;
  signerPk: Uint8Array;
  context: Uint8Array;
}

export function serializeRedacted(red: RedactedMessage): Uint8Array {
  const out: Uint8Array[] = [u8(red.fieldTag), u32(red.n)];
  for (const slot of red.slots) {
    if (slot.kind === "present") out.push(u8(0), lp(slot.chunk));
    else out.push(u8(1), lp(slot.digest));
  }
  out.push(u32(red.seedCover.length));
  for (const { pos, seed } of red.seedCover) out.push(u32(pos), seed);
  out.push(lp(red.rootSignature), lp(red.signerPk), red.context);
  return concat(...out);
}

export function redactedFromBytes(data: Uint8Array): RedactedMessage {
  const r = new Reader(data);
  const fieldTag = r.u8() as FieldTag;
  const n = r.u32();
  if (n === 0 || n > MAX_CHUNKS) throw new Error(`bad chunk count ${n}`);
  const slots: Slot[] = [];
  for (let i = 0; i < n; i++) {
    const flag = r.u8();
    const payload = r.lp();
    if (flag === 0) slots.push({ kind: "present", chunk: payload });
    else if (flag === 1) slots.push({ kind: "redacted", digest: payload });
    else throw new Error(`bad slot flag ${flag}`);
  }
  const seedCover: Array<{ pos: number; seed: Uint8Array }> = [];
  const coverLen = r.u32();
  for (let i = 0; i < coverLen; i++) {
    seedCover.push({ pos: r.u32(), seed: r.take(SEED_LEN) });
  }
  const rootSignature = r.lp();
  const signerPk = r.lp();
  const context = r.take(CONTEXT_LEN);
  r.expectDone();
  return { fieldTag, slots, seedCover, rootSignature, n, signerPk, context };
}

function leafNoncesFromRoot(rootSeed: Uint8Array, n: number, numLeaves: number): Uint8Array[] {
  const nonces: Uint8Array[] = [];
  for (let i = 0; i < n; i++) {
    nonces.push(leafNonce(deriveSeed(rootSeed, 1, numLeaves + i)));
  }
  return nonces;
}

/** Remove the given chunk indices from an originally signed field.
 *
 * Redacted slots carry the leaf commitment of the removed chunk; the seed
 * cover shrinks to the minimal disjoint subtrees spanning the surviving
 * chunks, so no removed nonce is derivable from the artifact.
 */
export function redactOriginal(
  fieldTag: FieldTag,
  chunks: Uint8Array[],
  context: Uint8Array,
  sig: RedactableSignature,
  toRedact: Iterable<number>,
): RedactedMessage {
  const n = chunks.length;
  if (n === 0) throw new Error("message must have at least one chunk");
  if (sig.n !== n) throw new Error(`signature covers ${sig.n} chunks, message has ${n}`);
  if (context.length !== CONTEXT_LEN) throw new Error("context must be 32 bytes");
  const targets = new Set<number>(toRedact);
  for (const i of targets) {
    if (i < 0 || i >= n) throw new Error(`chunk index ${i} out of range for n=${n}`);
  }
  const numLeaves = 1 << treeDepth(n);
  const nonces = leafNoncesFromRoot(sig.rootSeed, n, numLeaves);
  const present = new Set<number>();
  const slots: Slot[] = [];
  for (let i = 0; i < n; i++) {
    if (targets.has(i)) {
      slots.push({ kind: "redacted", digest: contentLeaf(nonces[i], i, chunks[i]) });
    } else {
      present.add(i);
      slots.push({ kind: "present", chunk: chunks[i] });
    }
  }
  const seedCover = minimalCover(present, numLeaves).map((pos) => ({
    pos,
    seed: deriveSeed(sig.rootSeed, 1, pos),
  }));
  return {
    fieldTag,
    slots,
    seedCover,
    rootSignature: sig.rootSignature,
    n,
    signerPk: sig.signerPk,
    context,
  };
}

function coverSeedFor(red: RedactedMessage, pos: number): Uint8Array {
  for (const { pos: cpos, seed } of red.seedCover) {
    let p = pos;
    while (p > cpos) p >>= 1;
    if (p === cpos) return deriveSeed(seed, cpos, pos);
  }
  throw new Error(`no cover entry spans position ${pos}`);
}

/** Check a redacted artifact against its carried root signature; false on
 * any malformation, never throws. */
export function verifyRedacted(red: RedactedMessage): boolean {
  try {
    const n = red.n;
    if (n < 1 || n > MAX_CHUNKS || red.slots.length !== n) return false;
    if (red.context.length !== CONTEXT_LEN) return false;
    const numLeaves = 1 << treeDepth(n);
    const leaves: Uint8Array[] = [];
    for (let i = 0; i < n; i++) {
      const slot = red.slots[i];
      if (slot.kind === "present") {
        if (slot.chunk.length < 1 || slot.chunk.length > MAX_CHUNK_BYTES) return false;
        const seed = coverSeedFor(red, numLeaves + i);
        leaves.push(contentLeaf(leafNonce(seed), i, slot.chunk));
      } else {
        if (slot.digest.length !== DIGEST_LEN) return false;
        leaves.push(slot.digest);
      }
    }
    for (let i = n; i < numLeaves; i++) leaves.push(paddingLeaf(i));
    const root = merkleRoot(leaves);
    return verify(red.signerPk, red.rootSignature, binding(root, n, red.fieldTag, red.context));
  } catch {
    return false;
  }
}

/** Verify that an unredacted field matches its full signature. */
export function verifyFull(
  fieldTag: FieldTag,
  chunks: Uint8Array[],
  context: Uint8Array,
  sig: RedactableSignature,
): boolean {
  try {
    const n = chunks.length;
    if (n === 0 || sig.n !== n || sig.depth !== treeDepth(n)) return false;
    if (sig.rootSeed.length !== SEED_LEN) return false;
    const numLeaves = 1 << sig.depth;
    const nonces = leafNoncesFromRoot(sig.rootSeed, n, numLeaves);
    const leaves = chunks.map((c, i) => contentLeaf(nonces[i], i, c));
    for (let i = n; i < numLeaves; i++) leaves.push(paddingLeaf(i));
    const root = merkleRoot(leaves);
    return verify(sig.signerPk, sig.rootSignature, binding(root, n, fieldTag, context));
  } catch {
    return false;
  }
}
