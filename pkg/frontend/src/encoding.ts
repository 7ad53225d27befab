/** Little-endian length-prefixed binary helpers, wire-compatible with the platform. */

export function concat(...parts: Uint8Array[]): Uint8Array {
  let total = 0;
  for (const p of parts) total += p.length;
  const out = new Uint8Array(total);
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

export function u8(x: number): Uint8Array {
  return Uint8Array.of(x & 0xff);
}

export function u16(x: number): Uint8Array {
  const out = new Uint8Array(2);
  new DataView(out.buffer).setUint16(0, x, true);
  return out;
}

export function u32(x: number): Uint8Array {
  const out = new Uint8Array(4);
  new DataView(out.buffer).setUint32(0, x >>> 0, true);
  return out;
}

export function i32(x: number): Uint8Array {
  const out = new Uint8Array(4);
  new DataView(out.buffer).setInt32(0, x, true);
  return out;
}

/** u32 length prefix followed by the raw bytes. */
export function lp(b: Uint8Array): Uint8Array {
  return concat(u32(b.length), b);
}

export function utf8(s: string): Uint8Array {
  return new TextEncoder().encode(s);
}

export function fromHex(hex: string): Uint8Array {
  if (hex.length % 2 !== 0) throw new DecodeError("odd-length hex string");
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    const byte = Number.parseInt(hex.slice(2 * i, 2 * i + 2), 16);
    if (Number.isNaN(byte)) throw new DecodeError("bad hex digit");
    out[i] = byte;
  }
  return out;
}

export function toHex(b: Uint8Array): string {
  return Array.from(b, (x) => x.toString(16).padStart(2, "0")).join("");
}

export function bytesEqual(a: Uint8Array, b: Uint8Array): boolean {
  if (a.length !== b.length) return false;
  for (let i = 0; i < a.length; i++) if (a[i] !== b[i]) return false;
  return true;
}

export class DecodeError extends Error {}

/** Cursor over a byte buffer; every read checks bounds. */
export class Reader {
  private pos = 0;

  constructor(private data: Uint8Array) {}

  take(n: number): Uint8Array {
    if (n < 0 || this.pos + n > this.data.length) {
      throw new DecodeError(`short read: need ${n} bytes at offset ${this.pos}`);
    }
    const out = this.data.slice(this.pos, this.pos + n);
    this.pos += n;
    return out;
  }

  u8(): number {
    return this.take(1)[0];
  }

  u16(): number {
    const b = this.take(2);
    return new DataView(b.buffer, b.byteOffset).getUint16(0, true);
  }

  u32(): number {
    const b = this.take(4);
    return new DataView(b.buffer, b.byteOffset).getUint32(0, true);
  }

  i32(): number {
    const b = this.take(4);
    return new DataView(b.buffer, b.byteOffset).getInt32(0, true);
  }

  lp(): Uint8Array {
    return this.take(this.u32());
  }

  done(): boolean {
    return this.pos === this.data.length;
  }

  expectDone(): void {
    if (!this.done()) {
      throw new DecodeError(`${this.data.length - this.pos} trailing bytes`);
    }
  }
}
