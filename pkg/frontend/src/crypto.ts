/** SHA-256 and Ed25519 via node:crypto, matching the platform's key scheme. */

import {
  createHash,
  createPrivateKey,
  createPublicKey,
  sign as cryptoSign,
  verify as cryptoVerify,
  type KeyObject,
} from "node:crypto";

import { concat, utf8 } from "./encoding.js";

export function sha256(...parts: Uint8Array[]): Uint8Array {
  const h = createHash("sha256");
  for (const p of parts) h.update(p);
  return new Uint8Array(h.digest());
}

// DER wrappers for raw Ed25519 key material (RFC 8410)
const PKCS8_PREFIX = Uint8Array.from(
  Buffer.from("302e020100300506032b657004220420", "hex"),
);
const SPKI_PREFIX = Uint8Array.from(
  Buffer.from("302a300506032b6570032100", "hex"),
);

export class SigningKey {
  readonly publicBytes: Uint8Array;
  private priv: KeyObject;

  constructor(seed32: Uint8Array) {
    if (seed32.length !== 32) throw new Error("seed must be 32 bytes");
    this.priv = createPrivateKey({
      key: Buffer.from(concat(PKCS8_PREFIX, seed32)),
      format: "der",
      type: "pkcs8",
    });
    const spki = createPublicKey(this.priv).export({ format: "der", type: "spki" });
    this.publicBytes = new Uint8Array(spki.subarray(spki.length - 32));
  }

  sign(message: Uint8Array): Uint8Array {
    return new Uint8Array(cryptoSign(null, message, this.priv));
  }
}

/** Deterministic keypair from an arbitrary-length seed, mirroring the CLI's
 * keygen: the Ed25519 private seed is SHA-256("acrp-keygen" || rngSeed). */
export function keygen(rngSeed: Uint8Array): SigningKey {
  return new SigningKey(sha256(utf8("acrp-keygen"), rngSeed));
}

export function verify(
  publicKey: Uint8Array,
  signature: Uint8Array,
  message: Uint8Array,
): boolean {
  if (publicKey.length !== 32) return false;
  try {
    const pub = createPublicKey({
      key: Buffer.from(concat(SPKI_PREFIX, publicKey)),
      format: "der",
      type: "spki",
    });
    return cryptoVerify(null, message, pub, signature);
  } catch {
    return false;
  }
}
