import { readFileSync } from "node:fs";

export function loadFixtures(): Record<string, any> {
  const path = new URL("./fixtures.json", import.meta.url);
  return JSON.parse(readFileSync(path, "utf-8"));
}

export function hex(h: string): Uint8Array {
  return Uint8Array.from(Buffer.from(h, "hex"));
}

export function toHexStr(b: Uint8Array): string {
  return Buffer.from(b).toString("hex");
}
