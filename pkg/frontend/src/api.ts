/** Typed client for the gateway HTTP/JSON API.
 *
 * The fetch implementation is injectable so tests (and non-browser hosts)
 * can stub the network.  Binary fields travel base64; digests lowercase hex.
 */

import { SigningKey } from "./crypto.js";
import { fromHex, toHex } from "./encoding.js";
import { Transaction, serializeTransaction } from "./tx.js";

export type FetchLike = (
  url: string,
  init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: string;
  },
) => Promise<{
  status: number;
  json(): Promise<unknown>;
  arrayBuffer(): Promise<ArrayBuffer>;
}>;

export class GatewayError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`gateway returned ${status}: ${detail}`);
  }
}

export interface ReportView {
  report_id: string;
  phase: string;
  citizen_pk: string;
  auditor_pk: string | null;
  storage_key: string | null;
  report_type: number | null;
  location: [number, number] | null;
  artifacts: string[] | null;
  artifacts_b64?: string[];
  redacted: Record<string, number[]> | null;
  commit_height: number | null;
  announce_height: number;
  [key: string]: unknown;
}

export interface ChainHead {
  height: number;
  block_hash: string;
  chain_id: string;
}

function b64encode(data: Uint8Array): string {
  return Buffer.from(data).toString("base64");
}

export class GatewayClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request(path: string, init?: Parameters<FetchLike>[1]): Promise<unknown> {
    const res = await this.fetchImpl(this.baseUrl + path, init);
    const body = (await res.json()) as { detail?: unknown };
    if (res.status >= 400) {
      throw new GatewayError(res.status, String(body?.detail ?? "unknown error"));
    }
    return body;
  }

  async chainHead(): Promise<ChainHead> {
    return (await this.request("/v1/chain/head")) as ChainHead;
  }

  async listReports(filter: { phase?: string; type?: number } = {}): Promise<ReportView[]> {
    const params = new URLSearchParams();
    if (filter.phase !== undefined) params.set("phase", filter.phase);
    if (filter.type !== undefined) params.set("type", String(filter.type));
    params.set("page_size", "1000");
    const body = (await this.request(`/v1/reports?${params}`)) as { reports: ReportView[] };
    return body.reports;
  }

  async getReport(reportId: Uint8Array): Promise<ReportView> {
    return (await this.request(`/v1/reports/${toHex(reportId)}`)) as ReportView;
  }

  /** Reports committed and awaiting this auditor's decision. */
  async pendingForAuditor(auditorPk: Uint8Array): Promise<ReportView[]> {
    const pkHex = toHex(auditorPk);
    const committed = await this.listReports({ phase: "Committed" });
    return committed.filter((r) => r.auditor_pk === pkHex);
  }

  /** Fetch an access-controlled original blob, authenticating as the
   * assigned auditor by signing the storage key. */
  async fetchOriginal(storageKey: Uint8Array, sk: SigningKey): Promise<Uint8Array> {
    const res = await this.fetchImpl(`${this.baseUrl}/v1/storage/${toHex(storageKey)}`, {
      headers: {
        "x-acrp-pk": toHex(sk.publicBytes),
        "x-acrp-signature": toHex(sk.sign(storageKey)),
      },
    });
    if (res.status >= 400) {
      let detail = "unknown error";
      try {
        detail = String(((await res.json()) as { detail?: unknown })?.detail ?? detail);
      } catch {
        // non-JSON error body
      }
      throw new GatewayError(res.status, detail);
    }
    return new Uint8Array(await res.arrayBuffer());
  }

  async submitAuditDecision(reportId: Uint8Array, tx: Transaction): Promise<Uint8Array> {
    const body = (await this.request(`/v1/reports/${toHex(reportId)}/audit`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ tx: b64encode(serializeTransaction(tx)) }),
    })) as { tx_ref: string };
    return fromHex(body.tx_ref);
  }

  async txStatus(ref: Uint8Array): Promise<{ status: string; height?: number }> {
    return (await this.request(`/v1/tx/${toHex(ref)}`)) as { status: string; height?: number };
  }
}
