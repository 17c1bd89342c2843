/** Thin HTTP client for the repose service; fetch is injectable for tests. */

import type { JointInfo, MeshData, ReposeResponse, SessionInfo, Strategy } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`service error ${status}: ${detail}`);
  }
}

export class ServiceClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!response.ok) {
      throw new ServiceError(response.status, await response.text());
    }
    return (await response.json()) as T;
  }

  async session(): Promise<SessionInfo> {
    return this.get<SessionInfo>("/session");
  }

  async joints(): Promise<JointInfo[]> {
    const doc = await this.get<{ joints: JointInfo[] }>("/joints");
    return doc.joints;
  }

  async canonicalMesh(): Promise<MeshData> {
    const doc = await this.get<{ mesh: MeshData }>("/mesh");
    return doc.mesh;
  }

  /** POST /repose; returns the payload plus server compute time if reported. */
  async repose(
    angles: number[],
    strategy: Strategy,
  ): Promise<{ body: ReposeResponse; computeMs: number | null }> {
    const response = await this.fetchImpl(`${this.baseUrl}/repose`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ angles, strategy }),
    });
    if (!response.ok) {
      let detail = await response.text();
      try {
        detail = JSON.parse(detail).detail ?? detail;
      } catch {
        // plain-text error body
      }
      throw new ServiceError(response.status, detail);
    }
    const header = response.headers.get("X-Compute-Ms");
    return {
      body: (await response.json()) as ReposeResponse,
      computeMs: header === null ? null : Number(header),
    };
  }
}
