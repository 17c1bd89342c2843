import { describe, expect, it } from "vitest";

import { ServiceClient, ServiceError } from "../src/api.js";

function jsonResponse(body: unknown, init: ResponseInit = {}): Response {
  return new Response(JSON.stringify(body), {
    status: 200,
    headers: { "Content-Type": "application/json" },
    ...init,
  });
}

describe("ServiceClient", () => {
  it("fetches joints and unwraps the payload", async () => {
    const client = new ServiceClient("http://svc:1/", async (url) => {
      expect(url).toBe("http://svc:1/joints");
      return jsonResponse({ joints: [{ id: 0, name: "hinge", limits: [-1, 1], initial: 0, axis: [1, 0, 0], center: [0, 0, 0] }] });
    });
    const joints = await client.joints();
    expect(joints).toHaveLength(1);
    expect(joints[0].name).toBe("hinge");
  });

  it("posts repose requests and reads the compute-time header", async () => {
    const client = new ServiceClient("http://svc:1", async (url, init) => {
      expect(url).toBe("http://svc:1/repose");
      expect(init?.method).toBe("POST");
      const body = JSON.parse(String(init?.body));
      expect(body).toEqual({ angles: [0.5], strategy: "mesh-skin" });
      return jsonResponse(
        { strategy: "mesh-skin", clamped: false, angles: [0.5], vertex_count: 1, face_count: 0, mesh: { vertices: [[0, 0, 0]], faces: [] } },
        { headers: { "Content-Type": "application/json", "X-Compute-Ms": "12.5" } },
      );
    });
    const { body, computeMs } = await client.repose([0.5], "mesh-skin");
    expect(body.clamped).toBe(false);
    expect(computeMs).toBe(12.5);
  });

  it("raises ServiceError with the service detail message", async () => {
    const client = new ServiceClient("http://svc:1", async () =>
      new Response(JSON.stringify({ detail: "expected 1 angles, got 2" }), { status: 400 }),
    );
    await expect(client.repose([0.1, 0.2], "mesh-skin")).rejects.toThrowError(ServiceError);
    await expect(client.repose([0.1, 0.2], "mesh-skin")).rejects.toThrow(/expected 1 angles/);
  });
});
