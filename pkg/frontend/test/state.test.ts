import { describe, expect, it } from "vitest";

import {
  MIN_DISPATCH_INTERVAL_MS,
  initialState,
  requestFailed,
  responseArrived,
  sliderChanged,
  strategyChanged,
  timerFired,
  type Effect,
  type Step,
  type ViewerState,
} from "../src/state.js";
import type { JointInfo, MeshData, Strategy } from "../src/types.js";

const JOINTS: JointInfo[] = [
  { id: 0, name: "hinge", axis: [1, 0, 0], center: [0.5, 0.5, 0.5], limits: [-0.3, 2.3], initial: 0 },
  { id: 1, name: "fold", axis: [0, 0, 1], center: [0.1, 0.1, 0.5], limits: [-1.5, 0.0], initial: 0 },
];

const CANONICAL: MeshData = { vertices: [[0, 0, 0]], faces: [] };

/** Mesh payloads encode the angles they were requested with. */
function meshFor(angles: number[]): MeshData {
  return { vertices: [angles.slice()], faces: [] };
}

type ScriptEvent =
  | { at: number; kind: "slider"; joint: number; value: number }
  | { at: number; kind: "strategy"; strategy: Strategy };

interface PostRecord {
  at: number;
  seq: number;
  angles: number[];
  strategy: Strategy;
}

/**
 * Deterministic mocked service: interprets effects, delivers responses after
 * a per-request latency, and drives timers, all on a virtual clock.
 */
class MockHarness {
  state: ViewerState;
  posts: PostRecord[] = [];
  private queue: { at: number; run: (now: number) => Step }[] = [];
  private now = 0;

  constructor(
    private latencyFor: (post: PostRecord) => number,
    private failFor: (post: PostRecord) => { status: number; detail: string } | null = () => null,
  ) {
    this.state = initialState(JOINTS, CANONICAL);
  }

  private interpret(effects: Effect[], issuedAt: number) {
    for (const effect of effects) {
      if (effect.kind === "arm-timer") {
        this.queue.push({ at: issuedAt + effect.delayMs, run: (now) => timerFired(this.state, now) });
      } else {
        const post: PostRecord = { at: issuedAt, seq: effect.seq, angles: effect.angles, strategy: effect.strategy };
        this.posts.push(post);
        const failure = this.failFor(post);
        const arriveAt = issuedAt + this.latencyFor(post);
        this.queue.push({
          at: arriveAt,
          run: (now) =>
            failure
              ? requestFailed(this.state, post.seq, post.strategy, failure.status, failure.detail, now)
              : responseArrived(this.state, post.seq, post.strategy, meshFor(post.angles), post.angles, 1.0, now),
        });
      }
    }
  }

  private apply(step: Step, at: number) {
    this.state = step.state;
    this.interpret(step.effects, at);
  }

  private drainUntil(t: number) {
    for (;;) {
      this.queue.sort((a, b) => a.at - b.at);
      const next = this.queue[0];
      if (!next || next.at > t) break;
      this.queue.shift();
      this.now = next.at;
      this.apply(next.run(this.now), this.now);
    }
    this.now = t;
  }

  run(script: ScriptEvent[], settleMs = 5_000): ViewerState {
    for (const event of [...script].sort((a, b) => a.at - b.at)) {
      this.drainUntil(event.at);
      if (event.kind === "slider") {
        this.apply(sliderChanged(this.state, event.joint, event.value, event.at), event.at);
      } else {
        this.apply(strategyChanged(this.state, event.strategy, event.at), event.at);
      }
    }
    const last = script.length ? script[script.length - 1].at : 0;
    this.drainUntil(last + settleMs);
    return this.state;
  }
}

describe("slider scrub with a mocked service", () => {
  const scrub: ScriptEvent[] = Array.from({ length: 12 }, (_, i) => ({
    at: i * 30,
    kind: "slider" as const,
    joint: 0,
    value: 0.15 * (i + 1),
  }));
  const finalValue = 0.15 * 12;

  it("ends displaying the mesh for the final slider value", () => {
    const harness = new MockHarness(() => 120);
    const final = harness.run(scrub);
    expect(final.displayed.mesh.vertices[0][0]).toBeCloseTo(finalValue, 12);
    expect(final.displayed.angles[0]).toBeCloseTo(finalValue, 12);
    expect(final.pendingDirty).toBe(false);
    expect(Object.keys(final.inFlight)).toHaveLength(0);
  });

  it("debounces to at most one request per 200ms", () => {
    const harness = new MockHarness(() => 10);
    harness.run(scrub);
    const times = harness.posts.map((p) => p.at);
    for (let i = 1; i < times.length; i++) {
      expect(times[i] - times[i - 1]).toBeGreaterThanOrEqual(MIN_DISPATCH_INTERVAL_MS);
    }
    // far fewer posts than slider events
    expect(harness.posts.length).toBeLessThan(scrub.length);
  });

  it("replaying the recorded interaction yields the same final state", () => {
    const a = new MockHarness(() => 75).run(scrub);
    const b = new MockHarness(() => 75).run(scrub);
    expect(JSON.stringify(a)).toBe(JSON.stringify(b));
  });
});

describe("sequence-number staleness", () => {
  it("discards a slow earlier response that arrives after a newer one", () => {
    // mesh-skin request is slow; a cloud-recon request issued later lands first
    const harness = new MockHarness((post) => (post.strategy === "mesh-skin" ? 900 : 40));
    const final = harness.run([
      { at: 0, kind: "slider", joint: 0, value: 1.0 },
      { at: 250, kind: "strategy", strategy: "cloud-recon" },
    ]);
    expect(harness.posts.map((p) => p.strategy)).toEqual(["mesh-skin", "cloud-recon"]);
    // the late mesh-skin payload (seq 1) must not replace the newer one (seq 2)
    expect(final.displayed.seq).toBe(2);
    expect(final.displayed.strategy).toBe("cloud-recon");
  });

  it("accepts in-order responses normally", () => {
    const harness = new MockHarness(() => 20);
    const final = harness.run([{ at: 0, kind: "slider", joint: 0, value: 0.5 }]);
    expect(final.displayed.seq).toBe(1);
    expect(final.displayed.mesh.vertices[0][0]).toBeCloseTo(0.5, 12);
  });
});

describe("slider limits", () => {
  it("clamps slider input to the fetched joint limits", () => {
    const state = initialState(JOINTS, CANONICAL);
    const over = sliderChanged(state, 0, 99, 0);
    expect(over.state.sliders[0]).toBe(2.3);
    const under = sliderChanged(over.state, 1, -99, 300);
    expect(under.state.sliders[1]).toBe(-1.5);
  });

  it("never issues a request with angles outside slider bounds", () => {
    const harness = new MockHarness(() => 15);
    harness.run([
      { at: 0, kind: "slider", joint: 0, value: 10 },
      { at: 300, kind: "slider", joint: 1, value: -7 },
      { at: 600, kind: "slider", joint: 0, value: -5 },
    ]);
    expect(harness.posts.length).toBeGreaterThan(0);
    for (const post of harness.posts) {
      post.angles.forEach((angle, j) => {
        expect(angle).toBeGreaterThanOrEqual(JOINTS[j].limits[0]);
        expect(angle).toBeLessThanOrEqual(JOINTS[j].limits[1]);
      });
    }
  });
});

describe("failure handling", () => {
  it("shows 4xx inline on the offending slider and recovers", () => {
    let failOnce = true;
    const harness = new MockHarness(
      () => 10,
      () => {
        if (failOnce) {
          failOnce = false;
          return { status: 400, detail: "bad angles" };
        }
        return null;
      },
    );
    const final = harness.run([
      { at: 0, kind: "slider", joint: 0, value: 0.4 },
      { at: 400, kind: "slider", joint: 0, value: 0.9 },
    ]);
    // second request succeeded, error cleared by the later slider change
    expect(final.displayed.mesh.vertices[0][0]).toBeCloseTo(0.9, 12);
    expect(final.sliderErrors[0]).toBeUndefined();
  });

  it("keeps the inline error when no further interaction happens", () => {
    const harness = new MockHarness(
      () => 10,
      () => ({ status: 400, detail: "bad angles" }),
    );
    const final = harness.run([{ at: 0, kind: "slider", joint: 0, value: 0.4 }]);
    expect(final.sliderErrors[0]).toBe("bad angles");
    expect(final.displayed.seq).toBe(0); // canonical mesh still shown
  });

  it("5xx raises the banner", () => {
    const harness = new MockHarness(
      () => 10,
      () => ({ status: 500, detail: "boom" }),
    );
    const final = harness.run([{ at: 0, kind: "slider", joint: 0, value: 0.4 }]);
    expect(final.banner).toBe("boom");
  });
});

describe("state machine basics", () => {
  it("strategy toggle re-requests with current angles", () => {
    const harness = new MockHarness(() => 10);
    const final = harness.run([
      { at: 0, kind: "slider", joint: 0, value: 1.2 },
      { at: 300, kind: "strategy", strategy: "cloud-recon" },
    ]);
    expect(harness.posts).toHaveLength(2);
    expect(harness.posts[1].strategy).toBe("cloud-recon");
    expect(harness.posts[1].angles[0]).toBeCloseTo(1.2, 12);
    expect(final.displayed.strategy).toBe("cloud-recon");
  });

  it("no request before any interaction", () => {
    const harness = new MockHarness(() => 10);
    const final = harness.run([]);
    expect(harness.posts).toHaveLength(0);
    expect(final.displayed.strategy).toBe("canonical");
  });

  it("selecting the same strategy again is a no-op", () => {
    const state = initialState(JOINTS, CANONICAL);
    const step = strategyChanged(state, "mesh-skin", 0);
    expect(step.effects).toHaveLength(0);
    expect(step.state).toBe(state);
  });
});
