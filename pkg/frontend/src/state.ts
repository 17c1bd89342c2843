/**
 * Pure viewer state machine.
 *
 * Every transition takes (state, event payload, now) and returns the next
 * state plus effects (HTTP posts to issue, timers to arm). No IO happens
 * here, so a recorded interaction replays to the identical final state.
 *
 * Request policy: at most one in-flight repose per strategy, dispatches
 * rate-limited to one per MIN_DISPATCH_INTERVAL_MS (5/s), stale responses
 * discarded by sequence number.
 */

import type { JointInfo, MeshData, Strategy } from "./types.js";

export const MIN_DISPATCH_INTERVAL_MS = 200;

export interface DisplayedMesh {
  seq: number;
  mesh: MeshData;
  angles: number[];
  strategy: Strategy | "canonical";
}

export interface ViewerState {
  joints: JointInfo[];
  sliders: number[];
  strategy: Strategy;
  nextSeq: number;
  inFlight: Partial<Record<Strategy, number>>; // strategy -> seq
  displayed: DisplayedMesh;
  pendingDirty: boolean;
  lastDispatchAt: number;
  timerArmed: boolean;
  lastComputeMs: number | null;
  banner: string | null;
  sliderErrors: Record<number, string>;
  lastChangedJoint: number | null;
}

export type Effect =
  | { kind: "post"; seq: number; angles: number[]; strategy: Strategy }
  | { kind: "arm-timer"; delayMs: number };

export interface Step {
  state: ViewerState;
  effects: Effect[];
}

export function clampToLimits(joint: JointInfo, value: number): number {
  return Math.min(Math.max(value, joint.limits[0]), joint.limits[1]);
}

export function initialState(joints: JointInfo[], canonicalMesh: MeshData): ViewerState {
  return {
    joints,
    sliders: joints.map((j) => j.initial),
    strategy: "mesh-skin",
    nextSeq: 1,
    inFlight: {},
    displayed: {
      seq: 0,
      mesh: canonicalMesh,
      angles: joints.map((j) => j.initial),
      strategy: "canonical",
    },
    pendingDirty: false,
    lastDispatchAt: Number.NEGATIVE_INFINITY,
    timerArmed: false,
    lastComputeMs: null,
    banner: null,
    sliderErrors: {},
    lastChangedJoint: null,
  };
}

function maybeDispatch(state: ViewerState, now: number): Step {
  if (!state.pendingDirty) {
    return { state, effects: [] };
  }
  if (state.inFlight[state.strategy] !== undefined) {
    // the response handler re-enters here once the slot frees up
    return { state, effects: [] };
  }
  const wait = state.lastDispatchAt + MIN_DISPATCH_INTERVAL_MS - now;
  if (wait > 0) {
    if (state.timerArmed) {
      return { state, effects: [] };
    }
    return {
      state: { ...state, timerArmed: true },
      effects: [{ kind: "arm-timer", delayMs: wait }],
    };
  }
  const seq = state.nextSeq;
  const angles = [...state.sliders];
  return {
    state: {
      ...state,
      nextSeq: seq + 1,
      inFlight: { ...state.inFlight, [state.strategy]: seq },
      pendingDirty: false,
      lastDispatchAt: now,
    },
    effects: [{ kind: "post", seq, angles, strategy: state.strategy }],
  };
}

export function sessionLoadFailed(state: ViewerState, message: string): Step {
  return { state: { ...state, banner: message }, effects: [] };
}

export function sliderChanged(state: ViewerState, joint: number, value: number, now: number): Step {
  if (joint < 0 || joint >= state.joints.length) {
    return { state, effects: [] };
  }
  const clamped = clampToLimits(state.joints[joint], value);
  const sliders = [...state.sliders];
  sliders[joint] = clamped;
  const sliderErrors = { ...state.sliderErrors };
  delete sliderErrors[joint];
  return maybeDispatch(
    { ...state, sliders, pendingDirty: true, sliderErrors, lastChangedJoint: joint },
    now,
  );
}

export function strategyChanged(state: ViewerState, strategy: Strategy, now: number): Step {
  if (strategy === state.strategy) {
    return { state, effects: [] };
  }
  return maybeDispatch({ ...state, strategy, pendingDirty: true }, now);
}

export function timerFired(state: ViewerState, now: number): Step {
  return maybeDispatch({ ...state, timerArmed: false }, now);
}

export function responseArrived(
  state: ViewerState,
  seq: number,
  strategy: Strategy,
  mesh: MeshData,
  angles: number[],
  computeMs: number | null,
  now: number,
): Step {
  let next = state;
  if (state.inFlight[strategy] === seq) {
    const inFlight = { ...state.inFlight };
    delete inFlight[strategy];
    next = { ...next, inFlight };
  }
  if (seq > state.displayed.seq) {
    next = {
      ...next,
      displayed: { seq, mesh, angles, strategy },
      lastComputeMs: computeMs,
    };
  }
  // stale responses (seq <= displayed.seq) are dropped on the floor
  return maybeDispatch(next, now);
}

export function requestFailed(
  state: ViewerState,
  seq: number,
  strategy: Strategy,
  status: number,
  detail: string,
  now: number,
): Step {
  let next = state;
  if (state.inFlight[strategy] === seq) {
    const inFlight = { ...state.inFlight };
    delete inFlight[strategy];
    next = { ...next, inFlight };
  }
  if (status >= 400 && status < 500 && state.lastChangedJoint !== null) {
    next = {
      ...next,
      sliderErrors: { ...next.sliderErrors, [state.lastChangedJoint]: detail },
    };
  } else if (status >= 500 || status === 0) {
    next = { ...next, banner: detail };
  }
  return maybeDispatch(next, now);
}
