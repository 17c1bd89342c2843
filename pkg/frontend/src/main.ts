/** DOM wiring: sliders, strategy toggle, banner, and effect interpretation. */

import { ServiceClient, ServiceError } from "./api.js";
import {
  initialState,
  responseArrived,
  requestFailed,
  sliderChanged,
  strategyChanged,
  timerFired,
  type Effect,
  type ViewerState,
} from "./state.js";
import type { Strategy } from "./types.js";
import { MeshViewer } from "./viewer.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "http://127.0.0.1:8008";
const client = new ServiceClient(baseUrl);

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const panel = document.getElementById("controls") as HTMLDivElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const statusLine = document.getElementById("status") as HTMLDivElement;

let viewer: MeshViewer | null = null;
let state: ViewerState | null = null;
let lastRenderedSeq = -1;

function showBanner(message: string, withRetry: boolean) {
  banner.innerHTML = "";
  banner.textContent = message;
  banner.style.display = "block";
  if (withRetry) {
    const retry = document.createElement("button");
    retry.textContent = "retry";
    retry.addEventListener("click", () => {
      banner.style.display = "none";
      void boot();
    });
    banner.appendChild(retry);
  }
}

function runEffects(effects: Effect[]) {
  for (const effect of effects) {
    if (effect.kind === "arm-timer") {
      window.setTimeout(() => {
        if (!state) return;
        apply(timerFired(state, performance.now()));
      }, effect.delayMs);
    } else {
      const { seq, angles, strategy } = effect;
      client
        .repose(angles, strategy)
        .then(({ body, computeMs }) => {
          if (!state) return;
          apply(
            responseArrived(state, seq, strategy, body.mesh, body.angles, computeMs, performance.now()),
          );
        })
        .catch((err: unknown) => {
          if (!state) return;
          const status = err instanceof ServiceError ? err.status : 0;
          const detail = err instanceof Error ? err.message : String(err);
          apply(requestFailed(state, seq, strategy, status, detail, performance.now()));
        });
    }
  }
}

function apply(step: { state: ViewerState; effects: Effect[] }) {
  state = step.state;
  render(state);
  runEffects(step.effects);
}

function render(s: ViewerState) {
  if (viewer && s.displayed.seq !== lastRenderedSeq) {
    viewer.setMesh(s.displayed.mesh);
    lastRenderedSeq = s.displayed.seq;
  }
  s.joints.forEach((joint, i) => {
    const slider = document.getElementById(`slider-${i}`) as HTMLInputElement | null;
    const label = document.getElementById(`value-${i}`);
    const error = document.getElementById(`error-${i}`);
    if (slider && Number(slider.value) !== s.sliders[i]) slider.value = String(s.sliders[i]);
    if (label) label.textContent = s.sliders[i].toFixed(2);
    if (error) {
      error.textContent = s.sliderErrors[i] ?? "";
      error.style.display = s.sliderErrors[i] ? "inline" : "none";
    }
  });
  const timing = s.lastComputeMs !== null ? ` · ${s.lastComputeMs.toFixed(0)} ms` : "";
  statusLine.textContent = `${s.displayed.strategy} · mesh #${s.displayed.seq}${timing}`;
  if (s.banner) showBanner(s.banner, false);
}

function buildControls(s: ViewerState) {
  panel.innerHTML = "";
  s.joints.forEach((joint, i) => {
    const row = document.createElement("div");
    row.className = "joint-row";
    const name = document.createElement("label");
    name.textContent = joint.name;
    const slider = document.createElement("input");
    slider.type = "range";
    slider.id = `slider-${i}`;
    slider.min = String(joint.limits[0]);
    slider.max = String(joint.limits[1]);
    slider.step = "0.01";
    slider.value = String(joint.initial);
    slider.addEventListener("input", () => {
      if (!state) return;
      apply(sliderChanged(state, i, Number(slider.value), performance.now()));
    });
    const value = document.createElement("span");
    value.id = `value-${i}`;
    value.textContent = joint.initial.toFixed(2);
    const error = document.createElement("span");
    error.id = `error-${i}`;
    error.className = "slider-error";
    row.append(name, slider, value, error);
    panel.appendChild(row);
  });

  const toggleRow = document.createElement("div");
  toggleRow.className = "joint-row";
  for (const strategy of ["mesh-skin", "cloud-recon"] as Strategy[]) {
    const label = document.createElement("label");
    const radio = document.createElement("input");
    radio.type = "radio";
    radio.name = "strategy";
    radio.value = strategy;
    radio.checked = strategy === s.strategy;
    radio.addEventListener("change", () => {
      if (!state) return;
      apply(strategyChanged(state, strategy, performance.now()));
    });
    label.append(radio, document.createTextNode(` ${strategy}`));
    toggleRow.appendChild(label);
  }
  panel.appendChild(toggleRow);
}

async function boot() {
  try {
    const [joints, mesh] = await Promise.all([client.joints(), client.canonicalMesh()]);
    state = null;
    viewer = viewer ?? new MeshViewer(canvas);
    const s = initialState(joints, mesh);
    buildControls(s);
    lastRenderedSeq = -1;
    apply({ state: s, effects: [] });
  } catch (err) {
    showBanner(`cannot reach repose service at ${baseUrl}: ${String(err)}`, true);
  }
}

void boot();
