/**
 * Page wiring: model loading (file picker or ?model= URL), the hemisphere
 * light widget, and the canvas that shows worker-rendered frames.
 */

import { ModelFormatError, parseModel } from "./model.js";
import {
  initialState,
  onDragEnd,
  onDragMove,
  onDragStart,
  onLightSet,
  onRenderDone,
  pointerToLight,
  ViewerState,
} from "./viewer.js";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const widget = document.getElementById("light-widget") as HTMLCanvasElement;
const fileInput = document.getElementById("model-file") as HTMLInputElement;
const statusEl = document.getElementById("status") as HTMLElement;

const worker = new Worker(new URL("./worker.js", import.meta.url), { type: "module" });
let state: ViewerState = initialState(0.5);
let token = 0;
let modelDims: { width: number; height: number } | null = null;

function setStatus(text: string, isError = false) {
  statusEl.textContent = text;
  statusEl.className = isError ? "error" : "";
}

function pump() {
  if (state.inFlight) {
    token += 1;
    worker.postMessage({ kind: "render", ...state.inFlight, token });
  }
  drawWidget();
}

worker.onmessage = (ev: MessageEvent) => {
  const msg = ev.data;
  if (msg.kind === "loaded") {
    modelDims = { width: msg.width, height: msg.height };
    setStatus(
      `model ${msg.width}x${msg.height}, B=${msg.b}, Hf=${msg.hf}, sigma=${msg.sigma.toFixed(2)}`,
    );
    state = onLightSet(initialState(0.5), { lu: 0, lv: 0 });
    pump();
    return;
  }
  if (msg.kind === "frame") {
    if (msg.token === token && modelDims) {
      canvas.width = modelDims.width;
      canvas.height = modelDims.height;
      const ctx = canvas.getContext("2d")!;
      const img = new ImageData(new Uint8ClampedArray(msg.rgba), msg.width, msg.height);
      if (msg.width === canvas.width) {
        ctx.putImageData(img, 0, 0);
      } else {
        // interactive downsampled frame: stretch to full size
        const off = new OffscreenCanvas(msg.width, msg.height);
        off.getContext("2d")!.putImageData(img, 0, 0);
        ctx.imageSmoothingEnabled = false;
        ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
      }
    }
    state = onRenderDone(state);
    pump();
    return;
  }
  if (msg.kind === "error") {
    setStatus(msg.message, true);
    state = onRenderDone(state);
  }
};

async function loadBuffer(buffer: ArrayBuffer, label: string) {
  try {
    parseModel(buffer.slice(0)); // validate on the UI thread for a crisp error
  } catch (err) {
    if (err instanceof ModelFormatError) {
      setStatus(`cannot load ${label}: ${err.message}`, true);
      return;
    }
    throw err;
  }
  worker.postMessage({ kind: "load", buffer }, { transfer: [buffer] });
  setStatus(`loading ${label}...`);
}

fileInput.addEventListener("change", async () => {
  const f = fileInput.files?.[0];
  if (f) await loadBuffer(await f.arrayBuffer(), f.name);
});

const params = new URLSearchParams(window.location.search);
const modelUrl = params.get("model");
if (modelUrl) {
  fetch(modelUrl)
    .then(async (r) => {
      if (!r.ok) throw new Error(`HTTP ${r.status}`);
      await loadBuffer(await r.arrayBuffer(), modelUrl);
    })
    .catch((err) => setStatus(`fetch failed: ${err}`, true));
}

// -- hemisphere widget --------------------------------------------------------

function drawWidget() {
  const ctx = widget.getContext("2d")!;
  const s = widget.width;
  const c = s / 2;
  const r = c - 2;
  ctx.clearRect(0, 0, s, s);
  const grad = ctx.createRadialGradient(c - r / 3, c - r / 3, r / 8, c, c, r);
  grad.addColorStop(0, "#e8e8f0");
  grad.addColorStop(1, "#5a5a72");
  ctx.fillStyle = grad;
  ctx.beginPath();
  ctx.arc(c, c, r, 0, 2 * Math.PI);
  ctx.fill();
  ctx.strokeStyle = "#30303c";
  ctx.stroke();
  const { lu, lv } = state.currentLight;
  ctx.fillStyle = "#ffcc33";
  ctx.beginPath();
  ctx.arc(c + lu * r, c + lv * r, 6, 0, 2 * Math.PI);
  ctx.fill();
  ctx.strokeStyle = "#7a5c00";
  ctx.stroke();
}

function widgetLight(ev: PointerEvent) {
  const rect = widget.getBoundingClientRect();
  const scale = widget.width / rect.width;
  const x = (ev.clientX - rect.left) * scale;
  const y = (ev.clientY - rect.top) * scale;
  return pointerToLight(x, y, widget.width / 2, widget.height / 2, widget.width / 2 - 2);
}

widget.addEventListener("pointerdown", (ev) => {
  widget.setPointerCapture(ev.pointerId);
  const wasIdle = state.inFlight === null;
  state = onDragStart(state, widgetLight(ev));
  if (wasIdle) pump();
  else drawWidget();
});

widget.addEventListener("pointermove", (ev) => {
  if (!state.dragging) return;
  const wasIdle = state.inFlight === null;
  state = onDragMove(state, widgetLight(ev));
  if (wasIdle) pump();
  else drawWidget();
});

widget.addEventListener("pointerup", (ev) => {
  widget.releasePointerCapture(ev.pointerId);
  const wasIdle = state.inFlight === null;
  state = onDragEnd(state);
  if (wasIdle) pump();
  else drawWidget();
});

drawWidget();
setStatus("pick an .rtim model file (or pass ?model=URL)");
