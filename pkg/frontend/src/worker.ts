/// <reference lib="webworker" />
/**
 * Render worker: owns the parsed model and turns {lu, lv, renderScale}
 * messages into RGBA frames, keeping the UI thread free during drags.
 */

import { parseModel, RelightModel } from "./model.js";
import { renderFrame } from "./render.js";

let model: RelightModel | null = null;

interface LoadMsg {
  kind: "load";
  buffer: ArrayBuffer;
}

interface RenderMsg {
  kind: "render";
  lu: number;
  lv: number;
  renderScale: number;
  token: number;
}

self.onmessage = (ev: MessageEvent<LoadMsg | RenderMsg>) => {
  const msg = ev.data;
  try {
    if (msg.kind === "load") {
      model = parseModel(msg.buffer);
      self.postMessage({
        kind: "loaded",
        width: model.width,
        height: model.height,
        b: model.b,
        hf: model.hf,
        sigma: model.sigma,
      });
      return;
    }
    if (msg.kind === "render") {
      if (!model) throw new Error("no model loaded");
      const frame = renderFrame(model, msg.lu, msg.lv, msg.renderScale);
      self.postMessage(
        {
          kind: "frame",
          token: msg.token,
          width: frame.width,
          height: frame.height,
          rgba: frame.rgba.buffer,
        },
        { transfer: [frame.rgba.buffer] },
      );
    }
  } catch (err) {
    self.postMessage({ kind: "error", message: String(err) });
  }
};
