/**
 * CPU relighting of a parsed model.
 *
 * The Fourier embedding depends only on the light, so it is computed once per
 * frame and shared by every pixel; per-pixel work is one pass through the
 * small MLP plus the YUV->RGB composition. At renderScale < 1 the k-grid and
 * chroma planes are sampled with a nearest-pixel stride.
 */

import { N_HIDDEN, RelightModel } from "./model.js";

export interface RenderedFrame {
  width: number;
  height: number;
  /** RGBA, fully opaque; ready for ImageData */
  rgba: Uint8ClampedArray;
}

const KR = 0.299;
const KG = 0.587;
const KB = 0.114;
const KU = 0.492;
const KV = 0.877;

function clamp01(x: number): number {
  return x < 0 ? 0 : x > 1 ? 1 : x;
}

/** Mirrors the pipeline's BT.601 inverse, including the clamping. */
export function yuvToRgb(y: number, u: number, v: number): [number, number, number] {
  const b = y + u / KU;
  const r = y + v / KV;
  const g = y + (-KR * (r - y) - KB * (b - y)) / KG;
  return [clamp01(r), clamp01(g), clamp01(b)];
}

/** (cos(B l_uv), sin(B l_uv)) for the model's Fourier matrix. */
export function fourierEmbed(model: RelightModel, lu: number, lv: number): Float64Array {
  const hf = model.hf;
  const out = new Float64Array(2 * hf);
  for (let i = 0; i < hf; i++) {
    const s = model.fourier[2 * i] * lu + model.fourier[2 * i + 1] * lv;
    out[i] = Math.cos(s);
    out[hf + i] = Math.sin(s);
  }
  return out;
}

/** Decode one pixel's luminance given its codes and a shared embedding. */
export function decodeLuminance(
  model: RelightModel,
  codes: ArrayLike<number>,
  codeOffset: number,
  embedding: Float64Array,
  scratch?: [Float64Array, Float64Array],
): number {
  const b = model.b;
  const dim = b + embedding.length;
  let a = scratch ? scratch[0] : new Float64Array(16 > dim ? 16 : dim);
  let next = scratch ? scratch[1] : new Float64Array(16);
  for (let i = 0; i < b; i++) a[i] = codes[codeOffset + i];
  for (let i = 0; i < embedding.length; i++) a[b + i] = embedding[i];

  for (let li = 0; li < model.layers.length; li++) {
    const { nIn, nOut, weights, bias } = model.layers[li];
    for (let j = 0; j < nOut; j++) {
      let s = bias[j];
      for (let i = 0; i < nIn; i++) s += a[i] * weights[i * nOut + j];
      next[j] = li < N_HIDDEN ? (s >= 0 ? s : Math.expm1(s)) : s;
    }
    const tmp = a;
    a = next;
    next = tmp;
  }
  return clamp01(a[0]);
}

export function renderFrame(
  model: RelightModel,
  lu: number,
  lv: number,
  renderScale: number = 1,
): RenderedFrame {
  if (!(renderScale > 0 && renderScale <= 1)) {
    throw new Error(`renderScale must be in (0, 1], got ${renderScale}`);
  }
  const stride = Math.max(1, Math.round(1 / renderScale));
  const outW = Math.ceil(model.width / stride);
  const outH = Math.ceil(model.height / stride);
  const embedding = fourierEmbed(model, lu, lv);
  const dim = model.b + embedding.length;
  const scratch: [Float64Array, Float64Array] = [
    new Float64Array(Math.max(16, dim)),
    new Float64Array(Math.max(16, dim)),
  ];

  const rgba = new Uint8ClampedArray(outW * outH * 4);
  let o = 0;
  for (let oy = 0; oy < outH; oy++) {
    const sy = Math.min(oy * stride, model.height - 1);
    for (let ox = 0; ox < outW; ox++) {
      const sx = Math.min(ox * stride, model.width - 1);
      const p = sy * model.width + sx;
      const y = decodeLuminance(model, model.kgrid, p * model.b, embedding, scratch);
      const [r, g, b] = yuvToRgb(y, model.meanU[p] - 0.5, model.meanV[p] - 0.5);
      rgba[o++] = Math.round(r * 255);
      rgba[o++] = Math.round(g * 255);
      rgba[o++] = Math.round(b * 255);
      rgba[o++] = 255;
    }
  }
  return { width: outW, height: outH, rgba };
}
