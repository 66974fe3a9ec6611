import { describe, expect, it } from "vitest";

import { RelightModel } from "../src/model.js";
import { fourierEmbed, renderFrame, yuvToRgb } from "../src/render.js";
import { readFixture } from "./helpers.js";
import { parseModel } from "../src/model.js";

function syntheticModel(width: number, height: number, seedScale = 1): RelightModel {
  // deterministic pseudo-random fill, no RNG dependency
  const fill = (arr: Float32Array, phase: number) => {
    for (let i = 0; i < arr.length; i++) {
      arr[i] = Math.sin(phase + i * 0.7318) * 0.6 * seedScale;
    }
    return arr;
  };
  const b = 8;
  const hf = 10;
  const dims: Array<[number, number]> = [
    [28, 16], [16, 16], [16, 16], [16, 16], [16, 1],
  ];
  return {
    version: 1,
    width,
    height,
    b,
    hf,
    sigma: 0.3,
    seed: 0,
    fourier: fill(new Float32Array(hf * 2), 0.3),
    layers: dims.map(([nIn, nOut], i) => ({
      nIn,
      nOut,
      weights: fill(new Float32Array(nIn * nOut), 1.1 + i),
      bias: new Float32Array(nOut),
    })),
    kgrid: fill(new Float32Array(width * height * b), 2.9),
    meanU: new Float32Array(width * height).fill(0.5),
    meanV: new Float32Array(width * height).fill(0.5),
  };
}

describe("color composition", () => {
  it("neutral chroma yields gray", () => {
    const [r, g, b] = yuvToRgb(0.42, 0, 0);
    expect(r).toBe(0.42);
    expect(g).toBe(0.42);
    expect(b).toBe(0.42);
  });

  it("clamps out-of-gamut channels", () => {
    const [r, g, b] = yuvToRgb(0.9, 0.4, 0.5);
    for (const c of [r, g, b]) {
      expect(c).toBeGreaterThanOrEqual(0);
      expect(c).toBeLessThanOrEqual(1);
    }
  });
});

describe("fourier embedding", () => {
  it("zero frequencies embed as (1...1, 0...0)", () => {
    const m = syntheticModel(2, 2);
    m.fourier.fill(0);
    const e = fourierEmbed(m, 0.3, -0.2);
    for (let i = 0; i < m.hf; i++) {
      expect(e[i]).toBe(1);
      expect(e[m.hf + i]).toBe(0);
    }
  });

  it("single known frequency matches cos/sin", () => {
    const m = syntheticModel(2, 2);
    m.fourier.fill(0);
    m.fourier[0] = 1; // first frequency row = (1, 0)
    const e = fourierEmbed(m, 0.5, 0.9);
    expect(e[0]).toBeCloseTo(Math.cos(0.5), 12);
    expect(e[m.hf]).toBeCloseTo(Math.sin(0.5), 12);
  });
});

describe("renderFrame", () => {
  it("is deterministic", () => {
    const m = syntheticModel(16, 12);
    const a = renderFrame(m, 0.3, -0.1, 1);
    const b = renderFrame(m, 0.3, -0.1, 1);
    expect(a.rgba).toEqual(b.rgba);
  });

  it("honors the render scale with strided sampling", () => {
    const m = syntheticModel(16, 12);
    const half = renderFrame(m, 0.2, 0.2, 0.5);
    expect(half.width).toBe(8);
    expect(half.height).toBe(6);
    const full = renderFrame(m, 0.2, 0.2, 1);
    // strided pixels are exactly the corresponding full-res pixels
    for (let y = 0; y < 6; y++) {
      for (let x = 0; x < 8; x++) {
        const o = (y * 8 + x) * 4;
        const f = (y * 2 * 16 + x * 2) * 4;
        expect(half.rgba[o]).toBe(full.rgba[f]);
      }
    }
  });

  it("depends only on (lu, lv)", () => {
    const demo = parseModel(readFixture("demo64.rtim"));
    const a = renderFrame(demo, 0.25, 0.1, 1);
    const b = renderFrame(demo, 0.25, 0.1, 1);
    expect(a.rgba).toEqual(b.rgba);
  });

  it("small light steps change the image continuously", () => {
    const demo = parseModel(readFixture("demo64.rtim"));
    const a = renderFrame(demo, 0.2, 0.0, 1);
    const b = renderFrame(demo, 0.21, 0.0, 1);
    let worst = 0;
    for (let i = 0; i < a.rgba.length; i++) {
      worst = Math.max(worst, Math.abs(a.rgba[i] - b.rgba[i]) / 255);
    }
    expect(worst).toBeLessThanOrEqual(0.2);
  });

  it("rejects not-a-scale values", () => {
    const m = syntheticModel(4, 4);
    expect(() => renderFrame(m, 0, 0, 0)).toThrow();
    expect(() => renderFrame(m, 0, 0, 2)).toThrow();
  });
});
