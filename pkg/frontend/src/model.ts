/**
 * Parser for the `RTIM` relightable-model container (little-endian, v1).
 *
 * Layout:
 *   0   magic "RTIM"
 *   4   u16 version (= 1)
 *   6   u32 width
 *   10  u32 height
 *   14  u8  B    (PCA coefficients per pixel)
 *   15  u8  Hf   (Fourier frequencies)
 *   16  f32 sigma
 *   20  u64 seed
 *   28  f32[Hf*2]                 Fourier matrix, row-major
 *       per layer: f32[nIn*nOut]  weights row-major, then f32[nOut] bias
 *       f32[W*H*B]                k-grid, pixel-major
 *       f32[W*H]                  mean U (offset-coded: value + 0.5)
 *       f32[W*H]                  mean V
 *
 * Layer dims are fixed by the architecture: B+2Hf -> 16 -> 16 -> 16 -> 16 -> 1.
 * Kept in lockstep with the Python writer.
 */

export const HIDDEN_WIDTH = 16;
export const N_HIDDEN = 4;

export interface MlpLayer {
  nIn: number;
  nOut: number;
  weights: Float32Array; // row-major (nIn x nOut)
  bias: Float32Array;
}

export interface RelightModel {
  version: number;
  width: number;
  height: number;
  b: number;
  hf: number;
  sigma: number;
  seed: number;
  fourier: Float32Array; // (hf x 2) row-major
  layers: MlpLayer[];
  kgrid: Float32Array; // pixel-major (width*height*b)
  meanU: Float32Array;
  meanV: Float32Array;
}

export class ModelFormatError extends Error {
  readonly offset: number;

  constructor(message: string, offset: number) {
    super(`${message} (at byte ${offset})`);
    this.name = "ModelFormatError";
    this.offset = offset;
  }
}

export function layerDims(b: number, hf: number): Array<[number, number]> {
  const dims = [b + 2 * hf, HIDDEN_WIDTH, HIDDEN_WIDTH, HIDDEN_WIDTH, HIDDEN_WIDTH, 1];
  const out: Array<[number, number]> = [];
  for (let i = 0; i + 1 < dims.length; i++) out.push([dims[i], dims[i + 1]]);
  return out;
}

export function parseModel(buffer: ArrayBuffer): RelightModel {
  const view = new DataView(buffer);
  if (buffer.byteLength < 4) throw new ModelFormatError("truncated magic", buffer.byteLength);
  const magic = String.fromCharCode(
    view.getUint8(0), view.getUint8(1), view.getUint8(2), view.getUint8(3),
  );
  if (magic !== "RTIM") throw new ModelFormatError("bad magic, not an RTIM file", 0);
  if (buffer.byteLength < 28) throw new ModelFormatError("truncated header", buffer.byteLength);

  const version = view.getUint16(4, true);
  if (version !== 1) throw new ModelFormatError(`unsupported version ${version}`, 4);
  const width = view.getUint32(6, true);
  const height = view.getUint32(10, true);
  const b = view.getUint8(14);
  const hf = view.getUint8(15);
  const sigma = view.getFloat32(16, true);
  const seed = Number(view.getBigUint64(20, true));
  if (width < 1 || height < 1 || b < 1 || hf < 1) {
    throw new ModelFormatError("invalid dimensions in header", 6);
  }

  let offset = 28;
  const take = (nFloats: number, what: string): Float32Array => {
    const end = offset + 4 * nFloats;
    if (end > buffer.byteLength) {
      throw new ModelFormatError(`truncated while reading ${what}`, buffer.byteLength);
    }
    const arr = new Float32Array(buffer, offset, nFloats);
    offset = end;
    return arr;
  };

  const fourier = take(hf * 2, "fourier matrix");
  const layers: MlpLayer[] = layerDims(b, hf).map(([nIn, nOut]) => ({
    nIn,
    nOut,
    weights: take(nIn * nOut, "layer weights"),
    bias: take(nOut, "layer bias"),
  }));
  const kgrid = take(width * height * b, "k-grid");
  const meanU = take(width * height, "meanU");
  const meanV = take(width * height, "meanV");
  if (offset !== buffer.byteLength) {
    throw new ModelFormatError(`${buffer.byteLength - offset} trailing bytes`, offset);
  }
  return { version, width, height, b, hf, sigma, seed, fourier, layers, kgrid, meanU, meanV };
}
