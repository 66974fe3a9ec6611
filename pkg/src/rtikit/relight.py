"""The serialized relighting artifact and its evaluation.

A RelightModel bundles everything Eq-style relighting needs: the per-pixel
PCA codes, the fixed Fourier matrix, the MLP weights and the mean chroma
planes. Rendering a light l clamps the decoded luminance to [0, 1] and
composes color from the stored average U/V.

File format `RTIM` (little-endian), version 1:

    offset 0   magic   b"RTIM"
    4          u16     version = 1
    6          u32     width
    10         u32     height
    14         u8      B   (PCA coefficients per pixel)
    15         u8      Hf  (Fourier frequencies)
    16         f32     sigma
    20         u64     seed
    28         f32[]   fourier matrix, row-major (Hf x 2)
               f32[]   per layer, weights row-major (n_in x n_out) then bias
                       (layer dims fixed: B+2Hf -> 16 -> 16 -> 16 -> 16 -> 1)
    ...        f32[]   k-grid, pixel-major (W*H*B)
    ...        f32[]   meanU (W*H, offset-coded chroma: value + 0.5)
    ...        f32[]   meanV (W*H)

The same layout is parsed by the browser viewer; keep the two in lockstep.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ImagePlane, LightDirection, RgbImage, yuv_to_rgb
from .errors import ModelFormatError
from .neural import HIDDEN_WIDTH, N_HIDDEN, FourierMatrix, MlpWeights, embed_uv
from .pca import KGrid

MAGIC = b"RTIM"
VERSION = 1


@dataclass(frozen=True, eq=False)
class RelightModel:
    width: int
    height: int
    b: int
    hf: int
    sigma: float
    seed: int
    fourier: FourierMatrix
    mlp: MlpWeights
    kgrid: KGrid
    mean_u: ImagePlane
    mean_v: ImagePlane
    version: int = VERSION

    def __post_init__(self):
        if (self.kgrid.width, self.kgrid.height, self.kgrid.b) != (
            self.width,
            self.height,
            self.b,
        ):
            raise ValueError("k-grid dimensions do not match the model header")
        if self.fourier.hf != self.hf:
            raise ValueError("Fourier matrix size does not match the model header")
        if self.mlp.input_dim != self.b + 2 * self.hf:
            raise ValueError("MLP input dimension must be B + 2*Hf")
        if (self.mean_u.width, self.mean_u.height) != (self.width, self.height):
            raise ValueError("meanU dimensions mismatch")
        if (self.mean_v.width, self.mean_v.height) != (self.width, self.height):
            raise ValueError("meanV dimensions mismatch")


def _layer_dims(b: int, hf: int) -> list[tuple[int, int]]:
    dims = [b + 2 * hf] + [HIDDEN_WIDTH] * N_HIDDEN + [1]
    return list(zip(dims[:-1], dims[1:]))


def save_model(m: RelightModel, path: str | Path) -> None:
    parts = [
        MAGIC,
        struct.pack("<HIIBBfQ", m.version, m.width, m.height, m.b, m.hf, m.sigma, m.seed),
        m.fourier.values.astype("<f4").tobytes(),
    ]
    for w, bias in m.mlp.layers:
        parts.append(w.astype("<f4").tobytes())
        parts.append(bias.astype("<f4").tobytes())
    parts.append(m.kgrid.coeffs.astype("<f4").tobytes())
    parts.append(m.mean_u.data.astype("<f4").tobytes())
    parts.append(m.mean_v.data.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_model(path: str | Path) -> RelightModel:
    buf = Path(path).read_bytes()
    return parse_model(buf)


def parse_model(buf: bytes) -> RelightModel:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise ModelFormatError("bad magic, not an RTIM file", 0)
    if len(buf) < 28:
        raise ModelFormatError("truncated header", len(buf))
    version, width, height, b, hf, sigma, seed = struct.unpack_from("<HIIBBfQ", buf, 4)
    if version != VERSION:
        raise ModelFormatError(f"unsupported version {version}", 4)
    if width < 1 or height < 1 or b < 1 or hf < 1:
        raise ModelFormatError("invalid dimensions in header", 6)

    off = 28

    def take(n_floats: int, what: str) -> np.ndarray:
        nonlocal off
        end = off + 4 * n_floats
        if end > len(buf):
            raise ModelFormatError(f"truncated while reading {what}", len(buf))
        arr = np.frombuffer(buf, dtype="<f4", count=n_floats, offset=off)
        off = end
        return arr

    fourier = FourierMatrix(
        hf=hf,
        values=take(hf * 2, "fourier matrix").astype(np.float64).reshape(hf, 2),
        sigma=float(sigma),
        seed=int(seed),
    )
    layers = []
    for n_in, n_out in _layer_dims(b, hf):
        w = take(n_in * n_out, "layer weights").astype(np.float64).reshape(n_in, n_out)
        bias = take(n_out, "layer bias").astype(np.float64)
        layers.append((w, bias))
    kgrid = KGrid(
        width=width,
        height=height,
        b=b,
        coeffs=take(width * height * b, "k-grid").reshape(height, width, b).copy(),
    )
    mean_u = ImagePlane(
        width=width, height=height, data=take(width * height, "meanU").reshape(height, width).copy()
    )
    mean_v = ImagePlane(
        width=width, height=height, data=take(width * height, "meanV").reshape(height, width).copy()
    )
    if off != len(buf):
        raise ModelFormatError(f"{len(buf) - off} trailing bytes", off)
    return RelightModel(
        width=width,
        height=height,
        b=b,
        hf=hf,
        sigma=float(sigma),
        seed=int(seed),
        fourier=fourier,
        mlp=MlpWeights(layers=layers),
        kgrid=kgrid,
        mean_u=mean_u,
        mean_v=mean_v,
        version=version,
    )


def _decode_luminance(m: RelightModel, codes: np.ndarray, l: LightDirection) -> np.ndarray:
    """Batch-evaluate the decoder for one light over (N, B) pixel codes."""
    emb = embed_uv(np.array([[l.x, l.y]]), m.fourier)
    x = np.concatenate(
        [codes.astype(np.float64), np.broadcast_to(emb, (len(codes), emb.shape[1]))],
        axis=1,
    )
    a = x
    for i, (w, bias) in enumerate(m.mlp.layers):
        z = a @ w + bias
        a = np.where(z >= 0, z, np.expm1(np.minimum(z, 0.0))) if i < N_HIDDEN else z
    return np.clip(a[:, 0], 0.0, 1.0)


def relight_pixel(m: RelightModel, p: tuple[int, int], l: LightDirection) -> tuple[float, float, float]:
    """Relit (r, g, b) of pixel p = (x, y) under light l."""
    x, y = p
    if not (0 <= x < m.width and 0 <= y < m.height):
        raise ValueError(f"pixel {p} outside {m.width}x{m.height}")
    lum = _decode_luminance(m, m.kgrid.coeffs[y, x][None, :], l)[0]
    u = float(m.mean_u.data[y, x]) - 0.5
    v = float(m.mean_v.data[y, x]) - 0.5
    r, g, b = yuv_to_rgb(lum, u, v)
    return float(r), float(g), float(b)


def relight_image(m: RelightModel, l: LightDirection) -> RgbImage:
    """Relight every pixel; the Fourier embedding is shared across the image."""
    codes = m.kgrid.flat()
    lum = _decode_luminance(m, codes, l).reshape(m.height, m.width)
    u = m.mean_u.data.astype(np.float64) - 0.5
    v = m.mean_v.data.astype(np.float64) - 0.5
    r, g, b = yuv_to_rgb(lum, u, v)
    return RgbImage.from_float(np.stack([r, g, b], axis=-1))


def relight_luminance(m: RelightModel, l: LightDirection) -> ImagePlane:
    """Decoded Y plane only (what the quality metrics score)."""
    lum = _decode_luminance(m, m.kgrid.flat(), l).reshape(m.height, m.width)
    return ImagePlane.from_array(lum.astype(np.float32))
