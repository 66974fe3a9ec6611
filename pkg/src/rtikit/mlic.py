"""Multi-Light Image Collection assembly and persistence.

Each synchronized frame pair where the marker was found in both views
contributes one sample: the static frame's marker interior is rectified to a
fixed crop, its luminance becomes a collection plane, and the moving camera's
light direction is attached. Chrominance is not modeled per light; the
pixel-wise averages of U and V are kept (offset-coded as value + 0.5, clipped
to [0, 1]) for color composition at relight time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    ImagePlane,
    LightDirection,
    RgbImage,
    load_png_gray,
    rgb_to_yuv,
    save_png_gray,
)
from .errors import EmptyMlicError, SplitError
from .marker import MarkerDetection
from .pose import estimate_homography
from .sync import FrameIndexMap

DEFAULT_CROP = 400
DEFAULT_EXCLUSION_RADIUS = 0.05


@dataclass(frozen=True, eq=False)
class MLIC:
    width: int
    height: int
    luminance: np.ndarray  # (N, H, W) float32 in [0, 1]
    lights: np.ndarray  # (N, 3) float64, unit, z >= 0
    mean_u: ImagePlane  # offset-coded chroma
    mean_v: ImagePlane
    frame_ids: list[int]

    def __post_init__(self):
        n = self.luminance.shape[0] if self.luminance.ndim == 3 else 0
        if n < 1:
            raise EmptyMlicError("collection needs at least one plane")
        if self.luminance.shape != (n, self.height, self.width):
            raise ValueError("luminance shape mismatch")
        if self.luminance.dtype != np.float32:
            raise ValueError("luminance must be float32")
        if self.lights.shape != (n, 3):
            raise ValueError("lights shape mismatch")
        norms = np.linalg.norm(self.lights, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("lights must be unit vectors")
        if np.min(self.lights[:, 2]) < 0:
            raise ValueError("lights must point into the upper hemisphere")
        if len(self.frame_ids) != n:
            raise ValueError("frame_ids length mismatch")
        if (self.mean_u.width, self.mean_u.height) != (self.width, self.height):
            raise ValueError("mean_u dimensions mismatch")
        if (self.mean_v.width, self.mean_v.height) != (self.width, self.height):
            raise ValueError("mean_v dimensions mismatch")

    @property
    def n_lights(self) -> int:
        return self.luminance.shape[0]

    def plane(self, i: int) -> ImagePlane:
        return ImagePlane(width=self.width, height=self.height, data=self.luminance[i])

    def light(self, i: int) -> LightDirection:
        return LightDirection.from_vector(self.lights[i])

    def pixel_vectors(self) -> np.ndarray:
        """(W*H, N) matrix: each row is one pixel's intensity across lights."""
        n = self.n_lights
        return np.ascontiguousarray(self.luminance.reshape(n, -1).T)


@dataclass(frozen=True)
class LightSplit:
    train_idx: np.ndarray
    test_idx: np.ndarray
    exclusion_radius: float

    def __post_init__(self):
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise ValueError("train and test indices must be disjoint")
        if self.exclusion_radius < 0:
            raise ValueError("exclusion radius must be >= 0")


def rectify_crop(
    frame: RgbImage, det: MarkerDetection, out_w: int, out_h: int
) -> RgbImage:
    """Warp the marker interior to an out_w x out_h image (bilinear, edge-clamped).

    The homography maps detected corners to the crop corners; sampling walks
    output pixel centers back through its inverse.
    """
    if out_w <= 0 or out_h <= 0:
        raise ValueError("crop dimensions must be positive")
    dst = np.array(
        [[0.0, 0.0], [float(out_w), 0.0], [float(out_w), float(out_h)], [0.0, float(out_h)]]
    )
    h = estimate_homography(det.corners, dst)
    hinv = np.linalg.inv(h.matrix)

    xs, ys = np.meshgrid(
        np.arange(out_w, dtype=np.float64) + 0.5,
        np.arange(out_h, dtype=np.float64) + 0.5,
    )
    pts = np.stack([xs.ravel(), ys.ravel(), np.ones(out_w * out_h)])
    src = hinv @ pts
    sx = src[0] / src[2]
    sy = src[1] / src[2]

    img = frame.to_float()
    h_in, w_in = frame.height, frame.width
    u = sx - 0.5
    v = sy - 0.5
    x0 = np.clip(np.floor(u).astype(int), 0, w_in - 1)
    y0 = np.clip(np.floor(v).astype(int), 0, h_in - 1)
    x1 = np.clip(x0 + 1, 0, w_in - 1)
    y1 = np.clip(y0 + 1, 0, h_in - 1)
    fx = np.clip(u - x0, 0.0, 1.0)[:, None]
    fy = np.clip(v - y0, 0.0, 1.0)[:, None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    return RgbImage.from_float(out.reshape(out_h, out_w, 3))


def build_mlic(
    pairs: FrameIndexMap,
    static_dets: Sequence[MarkerDetection | None],
    moving_lights: Sequence[LightDirection | None],
    static_frames: Sequence[RgbImage],
    out_size: tuple[int, int] = (DEFAULT_CROP, DEFAULT_CROP),
) -> MLIC:
    """Assemble the collection from synchronized pairs.

    A pair contributes only if the marker was detected in both views (a None
    detection or light drops it). Mean chroma accumulates over the surviving
    frames.
    """
    out_w, out_h = out_size
    planes, lights, frame_ids = [], [], []
    sum_u = np.zeros((out_h, out_w), dtype=np.float64)
    sum_v = np.zeros((out_h, out_w), dtype=np.float64)

    for si, mi, _ in pairs.pairs:
        det = static_dets[si]
        light = moving_lights[mi]
        if det is None or light is None:
            continue
        crop = rectify_crop(static_frames[si], det, out_w, out_h)
        f = crop.to_float()
        y, u, v = rgb_to_yuv(f[:, :, 0], f[:, :, 1], f[:, :, 2])
        planes.append(np.clip(y, 0.0, 1.0).astype(np.float32))
        sum_u += u
        sum_v += v
        lights.append(light.as_array())
        frame_ids.append(si)

    n = len(planes)
    if n == 0:
        raise EmptyMlicError("no frame pair had the marker in both views")

    mean_u = ImagePlane.from_array(sum_u / n + 0.5, clamp=True)
    mean_v = ImagePlane.from_array(sum_v / n + 0.5, clamp=True)
    return MLIC(
        width=out_w,
        height=out_h,
        luminance=np.stack(planes),
        lights=np.array(lights),
        mean_u=mean_u,
        mean_v=mean_v,
        frame_ids=frame_ids,
    )


def split_lights(
    lights: np.ndarray, n_test: int, radius: float, seed: int = 0
) -> LightSplit:
    """Random held-out test lights plus an exclusion zone around them.

    Train lights closer than ``radius`` to any test light in the (l_u, l_v)
    plane are discarded so evaluation probes genuinely unseen directions.
    """
    lights = np.asarray(lights, dtype=np.float64)
    n = len(lights)
    if not 0 < n_test < n:
        raise ValueError(f"n_test must be in (0, {n}), got {n_test}")
    if radius < 0:
        raise ValueError("radius must be >= 0")

    rng = np.random.default_rng(seed)
    test_idx = np.sort(rng.choice(n, size=n_test, replace=False))
    mask = np.ones(n, dtype=bool)
    mask[test_idx] = False

    uv = lights[:, :2]
    d2 = ((uv[:, None, :] - uv[test_idx][None, :, :]) ** 2).sum(axis=2)
    near = (d2 < radius * radius).any(axis=1)
    mask &= ~near

    train_idx = np.nonzero(mask)[0]
    if len(train_idx) == 0:
        raise SplitError("exclusion radius removed every training light")
    return LightSplit(train_idx=train_idx, test_idx=test_idx, exclusion_radius=radius)


# -- directory persistence ---------------------------------------------------


def save_mlic(mlic: MLIC, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "width": mlic.width,
        "height": mlic.height,
        "n": mlic.n_lights,
        "lights": mlic.lights.tolist(),
        "frame_ids": list(mlic.frame_ids),
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=1))
    for i in range(mlic.n_lights):
        save_png_gray(mlic.plane(i), d / f"y_{i:05d}.png")
    save_png_gray(mlic.mean_u, d / "meanU.png")
    save_png_gray(mlic.mean_v, d / "meanV.png")


def load_mlic(directory: str | Path) -> MLIC:
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    n = int(meta["n"])
    planes = np.stack([load_png_gray(d / f"y_{i:05d}.png").data for i in range(n)])
    lights = np.asarray(meta["lights"], dtype=np.float64)
    # re-normalize against JSON round-off so unit-norm validation stays strict
    lights = lights / np.linalg.norm(lights, axis=1, keepdims=True)
    return MLIC(
        width=int(meta["width"]),
        height=int(meta["height"]),
        luminance=planes,
        lights=lights,
        mean_u=load_png_gray(d / "meanU.png"),
        mean_v=load_png_gray(d / "meanV.png"),
        frame_ids=[int(x) for x in meta["frame_ids"]],
    )
