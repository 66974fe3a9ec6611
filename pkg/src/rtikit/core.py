"""Shared image/color/geometry types and color-space conversions.

Coordinate convention used across the package: pixel (col x, row y) covers the
unit square [x, x+1) x [y, y+1) of the continuous image plane, so its center
sits at (x + 0.5, y + 0.5). Sub-pixel positions (marker corners, warps) are
expressed in these continuous coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

# BT.601 analog full-range coefficients (fixed here so results are bit-reproducible).
_KR, _KG, _KB = 0.299, 0.587, 0.114
_KU, _KV = 0.492, 0.877


@dataclass(frozen=True, eq=False)
class ImagePlane:
    """Single-channel float image, values in [0, 1], shape (height, width)."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("ImagePlane dimensions must be positive")
        if self.data.shape != (self.height, self.width):
            raise ValueError(
                f"ImagePlane data shape {self.data.shape} does not match "
                f"(height={self.height}, width={self.width})"
            )
        if self.data.dtype != np.float32:
            raise ValueError("ImagePlane data must be float32")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("ImagePlane data must be finite")
        if self.data.min() < 0.0 or self.data.max() > 1.0:
            raise ValueError("ImagePlane data must lie in [0, 1]")

    @classmethod
    def from_array(cls, arr: np.ndarray, clamp: bool = False) -> "ImagePlane":
        a = np.asarray(arr, dtype=np.float32)
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        if clamp:
            a = np.clip(a, 0.0, 1.0)
        return cls(width=a.shape[1], height=a.shape[0], data=a)


@dataclass(frozen=True, eq=False)
class RgbImage:
    """8-bit interleaved RGB image, shape (height, width, 3)."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("RgbImage dimensions must be positive")
        if self.data.shape != (self.height, self.width, 3):
            raise ValueError(
                f"RgbImage data shape {self.data.shape} does not match "
                f"(height={self.height}, width={self.width}, 3)"
            )
        if self.data.dtype != np.uint8:
            raise ValueError("RgbImage data must be uint8")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RgbImage":
        a = np.asarray(arr, dtype=np.uint8)
        if a.ndim != 3 or a.shape[2] != 3:
            raise ValueError("expected an (H, W, 3) array")
        return cls(width=a.shape[1], height=a.shape[0], data=a)

    @classmethod
    def from_float(cls, arr: np.ndarray) -> "RgbImage":
        """Quantize a float (H, W, 3) array in [0, 1] to 8-bit."""
        a = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
        return cls.from_array(np.rint(a * 255.0).astype(np.uint8))

    def to_float(self) -> np.ndarray:
        return self.data.astype(np.float64) / 255.0


@dataclass(frozen=True)
class LightDirection:
    """Unit 3-vector pointing from the object toward the light.

    (l_u, l_v) are the x and y components. The pipeline only ever produces
    directions with z >= 0 (light above the object plane); that convention is
    enforced where it matters (pose extraction, MLIC assembly), not here, so
    the embedding math can still be probed with lower-hemisphere vectors.
    """

    x: float
    y: float
    z: float

    def __post_init__(self):
        n2 = self.x * self.x + self.y * self.y + self.z * self.z
        if abs(n2 - 1.0) > 1e-9:
            raise ValueError(f"light direction must be unit length, |v|^2 = {n2!r}")

    @classmethod
    def from_vector(cls, v) -> "LightDirection":
        """Normalize an arbitrary non-zero 3-vector."""
        a = np.asarray(v, dtype=np.float64)
        n = float(np.linalg.norm(a))
        if n < 1e-12:
            raise ValueError("cannot normalize a (near-)zero vector")
        a = a / n
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @classmethod
    def from_uv(cls, lu: float, lv: float) -> "LightDirection":
        """Lift (l_u, l_v) in the unit disc to the upper hemisphere."""
        r2 = lu * lu + lv * lv
        if r2 > 1.0 + 1e-12:
            raise ValueError(f"(l_u, l_v) outside the unit disc: {lu}, {lv}")
        z = math.sqrt(max(0.0, 1.0 - r2))
        return cls(float(lu), float(lv), z)

    @property
    def uv(self) -> tuple[float, float]:
        return (self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with zero skew."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )


def rgb_to_yuv(r, g, b):
    """BT.601 full-range RGB -> YUV. Inputs are clamped to [0, 1].

    Accepts scalars or numpy arrays (broadcast elementwise). y is computed in
    a difference form (algebraically identical to 0.299r + 0.587g + 0.114b)
    so achromatic inputs yield u = v = 0 exactly.
    """
    r = np.clip(r, 0.0, 1.0)
    g = np.clip(g, 0.0, 1.0)
    b = np.clip(b, 0.0, 1.0)
    y = g + _KR * (r - g) + _KB * (b - g)
    u = _KU * (b - y)
    v = _KV * (r - y)
    return y, u, v


def yuv_to_rgb(y, u, v):
    """Exact algebraic inverse of :func:`rgb_to_yuv`; outputs clamped to [0, 1]."""
    b = y + u / _KU
    r = y + v / _KV
    g = y + (-_KR * (r - y) - _KB * (b - y)) / _KG
    return (
        np.clip(r, 0.0, 1.0),
        np.clip(g, 0.0, 1.0),
        np.clip(b, 0.0, 1.0),
    )


def luminance(img: RgbImage) -> np.ndarray:
    """Y channel of an RGB image as a float64 (H, W) array."""
    f = img.to_float()
    y, _, _ = rgb_to_yuv(f[:, :, 0], f[:, :, 1], f[:, :, 2])
    return y


def build_intrinsics_from_exif(focal35: float, img_w: int, img_h: int) -> CameraIntrinsics:
    """Intrinsics from the 35mm-equivalent focal length in EXIF metadata.

    Uses the 36 mm full-frame width convention with a centered principal
    point; good enough because the factorization is not calibration-critical.
    """
    if focal35 <= 0:
        raise ValueError("focal length must be positive")
    if img_w <= 0 or img_h <= 0:
        raise ValueError("image dimensions must be positive")
    f = focal35 / 36.0 * img_w
    return CameraIntrinsics(fx=f, fy=f, cx=img_w / 2.0, cy=img_h / 2.0)


# -- PNG ingestion/egress (all pipeline images are 8-bit PNG on disk) --------


def load_png_rgb(path: str | Path) -> RgbImage:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return RgbImage.from_array(arr)


def save_png_rgb(img: RgbImage, path: str | Path) -> None:
    Image.fromarray(img.data, mode="RGB").save(path)


def load_png_gray(path: str | Path) -> ImagePlane:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.uint8)
    return ImagePlane.from_array(arr.astype(np.float32) / 255.0)


def save_png_gray(plane: ImagePlane, path: str | Path) -> None:
    arr = np.rint(plane.data.astype(np.float64) * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)
