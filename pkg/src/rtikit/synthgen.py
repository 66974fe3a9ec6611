"""Synthetic ground-truth scenes standing in for real captures.

A scene is a height field over the crop plane (heights in pixel units) with
per-pixel albedo, one Blinn-style specular lobe and a constant chroma.
Rendering is orthographic along +z: Lambertian + specular shading from
central-difference normals, with hard cast shadows found by marching each
surface point toward the light across the height field. That scene family is
deliberately hostile to smooth light interpolators (sharp shadow edges,
moving highlights) while remaining exactly reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ImagePlane, LightDirection
from .mlic import MLIC

SHADOW_STEP = 0.7  # px along the light ray
SHADOW_BIAS = 0.05  # height units; suppresses self-shadow acne


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    height_field: np.ndarray  # (H, W) float64, pixel units
    albedo: np.ndarray  # (H, W) in [0, 1]
    ks: float
    spec_exp: float
    chroma: tuple[float, float]

    def __post_init__(self):
        if self.height_field.ndim != 2 or self.height_field.shape != self.albedo.shape:
            raise ValueError("height field and albedo must share a 2-D shape")
        if not np.all(np.isfinite(self.height_field)):
            raise ValueError("height field must be finite")
        if self.albedo.min() < 0 or self.albedo.max() > 1:
            raise ValueError("albedo must lie in [0, 1]")
        if self.ks < 0:
            raise ValueError("specular strength must be >= 0")
        if self.spec_exp < 1:
            raise ValueError("specular exponent must be >= 1")

    @property
    def width(self) -> int:
        return self.height_field.shape[1]

    @property
    def height(self) -> int:
        return self.height_field.shape[0]


def surface_normals(scene: SyntheticScene) -> np.ndarray:
    """(H, W, 3) unit normals from central differences of the height field."""
    dhdy, dhdx = np.gradient(scene.height_field)
    n = np.stack([-dhdx, -dhdy, np.ones_like(dhdx)], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def _bilinear_height(hf: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    h, w = hf.shape
    x0 = np.clip(np.floor(x).astype(int), 0, w - 1)
    y0 = np.clip(np.floor(y).astype(int), 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    fx = np.clip(x - x0, 0.0, 1.0)
    fy = np.clip(y - y0, 0.0, 1.0)
    top = hf[y0, x0] * (1 - fx) + hf[y0, x1] * fx
    bot = hf[y1, x0] * (1 - fx) + hf[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def shadow_mask(scene: SyntheticScene, l: LightDirection) -> np.ndarray:
    """True where the surface point is occluded along the ray toward l."""
    hf = scene.height_field
    h, w = hf.shape
    if l.z <= 1e-6:
        return np.ones((h, w), dtype=bool)

    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    z0 = hf.copy()
    max_h = float(hf.max())
    shadowed = np.zeros((h, w), dtype=bool)

    s = SHADOW_STEP
    # march until every ray has risen above the terrain or left the grid
    max_steps = int(np.ceil((max_h - hf.min()) / (l.z * SHADOW_STEP))) + 2
    max_steps = min(max_steps, int(np.hypot(h, w) / SHADOW_STEP) + 2)
    for _ in range(max_steps):
        px = xs + s * l.x
        py = ys + s * l.y
        rz = z0 + s * l.z
        inside = (px >= 0) & (px <= w - 1) & (py >= 0) & (py <= h - 1)
        still_low = rz <= max_h
        active = inside & still_low & ~shadowed
        if not active.any():
            break
        terrain = _bilinear_height(hf, px, py)
        shadowed |= active & (terrain > rz + SHADOW_BIAS)
        s += SHADOW_STEP
    return shadowed


def synth_render(scene: SyntheticScene, l: LightDirection) -> ImagePlane:
    """Shade the scene for one light; values clamped to [0, 1]."""
    n = surface_normals(scene)
    lv = np.array([l.x, l.y, l.z])
    ndotl = np.clip(n @ lv, 0.0, None)

    half = lv + np.array([0.0, 0.0, 1.0])
    half = half / np.linalg.norm(half)
    ndoth = np.clip(n @ half, 0.0, None)

    y = scene.albedo * ndotl + scene.ks * ndoth**scene.spec_exp
    y = np.where(shadow_mask(scene, l), 0.0, y)
    return ImagePlane.from_array(np.clip(y, 0.0, 1.0).astype(np.float32))


@dataclass(frozen=True)
class DomeTrajectory:
    """Deterministic equal-area hemisphere sampling (Fibonacci spiral)."""

    n: int


@dataclass(frozen=True)
class OrbitTrajectory:
    """Circular (l_u, l_v) path at a nominal zenith with handheld-style jitter.

    ``jitter_deg`` is the Gaussian sigma on both angles, truncated at 3 sigma.
    """

    n: int
    zenith_deg: float = 45.0
    jitter_deg: float = 4.0


def trajectory_lights(traj, seed: int = 0) -> np.ndarray:
    """(N, 3) unit light directions, z >= 0."""
    if traj.n < 1:
        raise ValueError("need at least one light")
    if isinstance(traj, DomeTrajectory):
        i = np.arange(traj.n, dtype=np.float64)
        z = (i + 0.5) / traj.n  # uniform in z = equal area on the hemisphere
        r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        az = i * (np.pi * (3.0 - np.sqrt(5.0)))
        return np.stack([r * np.cos(az), r * np.sin(az), z], axis=1)
    if isinstance(traj, OrbitTrajectory):
        rng = np.random.default_rng(seed)
        i = np.arange(traj.n, dtype=np.float64)
        sig = np.radians(traj.jitter_deg)
        jit_z = np.clip(rng.normal(0.0, sig, traj.n), -3 * sig, 3 * sig)
        jit_a = np.clip(rng.normal(0.0, sig, traj.n), -3 * sig, 3 * sig)
        zen = np.clip(np.radians(traj.zenith_deg) + jit_z, np.radians(1.0), np.radians(89.0))
        az = 2.0 * np.pi * i / traj.n + jit_a
        return np.stack(
            [np.sin(zen) * np.cos(az), np.sin(zen) * np.sin(az), np.cos(zen)], axis=1
        )
    raise ValueError(f"unknown trajectory {traj!r}")


def synth_mlic(scene: SyntheticScene, traj, seed: int = 0) -> MLIC:
    """Render one plane per trajectory light into a collection."""
    lights = trajectory_lights(traj, seed)
    planes = np.stack(
        [synth_render(scene, LightDirection.from_vector(v)).data for v in lights]
    )
    u, v = scene.chroma
    shape = (scene.height, scene.width)
    mean_u = ImagePlane.from_array(np.full(shape, u + 0.5, dtype=np.float32), clamp=True)
    mean_v = ImagePlane.from_array(np.full(shape, v + 0.5, dtype=np.float32), clamp=True)
    return MLIC(
        width=scene.width,
        height=scene.height,
        luminance=planes,
        lights=lights,
        mean_u=mean_u,
        mean_v=mean_v,
        frame_ids=list(range(len(lights))),
    )


# -- scene factories ----------------------------------------------------------


def bump_scene(
    size: int = 128,
    n_bumps: int = 6,
    seed: int = 0,
    ks: float = 0.4,
    spec_exp: float = 32.0,
    chroma: tuple[float, float] = (0.03, -0.04),
    max_height: float | None = None,
) -> SyntheticScene:
    """Random smooth bumps over a textured plane; the stock test subject."""
    rng = np.random.default_rng(seed)
    if max_height is None:
        max_height = size / 9.0
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    hf = np.zeros((size, size))
    for _ in range(n_bumps):
        cx, cy = rng.uniform(0.15 * size, 0.85 * size, size=2)
        sigma = rng.uniform(0.05, 0.12) * size
        amp = rng.uniform(0.35, 1.0) * max_height
        hf += amp * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma * sigma))

    # smooth random albedo texture: blurred white noise squashed into range
    noise = rng.uniform(0.0, 1.0, size=(size, size))
    k = np.ones(7) / 7.0
    for _ in range(3):
        noise = np.apply_along_axis(lambda r: np.convolve(r, k, mode="same"), 0, noise)
        noise = np.apply_along_axis(lambda r: np.convolve(r, k, mode="same"), 1, noise)
    lo, hi = noise.min(), noise.max()
    albedo = 0.25 + 0.65 * (noise - lo) / max(hi - lo, 1e-9)
    return SyntheticScene(
        height_field=hf, albedo=albedo, ks=ks, spec_exp=spec_exp, chroma=chroma
    )


def hemisphere_scene(
    size: int = 64,
    radius: float | None = None,
    albedo: float = 0.9,
    ks: float = 0.0,
    spec_exp: float = 16.0,
    chroma: tuple[float, float] = (0.0, 0.0),
) -> SyntheticScene:
    """A single spherical cap on a flat plane; the shadow-oracle subject."""
    if radius is None:
        radius = size / 5.0
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    c = (size - 1) / 2.0
    d2 = (xs - c) ** 2 + (ys - c) ** 2
    hf = np.sqrt(np.clip(radius * radius - d2, 0.0, None))
    return SyntheticScene(
        height_field=hf,
        albedo=np.full((size, size), albedo),
        ks=ks,
        spec_exp=spec_exp,
        chroma=chroma,
    )
