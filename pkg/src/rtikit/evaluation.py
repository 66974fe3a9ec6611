"""Relighting quality metrics, the polynomial baseline, and sweep harnesses.

Metrics are computed on the luminance plane (the learned quantity); both
sides are snapped to the 8-bit grid first, which matches the on-disk
collection format and makes "render the ground truth back" score an exact
infinite PSNR.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import ImagePlane, LightDirection, RgbImage, luminance, yuv_to_rgb
from .errors import DegenerateGeometryError, RtiError
from .mlic import MLIC, LightSplit
from .neural import FourierMatrix, TrainConfig, train
from .pca import pca_fit, pca_project
from .relight import RelightModel, relight_image

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: ImagePlane, b: ImagePlane) -> float:
    """10*log10(1/MSE) on [0,1] planes; +inf for identical inputs."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("PSNR needs equal image dimensions")
    mse = float(np.mean((a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_kernel() -> np.ndarray:
    half = SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
    k = np.outer(g, g)
    return k / k.sum()


_SSIM_KERNEL = _gaussian_kernel()


def _windowed_mean(img: np.ndarray) -> np.ndarray:
    win = sliding_window_view(img, (SSIM_WINDOW, SSIM_WINDOW))
    return np.tensordot(win, _SSIM_KERNEL, axes=([2, 3], [0, 1]))


def ssim(a: ImagePlane, b: ImagePlane) -> float:
    """Mean local SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03, L=1."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("SSIM needs equal image dimensions")
    if min(a.width, a.height) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}px SSIM window")
    x = a.data.astype(np.float64)
    y = b.data.astype(np.float64)
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2

    mx = _windowed_mean(x)
    my = _windowed_mean(y)
    sxx = _windowed_mean(x * x) - mx * mx
    syy = _windowed_mean(y * y) - my * my
    sxy = _windowed_mean(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


# -- polynomial texture map baseline -----------------------------------------


@dataclass(frozen=True, eq=False)
class PtmModel:
    """Per-pixel biquadratic in (l_u, l_v): a0 lu^2 + a1 lv^2 + a2 lu lv + a3 lu + a4 lv + a5."""

    width: int
    height: int
    coeffs: np.ndarray  # (H, W, 6)
    mean_u: ImagePlane
    mean_v: ImagePlane

    def __post_init__(self):
        if self.coeffs.shape != (self.height, self.width, 6):
            raise ValueError("coefficients must be (H, W, 6)")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coefficients must be finite")


def _ptm_design(uv: np.ndarray) -> np.ndarray:
    lu, lv = uv[:, 0], uv[:, 1]
    return np.stack([lu * lu, lv * lv, lu * lv, lu, lv, np.ones_like(lu)], axis=1)


def ptm_fit(mlic: MLIC, split: LightSplit) -> PtmModel:
    """Per-pixel least squares over the training lights (tiny relative ridge)."""
    train_idx = np.asarray(split.train_idx)
    if len(train_idx) < 6:
        raise DegenerateGeometryError("need at least 6 training lights for a PTM")
    a = _ptm_design(mlic.lights[train_idx][:, :2])
    if np.linalg.matrix_rank(a, tol=1e-9 * len(a)) < 6:
        raise DegenerateGeometryError("training light design matrix is rank-deficient")
    g = a.T @ a
    g = g + np.eye(6) * (1e-10 * np.trace(g) / 6.0)
    y = mlic.luminance[train_idx].reshape(len(train_idx), -1).astype(np.float64)
    coeffs = np.linalg.solve(g, a.T @ y)  # (6, P)
    coeffs = coeffs.T.reshape(mlic.height, mlic.width, 6)
    return PtmModel(
        width=mlic.width,
        height=mlic.height,
        coeffs=coeffs,
        mean_u=mlic.mean_u,
        mean_v=mlic.mean_v,
    )


def ptm_luminance(m: PtmModel, l: LightDirection) -> ImagePlane:
    basis = _ptm_design(np.array([[l.x, l.y]]))[0]
    y = np.tensordot(m.coeffs, basis, axes=([2], [0]))
    return ImagePlane.from_array(np.clip(y, 0.0, 1.0).astype(np.float32))


def ptm_relight(m: PtmModel, l: LightDirection) -> RgbImage:
    """Evaluate the biquadratic and compose chroma exactly like the neural path."""
    y = ptm_luminance(m, l).data.astype(np.float64)
    u = m.mean_u.data.astype(np.float64) - 0.5
    v = m.mean_v.data.astype(np.float64) - 0.5
    r, g, b = yuv_to_rgb(y, u, v)
    return RgbImage.from_float(np.stack([r, g, b], axis=-1))


# -- held-out evaluation ------------------------------------------------------


@dataclass(frozen=True)
class EvalRow:
    light_index: int
    lu: float
    lv: float
    psnr: float
    ssim: float


@dataclass(frozen=True)
class EvalReport:
    mean_psnr: float
    mean_ssim: float
    rows: list[EvalRow]

    def to_json(self) -> str:
        return json.dumps(
            {
                "mean_psnr": self.mean_psnr,
                "mean_ssim": self.mean_ssim,
                "lights": [vars(r) for r in self.rows],
            },
            indent=1,
        )

    def to_csv(self) -> str:
        lines = ["light,lu,lv,psnr,ssim"]
        for r in self.rows:
            lines.append(f"{r.light_index},{r.lu:.6f},{r.lv:.6f},{r.psnr:.4f},{r.ssim:.6f}")
        return "\n".join(lines) + "\n"


def _snap8(plane: np.ndarray) -> ImagePlane:
    q = np.rint(plane.astype(np.float64) * 255.0) / 255.0
    return ImagePlane.from_array(q.astype(np.float32))


def evaluate(render, mlic: MLIC, split: LightSplit) -> EvalReport:
    """Score a renderer against the held-out planes of the collection.

    ``render`` maps a LightDirection to an RgbImage; its luminance is compared
    to the stored plane (both snapped to the 8-bit grid).
    """
    test_idx = np.asarray(split.test_idx)
    if len(test_idx) == 0:
        raise ValueError("empty test split")
    rows = []
    for i in test_idx:
        l = mlic.light(int(i))
        img = render(l)
        got = _snap8(luminance(img))
        ref = _snap8(mlic.luminance[int(i)])
        rows.append(
            EvalRow(
                light_index=int(i),
                lu=l.x,
                lv=l.y,
                psnr=psnr(got, ref),
                ssim=ssim(got, ref),
            )
        )
    return EvalReport(
        mean_psnr=float(np.mean([r.psnr for r in rows])),
        mean_ssim=float(np.mean([r.ssim for r in rows])),
        rows=rows,
    )


# -- parameter sweeps ---------------------------------------------------------


@dataclass(frozen=True)
class PipelineRunConfig:
    """One compress+train+evaluate run at desk scale."""

    b: int = 8
    hf: int = 10
    sigma: float = 0.3
    sample_cap: int = 50_000
    seed: int = 0
    train: TrainConfig = TrainConfig()


@dataclass(frozen=True)
class SweepPoint:
    value: float
    mean_psnr: float
    mean_ssim: float
    stderr_psnr: float
    stderr_ssim: float


@dataclass(frozen=True)
class SweepReport:
    axis: str
    points: list[SweepPoint]
    repeats: int

    def to_csv(self) -> str:
        lines = ["axis,value,psnr,ssim,stderr_psnr,stderr_ssim"]
        for p in self.points:
            lines.append(
                f"{self.axis},{p.value:g},{p.mean_psnr:.4f},{p.mean_ssim:.6f},"
                f"{p.stderr_psnr:.4f},{p.stderr_ssim:.6f}"
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {"axis": self.axis, "repeats": self.repeats, "points": [vars(p) for p in self.points]},
            indent=1,
        )


def run_pipeline(mlic: MLIC, split: LightSplit, cfg: PipelineRunConfig) -> tuple[RelightModel, EvalReport]:
    """compress -> train -> evaluate with a single seed."""
    basis = pca_fit(mlic, b=cfg.b, sample_cap=cfg.sample_cap, seed=cfg.seed)
    kgrid = pca_project(basis, mlic)
    fm = FourierMatrix.generate(hf=cfg.hf, sigma=cfg.sigma, seed=cfg.seed)
    weights, _ = train(mlic, kgrid, fm, split, replace(cfg.train, seed=cfg.seed))
    model = RelightModel(
        width=mlic.width,
        height=mlic.height,
        b=cfg.b,
        hf=cfg.hf,
        sigma=cfg.sigma,
        seed=cfg.seed,
        fourier=fm,
        mlp=weights,
        kgrid=kgrid,
        mean_u=mlic.mean_u,
        mean_v=mlic.mean_v,
    )
    report = evaluate(lambda l: relight_image(model, l), mlic, split)
    return model, report


SWEEP_AXES = ("B", "sigma", "nLights")


def sweep(
    axis: str,
    values,
    repeats: int,
    mlic: MLIC,
    split: LightSplit,
    base: PipelineRunConfig,
) -> SweepReport:
    """Re-run the pipeline per (value, repeat) and aggregate mean +/- stderr."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    values = sorted(values)
    if not values:
        raise ValueError("values must be non-empty")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")

    points = []
    for value in values:
        psnrs, ssims = [], []
        for r in range(repeats):
            seed = base.seed + 997 * r
            cfg = replace(base, seed=seed)
            run_split = split
            if axis == "B":
                cfg = replace(cfg, b=int(value))
            elif axis == "sigma":
                cfg = replace(cfg, sigma=float(value))
            else:
                n = int(value)
                if n > len(split.train_idx):
                    raise ValueError(
                        f"nLights={n} exceeds the {len(split.train_idx)} available train lights"
                    )
                rng = np.random.default_rng(seed)
                sub = np.sort(rng.choice(split.train_idx, size=n, replace=False))
                run_split = LightSplit(
                    train_idx=sub,
                    test_idx=split.test_idx,
                    exclusion_radius=split.exclusion_radius,
                )
            try:
                _, report = run_pipeline(mlic, run_split, cfg)
            except RtiError as e:
                raise type(e)(f"sweep {axis}={value} repeat {r}: {e}") from e
            psnrs.append(report.mean_psnr)
            ssims.append(report.mean_ssim)
        def stderr(xs):
            if len(xs) < 2:
                return 0.0
            return float(np.std(xs, ddof=1) / math.sqrt(len(xs)))
        points.append(
            SweepPoint(
                value=float(value),
                mean_psnr=float(np.mean(psnrs)),
                mean_ssim=float(np.mean(ssims)),
                stderr_psnr=stderr(psnrs),
                stderr_ssim=stderr(ssims),
            )
        )
    return SweepReport(axis=axis, points=points, repeats=repeats)
