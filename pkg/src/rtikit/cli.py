"""Command-line pipeline: two synchronized captures in, a relightable model out.

Subcommands mirror the pipeline stages, each re-runnable from its on-disk
inputs:

    sync     audio offset + frame pairing          -> pairs.json
    detect   per-frame marker detection            -> detections.jsonl
    pose     detections -> per-frame light dirs    -> lights.json
    extract  rectified luminance collection        -> MLIC directory
    split    held-out test lights                  -> split.json
    compress PCA basis + per-pixel codes           -> codes.npz (+ pca.json)
    train    decoder training                      -> model.rtim
    relight  render one light                      -> PNG
    eval     held-out metrics (optional PTM)       -> CSV + JSON
    sweep    B / sigma / nLights parameter study   -> CSV + JSON
    synth    synthetic ground-truth MLIC           -> MLIC directory
    info     print model header

A flat key=value --config file supplies defaults; explicit flags win. Exit
codes: 0 success, 1 domain failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import core, mlic as mlicmod, sync as syncmod
from .errors import MarkerError, RtiError
from .evaluation import PipelineRunConfig, evaluate, ptm_fit, ptm_relight, sweep
from .marker import MarkerDetection, detect_marker
from .neural import EpochStats, FourierMatrix, TrainConfig, train
from .pca import PcaBasis, KGrid, pca_fit, pca_project
from .pose import marker_light_direction
from .relight import RelightModel, load_model, relight_image, save_model


@dataclass(frozen=True)
class PipelineConfig:
    """Paper-default knobs shared across stages."""

    crop_size: int = 400
    b: int = 8
    hf: int = 10
    sigma: float = 0.3
    n_test: int = 25
    exclusion_radius: float = 0.05
    seed: int = 0


DEFAULTS = PipelineConfig()


def _read_config(path: str) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line is not key=value: {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _frame_paths(directory: str, pattern: str) -> list[Path]:
    paths = sorted(Path(directory).glob(pattern))
    if not paths:
        raise RtiError(f"no frames matching {pattern!r} in {directory}")
    return paths


def _load_timestamps(ts_file: str | None, fps: float | None, n: int, what: str) -> list[float]:
    if ts_file:
        ts = syncmod.load_timestamps(ts_file)
        if len(ts) < n:
            raise RtiError(f"{what}: {len(ts)} timestamps for {n} frames")
        return ts[:n]
    if fps:
        return syncmod.constant_fps_timestamps(n, fps)
    raise RtiError(f"{what}: need either a timestamp sidecar or an fps value")


def cmd_sync(args) -> int:
    a = syncmod.load_wav(args.static_audio)
    b = syncmod.load_wav(args.moving_audio)
    offset = syncmod.audio_offset(a, b, max_lag=args.max_lag)
    ts_s = _load_timestamps(args.static_ts, args.static_fps, args.static_frames, "static")
    ts_m = _load_timestamps(args.moving_ts, args.moving_fps, args.moving_frames, "moving")
    fmap = syncmod.pair_frames(ts_s, ts_m, offset)
    payload = {
        "offset": offset,
        "max_skew": fmap.max_skew,
        "pairs": [[s, m, k] for s, m, k in fmap.pairs],
    }
    Path(args.out).write_text(json.dumps(payload, indent=1))
    print(f"sync: offset {offset:+.3f} s, {len(fmap)} frame pairs", file=sys.stderr)
    return 0


def _detect_one(idx_path):
    idx, path = idx_path
    img = core.load_png_rgb(path)
    try:
        det = detect_marker(img)
        return {
            "frame": idx,
            "found": True,
            "corners": det.corners.tolist(),
            "dot": det.dot_center.tolist(),
        }
    except MarkerError as e:
        return {"frame": idx, "found": False, "error": str(e)}


def cmd_detect(args) -> int:
    paths = _frame_paths(args.frames, args.pattern)
    workers = args.threads or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_detect_one, enumerate(paths)))
    with open(args.out, "w") as f:
        for r in results:
            f.write(json.dumps(r) + "\n")
    found = sum(r["found"] for r in results)
    print(f"detect: marker in {found}/{len(results)} frames", file=sys.stderr)
    return 0


def _read_detections(path: str) -> dict[int, dict]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            rec = json.loads(line)
            out[int(rec["frame"])] = rec
    return out


def cmd_pose(args) -> int:
    dets = _read_detections(args.detections)
    k = core.build_intrinsics_from_exif(args.focal35, args.img_width, args.img_height)
    lights = []
    for frame in sorted(dets):
        rec = dets[frame]
        if not rec.get("found"):
            continue
        corners = np.asarray(rec["corners"], dtype=np.float64)
        try:
            l = marker_light_direction(corners, k, marker_size=1.0)
        except (RtiError, ValueError) as e:
            print(f"pose: frame {frame} skipped ({e})", file=sys.stderr)
            continue
        lights.append({"frame": frame, "lu": l.x, "lv": l.y, "lz": l.z})
    if not lights:
        raise RtiError("pose: no usable frames")
    Path(args.out).write_text(json.dumps(lights, indent=1))
    print(f"pose: {len(lights)} light directions", file=sys.stderr)
    return 0


class _LazyFrames:
    """Sequence view over a frame directory; build_mlic touches each index once."""

    def __init__(self, paths):
        self.paths = paths

    def __len__(self):
        return len(self.paths)

    def __getitem__(self, i):
        return core.load_png_rgb(self.paths[i])


def cmd_extract(args) -> int:
    pairs_doc = json.loads(Path(args.pairs).read_text())
    fmap = syncmod.FrameIndexMap(
        pairs=[tuple(p) for p in pairs_doc["pairs"]], max_skew=pairs_doc["max_skew"]
    )
    dets_raw = _read_detections(args.detections)
    lights_raw = {rec["frame"]: rec for rec in json.loads(Path(args.lights).read_text())}
    paths = _frame_paths(args.frames, args.pattern)

    n_static = max(s for s, _, _ in fmap.pairs) + 1
    n_moving = max(m for _, m, _ in fmap.pairs) + 1
    if n_static > len(paths):
        raise RtiError(f"pairs reference frame {n_static - 1}, only {len(paths)} files")

    static_dets = []
    for i in range(n_static):
        rec = dets_raw.get(i)
        if rec and rec.get("found"):
            static_dets.append(
                MarkerDetection(
                    corners=np.asarray(rec["corners"]),
                    dot_center=np.asarray(rec["dot"]),
                )
            )
        else:
            static_dets.append(None)
    moving_lights = []
    for i in range(n_moving):
        rec = lights_raw.get(i)
        if rec:
            moving_lights.append(
                core.LightDirection.from_vector([rec["lu"], rec["lv"], rec["lz"]])
            )
        else:
            moving_lights.append(None)

    frames = _LazyFrames(paths[:n_static])
    m = mlicmod.build_mlic(
        fmap, static_dets, moving_lights, frames, out_size=(args.crop_size, args.crop_size)
    )
    mlicmod.save_mlic(m, args.out)
    print(f"extract: MLIC with {m.n_lights} planes -> {args.out}", file=sys.stderr)
    return 0


def cmd_split(args) -> int:
    m = mlicmod.load_mlic(args.mlic)
    s = mlicmod.split_lights(m.lights, args.n_test, args.radius, seed=args.seed)
    Path(args.out).write_text(
        json.dumps(
            {
                "train": s.train_idx.tolist(),
                "test": s.test_idx.tolist(),
                "exclusion_radius": s.exclusion_radius,
                "seed": args.seed,
            },
            indent=1,
        )
    )
    print(f"split: {len(s.train_idx)} train / {len(s.test_idx)} test", file=sys.stderr)
    return 0


def _load_split(path: str) -> mlicmod.LightSplit:
    doc = json.loads(Path(path).read_text())
    return mlicmod.LightSplit(
        train_idx=np.asarray(doc["train"], dtype=np.int64),
        test_idx=np.asarray(doc["test"], dtype=np.int64),
        exclusion_radius=float(doc["exclusion_radius"]),
    )


def cmd_compress(args) -> int:
    m = mlicmod.load_mlic(args.mlic)
    basis = pca_fit(m, b=args.b, sample_cap=args.sample_cap, seed=args.seed)
    kgrid = pca_project(basis, m)
    np.savez_compressed(
        args.out,
        mean=basis.mean,
        components=basis.components,
        explained_variance=basis.explained_variance,
        coeffs=kgrid.coeffs,
    )
    if args.pca_json:
        Path(args.pca_json).write_text(
            json.dumps(
                {
                    "n_in": basis.n_in,
                    "n_out": basis.n_out,
                    "explained_variance": basis.explained_variance.tolist(),
                    "mean": basis.mean.tolist(),
                },
                indent=1,
            )
        )
    print(f"compress: B={args.b}, codes -> {args.out}", file=sys.stderr)
    return 0


def _load_codes(path: str, m: mlicmod.MLIC) -> tuple[PcaBasis, KGrid]:
    with np.load(path) as z:
        basis = PcaBasis(
            n_in=z["mean"].shape[0],
            n_out=z["components"].shape[0],
            mean=z["mean"],
            components=z["components"],
            explained_variance=z["explained_variance"],
        )
        kgrid = KGrid(
            width=m.width, height=m.height, b=basis.n_out, coeffs=z["coeffs"]
        )
    return basis, kgrid


def cmd_train(args) -> int:
    m = mlicmod.load_mlic(args.mlic)
    split = _load_split(args.split)
    basis, kgrid = _load_codes(args.codes, m)
    fm = FourierMatrix.generate(hf=args.hf, sigma=args.sigma, seed=args.seed)
    cfg = TrainConfig(
        lr_phase1=args.lr1,
        epochs_phase1=args.epochs1,
        lr_phase2=args.lr2,
        epochs_phase2=args.epochs2,
        batch_size=args.batch_size,
        seed=args.seed,
        steps_per_epoch_cap=args.steps_cap,
    )

    def log(e: EpochStats):
        print(
            json.dumps(
                {"epoch": e.epoch, "phase": e.phase, "mae": round(e.mae, 6), "seconds": round(e.seconds, 3)}
            ),
            file=sys.stderr,
        )

    weights, _ = train(m, kgrid, fm, split, cfg, log=log)
    model = RelightModel(
        width=m.width,
        height=m.height,
        b=kgrid.b,
        hf=args.hf,
        sigma=args.sigma,
        seed=args.seed,
        fourier=fm,
        mlp=weights,
        kgrid=kgrid,
        mean_u=m.mean_u,
        mean_v=m.mean_v,
    )
    save_model(model, args.out)
    print(f"train: model -> {args.out}", file=sys.stderr)
    return 0


def cmd_relight(args) -> int:
    m = load_model(args.model)
    if args.lu * args.lu + args.lv * args.lv > 1.0:
        raise ValueError(f"invalid light: lu^2 + lv^2 = {args.lu**2 + args.lv**2:.3f} > 1")
    img = relight_image(m, core.LightDirection.from_uv(args.lu, args.lv))
    core.save_png_rgb(img, args.out)
    return 0


def cmd_eval(args) -> int:
    m = mlicmod.load_mlic(args.mlic)
    split = _load_split(args.split)
    model = load_model(args.model)
    report = evaluate(lambda l: relight_image(model, l), m, split)
    summary = {"neural": {"mean_psnr": report.mean_psnr, "mean_ssim": report.mean_ssim}}
    if args.ptm:
        ptm = ptm_fit(m, split)
        ptm_report = evaluate(lambda l: ptm_relight(ptm, l), m, split)
        summary["ptm"] = {
            "mean_psnr": ptm_report.mean_psnr,
            "mean_ssim": ptm_report.mean_ssim,
        }
    if args.out_csv:
        Path(args.out_csv).write_text(report.to_csv())
    if args.out_json:
        Path(args.out_json).write_text(json.dumps(summary, indent=1))
    print(json.dumps(summary, indent=1))
    return 0


def cmd_sweep(args) -> int:
    m = mlicmod.load_mlic(args.mlic)
    split = _load_split(args.split)
    values = [float(v) for v in args.values.split(",")]
    base = PipelineRunConfig(
        b=args.b,
        hf=args.hf,
        sigma=args.sigma,
        seed=args.seed,
        train=TrainConfig(
            epochs_phase1=args.epochs1,
            epochs_phase2=args.epochs2,
            batch_size=args.batch_size,
            seed=args.seed,
            steps_per_epoch_cap=args.steps_cap,
        ),
    )
    report = sweep(args.axis, values, args.repeats, m, split, base)
    Path(args.out_csv).write_text(report.to_csv())
    if args.out_json:
        Path(args.out_json).write_text(report.to_json())
    print(report.to_csv(), end="")
    return 0


def cmd_synth(args) -> int:
    from .synthgen import (
        DomeTrajectory,
        OrbitTrajectory,
        bump_scene,
        hemisphere_scene,
        synth_mlic,
    )

    if args.preset == "bump":
        scene = bump_scene(
            size=args.size,
            seed=args.seed,
            ks=args.ks,
            spec_exp=args.spec_exp,
            n_bumps=args.n_bumps,
        )
    else:
        scene = hemisphere_scene(size=args.size, ks=args.ks, spec_exp=args.spec_exp)
    if args.trajectory == "dome":
        traj = DomeTrajectory(n=args.n)
    else:
        traj = OrbitTrajectory(n=args.n, zenith_deg=args.zenith, jitter_deg=args.jitter)
    m = synth_mlic(scene, traj, seed=args.seed)
    mlicmod.save_mlic(m, args.out)
    truth = {
        "preset": args.preset,
        "size": args.size,
        "ks": scene.ks,
        "spec_exp": scene.spec_exp,
        "chroma": list(scene.chroma),
        "trajectory": args.trajectory,
        "n": args.n,
        "zenith": args.zenith,
        "jitter": args.jitter,
        "seed": args.seed,
    }
    Path(args.out, "truth.json").write_text(json.dumps(truth, indent=1))
    print(f"synth: {m.n_lights} renders -> {args.out}", file=sys.stderr)
    return 0


def cmd_info(args) -> int:
    m = load_model(args.model)
    size = Path(args.model).stat().st_size
    print(
        f"width={m.width} height={m.height} B={m.b} Hf={m.hf} "
        f"sigma={m.sigma:g} seed={m.seed} version={m.version} bytes={size}"
    )
    return 0


def build_parser(config_defaults: dict | None = None) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rtikit", description=__doc__.split("\n")[0])
    p.add_argument("--config", help="flat key=value defaults file")
    sub = p.add_subparsers(dest="command", required=True)

    subparsers = []

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        sp.add_argument("--seed", type=int, default=DEFAULTS.seed)
        sp.add_argument("--threads", type=int, default=0, help="0 = all cores")
        sp.add_argument("--config", help=argparse.SUPPRESS)
        subparsers.append(sp)
        return sp

    sp = add("sync", cmd_sync, "audio offset and frame pairing")
    sp.add_argument("--static-audio", required=True)
    sp.add_argument("--moving-audio", required=True)
    sp.add_argument("--static-frames", type=int, required=True)
    sp.add_argument("--moving-frames", type=int, required=True)
    sp.add_argument("--static-fps", type=float)
    sp.add_argument("--moving-fps", type=float)
    sp.add_argument("--static-ts", help="timestamp sidecar, one seconds value per line")
    sp.add_argument("--moving-ts")
    sp.add_argument("--max-lag", type=float, default=5.0)
    sp.add_argument("--out", required=True)

    sp = add("detect", cmd_detect, "find the marker in every frame")
    sp.add_argument("--frames", required=True)
    sp.add_argument("--pattern", default="*.png")
    sp.add_argument("--out", required=True)

    sp = add("pose", cmd_pose, "light directions from detections")
    sp.add_argument("--detections", required=True)
    sp.add_argument("--focal35", type=float, required=True, help="EXIF 35mm-equivalent focal")
    sp.add_argument("--img-width", type=int, required=True)
    sp.add_argument("--img-height", type=int, required=True)
    sp.add_argument("--out", required=True)

    sp = add("extract", cmd_extract, "build the MLIC from static frames")
    sp.add_argument("--frames", required=True)
    sp.add_argument("--pattern", default="*.png")
    sp.add_argument("--detections", required=True)
    sp.add_argument("--lights", required=True)
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--crop-size", type=int, default=DEFAULTS.crop_size)
    sp.add_argument("--out", required=True)

    sp = add("split", cmd_split, "hold out test lights")
    sp.add_argument("--mlic", required=True)
    sp.add_argument("--n-test", type=int, default=DEFAULTS.n_test)
    sp.add_argument("--radius", type=float, default=DEFAULTS.exclusion_radius)
    sp.add_argument("--out", required=True)

    sp = add("compress", cmd_compress, "PCA-compress pixel intensity vectors")
    sp.add_argument("--mlic", required=True)
    sp.add_argument("--b", type=int, default=DEFAULTS.b)
    sp.add_argument("--sample-cap", type=int, default=50_000)
    sp.add_argument("--pca-json", help="optional basis dump for inspection")
    sp.add_argument("--out", required=True)

    def train_flags(sp):
        sp.add_argument("--lr1", type=float, default=1e-3)
        sp.add_argument("--epochs1", type=int, default=20)
        sp.add_argument("--lr2", type=float, default=1e-4)
        sp.add_argument("--epochs2", type=int, default=20)
        sp.add_argument("--batch-size", type=int, default=4096)
        sp.add_argument("--steps-cap", type=int, default=2000)

    sp = add("train", cmd_train, "train the relighting decoder")
    sp.add_argument("--mlic", required=True)
    sp.add_argument("--codes", required=True)
    sp.add_argument("--split", required=True)
    sp.add_argument("--hf", type=int, default=DEFAULTS.hf)
    sp.add_argument("--sigma", type=float, default=DEFAULTS.sigma)
    train_flags(sp)
    sp.add_argument("--out", required=True)

    sp = add("relight", cmd_relight, "render the model under one light")
    sp.add_argument("--model", required=True)
    sp.add_argument("--lu", type=float, required=True)
    sp.add_argument("--lv", type=float, required=True)
    sp.add_argument("--out", required=True)

    sp = add("eval", cmd_eval, "score held-out lights")
    sp.add_argument("--model", required=True)
    sp.add_argument("--mlic", required=True)
    sp.add_argument("--split", required=True)
    sp.add_argument("--ptm", action="store_true", help="also fit and score the PTM baseline")
    sp.add_argument("--out-csv")
    sp.add_argument("--out-json")

    sp = add("sweep", cmd_sweep, "parameter study over B, sigma or nLights")
    sp.add_argument("--mlic", required=True)
    sp.add_argument("--split", required=True)
    sp.add_argument("--axis", choices=["B", "sigma", "nLights"], required=True)
    sp.add_argument("--values", required=True, help="comma-separated")
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--b", type=int, default=DEFAULTS.b)
    sp.add_argument("--hf", type=int, default=DEFAULTS.hf)
    sp.add_argument("--sigma", type=float, default=DEFAULTS.sigma)
    train_flags(sp)
    sp.add_argument("--out-csv", required=True)
    sp.add_argument("--out-json")

    sp = add("synth", cmd_synth, "generate a synthetic MLIC")
    sp.add_argument("--preset", choices=["bump", "hemisphere"], default="bump")
    sp.add_argument("--size", type=int, default=128)
    sp.add_argument("--n-bumps", type=int, default=6)
    sp.add_argument("--ks", type=float, default=0.4)
    sp.add_argument("--spec-exp", type=float, default=32.0)
    sp.add_argument("--trajectory", choices=["dome", "orbit"], default="orbit")
    sp.add_argument("--n", type=int, default=300)
    sp.add_argument("--zenith", type=float, default=45.0)
    sp.add_argument("--jitter", type=float, default=4.0)
    sp.add_argument("--out", required=True)

    sp = add("info", cmd_info, "print model metadata")
    sp.add_argument("--model", required=True)

    if config_defaults:
        # subparsers parse into their own namespace, so file-supplied defaults
        # must be installed on each one after its arguments exist
        for sp in subparsers:
            sp.set_defaults(**config_defaults)
    return p


def run_subcommand(argv: list[str]) -> int:
    # pre-scan for --config so file values become parser defaults
    config = {}
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            config = _read_config(argv[i + 1])
        elif a.startswith("--config="):
            config = _read_config(a.split("=", 1)[1])
    typed = {}
    for k, v in config.items():
        try:
            typed[k] = json.loads(v)
        except (json.JSONDecodeError, ValueError):
            typed[k] = v
    parser = build_parser(typed)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except RtiError as e:
        print(f"error [{args.command}]: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error [{args.command}]: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_subcommand(sys.argv[1:]))


if __name__ == "__main__":
    main()
