"""Neural reflectance decoder: y = Z(k_p, l).

The light direction enters through a fixed random Fourier projection (drawn
once per model, never trained); the compressed pixel code k_p is concatenated
with the cos/sin features and pushed through a small MLP: four ELU layers of
16 units and one linear output neuron. Training minimizes mean absolute
error with Adam in two fixed-rate phases.

Everything here is plain numpy, on purpose: the network is ~1.2k parameters,
so a hand-rolled forward/backward keeps the artifact dependency-light and the
gradients auditable against finite differences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import LightDirection
from .errors import DivergenceError
from .mlic import MLIC, LightSplit
from .pca import KGrid

HIDDEN_WIDTH = 16
N_HIDDEN = 4


@dataclass(frozen=True, eq=False)
class FourierMatrix:
    hf: int
    values: np.ndarray  # (hf, 2)
    sigma: float
    seed: int

    def __post_init__(self):
        if self.hf < 1:
            raise ValueError("need at least one frequency")
        if self.values.shape != (self.hf, 2):
            raise ValueError("frequency matrix must be (hf, 2)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("frequencies must be finite")

    @classmethod
    def generate(cls, hf: int, sigma: float, seed: int) -> "FourierMatrix":
        rng = np.random.default_rng(seed)
        return cls(hf=hf, values=rng.normal(0.0, sigma, size=(hf, 2)), sigma=sigma, seed=seed)


@dataclass(eq=False)
class MlpWeights:
    """Five (weight, bias) pairs; dims (B+2Hf) -> 16 -> 16 -> 16 -> 16 -> 1."""

    layers: list[tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        if len(self.layers) != N_HIDDEN + 1:
            raise ValueError(f"expected {N_HIDDEN + 1} layers")
        prev = self.layers[0][0].shape[0]
        for i, (w, b) in enumerate(self.layers):
            out = HIDDEN_WIDTH if i < N_HIDDEN else 1
            if w.shape != (prev, out) or b.shape != (out,):
                raise ValueError(f"layer {i} has shape {w.shape}, expected ({prev}, {out})")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} has non-finite entries")
            prev = out

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def weight_count(self) -> int:
        """Matrix entries only; biases are excluded from the storage tally."""
        return sum(w.size for w, _ in self.layers)

    @classmethod
    def init_random(cls, input_dim: int, seed: int) -> "MlpWeights":
        rng = np.random.default_rng(seed)
        dims = [input_dim] + [HIDDEN_WIDTH] * N_HIDDEN + [1]
        layers = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            layers.append(
                (rng.uniform(-lim, lim, size=(fan_in, fan_out)), np.zeros(fan_out))
            )
        return cls(layers=layers)


@dataclass(frozen=True)
class TrainConfig:
    lr_phase1: float = 1e-3
    epochs_phase1: int = 20
    lr_phase2: float = 1e-4
    epochs_phase2: int = 20
    batch_size: int = 4096
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    steps_per_epoch_cap: int = 2000  # 0 = full pass

    def __post_init__(self):
        if min(self.lr_phase1, self.lr_phase2) <= 0:
            raise ValueError("learning rates must be positive")
        if min(self.epochs_phase1, self.epochs_phase2) < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.steps_per_epoch_cap < 0:
            raise ValueError("steps_per_epoch_cap must be >= 0")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    phase: int
    mae: float
    seconds: float


def fourier_embed(l: LightDirection, fm: FourierMatrix) -> np.ndarray:
    """(cos(B l_uv), sin(B l_uv)); depends only on the first two components."""
    s = fm.values @ np.array([l.x, l.y])
    return np.concatenate([np.cos(s), np.sin(s)])


def embed_uv(uv: np.ndarray, fm: FourierMatrix) -> np.ndarray:
    """Batch embedding of (N, 2) light uv components -> (N, 2*hf)."""
    s = np.asarray(uv, dtype=np.float64) @ fm.values.T
    return np.concatenate([np.cos(s), np.sin(s)], axis=1)


def _elu(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, z, np.expm1(np.minimum(z, 0.0)))


def _elu_grad(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0, np.exp(np.minimum(z, 0.0)))


def _forward_batch(w: MlpWeights, x: np.ndarray):
    acts = [x]
    pre = []
    a = x
    for i, (wi, bi) in enumerate(w.layers):
        z = a @ wi + bi
        pre.append(z)
        a = _elu(z) if i < N_HIDDEN else z
        acts.append(a)
    return acts[-1][:, 0], acts, pre


def mlp_forward(w: MlpWeights, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (w.input_dim,):
        raise ValueError(f"input must have length {w.input_dim}")
    y, _, _ = _forward_batch(w, x[None, :])
    return float(y[0])


def _backward_batch(w: MlpWeights, x: np.ndarray, target: np.ndarray):
    """Mean absolute error over the batch and its gradients."""
    y, acts, pre = _forward_batch(w, x)
    diff = y - target
    loss = float(np.mean(np.abs(diff)))
    # subgradient 0 at the kink
    dz = (np.sign(diff) / len(diff))[:, None]
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(w.layers)
    for i in range(len(w.layers) - 1, -1, -1):
        a_prev = acts[i]
        grads[i] = (a_prev.T @ dz, dz.sum(axis=0))
        if i > 0:
            da = dz @ w.layers[i][0].T
            dz = da * _elu_grad(pre[i - 1])
    return loss, grads


def mlp_backward(w: MlpWeights, x, target: float):
    """Per-sample |Z(x) - target| and gradients w.r.t. every weight and bias."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (w.input_dim,):
        raise ValueError(f"input must have length {w.input_dim}")
    return _backward_batch(w, x[None, :], np.array([target], dtype=np.float64))


class _Adam:
    def __init__(self, w: MlpWeights, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = [(np.zeros_like(wi), np.zeros_like(bi)) for wi, bi in w.layers]
        self.v = [(np.zeros_like(wi), np.zeros_like(bi)) for wi, bi in w.layers]

    def step(self, w: MlpWeights, grads, lr: float) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for i, (wi, bi) in enumerate(w.layers):
            for j, (param, g) in enumerate(((wi, grads[i][0]), (bi, grads[i][1]))):
                m = self.m[i][j]
                v = self.v[i][j]
                m *= c.beta1
                m += (1 - c.beta1) * g
                v *= c.beta2
                v += (1 - c.beta2) * (g * g)
                param -= lr * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def train(
    mlic: MLIC,
    kgrid: KGrid,
    fm: FourierMatrix,
    split: LightSplit,
    cfg: TrainConfig,
    log=None,
) -> tuple[MlpWeights, list[EpochStats]]:
    """Fit the decoder on all (pixel, train-light) samples.

    Deterministic given cfg.seed (weight init, shuffling). ``log`` is called
    with each EpochStats as training proceeds.
    """
    if kgrid.width != mlic.width or kgrid.height != mlic.height:
        raise ValueError("k-grid dimensions do not match the collection")
    train_idx = np.asarray(split.train_idx, dtype=np.int64)
    if len(train_idx) == 0:
        raise ValueError("empty training split")

    # the hot loop runs in float32: sample index s encodes (pixel, light) as
    # s = p * n_lights + n, so targets gather with the raw permutation slice
    n_lights = len(train_idx)
    n_pixels = mlic.width * mlic.height
    targets = np.ascontiguousarray(
        mlic.luminance[train_idx].reshape(n_lights, n_pixels).T, dtype=np.float32
    ).reshape(-1)
    kflat = kgrid.flat().astype(np.float32)  # (P, B)
    emb = embed_uv(mlic.lights[train_idx][:, :2], fm).astype(np.float32)

    input_dim = kgrid.b + 2 * fm.hf
    weights = MlpWeights.init_random(input_dim, cfg.seed)
    weights = MlpWeights(
        layers=[(w.astype(np.float32), b.astype(np.float32)) for w, b in weights.layers]
    )
    adam = _Adam(weights, cfg)
    rng = np.random.default_rng(cfg.seed + 1)

    total = n_pixels * n_lights
    full_steps = (total + cfg.batch_size - 1) // cfg.batch_size
    steps = min(full_steps, cfg.steps_per_epoch_cap) if cfg.steps_per_epoch_cap else full_steps
    x = np.empty((cfg.batch_size, input_dim), dtype=np.float32)

    history: list[EpochStats] = []
    phases = [(1, cfg.lr_phase1, cfg.epochs_phase1), (2, cfg.lr_phase2, cfg.epochs_phase2)]
    epoch = 0
    for phase, lr, n_epochs in phases:
        for _ in range(n_epochs):
            t0 = time.perf_counter()
            perm = rng.permutation(total)
            running = 0.0
            for s in range(steps):
                idx = perm[s * cfg.batch_size : (s + 1) * cfg.batch_size]
                if len(idx) == 0:
                    break
                p = idx // n_lights
                n = idx - p * n_lights
                xb = x[: len(idx)]
                np.take(kflat, p, axis=0, out=xb[:, : kgrid.b])
                np.take(emb, n, axis=0, out=xb[:, kgrid.b :])
                loss, grads = _backward_batch(weights, xb, targets[idx])
                if not np.isfinite(loss):
                    raise DivergenceError(
                        f"non-finite loss at epoch {epoch}, step {s}"
                    )
                adam.step(weights, grads, lr)
                running += loss
            stats = EpochStats(
                epoch=epoch,
                phase=phase,
                mae=running / max(steps, 1),
                seconds=time.perf_counter() - t0,
            )
            history.append(stats)
            if log is not None:
                log(stats)
            epoch += 1
    return weights, history
