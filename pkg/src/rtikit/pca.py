"""PCA compression of per-pixel intensity vectors.

Each pixel of an N-light collection owns an N-vector of observed intensities;
those vectors are projected onto B principal components fitted from the
scatter of (optionally subsampled) pixels. B is typically 8 while N runs into
the thousands, which is where the storage win comes from.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mlic import MLIC


@dataclass(frozen=True, eq=False)
class PcaBasis:
    n_in: int
    n_out: int
    mean: np.ndarray  # (n_in,)
    components: np.ndarray  # (n_out, n_in), orthonormal rows
    explained_variance: np.ndarray  # (n_out,), non-increasing

    def __post_init__(self):
        if self.mean.shape != (self.n_in,):
            raise ValueError("mean length must equal n_in")
        if self.components.shape != (self.n_out, self.n_in):
            raise ValueError("components must be (n_out, n_in)")
        if self.explained_variance.shape != (self.n_out,):
            raise ValueError("explained_variance length must equal n_out")
        gram = self.components @ self.components.T
        if np.max(np.abs(gram - np.eye(self.n_out))) > 1e-6:
            raise ValueError("components are not orthonormal")
        if np.any(np.diff(self.explained_variance) > 1e-12):
            raise ValueError("explained_variance must be non-increasing")


@dataclass(frozen=True, eq=False)
class KGrid:
    """Per-pixel compressed coefficients, shape (height, width, b)."""

    width: int
    height: int
    b: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.height, self.width, self.b):
            raise ValueError("coeffs shape must be (height, width, b)")
        if self.coeffs.dtype != np.float32:
            raise ValueError("coeffs must be float32")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coeffs must be finite")

    def flat(self) -> np.ndarray:
        """(width*height, b) view, pixel-major."""
        return self.coeffs.reshape(-1, self.b)


def _orthonormal_complement(components: np.ndarray, n: int, want: int) -> np.ndarray:
    """Rows spanning directions orthogonal to ``components`` (rank padding)."""
    basis = list(components)
    out = []
    i = 0
    while len(out) < want and i < n:
        v = np.zeros(n)
        v[i] = 1.0
        for b in basis:
            v = v - (v @ b) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            v = v / nv
            basis.append(v)
            out.append(v)
        i += 1
    if len(out) < want:
        raise ValueError("could not complete an orthonormal basis")
    return np.array(out)


def pca_fit(mlic: MLIC, b: int, sample_cap: int = 50_000, seed: int = 0) -> PcaBasis:
    """Fit the top-``b`` principal components of the pixel intensity vectors.

    The N x N scatter matrix is accumulated over at most ``sample_cap``
    uniformly sampled pixels (0 = use all). Component signs are fixed so the
    largest-magnitude entry of each is positive, keeping model files
    reproducible.
    """
    n = mlic.n_lights
    if not 1 <= b <= n:
        raise ValueError(f"b must be in [1, {n}], got {b}")
    if sample_cap < 0:
        raise ValueError("sample_cap must be >= 0")

    x = mlic.pixel_vectors()  # (W*H, N) float32
    n_pixels = x.shape[0]
    if sample_cap and n_pixels > sample_cap:
        rng = np.random.default_rng(seed)
        idx = rng.choice(n_pixels, size=sample_cap, replace=False)
        idx.sort()
        x = x[idx]

    x = x.astype(np.float64)
    mean = x.mean(axis=0)
    xc = x - mean
    scatter = xc.T @ xc

    evals, evecs = np.linalg.eigh(scatter)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]

    # Effective rank: eigenvalues indistinguishable from zero are padding.
    tol = max(evals[0], 1.0) * 1e-12
    rank = int(np.sum(evals > tol))

    k = min(b, rank)
    components = evecs[:, :k].T.copy()
    variance = evals[:k] / max(x.shape[0], 1)
    if k < b:
        pad = _orthonormal_complement(components, n, b - k)
        components = np.vstack([components, pad])
        variance = np.concatenate([variance, np.zeros(b - k)])

    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0

    return PcaBasis(
        n_in=n,
        n_out=b,
        mean=mean,
        components=np.ascontiguousarray(components),
        explained_variance=variance,
    )


def pca_project(basis: PcaBasis, mlic: MLIC) -> KGrid:
    """Project every pixel vector onto the basis: k_p = C (K_p - mean)."""
    if mlic.n_lights != basis.n_in:
        raise ValueError(
            f"collection has {mlic.n_lights} lights, basis expects {basis.n_in}"
        )
    x = mlic.pixel_vectors().astype(np.float64)
    k = (x - basis.mean) @ basis.components.T
    coeffs = k.reshape(mlic.height, mlic.width, basis.n_out).astype(np.float32)
    return KGrid(width=mlic.width, height=mlic.height, b=basis.n_out, coeffs=coeffs)


def pca_reconstruct(basis: PcaBasis, k: np.ndarray) -> np.ndarray:
    """Inverse map: mean + C^T k. Diagnostic only; lossy below b = n."""
    k = np.asarray(k, dtype=np.float64)
    if k.shape[-1] != basis.n_out:
        raise ValueError(f"coefficient vector must have length {basis.n_out}")
    return basis.mean + k @ basis.components
