"""Audio-based time alignment of the static and moving frame sequences.

Both devices start recording by hand, so the sequences share no clock. The
common audio scene fixes a constant offset: energy envelopes of the two
tracks are cross-correlated and the peak lag wins. Residual per-frame skew is
bounded by one frame interval of the slower video, which is negligible for a
slowly orbited light.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import SyncError

ENVELOPE_RATE_HZ = 100.0  # RMS envelope resolution; 10 ms lag quantization


@dataclass(frozen=True, eq=False)
class AudioTrack:
    sample_rate: float
    samples: np.ndarray  # mono float32

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        if self.samples.ndim != 1 or len(self.samples) == 0:
            raise ValueError("samples must be a non-empty 1-D array")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True, eq=False)
class FrameIndexMap:
    """Matched (static, moving) frame indices with per-pair residual skew."""

    pairs: list[tuple[int, int, float]]
    max_skew: float

    def __post_init__(self):
        s_prev, m_prev = -1, -1
        for si, mi, skew in self.pairs:
            if si <= s_prev or mi <= m_prev:
                raise ValueError("pair indices must be strictly increasing")
            if abs(skew) > self.max_skew + 1e-9:
                raise ValueError(f"residual skew {skew} exceeds bound {self.max_skew}")
            s_prev, m_prev = si, mi

    def __len__(self) -> int:
        return len(self.pairs)


def load_wav(path: str | Path) -> AudioTrack:
    """Read a PCM or float WAV; multi-channel input is downmixed by averaging."""
    rate, data = wavfile.read(str(path))
    x = np.asarray(data)
    if x.ndim == 2:
        x = x.mean(axis=1)
    if x.dtype == np.int16:
        x = x.astype(np.float32) / 32768.0
    elif x.dtype == np.int32:
        x = x.astype(np.float32) / 2147483648.0
    elif x.dtype == np.uint8:
        x = (x.astype(np.float32) - 128.0) / 128.0
    else:
        x = x.astype(np.float32)
    return AudioTrack(sample_rate=float(rate), samples=x)


def _envelope(track: AudioTrack) -> np.ndarray:
    win = max(1, int(round(track.sample_rate / ENVELOPE_RATE_HZ)))
    n = len(track.samples) // win
    if n < 2:
        raise SyncError("track too short to build an energy envelope")
    x = track.samples[: n * win].astype(np.float64).reshape(n, win)
    return np.sqrt((x * x).mean(axis=1))


def audio_offset(a: AudioTrack, b: AudioTrack, max_lag: float) -> float:
    """Lag (seconds) maximizing the normalized cross-correlation of envelopes.

    Positive offset means track b's content happens later: b(t) ~ a(t - offset).
    """
    if max_lag <= 0:
        raise ValueError("max_lag must be positive")
    if max_lag > min(a.duration, b.duration):
        raise ValueError("max_lag exceeds the shorter track duration")

    ea = _envelope(a)
    eb = _envelope(b)
    ea = ea - ea.mean()
    eb = eb - eb.mean()
    if np.std(ea) < 1e-12 or np.std(eb) < 1e-12:
        raise SyncError("silent or constant track; cross-correlation undefined")

    lag_cap = int(round(max_lag * ENVELOPE_RATE_HZ))
    lag_cap = min(lag_cap, len(ea) - 1, len(eb) - 1)
    min_overlap = max(2, int(0.05 * min(len(ea), len(eb))))

    best_score, best_lag = -np.inf, 0
    for lag in range(-lag_cap, lag_cap + 1):
        t0 = max(0, -lag)
        t1 = min(len(ea), len(eb) - lag)
        if t1 - t0 < min_overlap:
            continue
        va = ea[t0:t1]
        vb = eb[t0 + lag : t1 + lag]
        denom = np.linalg.norm(va) * np.linalg.norm(vb)
        if denom < 1e-12:
            continue
        score = float(va @ vb) / denom
        if score > best_score:
            best_score, best_lag = score, lag
    if not np.isfinite(best_score):
        raise SyncError("no usable overlap within the requested lag range")
    return best_lag / ENVELOPE_RATE_HZ


def pair_frames(
    ts_static: list[float], ts_moving: list[float], offset: float
) -> FrameIndexMap:
    """Pair each static frame with the nearest offset-corrected moving frame.

    Matching tolerance is one frame interval of the slower sequence; each
    moving frame is used at most once and pairing is monotone in time.
    """
    ts = np.asarray(ts_static, dtype=np.float64)
    tm = np.asarray(ts_moving, dtype=np.float64)
    if len(ts) == 0 or len(tm) == 0:
        raise SyncError("empty timestamp list")
    if np.any(np.diff(ts) <= 0) or np.any(np.diff(tm) <= 0):
        raise ValueError("timestamps must be strictly increasing")

    intervals = []
    if len(ts) > 1:
        intervals.append(float(np.median(np.diff(ts))))
    if len(tm) > 1:
        intervals.append(float(np.median(np.diff(tm))))
    tol = max(intervals) if intervals else np.inf

    shifted = tm - offset
    pairs: list[tuple[int, int, float]] = []
    j_start = 0
    for i, t in enumerate(ts):
        if j_start >= len(shifted):
            break
        j = int(np.searchsorted(shifted, t, side="left"))
        cands = sorted(c for c in {j - 1, j, j_start} if j_start <= c < len(shifted))
        if not cands:
            continue
        jbest = min(cands, key=lambda c: (abs(shifted[c] - t), c))
        skew = float(shifted[jbest] - t)
        if abs(skew) <= tol + 1e-9:  # epsilon guards exact-tolerance ties
            pairs.append((i, jbest, skew))
            j_start = jbest + 1
    if not pairs:
        raise SyncError("no frames overlap after applying the audio offset")
    return FrameIndexMap(pairs=pairs, max_skew=tol)


def load_timestamps(path: str | Path) -> list[float]:
    """Read a sidecar file with one timestamp (seconds) per line."""
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            out.append(float(line))
    return out


def constant_fps_timestamps(n_frames: int, fps: float) -> list[float]:
    if n_frames <= 0 or fps <= 0:
        raise ValueError("need positive frame count and fps")
    return [i / fps for i in range(n_frames)]
