"""WAV loading, 16 kHz resampling, and millisecond slicing.

Only PCM WAV is handled (8/16/32-bit int); everything is converted to
mono float64 in [-1, 1]. Resampling is linear interpolation onto the
target sample grid, which is deterministic and has no dependencies; the
upstream models do their own filtering anyway.
"""
from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

TARGET_RATE = 16_000


class AudioError(ValueError):
    pass


_WIDTH_DTYPE = {1: np.uint8, 2: np.dtype("<i2"), 4: np.dtype("<i4")}


def load_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Return (mono float64 samples in [-1, 1], sample rate)."""
    path = Path(path)
    if not path.exists():
        raise AudioError(f"wav file not found: {path}")
    try:
        with wave.open(str(path), "rb") as wav:
            width = wav.getsampwidth()
            channels = wav.getnchannels()
            rate = wav.getframerate()
            raw = wav.readframes(wav.getnframes())
    except wave.Error as exc:
        raise AudioError(f"{path}: {exc}") from None
    dtype = _WIDTH_DTYPE.get(width)
    if dtype is None:
        raise AudioError(f"{path}: unsupported sample width {width} bytes")
    data = np.frombuffer(raw, dtype=dtype).astype(np.float64)
    if width == 1:  # 8-bit WAV is unsigned
        data = data - 128.0
    data /= float(2 ** (8 * width - 1))
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    return data, rate


def resample(samples: np.ndarray, rate: int, target: int = TARGET_RATE) -> np.ndarray:
    if rate == target:
        return np.asarray(samples, dtype=np.float64)
    if rate < 1:
        raise AudioError(f"bad sample rate {rate}")
    n_out = int(round(len(samples) * target / rate))
    if n_out == 0:
        return np.zeros(0)
    src_t = np.arange(len(samples)) / rate
    dst_t = np.arange(n_out) / target
    return np.interp(dst_t, src_t, samples)


def slice_ms(samples_16k: np.ndarray, start_ms: int, end_ms: int) -> np.ndarray:
    """Cut a segment out of a 16 kHz stream; 16 samples per millisecond."""
    lo = start_ms * TARGET_RATE // 1000
    hi = end_ms * TARGET_RATE // 1000
    if hi > len(samples_16k):
        raise AudioError(
            f"segment {start_ms}-{end_ms} ms runs past the file "
            f"({len(samples_16k) * 1000 // TARGET_RATE} ms)"
        )
    return samples_16k[lo:hi]
