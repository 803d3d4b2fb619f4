import csv
import wave
from pathlib import Path

import numpy as np
import pytest


def write_wav(path: Path, duration_ms: int, rate: int = 16_000, channels: int = 1,
              seed: int = 0, freq: float = 440.0) -> Path:
    """PCM16 WAV of band-limited noise plus a tone; deterministic."""
    n = int(rate * duration_ms / 1000)
    rng = np.random.default_rng(seed)
    t = np.arange(n) / rate
    signal = 0.4 * np.sin(2 * np.pi * freq * t) + 0.1 * rng.standard_normal(n)
    pcm = np.clip(signal * 32767, -32768, 32767).astype("<i2")
    if channels > 1:
        pcm = np.repeat(pcm[:, None], channels, axis=1)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(channels)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())
    return path


def write_manifest(path: Path, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["wav_path", "caller_id", "calltype_id", "start_ms", "end_ms"])
        w.writerows(rows)
    return path


@pytest.fixture()
def corpus(tmp_path):
    """Two wav files and a manifest of six segments over three callers."""
    write_wav(tmp_path / "a.wav", 1200, seed=1, freq=330.0)
    write_wav(tmp_path / "b.wav", 900, rate=48_000, seed=2, freq=550.0)
    manifest = write_manifest(tmp_path / "segments.csv", [
        ("a.wav", 1, 0, 0, 240),
        ("a.wav", 1, 1, 300, 520),
        ("a.wav", 2, 0, 600, 1100),
        ("b.wav", 2, 1, 0, 180),
        ("b.wav", 3, 0, 200, 460),
        ("b.wav", 3, 2, 500, 880),
    ])
    return tmp_path, manifest
