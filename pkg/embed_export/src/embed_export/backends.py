"""Embedding backends.

The real one wraps an upstream toolkit and needs torch plus a checkpoint.
The stub produces deterministic embeddings from windowed waveform
statistics through a model-seeded random projection; it exists so the
whole export path (manifest, resampling, framing, store layout, skip
log) can run and be tested on machines with no checkpoints installed.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .audio import TARGET_RATE
from .registry import ModelInfo


class BackendError(RuntimeError):
    pass


class StubBackend:
    name = "stub"

    def __init__(self, info: ModelInfo):
        self.info = info
        digest = hashlib.sha256(info.key.encode("utf-8")).digest()
        seed = np.frombuffer(digest[:16], dtype=np.uint32)
        rng = np.random.default_rng(np.random.SeedSequence(seed.tolist()))
        self._proj = rng.normal(scale=8 ** -0.5, size=(8, info.embed_dim))
        self._bias = rng.normal(scale=0.1, size=info.embed_dim)

    def embed(self, samples_16k: np.ndarray) -> np.ndarray:
        """(n,) float64 at 16 kHz -> (frames, embed_dim) float32."""
        hop = self.info.frame_hop_ms * TARGET_RATE // 1000
        n_frames = len(samples_16k) // hop
        if n_frames == 0:
            return np.zeros((0, self.info.embed_dim), dtype=np.float32)
        w = np.asarray(samples_16k[: n_frames * hop], dtype=np.float64)
        w = w.reshape(n_frames, hop)
        crossings = (np.diff(np.signbit(w), axis=1) != 0).mean(axis=1)
        stats = np.column_stack([
            w.mean(axis=1),
            w.std(axis=1),
            np.sqrt((w * w).mean(axis=1)),
            np.abs(w).mean(axis=1),
            w.min(axis=1),
            w.max(axis=1),
            crossings,
            w[:, -1] - w[:, 0],
        ])
        emb = np.tanh(stats @ self._proj + self._bias)
        return np.ascontiguousarray(emb, dtype=np.float32)


class S3PRLBackend:
    """Last-layer hidden states from a pre-trained upstream."""

    name = "s3prl"

    def __init__(self, info: ModelInfo, device: str = "cpu"):
        try:
            import torch
            from s3prl.nn import S3PRLUpstream
        except ImportError as exc:
            raise BackendError(
                "the s3prl backend needs the 's3prl' and 'torch' packages "
                "(pip install 'embed-export[s3prl]')"
            ) from exc
        self.info = info
        self._torch = torch
        try:
            self._model = S3PRLUpstream(info.s3prl_name).to(device).eval()
        except Exception as exc:  # checkpoint download/load problems
            raise BackendError(f"could not load upstream {info.s3prl_name!r}: {exc}") from exc
        self._device = device

    def embed(self, samples_16k: np.ndarray) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            wav = torch.as_tensor(
                np.ascontiguousarray(samples_16k), dtype=torch.float32, device=self._device
            ).unsqueeze(0)
            lens = torch.tensor([wav.shape[1]], device=self._device)
            hidden, hidden_lens = self._model(wav, lens)
            last = hidden[-1][0, : int(hidden_lens[-1][0])]
        out = np.ascontiguousarray(last.cpu().numpy(), dtype=np.float32)
        if out.shape[1] != self.info.embed_dim:
            raise BackendError(
                f"upstream returned dim {out.shape[1]}, registry says {self.info.embed_dim}"
            )
        return out


def get_backend(kind: str, info: ModelInfo):
    if kind == "stub":
        return StubBackend(info)
    if kind == "s3prl":
        return S3PRLBackend(info)
    if kind == "auto":
        try:
            return S3PRLBackend(info)
        except BackendError:
            return StubBackend(info)
    raise BackendError(f"unknown backend {kind!r}; choose stub, s3prl, or auto")
