"""Deterministic synthetic caller corpora.

Two geometries are available:

* separated means (default): caller c's frames are N(mu_c, I) with the
  caller means pairwise ``separation`` apart (in within-caller std units),
  so the task difficulty is dialed by a single number;
* concentric shells (``nonlinear=True``): each caller's segments arrive
  in a fixed number of bouts, every bout's mean sitting at radius r_c in
  a fresh random direction, with every caller sharing the same
  within-bout spread.  Caller identity is then carried by the radius of
  the bout mean, a structure no linear model can slice but a radial
  kernel separates easily.  Held-out bouts point in unseen directions,
  so nothing direction-specific transfers across folds.

Segment lengths come from a two-component log-normal mixture, giving the
bimodal duration histogram typical of vocalization corpora, and segment
counts per caller are imbalanced (largest:smallest 10:1 by default).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .store import (
    EmbeddingRecord,
    EmbeddingStore,
    ModelMeta,
    PretextObjective,
)

FRAME_MS = 20  # embedding frame hop


@dataclass(frozen=True)
class LengthMixture:
    """Two log-normal components over segment length in milliseconds."""

    log_mean_ms: tuple[float, float] = (math.log(110.0), math.log(900.0))
    log_sigma: tuple[float, float] = (0.35, 0.45)
    weights: tuple[float, float] = (0.65, 0.35)

    def __post_init__(self):
        if len(self.weights) != 2 or abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("mixture weights must be two values summing to 1")
        if any(s <= 0 for s in self.log_sigma):
            raise ValueError("mixture sigmas must be positive")

    def sample_ms(self, rng: np.random.Generator, n: int) -> np.ndarray:
        comp = (rng.random(n) < self.weights[1]).astype(np.int64)
        mu = np.take(self.log_mean_ms, comp)
        sd = np.take(self.log_sigma, comp)
        ms = np.exp(rng.normal(mu, sd))
        return np.clip(ms, 2 * FRAME_MS, 8000.0)


@dataclass(frozen=True)
class SynthSpec:
    num_callers: int = 10
    embed_dim: int = 32
    segments_per_caller: int = 200  # largest caller; others shrink toward 10:1
    imbalance_ratio: float = 10.0
    separation: float = 3.0
    nonlinear: bool = False
    shell_base: float = 2.0       # innermost bout-mean radius (nonlinear mode)
    shell_gap: float = 0.75       # radius increment per caller
    bouts_per_caller: int = 40    # contiguous segment runs sharing a bout mean
    lengths: LengthMixture = field(default_factory=LengthMixture)
    seed: int = 0

    def __post_init__(self):
        if self.num_callers < 1 or self.embed_dim < 1:
            raise ValueError("num_callers and embed_dim must be positive")
        if self.segments_per_caller < 1:
            raise ValueError("segments_per_caller must be positive")
        if self.separation < 0:
            raise ValueError("separation must be >= 0")
        if self.imbalance_ratio < 1:
            raise ValueError("imbalance_ratio must be >= 1")
        if self.bouts_per_caller < 1:
            raise ValueError("bouts_per_caller must be positive")

    def segment_counts(self) -> list[int]:
        """Per-caller counts, geometric from largest down to
        largest/imbalance_ratio."""
        c = self.num_callers
        if c == 1:
            return [self.segments_per_caller]
        top = float(self.segments_per_caller)
        counts = top * self.imbalance_ratio ** (-np.arange(c) / (c - 1))
        return [max(1, int(round(v))) for v in counts]


def _caller_direction(caller_index: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Unit direction for a caller mean: an axis when available, random
    otherwise."""
    if caller_index < dim:
        u = np.zeros(dim)
        u[caller_index] = 1.0
        return u
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def generate_store(spec: SynthSpec) -> EmbeddingStore:
    """Build a synthetic embedding store; equal SynthSpecs yield equal bytes."""
    counts = spec.segment_counts()
    d = spec.embed_dim
    records: list[EmbeddingRecord] = []
    segment_id = 0
    for ci in range(spec.num_callers):
        caller_id = ci + 1
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, caller_id]))
        n_seg = counts[ci]
        lengths_ms = spec.lengths.sample_ms(rng, n_seg)
        if spec.nonlinear:
            radius = spec.shell_base + ci * spec.shell_gap
            n_bouts = min(spec.bouts_per_caller, n_seg)
            q, r = divmod(n_seg, n_bouts)
            run_lengths = [q + 1] * r + [q] * (n_bouts - r)
            dirs = rng.normal(size=(n_bouts, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            seg_means = radius * np.repeat(dirs, run_lengths, axis=0)
        else:
            mu = (spec.separation / math.sqrt(2.0)) * _caller_direction(ci, d, rng)
            seg_means = np.tile(mu, (n_seg, 1))

        start_ms = 0
        for si in range(n_seg):
            ms = float(lengths_ms[si])
            n_frames = max(1, int(round(ms / FRAME_MS)))
            frames = rng.normal(loc=seg_means[si], scale=1.0, size=(n_frames, d))
            end_ms = start_ms + int(round(ms))
            records.append(
                EmbeddingRecord(
                    segment_id=segment_id,
                    caller_id=caller_id,
                    calltype_id=0,
                    source_file=f"caller_{caller_id:02d}.wav",
                    start_ms=start_ms,
                    end_ms=end_ms,
                    frames=frames.astype(np.float32),
                )
            )
            segment_id += 1
            start_ms = end_ms + 50  # short silence between vocalizations

    meta = ModelMeta(
        model_name="synth",
        corpus_tag=f"synth-seed{spec.seed}",
        param_count_millions=0.0009765625,  # tiny but positive and f32-exact
        embed_dim=d,
        pretext_objective=PretextObjective.autoregressive_reconstruction,
    )
    store = EmbeddingStore(meta=meta, records=records)
    store.validate()
    return store
