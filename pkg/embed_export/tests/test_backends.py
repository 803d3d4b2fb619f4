"""Stub backend behaviour and backend selection."""
import numpy as np
import pytest

from embed_export.backends import BackendError, StubBackend, get_backend
from embed_export.registry import MODELS


def tone(n, seed=3):
    rng = np.random.default_rng(seed)
    t = np.arange(n) / 16_000
    return np.sin(2 * np.pi * 220 * t) * 0.5 + rng.normal(scale=0.05, size=n)


def test_stub_is_deterministic_across_instances():
    a = StubBackend(MODELS["wavlm"]).embed(tone(8000))
    b = StubBackend(MODELS["wavlm"]).embed(tone(8000))
    np.testing.assert_array_equal(a, b)


def test_stub_output_shape_and_range():
    emb = StubBackend(MODELS["wavlm"]).embed(tone(16_000))
    assert emb.shape == (50, 768)  # 20 ms hop over one second
    assert emb.dtype == np.float32
    assert np.all(np.abs(emb) <= 1.0)  # tanh squashed


def test_stub_hop_follows_model():
    emb = StubBackend(MODELS["apc"]).embed(tone(16_000))
    assert emb.shape == (100, 512)  # 10 ms hop


def test_stub_zero_frames_when_too_short():
    emb = StubBackend(MODELS["wavlm"]).embed(tone(100))
    assert emb.shape == (0, 768)


def test_different_models_embed_differently():
    x = tone(8000)
    a = StubBackend(MODELS["wavlm"]).embed(x)
    b = StubBackend(MODELS["hubert"]).embed(x)
    assert a.shape == b.shape
    assert not np.allclose(a, b)


def test_get_backend_stub():
    assert isinstance(get_backend("stub", MODELS["tera"]), StubBackend)


def test_get_backend_auto_always_yields_a_backend():
    backend = get_backend("auto", MODELS["tera"])
    assert backend.name in ("stub", "s3prl")


def test_get_backend_unknown_kind():
    with pytest.raises(BackendError, match="unknown backend"):
        get_backend("onnx", MODELS["tera"])
