"""The eleven supported upstream models and their fixed properties.

Dimensions and parameter counts are part of the output contract: the
emitted store header must carry exactly these values so that downstream
size-vs-performance tables line up.
"""
from __future__ import annotations

from dataclasses import dataclass

# on-disk objective codes of the CSE1 store header (u8)
AUTOREGRESSIVE_RECONSTRUCTION = 0
MASKED_RECONSTRUCTION = 1
CONTRASTIVE = 2
MASKED_PREDICTION = 3

OBJECTIVE_NAMES = {
    AUTOREGRESSIVE_RECONSTRUCTION: "autoregressive_reconstruction",
    MASKED_RECONSTRUCTION: "masked_reconstruction",
    CONTRASTIVE: "contrastive",
    MASKED_PREDICTION: "masked_prediction",
}


@dataclass(frozen=True)
class ModelInfo:
    key: str                     # canonical name, also the store's model_name
    display_name: str
    embed_dim: int               # last-layer embedding width
    param_count_millions: float
    objective_code: int
    frame_hop_ms: int            # output frame rate of the upstream
    receptive_field_ms: int      # shortest segment the model can embed
    s3prl_name: str              # upstream identifier for the real backend

    @property
    def objective(self) -> str:
        return OBJECTIVE_NAMES[self.objective_code]


# spectral-feature upstreams run at a 10 ms hop; the waveform-convolution
# family downsamples to a 20 ms hop
_TABLE = [
    ("apc", "APC", 512, 4.11, AUTOREGRESSIVE_RECONSTRUCTION, 10, "apc"),
    ("vq_apc", "VQ-APC", 512, 4.63, AUTOREGRESSIVE_RECONSTRUCTION, 10, "vq_apc"),
    ("npc", "NPC", 512, 19.38, MASKED_RECONSTRUCTION, 10, "npc"),
    ("mockingjay", "Mockingjay", 768, 21.33, MASKED_RECONSTRUCTION, 10, "mockingjay"),
    ("tera", "TERA", 768, 21.33, MASKED_RECONSTRUCTION, 10, "tera"),
    ("mod_cpc", "Mod-CPC", 256, 1.84, CONTRASTIVE, 10, "modified_cpc"),
    ("wav2vec2", "Wav2Vec2", 768, 95.04, CONTRASTIVE, 20, "wav2vec2"),
    ("hubert", "Hubert", 768, 94.68, MASKED_PREDICTION, 20, "hubert"),
    ("distilhubert", "DistilHubert", 768, 27.03, MASKED_PREDICTION, 20, "distilhubert"),
    ("wavlm", "WavLM", 768, 94.38, MASKED_PREDICTION, 20, "wavlm"),
    ("data2vec", "Data2Vec", 768, 93.16, MASKED_PREDICTION, 20, "data2vec"),
]

MODELS: dict[str, ModelInfo] = {
    key: ModelInfo(
        key=key,
        display_name=display,
        embed_dim=dim,
        param_count_millions=params,
        objective_code=obj,
        frame_hop_ms=hop,
        receptive_field_ms=25,
        s3prl_name=s3prl,
    )
    for key, display, dim, params, obj, hop, s3prl in _TABLE
}


def resolve_model(name: str) -> ModelInfo:
    """Look a model up by canonical key, display name, or common alias;
    case and -/_ differences are ignored."""
    folded = name.strip().lower().replace("-", "_")
    if folded in MODELS:
        return MODELS[folded]
    for info in MODELS.values():
        if folded == info.display_name.lower().replace("-", "_"):
            return info
        if folded == info.s3prl_name:
            return info
    raise KeyError(
        f"unknown model {name!r}; choose one of: " + ", ".join(sorted(MODELS))
    )
