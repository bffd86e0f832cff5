"""Model and training configuration with JSON round-trip and validation."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

VARIANTS = ("dynamics-only", "bow", "lm-causal", "lm-noncausal")


class ConfigError(Exception):
    pass


@dataclass
class ModelConfig:
    """Every hyperparameter of the model and its training loop.

    Dimensions: ``hidden_dim`` is the per-entity recurrent state width,
    ``event_dim`` the event embedding width, ``summary_dim`` the text-summary
    width, ``attention_dim`` the attention key width, ``fm_rank`` the
    factorization-machine factor count, and ``hash_dim`` the folded rating
    vector width.  ``lambda_arrival`` and ``lambda_content`` weigh the
    arrival and text negative log-likelihood terms of the loss.
    """

    variant: str = "bow"
    hidden_dim: int = 32          # H
    event_dim: int = 100          # E
    attention_dim: int = 64       # A
    summary_dim: int = 64         # S
    fm_rank: int = 10             # K
    v_bow: int = 2000
    v_lm: int = 5000
    embed_dim: int = 300
    hash_dim: int = 1024
    max_tokens: int = 150
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0     # decoupled, applied at the update step
    lambda_arrival: float = 0.1   # lambda1
    lambda_content: float = 0.01  # lambda2
    batch_size: int = 8
    epochs: int = 30
    epochs_per_phase: int = 1
    tbptt_window: int = 32
    seed: int = 0
    normalize_nll: bool = False
    train_embeddings: bool = False
    freeze_content: bool = False
    embeddings_path: str | None = None
    init_scale: float = 0.1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"variant must be one of {VARIANTS}, got {self.variant!r}"
            )
        for name in (
            "hidden_dim", "event_dim", "attention_dim", "summary_dim", "fm_rank",
            "v_bow", "v_lm", "embed_dim", "hash_dim", "max_tokens", "batch_size",
            "epochs", "epochs_per_phase", "tbptt_window",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.lambda_arrival < 0 or self.lambda_content < 0:
            raise ConfigError("loss weights must be nonnegative")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be nonnegative")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("adam betas must lie in [0, 1)")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")

    @property
    def uses_text(self) -> bool:
        return self.variant != "dynamics-only"

    @property
    def vocab_kind(self) -> str:
        if self.variant == "bow":
            return "bow"
        if self.variant in ("lm-causal", "lm-noncausal"):
            return "lm"
        return "none"

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def load(cls, path: str | Path) -> "ModelConfig":
        return cls.from_json(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True))

    def content_hash(self) -> str:
        canon = json.dumps(self.to_json(), sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)
