"""Hyperparameters of the landmark perturbation network."""

from dataclasses import dataclass, field
from typing import Any

from ..errors import ConfigError
from ..regions import LEFT_EYE, MOUTH, N_LANDMARKS, RIGHT_EYE

NONRIGID_WEIGHT = 5.0


def default_landmark_weights(n_landmarks: int = N_LANDMARKS) -> tuple[float, ...]:
    """Per-landmark loss weights: eyes and mouth upweighted, 1.0 elsewhere."""
    weights = [1.0] * n_landmarks
    if n_landmarks == N_LANDMARKS:
        for region in (LEFT_EYE, RIGHT_EYE, MOUTH):
            for j in region.indices:
                weights[j] = NONRIGID_WEIGHT
    return tuple(weights)


@dataclass(frozen=True)
class LpnConfig:
    """Architecture and loss settings for the LPN autoencoder."""

    k: int = 64
    d: int = 128
    clip_length: int = 16
    n_landmarks: int = N_LANDMARKS
    encoder_layers: int = 4
    decoder_layers: int = 4
    heads: int = 4
    lambda_reg: float = 0.01
    landmark_weights: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.d < 1 or self.d % self.heads != 0:
            raise ConfigError(f"d ({self.d}) must be a positive multiple of heads ({self.heads})")
        if self.clip_length < 2:
            raise ConfigError(f"clip_length must be >= 2, got {self.clip_length}")
        if self.n_landmarks < 1:
            raise ConfigError(f"n_landmarks must be >= 1, got {self.n_landmarks}")
        if self.encoder_layers < 1 or self.decoder_layers < 1:
            raise ConfigError("layer counts must be >= 1")
        if self.lambda_reg < 0:
            raise ConfigError(f"lambda_reg must be >= 0, got {self.lambda_reg}")
        weights = self.landmark_weights
        if not weights:
            weights = default_landmark_weights(self.n_landmarks)
            object.__setattr__(self, "landmark_weights", weights)
        else:
            object.__setattr__(self, "landmark_weights", tuple(float(w) for w in weights))
            weights = self.landmark_weights
        if len(weights) != self.n_landmarks:
            raise ConfigError(
                f"landmark_weights must have {self.n_landmarks} entries, got {len(weights)}"
            )
        if any(w <= 0 for w in weights):
            raise ConfigError("all landmark weights must be > 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "d": self.d,
            "clip_length": self.clip_length,
            "n_landmarks": self.n_landmarks,
            "encoder_layers": self.encoder_layers,
            "decoder_layers": self.decoder_layers,
            "heads": self.heads,
            "lambda_reg": self.lambda_reg,
            "landmark_weights": list(self.landmark_weights),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LpnConfig":
        known = {f: data[f] for f in cls.__dataclass_fields__ if f in data}
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown LpnConfig fields: {sorted(unknown)}")
        if "landmark_weights" in known:
            known["landmark_weights"] = tuple(known["landmark_weights"])
        return cls(**known)
