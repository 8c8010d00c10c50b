"""Value types passed across the backend boundary.

Thin wrappers over torch tensors: they carry the geometry contract, not
behavior. Tensors keep autograd history, so a NoiseEstimate produced from a
trainable instruction stays differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import GeometryError

#: Fixed sequence width of every instruction embedding (start token, up to 75
#: content positions, end token, padding).
SEQUENCE_WIDTH = 77

#: Maximum number of content tokens in a prompt.
MAX_CONTENT_TOKENS = SEQUENCE_WIDTH - 2


@dataclass
class LatentImage:
    """An image in the autoencoder's latent space: (channels, H/f, W/f)."""

    values: torch.Tensor
    downscale: int

    def __post_init__(self):
        if self.values.ndim != 3:
            raise GeometryError(
                f"latent must be 3-d (c, h, w), got shape {tuple(self.values.shape)}"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.values.shape)


@dataclass
class NoiseEstimate:
    """Predicted noise; same shape as the noisy latent it was predicted from."""

    values: torch.Tensor


@dataclass
class ClipVector:
    """A vector in the joint image/text embedding space."""

    values: torch.Tensor
    normalized: bool = False

    def __post_init__(self):
        if self.values.ndim != 1:
            raise GeometryError("embedding vector must be 1-d")

    def cosine(self, other: "ClipVector") -> torch.Tensor:
        a = self.values / self.values.norm()
        b = other.values / other.values.norm()
        return (a * b).sum()


@dataclass
class TokenRow:
    """One token id with its input embedding row."""

    id: int
    embedding: torch.Tensor
