"""Contract to a frozen instruction-conditioned latent-diffusion editor.

Everything above this module is backend-agnostic: the inversion engine, the
editor, and the metrics only see the operations defined here. A backend
bundles four frozen pieces:

  * a latent autoencoder (encode/decode, spatial downscale factor f),
  * a forward-noise schedule over T timesteps,
  * a denoiser conditioned on a 77-row instruction embedding and on the
    latent of the "before" image,
  * a joint image/text embedding model with a tokenizer.

All operations are deterministic functions of their inputs; any randomness
enters through explicit noise arguments. Outputs stay differentiable with
respect to instruction rows (no internal grad detachment).
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING

import numpy as np
import torch

from ..errors import GeometryError, UsageError
from ..types import SEQUENCE_WIDTH, ClipVector, LatentImage, NoiseEstimate, TokenRow
from .config import BackendConfig
from .scheduler import NoiseSchedule

if TYPE_CHECKING:
    from ..instruction import InstructionEmbedding


class EditorBackend(ABC):
    def __init__(self, config: BackendConfig):
        self.config = config.validate()
        self.schedule = NoiseSchedule(config.timesteps, config.beta_start, config.beta_end)
        self._null_instruction = None

    @property
    def model_id(self) -> str:
        return self.config.model_id

    @property
    def timesteps(self) -> int:
        return self.config.timesteps

    # --- geometry helpers -------------------------------------------------

    def latent_shape(self, height: int, width: int) -> tuple[int, int, int]:
        f = self.config.downscale_factor
        if height % f or width % f:
            raise GeometryError(
                f"image size {height}x{width} not divisible by downscale factor {f}"
            )
        return (self.config.latent_channels, height // f, width // f)

    def _check_latent(self, latent: LatentImage, name: str = "latent") -> LatentImage:
        if latent.shape[0] != self.config.latent_channels:
            raise GeometryError(
                f"{name} has {latent.shape[0]} channels, backend declares "
                f"{self.config.latent_channels}"
            )
        return latent

    def zero_latent(self, like: LatentImage) -> LatentImage:
        return LatentImage(torch.zeros_like(like.values), like.downscale)

    # --- abstract surface ---------------------------------------------------

    @abstractmethod
    def encode_image(self, image: np.ndarray) -> LatentImage: ...

    @abstractmethod
    def decode_latent(self, latent: LatentImage) -> np.ndarray: ...

    @abstractmethod
    def predict_noise(
        self, noisy: LatentImage, t: int, instr: "InstructionEmbedding", cond: LatentImage
    ) -> NoiseEstimate: ...

    @abstractmethod
    def embed_image(self, image: np.ndarray) -> ClipVector: ...

    @abstractmethod
    def embed_instruction_text(self, instr: "InstructionEmbedding") -> ClipVector: ...

    @abstractmethod
    def tokenize(self, text: str) -> list[int]: ...

    @abstractmethod
    def token_embeddings(self, ids: list[int]) -> list[TokenRow]: ...

    # --- shared behavior ------------------------------------------------------

    def add_noise(self, latent: LatentImage, noise: LatentImage, t: int) -> LatentImage:
        self._check_latent(latent)
        if noise.shape != latent.shape:
            raise GeometryError(f"noise shape {noise.shape} != latent shape {latent.shape}")
        return LatentImage(
            self.schedule.add_noise(latent.values, noise.values, t), latent.downscale
        )

    @property
    def null_instruction(self) -> "InstructionEmbedding":
        """Embedding of the backend's null text (the unconditioned branch)."""
        if self._null_instruction is None:
            from ..instruction import InstructionEmbedding

            ids = self.tokenize(self.config.null_text)
            rows = torch.stack([r.embedding for r in self.token_embeddings(ids)])
            k = sum(1 for i in ids if i not in (0, 1, 2))
            self._null_instruction = InstructionEmbedding(
                rows=rows, k=k, model_id=self.model_id, trainable=False
            )
        return self._null_instruction

    def guided_predict(
        self,
        noisy: LatentImage,
        t: int,
        instr: "InstructionEmbedding",
        cond: LatentImage,
        text_scale: float,
        image_scale: float,
    ) -> NoiseEstimate:
        """Dual classifier-free guidance over the text and image conditions.

        eps = eps(0,0) + s_img * (eps(cond,0) - eps(0,0))
                       + s_text * (eps(cond,instr) - eps(cond,0))

        The fully-conditioned call is returned directly when both scales are
        1 so the telescoped sum is exact rather than within float rounding.
        """
        if text_scale < 1 or image_scale < 1:
            raise UsageError("guidance scales must be >= 1")
        full = self.predict_noise(noisy, t, instr, cond)
        if text_scale == 1.0 and image_scale == 1.0:
            return full
        null_instr = self.null_instruction
        img_only = self.predict_noise(noisy, t, null_instr, cond)
        out = img_only.values + text_scale * (full.values - img_only.values)
        if image_scale != 1.0:
            uncond = self.predict_noise(noisy, t, null_instr, self.zero_latent(cond))
            out = out + (image_scale - 1.0) * (img_only.values - uncond.values)
        return NoiseEstimate(out)

    # caption embedding reuses the instruction path (build rows, pool at EOT)
    def embed_text(self, text: str) -> ClipVector:
        from ..instruction import init_from_text

        return self.embed_instruction_text(init_from_text(self, text))
