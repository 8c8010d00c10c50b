"""Linear synthetic backend for numerical checks.

Every map is affine (denoiser) or an affine map followed by one
normalization (embedders), and all arithmetic runs in float64. That makes
central finite differences of the inversion loss accurate to ~1e-8, so
autograd gradients can be validated at tight relative tolerance without a
real model in the loop.
"""

from __future__ import annotations

import numpy as np
import torch

from ..errors import GeometryError, TokenOverflowError, UsageError
from ..types import MAX_CONTENT_TOKENS, SEQUENCE_WIDTH, ClipVector, LatentImage, NoiseEstimate, TokenRow
from . import weights as wb
from .base import EditorBackend
from .config import BackendConfig


def synthetic_config() -> BackendConfig:
    return BackendConfig(
        model_id="synthetic-linear/v1",
        latent_channels=1,
        downscale_factor=1,
        text_width=8,
        joint_width=6,
        native_size=2,
    )


class LinearSyntheticBackend(EditorBackend):
    def __init__(self, config: BackendConfig | None = None):
        super().__init__(config or synthetic_config())
        c = self.config
        if c.latent_channels != 1 or c.downscale_factor != 1:
            raise UsageError("synthetic backend expects 1 latent channel at full resolution")
        rng = np.random.Generator(np.random.PCG64(c.weights_seed))
        flat = c.native_size * c.native_size
        seq = SEQUENCE_WIDTH * c.text_width
        w = {
            "A_z": 0.3 * np.eye(flat) + 0.05 * rng.standard_normal((flat, flat)),
            "A_c": 0.05 * rng.standard_normal((flat, flat)),
            "A_i": 0.05 * rng.standard_normal((flat, seq)),
            "b": 0.05 * rng.standard_normal(flat),
            "P_pool": rng.standard_normal((c.joint_width, c.text_width)),
            "P_img": rng.standard_normal((c.joint_width, wb.FEATURE_DIM)),
            "token_table": 0.5 * rng.standard_normal((c.vocab_size, c.text_width)),
        }
        self.w = {k: torch.from_numpy(np.asarray(v, dtype=np.float64)) for k, v in w.items()}
        self._flat = flat

    def encode_image(self, image) -> LatentImage:
        arr = np.asarray(image, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise GeometryError(f"expected (H, W, 3) image, got {arr.shape}")
        if arr.max() > 1.5:
            arr = arr / 255.0
        lum = arr.mean(axis=2) * 2.0 - 1.0
        return LatentImage(torch.from_numpy(lum).unsqueeze(0), 1)

    def decode_latent(self, latent: LatentImage) -> np.ndarray:
        self._check_latent(latent)
        lum = ((latent.values.squeeze(0) + 1.0) / 2.0).clamp(0.0, 1.0)
        img = lum.unsqueeze(2).expand(-1, -1, 3)
        return (img.detach().numpy() * 255.0).round().astype(np.uint8)

    def predict_noise(self, noisy, t, instr, cond) -> NoiseEstimate:
        self._check_latent(noisy, "noisy")
        if cond.shape != noisy.shape:
            raise GeometryError("cond shape differs from noisy shape")
        t = self.schedule.check_timestep(t)
        if noisy.shape[1] * noisy.shape[2] != self._flat:
            raise GeometryError(f"latent must be {self.config.native_size}x{self.config.native_size}")
        z = noisy.values.reshape(-1).to(torch.float64)
        c = cond.values.reshape(-1).to(torch.float64)
        r = instr.rows.reshape(-1).to(torch.float64)
        flat = self.w["A_z"] @ z + self.w["A_c"] @ c + self.w["A_i"] @ r + self.w["b"]
        return NoiseEstimate(flat.reshape(noisy.shape))

    def embed_image(self, image) -> ClipVector:
        arr = np.asarray(image, dtype=np.float64)
        if arr.max() > 1.5:
            arr = arr / 255.0
        phi = wb.standardize_features(wb.image_features(arr)).astype(np.float64)
        vec = self.w["P_img"] @ torch.from_numpy(phi)
        return ClipVector(vec / vec.norm(), normalized=True)

    def embed_instruction_text(self, instr) -> ClipVector:
        rows = instr.rows.to(torch.float64)
        eot = 1 + instr.k
        content = rows[1:eot].mean(dim=0) if instr.k > 0 else torch.zeros_like(rows[0])
        vec = self.w["P_pool"] @ (content + rows[eot])
        return ClipVector(vec / vec.norm(), normalized=True)

    def tokenize(self, text: str) -> list[int]:
        words = wb.split_words(text)
        if len(words) > MAX_CONTENT_TOKENS:
            raise TokenOverflowError(
                f"{len(words)} content tokens exceed the {MAX_CONTENT_TOKENS}-token budget"
            )
        ids = [wb.SOT_ID]
        ids += [wb.word_id(word, self.config.vocab_size) for word in words]
        ids.append(wb.EOT_ID)
        ids += [wb.PAD_ID] * (SEQUENCE_WIDTH - len(ids))
        return ids

    def token_embeddings(self, ids: list[int]) -> list[TokenRow]:
        table = self.w["token_table"]
        out = []
        for i in ids:
            if not 0 <= i < self.config.vocab_size:
                raise UsageError(f"token id {i} outside vocab")
            out.append(TokenRow(id=i, embedding=table[i]))
        return out
