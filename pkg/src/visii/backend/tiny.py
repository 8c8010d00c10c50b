"""Self-contained small editor backend.

A frozen latent-diffusion editor whose every parameter derives from the
config's weights_seed, so two processes loading the same config hold
bit-identical models. Pieces:

  * autoencoder: f-fold area downsample plus a fixed semi-orthogonal channel
    lift (lossless across channels, lossy across space),
  * denoiser: velocity-parameterized conv net, FiLM-conditioned on the
    timestep, cross-attending over the 77 instruction rows, with an edit head
    anchored at the conditioning latent (the net predicts an offset from the
    "before" image rather than a free image),
  * joint embedder: appearance statistics lifted into a shared space, with a
    grounded colour/texture vocabulary on the text side (see weights.py).

The denoiser predicts velocity v = sqrt(abar)*eps - sqrt(1-abar)*z0. Writing
s = sqrt(abar_t), n = sqrt(1-abar_t), its clean-image estimate blends an
edit anchored at the conditioning latent with the content already present in
the noisy latent:

    x0_hat = n^2 * (cond + edit_head) + s^2 * (s * z_t - n * eps_head)
    v_hat  = s * eps_head - n * x0_hat

At high t the estimate is the anchored edit (a perfect fit puts edit_head at
the latent edit z_after - z_before); at low t it trusts z_t and eps_head
takes over as a plain noise head. The z_t-dependence is what lets repeated
guided sampling steps self-correct instead of stacking the edit.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import GeometryError, TokenOverflowError, UsageError
from ..images import to_float_image
from ..types import MAX_CONTENT_TOKENS, SEQUENCE_WIDTH, ClipVector, LatentImage, NoiseEstimate, TokenRow
from . import weights as wb
from .base import EditorBackend
from .config import BackendConfig

if TYPE_CHECKING:
    from ..instruction import InstructionEmbedding

_TDIM = 32


def _sinusoidal(t: int, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / (half - 1))
    args = float(t) * freqs
    return torch.cat([torch.sin(args), torch.cos(args)])


class TinyEditorBackend(EditorBackend):
    def __init__(self, config: BackendConfig | None = None):
        super().__init__(config or BackendConfig())
        bank = wb.build_weight_bank(self.config)
        self.w = {name: torch.from_numpy(arr) for name, arr in bank.items()}
        self._mu = torch.from_numpy(wb.FEATURE_MU.astype(np.float32))
        self._sigma = torch.from_numpy(wb.FEATURE_SIGMA.astype(np.float32))

    # --- autoencoder ------------------------------------------------------

    def encode_image(self, image) -> LatentImage:
        img = to_float_image(image)
        f = self.config.downscale_factor
        h, w = img.shape[:2]
        self.latent_shape(h, w)  # raises on bad geometry
        x = torch.from_numpy(img).permute(2, 0, 1) * 2.0 - 1.0
        down = F.avg_pool2d(x.unsqueeze(0), f).squeeze(0)
        latent = torch.einsum("ck,khw->chw", self.w["vae.channel_lift"], down)
        return LatentImage(latent, f)

    def decode_latent(self, latent: LatentImage) -> np.ndarray:
        self._check_latent(latent)
        rgb = torch.einsum("kc,chw->khw", self.w["vae.channel_lift"].T, latent.values)
        up = F.interpolate(
            rgb.unsqueeze(0), scale_factor=latent.downscale, mode="bilinear", align_corners=False
        ).squeeze(0)
        img = ((up + 1.0) / 2.0).clamp(0.0, 1.0)
        return (img.permute(1, 2, 0).detach().numpy() * 255.0).round().astype(np.uint8)

    # --- denoiser ---------------------------------------------------------

    def predict_noise(self, noisy, t, instr, cond) -> NoiseEstimate:
        self._check_latent(noisy, "noisy")
        if cond.shape != noisy.shape:
            raise GeometryError(f"cond shape {cond.shape} != noisy shape {noisy.shape}")
        rows = instr.rows
        if rows.shape != (SEQUENCE_WIDTH, self.config.text_width):
            raise GeometryError(
                f"instruction rows must be {SEQUENCE_WIDTH}x{self.config.text_width}, "
                f"got {tuple(rows.shape)}"
            )
        t = self.schedule.check_timestep(t)
        w = self.w
        x = torch.cat([noisy.values, cond.values], dim=0).unsqueeze(0)
        h = F.silu(F.conv2d(x, w["unet.conv_in"], padding=1))

        temb = _sinusoidal(t, _TDIM)
        temb = F.silu(w["unet.t_w1"] @ temb + w["unet.t_b1"])
        film = w["unet.t_w2"] @ temb + w["unet.t_b2"]
        scale, shift = film.chunk(2)
        h = h * (1.0 + scale[None, :, None, None]) + shift[None, :, None, None]
        h = F.silu(F.conv2d(h, w["unet.conv_mid"], padding=1))

        # cross-attention: spatial positions query the instruction rows
        b, ch, hh, ww = h.shape
        q = h.flatten(2).transpose(1, 2) @ w["unet.attn_q"].T          # (1, hw, att)
        k = rows @ w["unet.attn_k"].T                                  # (77, att)
        v = rows @ w["unet.attn_v"].T
        logits = q @ k.T * (wb.ATTN_SHARPNESS / math.sqrt(k.shape[1]))
        attn = torch.softmax(logits, dim=-1)                           # (1, hw, 77)
        ctx = (attn @ v) @ w["unet.attn_out"].T                        # (1, hw, ch)
        h = h + ctx.transpose(1, 2).reshape(b, ch, hh, ww)
        h = F.silu(F.conv2d(h, w["unet.conv_out"], padding=1))

        eps_head = F.conv2d(h, w["unet.head_eps"]).squeeze(0)
        edit_head = F.conv2d(h, w["unet.head_edit"]).squeeze(0)
        s, n = self.schedule.signal_coef[t], self.schedule.noise_coef[t]
        x0_hat = n * n * (cond.values + edit_head)
        x0_hat = x0_hat + s * s * (s * noisy.values - n * eps_head)
        v_hat = s * eps_head - n * x0_hat
        return NoiseEstimate(self.schedule.velocity_to_eps(v_hat, noisy.values, t))

    # --- joint embedder -----------------------------------------------------

    def _image_features(self, img: torch.Tensor) -> torch.Tensor:
        # mirrors weights.image_features; img is (H, W, 3) in [0, 1]
        h, w = img.shape[:2]
        means = img.mean(dim=(0, 1))
        stds = img.std(dim=(0, 1), unbiased=False)
        lum = img.mean(dim=2)
        hh, wh = h // 2, w // 2
        quads = torch.stack(
            [
                lum[:hh, :wh].mean(),
                lum[:hh, wh:].mean(),
                lum[hh:, :wh].mean(),
                lum[hh:, wh:].mean(),
            ]
        )
        grad = lum.new_zeros(())
        if h > 1:
            grad = grad + (lum[1:] - lum[:-1]).abs().mean()
        if w > 1:
            grad = grad + (lum[:, 1:] - lum[:, :-1]).abs().mean()
        sat = (img.max(dim=2).values - img.min(dim=2).values).mean()
        return torch.cat([means, stds, quads, grad.reshape(1), sat.reshape(1)])

    def _lift_features(self, phi: torch.Tensor) -> torch.Tensor:
        phi_n = (phi - self._mu) / self._sigma
        tex = torch.tanh(self.w["joint.tex_w1"] @ phi_n + self.w["joint.tex_b1"])
        return self.w["joint.lift"] @ phi_n + self.w["joint.tex_lift"] @ tex

    def embed_image(self, image) -> ClipVector:
        img = torch.from_numpy(to_float_image(image))
        vec = self._lift_features(self._image_features(img))
        return ClipVector(vec / vec.norm(), normalized=True)

    def embed_instruction_text(self, instr) -> ClipVector:
        rows = instr.rows
        if rows.shape != (SEQUENCE_WIDTH, self.config.text_width):
            raise GeometryError("instruction rows do not match backend text width")
        eot = 1 + instr.k
        w = self.w
        d = self.config.text_width
        x = rows + w["text.pos"]
        # positions after EOT are padding: excluded as attention keys
        invalid = torch.arange(SEQUENCE_WIDTH) > eot
        for i in range(wb.N_TEXT_BLOCKS):
            p = f"text.block{i}."
            hn = F.layer_norm(x, (d,), w[p + "ln1_g"], w[p + "ln1_b"])
            q, k, v = hn @ w[p + "wq"].T, hn @ w[p + "wk"].T, hn @ w[p + "wv"].T
            logits = q @ k.T / math.sqrt(d)
            logits = logits.masked_fill(invalid[None, :], float("-inf"))
            x = x + torch.softmax(logits, dim=-1) @ v @ w[p + "wo"].T
            hn = F.layer_norm(x, (d,), w[p + "ln2_g"], w[p + "ln2_b"])
            x = x + F.gelu(hn @ w[p + "mlp_w1"].T + w[p + "mlp_b1"]) @ w[p + "mlp_w2"].T + w[p + "mlp_b2"]
        pooled = x[eot]
        vec = self.w["text.proj"] @ pooled
        return ClipVector(vec / vec.norm(), normalized=True)

    # --- tokenizer -----------------------------------------------------------

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
        table = self.w["text.token_table"]
        out = []
        for i in ids:
            if not 0 <= i < self.config.vocab_size:
                raise UsageError(f"token id {i} outside vocab")
            out.append(TokenRow(id=i, embedding=table[i]))
        return out
