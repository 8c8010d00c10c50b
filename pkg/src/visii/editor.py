"""Applying a learned instruction to a new image."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .backend.base import EditorBackend
from .errors import UsageError
from .images import sha256_of, to_float_image
from .instruction import InstructionEmbedding, concat_user_text
from .inversion import NoisePlan
from .types import LatentImage

_X0_CLAMP = 3.0


@dataclass
class GuidanceConfig:
    text_scale: float = 7.5
    image_scale: float = 1.5
    sampler_steps: int = 100
    noise_mode: str = "fixed"
    sampler: str = "deterministic"
    run_seed: int = 0

    def validate(self) -> "GuidanceConfig":
        if self.text_scale < 1.0 or self.image_scale < 1.0:
            raise UsageError("guidance scales must be at least 1")
        if self.sampler_steps < 1:
            raise UsageError("sampler_steps must be positive")
        if self.noise_mode not in ("fixed", "random"):
            raise UsageError(f"unknown noise_mode {self.noise_mode!r}")
        if self.sampler not in ("deterministic", "ancestral"):
            raise UsageError(f"unknown sampler {self.sampler!r}")
        if not 0 <= self.run_seed <= 2**64 - 1:
            raise UsageError("run_seed must fit in an unsigned 64-bit integer")
        return self


@dataclass
class ApplyResult:
    image: np.ndarray
    final_latent: LatentImage
    sidecar: dict


def step_schedule(timesteps: int, sampler_steps: int) -> list[int]:
    """Descending timesteps visited by the sampler, starting at T-1."""
    if sampler_steps > timesteps:
        raise UsageError(f"sampler_steps={sampler_steps} exceeds the schedule ({timesteps})")
    stride = timesteps // sampler_steps
    return [timesteps - 1 - i * stride for i in range(sampler_steps)]


def apply_instruction(
    backend: EditorBackend,
    instr: InstructionEmbedding,
    image,
    guidance: GuidanceConfig | None = None,
    extra_text: str = "",
    instruction_ref: str = "",
) -> ApplyResult:
    """Run the guided sampler and return the edited image.

    noise_mode "fixed" rebuilds the starting noise (and, for the ancestral
    sampler, every injected noise) from the instruction's own base seed,
    which replays the noise the instruction was trained against; "random"
    keys the plan on run_seed instead.
    """
    guidance = (guidance or GuidanceConfig()).validate()
    if instr.model_id != backend.model_id:
        raise UsageError(
            f"instruction was learned on {instr.model_id!r}, backend is {backend.model_id!r}"
        )
    if extra_text.strip():
        instr = concat_user_text(backend, instr, extra_text)

    arr = to_float_image(image)
    cond = backend.encode_image(arr)
    schedule = backend.schedule
    ts = step_schedule(backend.timesteps, guidance.sampler_steps)

    seed = instr.base_seed if guidance.noise_mode == "fixed" else guidance.run_seed
    plan = NoisePlan(seed)
    latent = plan.for_timestep(ts[0], cond.shape).to(cond.values.dtype)

    for i, t in enumerate(ts):
        current = LatentImage(latent, cond.downscale)
        eps = backend.guided_predict(
            current, t, instr, cond, guidance.text_scale, guidance.image_scale
        ).values
        abar_t = schedule.alphas_cumprod[t]
        x0 = (latent - schedule.noise_coef[t] * eps) / schedule.signal_coef[t]
        x0 = x0.clamp(-_X0_CLAMP, _X0_CLAMP)
        if i + 1 == len(ts):
            latent = x0
            break
        t_next = ts[i + 1]
        abar_next = schedule.alphas_cumprod[t_next]
        if guidance.sampler == "deterministic":
            latent = schedule.signal_coef[t_next] * x0 + schedule.noise_coef[t_next] * eps
        else:
            var = (1.0 - abar_next) / (1.0 - abar_t) * (1.0 - abar_t / abar_next)
            sigma = torch.sqrt(var.clamp(min=0.0))
            dir_coef = torch.sqrt((1.0 - abar_next - sigma**2).clamp(min=0.0))
            noise = plan.for_timestep(t_next, cond.shape).to(latent.dtype)
            latent = schedule.signal_coef[t_next] * x0 + dir_coef * eps + sigma * noise

    final = LatentImage(latent, cond.downscale)
    out = backend.decode_latent(final)
    sidecar = {
        "instruction": instruction_ref,
        "model_id": backend.model_id,
        "instruction_k": instr.k,
        "base_seed": instr.base_seed,
        "extra_text": extra_text,
        "text_scale": guidance.text_scale,
        "image_scale": guidance.image_scale,
        "sampler": guidance.sampler,
        "sampler_steps": guidance.sampler_steps,
        "noise_mode": guidance.noise_mode,
        "run_seed": guidance.run_seed,
        "input_sha256": sha256_of(np.ascontiguousarray(arr)),
        "output_sha256": sha256_of(out),
    }
    return ApplyResult(image=out, final_latent=final, sidecar=sidecar)
