"""Forward-diffusion schedule tables.

Scaled-linear beta schedule. The cumulative signal/noise split at timestep t:

    z_t = sqrt(abar_t) * z_0 + sqrt(1 - abar_t) * eps

with abar_t the cumulative product of (1 - beta). abar_0 is close to 1
(t=0 leaves the latent nearly untouched) and abar_{T-1} is close to 0
(t=T-1 is noise-dominated).
"""

from __future__ import annotations

import numpy as np
import torch

from ..errors import UsageError


class NoiseSchedule:
    def __init__(self, timesteps: int, beta_start: float = 0.00085, beta_end: float = 0.012):
        if timesteps < 2:
            raise UsageError("schedule needs at least 2 timesteps")
        betas = np.linspace(beta_start**0.5, beta_end**0.5, timesteps, dtype=np.float64) ** 2
        abar = np.cumprod(1.0 - betas)
        self.timesteps = timesteps
        self.betas = torch.from_numpy(betas.astype(np.float32))
        self.alphas_cumprod = torch.from_numpy(abar.astype(np.float32))
        self.signal_coef = torch.sqrt(self.alphas_cumprod)
        self.noise_coef = torch.sqrt(1.0 - self.alphas_cumprod)

    def check_timestep(self, t: int) -> int:
        t = int(t)
        if not 0 <= t < self.timesteps:
            raise UsageError(f"timestep {t} outside [0, {self.timesteps})")
        return t

    def add_noise(self, latent: torch.Tensor, noise: torch.Tensor, t: int) -> torch.Tensor:
        t = self.check_timestep(t)
        return self.signal_coef[t] * latent + self.noise_coef[t] * noise

    def velocity_to_eps(self, velocity: torch.Tensor, noisy: torch.Tensor, t: int) -> torch.Tensor:
        # eps = sqrt(1-abar) * z_t + sqrt(abar) * v, exact under the
        # v = sqrt(abar) * eps - sqrt(1-abar) * z_0 convention.
        t = self.check_timestep(t)
        return self.noise_coef[t] * noisy + self.signal_coef[t] * velocity
