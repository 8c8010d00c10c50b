"""Learning an instruction embedding from before/after image pairs.

The optimizer touches only the k content rows of the embedding; the start,
end, and pad rows pass through the loop untouched because they are
concatenated back around the trainable slice at every step rather than ever
entering the optimizer.

Noise is drawn from a counter-keyed generator, so the noise tensor for a
given (pair, timestep) lane is a pure function of the instruction's base
seed. Rerunning an inversion with the same seed therefore replays the exact
noise sequence, and application can later rebuild the same tensors from
nothing but the seed stored in the .visii file.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch

from .backend.base import EditorBackend
from .errors import BackendError, DegenerateDirectionError, InversionDivergedError, UsageError
from .instruction import Captioner, InstructionEmbedding, init_from_captioner, init_from_text
from .types import ClipVector, LatentImage

_MAX_SEED = 2**64 - 1
_FRESH_LANE = 1 << 63


@dataclass
class InversionConfig:
    n_steps: int = 1000
    n_timesteps: int = 1000
    lambda_mse: float = 4.0
    lambda_clip: float = 0.1
    learning_rate: float = 1e-3
    weight_decay: float = 0.01
    seed: int = 0
    use_clip_loss: bool = True
    init_source: str = "text"
    init_text: str = ""
    k: int | None = None
    fresh_noise_per_step: bool = False

    def validate(self) -> "InversionConfig":
        if self.n_steps < 0:
            raise UsageError("n_steps must be non-negative")
        if self.n_timesteps < 1:
            raise UsageError("n_timesteps must be positive")
        if self.lambda_mse < 0 or self.lambda_clip < 0:
            raise UsageError("loss weights must be non-negative")
        if self.learning_rate <= 0:
            raise UsageError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise UsageError("weight_decay must be non-negative")
        if not 0 <= self.seed <= _MAX_SEED:
            raise UsageError("seed must fit in an unsigned 64-bit integer")
        if self.init_source not in ("text", "caption"):
            raise UsageError(f"unknown init_source {self.init_source!r}")
        if self.init_source == "text" and not self.init_text.strip():
            raise UsageError("init_source 'text' requires non-empty init_text")
        return self


@dataclass
class ImagePair:
    before: object
    after: object
    ident: str = ""


@dataclass
class LossBreakdown:
    step: int
    t: int
    total: float
    mse: float
    clip: float
    pair: int = 0


class NoisePlan:
    """Counter-keyed standard-normal noise, addressable by lane.

    Lane layout inside the second 64-bit key word: timestep in the low 32
    bits, pair index above it, and the top bit reserved for per-step draws
    that must not collide with the replayable (pair, timestep) lanes.
    """

    def __init__(self, base_seed: int):
        if not 0 <= base_seed <= _MAX_SEED:
            raise UsageError("base_seed must fit in an unsigned 64-bit integer")
        self.base_seed = base_seed

    def _draw(self, lane: int, shape: tuple[int, ...]) -> torch.Tensor:
        key = np.array([self.base_seed, lane], dtype=np.uint64)
        gen = np.random.Generator(np.random.Philox(key=key))
        return torch.from_numpy(gen.standard_normal(shape, dtype=np.float32))

    def for_timestep(self, t: int, shape: tuple[int, ...], pair: int = 0) -> torch.Tensor:
        if not 0 <= t < 2**32:
            raise UsageError("timestep outside the 32-bit lane range")
        if not 0 <= pair < 2**31:
            raise UsageError("pair index outside the lane range")
        return self._draw((pair << 32) | t, shape)

    def fresh(self, step: int, t: int, shape: tuple[int, ...]) -> torch.Tensor:
        if not 0 <= step < 2**31:
            raise UsageError("step outside the lane range")
        return self._draw(_FRESH_LANE | (step << 32) | t, shape)


@dataclass
class EditDirection:
    delta: ClipVector
    per_pair: list[torch.Tensor]


def compute_edit_direction(pairs: Sequence[ImagePair], backend: EditorBackend) -> EditDirection:
    """Mean embedding change across pairs, renormalized.

    Per-pair deltas are differences of normalized image embeddings; the
    mean is renormalized to a unit vector.
    """
    if not pairs:
        raise UsageError("need at least one image pair")
    deltas = []
    for pair in pairs:
        e_before = backend.embed_image(pair.before)
        e_after = backend.embed_image(pair.after)
        deltas.append(e_after.values - e_before.values)
    mean = torch.stack(deltas).mean(dim=0)
    norm = mean.norm()
    if not torch.isfinite(norm) or norm < 1e-8:
        raise DegenerateDirectionError(
            "before/after embeddings cancel out; there is no direction to align with"
        )
    return EditDirection(delta=ClipVector(mean / norm, normalized=True), per_pair=deltas)


def reconstruction_loss(noise: torch.Tensor, estimate: torch.Tensor) -> torch.Tensor:
    if noise.shape != estimate.shape:
        raise UsageError("noise and estimate shapes differ")
    return ((estimate - noise.to(estimate.dtype)) ** 2).mean()


def clip_alignment_loss(text_embed: ClipVector, direction: EditDirection | ClipVector) -> torch.Tensor:
    delta = direction.delta if isinstance(direction, EditDirection) else direction
    return 1.0 - text_embed.cosine(delta)


def invert(
    pairs: Sequence[ImagePair],
    config: InversionConfig,
    backend: EditorBackend,
    captioner: Captioner | None = None,
    on_step: Callable[[LossBreakdown], None] | None = None,
) -> tuple[InstructionEmbedding, list[LossBreakdown]]:
    """Optimize an instruction embedding that maps each before to its after."""
    config.validate()
    if not pairs:
        raise UsageError("need at least one image pair")
    if config.n_timesteps != backend.timesteps:
        raise UsageError(
            f"n_timesteps={config.n_timesteps} does not match the backend schedule "
            f"({backend.timesteps})"
        )

    if config.init_source == "caption":
        if captioner is None:
            raise UsageError("init_source 'caption' requires a captioner")
        instr = init_from_captioner(
            backend, pairs[0].after, captioner, k=config.k, base_seed=config.seed
        )
    else:
        instr = init_from_text(backend, config.init_text, k=config.k, base_seed=config.seed)

    if config.n_steps == 0:
        return instr, []

    lat_before = [backend.encode_image(p.before) for p in pairs]
    lat_after = [backend.encode_image(p.after) for p in pairs]
    direction = compute_edit_direction(pairs, backend) if config.use_clip_loss else None

    prefix = instr.rows[:1].detach()
    suffix = instr.rows[instr.eot_index :].detach()
    trainable = instr.rows[1 : instr.eot_index].detach().clone().requires_grad_(True)
    opt = torch.optim.AdamW(
        [trainable], lr=config.learning_rate, weight_decay=config.weight_decay
    )

    plan = NoisePlan(config.seed)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    history: list[LossBreakdown] = []

    try:
        for step in range(config.n_steps):
            pair_idx = int(rng.integers(len(pairs)))
            t = int(rng.integers(config.n_timesteps))
            z_before = lat_before[pair_idx]
            z_after = lat_after[pair_idx]

            shape = z_after.shape
            if config.fresh_noise_per_step:
                noise = plan.fresh(step, t, shape)
            else:
                noise = plan.for_timestep(t, shape, pair=pair_idx)

            rows_full = torch.cat([prefix, trainable, suffix])
            current = instr.with_rows(rows_full)
            noisy = backend.add_noise(z_after, LatentImage(noise, z_after.downscale), t)
            estimate = backend.predict_noise(noisy, t, current, z_before)

            mse = reconstruction_loss(noise, estimate.values)
            if direction is not None:
                clip = clip_alignment_loss(backend.embed_instruction_text(current), direction)
            else:
                clip = torch.zeros((), dtype=mse.dtype)
            total = config.lambda_mse * mse + config.lambda_clip * clip

            if not torch.isfinite(total):
                raise InversionDivergedError(
                    f"loss became non-finite at step {step}", history=history
                )

            opt.zero_grad(set_to_none=True)
            total.backward()
            opt.step()

            entry = LossBreakdown(
                step=step,
                t=t,
                total=float(total.detach()),
                mse=float(mse.detach()),
                clip=float(clip.detach()),
                pair=pair_idx,
            )
            history.append(entry)
            if on_step is not None:
                on_step(entry)
    except BackendError as exc:
        exc.history = history  # partial history up to the failing step
        raise

    final_rows = torch.cat([prefix, trainable.detach(), suffix])
    return instr.with_rows(final_rows), history


def write_loss_csv(history: Sequence[LossBreakdown], path: str | os.PathLike) -> None:
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "t", "total", "mse", "clip"])
            for h in history:
                writer.writerow([h.step, h.t, repr(h.total), repr(h.mse), repr(h.clip)])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def loss_csv_path(instruction_path: str | os.PathLike) -> str:
    root, _ = os.path.splitext(os.fspath(instruction_path))
    return root + ".loss.csv"


def checkpoint(
    instr: InstructionEmbedding,
    history: Sequence[LossBreakdown],
    path: str | os.PathLike,
) -> str:
    """Write the instruction and its loss curve next to each other."""
    instr.save(path)
    csv_path = loss_csv_path(path)
    write_loss_csv(history, csv_path)
    return csv_path
