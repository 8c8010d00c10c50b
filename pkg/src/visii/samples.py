"""Deterministic sample imagery for demos, docs, and tests.

Scenes are smooth by construction (low-frequency sinusoid shading plus one
soft blob) so they sit comfortably inside what an 8-fold lossy autoencoder
can represent. The edit helpers are simple global colour operations, which
is the kind of transformation a single before/after pair can pin down.
"""

from __future__ import annotations

import numpy as np

SAMPLE_SEEDS = (11, 22, 33, 44, 55)


def synthetic_scene(seed: int, size: int = 64) -> np.ndarray:
    """A smooth RGB test scene, uint8 HxWx3, fully determined by seed."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / (size - 1)
    img = np.zeros((size, size, 3))
    for c in range(3):
        img[..., c] = (
            0.45
            + 0.25 * np.sin(2 * np.pi * (rng.uniform(0.5, 1.5) * xx + rng.uniform()))
            + 0.25 * np.cos(2 * np.pi * (rng.uniform(0.5, 1.5) * yy + rng.uniform()))
        )
    cx, cy, r = rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.15, 0.3)
    blob = np.exp(-(((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * r * r)))
    tint = rng.uniform(0.1, 0.9, size=3)
    img = img * (1 - 0.6 * blob[..., None]) + tint * 0.6 * blob[..., None]
    return (np.clip(img, 0, 1) * 255).round().astype(np.uint8)


def sample_images(size: int = 64) -> list[np.ndarray]:
    """The five canonical scenes used for tolerances and metric fixtures."""
    return [synthetic_scene(seed, size) for seed in SAMPLE_SEEDS]


def shift_channel(image: np.ndarray, channel: int, amount: float) -> np.ndarray:
    """Push one channel by `amount` (in [0,1] units) and damp the others."""
    f = image.astype(np.float64) / 255.0
    for c in range(3):
        if c == channel:
            f[..., c] = np.clip(f[..., c] + amount, 0.0, 1.0)
        else:
            f[..., c] *= 1.0 - 0.6 * abs(amount)
    return (f * 255.0).round().astype(np.uint8)


def scale_brightness(image: np.ndarray, factor: float) -> np.ndarray:
    """Uniformly rescale brightness; factor < 1 darkens."""
    f = np.clip(image.astype(np.float64) / 255.0 * factor, 0.0, 1.0)
    return (f * 255.0).round().astype(np.uint8)
