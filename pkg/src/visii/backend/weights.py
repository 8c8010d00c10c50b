"""Frozen parameters of the small built-in editor, generated from a seed.

Everything here is numpy so the weight bank is model *data*, independent of
the torch forward code that consumes it. The joint image/text embedder is
grounded by construction: a small vocabulary of appearance words carries, in
a dedicated semantic subspace of the token table, the joint-space embedding
of a canonical canvas showing that appearance. Text mentioning "red"
therefore lands near images that are red, without any pretraining.
"""

from __future__ import annotations

import zlib

import numpy as np

# --- tokenizer ----------------------------------------------------------

PAD_ID = 0
SOT_ID = 1
EOT_ID = 2
FIRST_WORD_ID = 3

_WORD_RE = None  # compiled lazily to keep import light


def split_words(text: str) -> list[str]:
    global _WORD_RE
    if _WORD_RE is None:
        import re

        _WORD_RE = re.compile(r"[a-z0-9]+")
    return _WORD_RE.findall(text.lower())


def word_id(word: str, vocab_size: int) -> int:
    span = vocab_size - FIRST_WORD_ID
    return FIRST_WORD_ID + zlib.crc32(word.encode("utf-8")) % span


# --- image features -----------------------------------------------------

FEATURE_DIM = 12

# Per-feature standardization constants (fixed, not seeded): channel means,
# channel stds, quadrant luminances, gradient energy, saturation.
FEATURE_MU = np.array(
    [0.5, 0.5, 0.5, 0.15, 0.15, 0.15, 0.5, 0.5, 0.5, 0.5, 0.06, 0.2],
    dtype=np.float64,
)
FEATURE_SIGMA = np.array(
    [0.28, 0.28, 0.28, 0.12, 0.12, 0.12, 0.3, 0.3, 0.3, 0.3, 0.06, 0.18],
    dtype=np.float64,
)


def image_features(img: np.ndarray) -> np.ndarray:
    """12 appearance statistics of an (H, W, 3) float image in [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {img.shape}")
    h, w = img.shape[:2]
    means = img.mean(axis=(0, 1))
    stds = img.std(axis=(0, 1))
    lum = img.mean(axis=2)
    hh, wh = h // 2, w // 2
    quads = np.array(
        [
            lum[:hh, :wh].mean(),
            lum[:hh, wh:].mean(),
            lum[hh:, :wh].mean(),
            lum[hh:, wh:].mean(),
        ]
    )
    grad = 0.0
    if h > 1:
        grad += np.abs(np.diff(lum, axis=0)).mean()
    if w > 1:
        grad += np.abs(np.diff(lum, axis=1)).mean()
    sat = (img.max(axis=2) - img.min(axis=2)).mean()
    return np.concatenate([means, stds, quads, [grad, sat]])


def standardize_features(phi: np.ndarray) -> np.ndarray:
    return (phi - FEATURE_MU) / FEATURE_SIGMA


# --- canonical canvases for the grounded vocabulary ----------------------

_CANVAS = 64


def _solid(r, g, b):
    return np.broadcast_to(
        np.array([r, g, b], dtype=np.float64), (_CANVAS, _CANVAS, 3)
    ).copy()


def _noisy():
    rng = np.random.Generator(np.random.PCG64(7))
    return rng.uniform(0.0, 1.0, size=(_CANVAS, _CANVAS, 3))


def _smooth():
    ramp = np.linspace(0.2, 0.8, _CANVAS)
    img = np.empty((_CANVAS, _CANVAS, 3))
    img[:] = ramp[None, :, None]
    return img


def _striped():
    img = np.zeros((_CANVAS, _CANVAS, 3))
    img[:, ::2] = 0.9
    img[:, 1::2] = 0.1
    return img


def canonical_canvases() -> dict[str, np.ndarray]:
    return {
        "red": _solid(0.85, 0.10, 0.10),
        "green": _solid(0.10, 0.80, 0.15),
        "blue": _solid(0.10, 0.15, 0.85),
        "yellow": _solid(0.85, 0.80, 0.10),
        "purple": _solid(0.55, 0.10, 0.75),
        "orange": _solid(0.90, 0.55, 0.10),
        "white": _solid(0.95, 0.95, 0.95),
        "black": _solid(0.05, 0.05, 0.05),
        "gray": _solid(0.50, 0.50, 0.50),
        "bright": _solid(0.85, 0.85, 0.80),
        "dark": _solid(0.15, 0.15, 0.18),
        "noisy": _noisy(),
        "smooth": _smooth(),
        "striped": _striped(),
    }


# --- weight bank ---------------------------------------------------------

# Gains chosen once when the embedder was assembled; the grounded-word gain
# must dominate the random-token floor that leaks through the text encoder's
# mixing into the pooled position.
TOKEN_STD = 0.25
WORD_GAIN = 6.0
POS_STD = 0.02
SEM_PROJ_GAIN = 1.0
RAND_PROJ_GAIN = 0.15
TEXTURE_GAIN = 0.35
N_TEXT_BLOCKS = 2

# Sharpness of the denoiser's cross-attention over instruction rows. High
# enough that retrieval is pattern-matched (rows co-adapt with the latents
# seen while optimizing) instead of averaging all 77 rows.
ATTN_SHARPNESS = 3.0


def _semi_orthogonal(rng, rows: int, cols: int) -> np.ndarray:
    """Matrix with orthonormal columns (rows >= cols)."""
    a = rng.standard_normal((rows, cols))
    q, _ = np.linalg.qr(a)
    return q[:, :cols]


def build_weight_bank(config) -> dict[str, np.ndarray]:
    """All frozen parameters, keyed by name, float32, in a fixed draw order."""
    d = config.text_width
    joint = config.joint_width
    vocab = config.vocab_size
    c = config.latent_channels
    rng = np.random.Generator(np.random.PCG64(config.weights_seed))
    bank: dict[str, np.ndarray] = {}

    def put(name, arr):
        bank[name] = np.ascontiguousarray(arr, dtype=np.float32)

    # joint embedder: feature lift plus a saturating texture branch
    a_lift = _semi_orthogonal(rng, joint, FEATURE_DIM)
    tex_w1 = rng.standard_normal((16, FEATURE_DIM)) / np.sqrt(FEATURE_DIM)
    tex_b1 = rng.standard_normal(16) * 0.1
    tex_lift = rng.standard_normal((joint, 16)) / np.sqrt(16) * TEXTURE_GAIN
    put("joint.lift", a_lift)
    put("joint.tex_w1", tex_w1)
    put("joint.tex_b1", tex_b1)
    put("joint.tex_lift", tex_lift)

    def raw_image_embed(canvas: np.ndarray) -> np.ndarray:
        phi = standardize_features(image_features(canvas))
        return a_lift @ phi + tex_lift @ np.tanh(tex_w1 @ phi + tex_b1)

    # Grounded vocabulary: each appearance word carries, in a semantic
    # subspace of the token table, the exact joint-space embedding of its
    # canonical canvas. The subspace basis spans the canvas embeddings, so
    # the projection loses nothing: text "red" decodes to the same joint
    # vector as an actual red image, up to encoder mixing.
    canvases = canonical_canvases()
    emb = np.stack([raw_image_embed(cv) for cv in canvases.values()], axis=1)
    u_svd, s_svd, _ = np.linalg.svd(emb, full_matrices=False)
    sem_basis = u_svd[:, s_svd > 1e-8 * s_svd[0]]
    m = sem_basis.shape[1]
    g_sem = _semi_orthogonal(rng, d, m)
    table = rng.standard_normal((vocab, d)) * TOKEN_STD
    # non-grounded rows (specials included) are made semantically neutral:
    # arbitrary words must not leak a bias into the grounded subspace
    table -= (table @ g_sem) @ g_sem.T
    grounded_ids = {word: word_id(word, vocab) for word in canvases}
    assert len(set(grounded_ids.values())) == len(grounded_ids), "vocab hash collision"
    for word, canvas in canvases.items():
        code = sem_basis.T @ raw_image_embed(canvas)
        table[grounded_ids[word]] = TOKEN_STD * rng.standard_normal(d) * 0.1 + WORD_GAIN * (
            g_sem @ code
        )
    put("text.token_table", table)
    put("text.pos", rng.standard_normal((77, d)) * POS_STD)

    for i in range(N_TEXT_BLOCKS):
        p = f"text.block{i}."
        put(p + "ln1_g", np.ones(d))
        put(p + "ln1_b", np.zeros(d))
        put(p + "wq", rng.standard_normal((d, d)) * 0.02)
        put(p + "wk", rng.standard_normal((d, d)) * 0.02)
        put(p + "wv", np.eye(d) + rng.standard_normal((d, d)) * 0.05)
        put(p + "wo", np.eye(d) * 0.6 + rng.standard_normal((d, d)) * 0.05)
        put(p + "ln2_g", np.ones(d))
        put(p + "ln2_b", np.zeros(d))
        put(p + "mlp_w1", rng.standard_normal((2 * d, d)) * (0.5 / np.sqrt(d)))
        put(p + "mlp_b1", np.zeros(2 * d))
        put(p + "mlp_w2", rng.standard_normal((d, 2 * d)) * (0.5 / np.sqrt(2 * d)))
        put(p + "mlp_b2", np.zeros(d))

    put(
        "text.proj",
        SEM_PROJ_GAIN * (sem_basis @ g_sem.T)
        + RAND_PROJ_GAIN * rng.standard_normal((joint, d)) / np.sqrt(d),
    )

    # latent autoencoder: fixed semi-orthogonal channel lift (3 -> c)
    put("vae.channel_lift", _semi_orthogonal(rng, c, 3))

    # denoiser
    ch = 24
    att = 16
    tdim = 32

    def conv(name, cout, cin, k):
        put(name, rng.standard_normal((cout, cin, k, k)) / np.sqrt(cin * k * k))

    conv("unet.conv_in", ch, 2 * c, 3)
    put("unet.t_w1", rng.standard_normal((48, tdim)) / np.sqrt(tdim))
    put("unet.t_b1", np.zeros(48))
    put("unet.t_w2", rng.standard_normal((2 * ch, 48)) / np.sqrt(48))
    put("unet.t_b2", np.zeros(2 * ch))
    conv("unet.conv_mid", ch, ch, 3)
    put("unet.attn_q", rng.standard_normal((att, ch)) / np.sqrt(ch))
    put("unet.attn_k", rng.standard_normal((att, d)) / np.sqrt(d))
    put("unet.attn_v", rng.standard_normal((att, d)) / np.sqrt(d))
    put("unet.attn_out", rng.standard_normal((ch, att)) / np.sqrt(att))
    conv("unet.conv_out", ch, ch, 3)
    conv("unet.head_eps", c, ch, 1)
    conv("unet.head_edit", c, ch, 1)
    return bank
