"""Image loading and geometry helpers shared by the CLI and the service."""

from __future__ import annotations

import hashlib
import io
import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError, GeometryError, UsageError


def to_float_image(image) -> np.ndarray:
    """Any accepted image form -> (H, W, 3) float32 in [0, 1]."""
    if hasattr(image, "convert"):  # PIL
        image = np.asarray(image.convert("RGB"))
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise GeometryError(f"expected (H, W, 3) RGB image, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        return arr.astype(np.float32) / 255.0
    arr = arr.astype(np.float32)
    if arr.min() < -1e-6 or arr.max() > 1.0 + 1e-6:
        raise UsageError("float images must lie in [0, 1]")
    return np.clip(arr, 0.0, 1.0)


def load_image(path: str | os.PathLike) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except FileNotFoundError as exc:
        raise DataError(f"image not found: {path}") from exc
    except UnidentifiedImageError as exc:
        raise DataError(f"not a readable image: {path}") from exc


def decode_image_bytes(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"))
    except UnidentifiedImageError as exc:
        raise DataError("upload is not a readable image") from exc


def center_crop_resize(arr: np.ndarray, size: int) -> np.ndarray:
    """Crop to the central square, then resize to size x size."""
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise GeometryError(f"expected (H, W, 3) image, got shape {arr.shape}")
    h, w = arr.shape[:2]
    side = min(h, w)
    top = (h - side) // 2
    left = (w - side) // 2
    img = Image.fromarray(arr[top : top + side, left : left + side])
    return np.asarray(img.resize((size, size), Image.BILINEAR))


def save_png(arr: np.ndarray, path: str | os.PathLike) -> None:
    if arr.dtype != np.uint8:
        raise UsageError("save_png expects a uint8 array")
    Image.fromarray(arr).save(os.fspath(path), format="PNG")


def png_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def sha256_of(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()
