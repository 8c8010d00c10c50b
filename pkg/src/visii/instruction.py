"""Instruction embeddings: the 77-row soft prompts this package learns.

Row layout is fixed: row 0 is the start token, rows [1, 1+k) are content
(the only rows optimization may touch), row 1+k is the end token, and the
remaining rows are padding. k = 0 is reserved for the internal null
instruction and is never written to disk.

File format (.visii, little-endian throughout):

    magic   6 bytes  "VISII\\0"
    version u16      1
    k       u16
    D       u32      embedding width
    len     u16      model id byte length, then that many UTF-8 bytes
    seed    u64      base seed used for fixed-noise application
    rows    77*D     float32 values, row-major
    crc     u32      CRC32 of every preceding byte
"""

from __future__ import annotations

import dataclasses
import os
import struct
import tempfile
import time
import zlib
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
import torch

from .backend import weights as wb
from .backend.base import EditorBackend
from .errors import CaptionerError, SerializationError, TokenOverflowError, UsageError
from .types import MAX_CONTENT_TOKENS, SEQUENCE_WIDTH

_MAGIC = b"VISII\x00"
_VERSION = 1
_MAX_SEED = 2**64 - 1


@dataclass
class InstructionEmbedding:
    rows: torch.Tensor
    k: int
    model_id: str
    base_seed: int = 0
    trainable: bool = True
    created_at_ns: int | None = None
    # hash of the backend config in effect at creation; informational only,
    # not serialized (the file format identifies the model by model_id)
    config_hash: int = 0

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[0] != SEQUENCE_WIDTH:
            raise UsageError(
                f"instruction rows must be ({SEQUENCE_WIDTH}, D), got {tuple(self.rows.shape)}"
            )
        if not 0 <= self.k <= MAX_CONTENT_TOKENS:
            raise UsageError(f"k must lie in [0, {MAX_CONTENT_TOKENS}], got {self.k}")
        if not 0 <= self.base_seed <= _MAX_SEED:
            raise UsageError("base_seed must fit in an unsigned 64-bit integer")
        if self.created_at_ns is None:
            self.created_at_ns = time.time_ns()

    @property
    def width(self) -> int:
        return self.rows.shape[1]

    @property
    def eot_index(self) -> int:
        return 1 + self.k

    def trainable_rows(self) -> torch.Tensor:
        return self.rows[1 : self.eot_index]

    def with_rows(self, rows: torch.Tensor) -> "InstructionEmbedding":
        if rows.shape != self.rows.shape:
            raise UsageError("replacement rows must keep the original shape")
        return dataclasses.replace(self, rows=rows, created_at_ns=self.created_at_ns)

    # --- serialization ---------------------------------------------------

    def to_bytes(self) -> bytes:
        if self.k == 0:
            raise UsageError("the null instruction cannot be serialized")
        mid = self.model_id.encode("utf-8")
        if len(mid) > 0xFFFF:
            raise UsageError("model id too long to serialize")
        buf = bytearray(_MAGIC)
        buf += struct.pack("<HHI", _VERSION, self.k, self.width)
        buf += struct.pack("<H", len(mid)) + mid
        buf += struct.pack("<Q", self.base_seed)
        rows = self.rows.detach().to(torch.float32).contiguous().numpy()
        buf += np.ascontiguousarray(rows, dtype="<f4").tobytes()
        buf += struct.pack("<I", zlib.crc32(bytes(buf)))
        return bytes(buf)

    def save(self, path: str | os.PathLike) -> None:
        data = self.to_bytes()
        path = os.fspath(path)
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def from_bytes(cls, data: bytes) -> "InstructionEmbedding":
        if len(data) < len(_MAGIC) + 8:
            raise SerializationError("file too short to be an instruction embedding")
        if data[: len(_MAGIC)] != _MAGIC:
            raise SerializationError("bad magic: not an instruction embedding file")
        (stored_crc,) = struct.unpack("<I", data[-4:])
        if zlib.crc32(data[:-4]) != stored_crc:
            raise SerializationError("checksum mismatch: file is corrupt")
        off = len(_MAGIC)
        version, k, d = struct.unpack_from("<HHI", data, off)
        off += 8
        if version != _VERSION:
            raise SerializationError(f"unsupported format version {version}")
        if not 1 <= k <= MAX_CONTENT_TOKENS:
            raise SerializationError(f"stored k={k} outside [1, {MAX_CONTENT_TOKENS}]")
        if not 1 <= d <= 65536:
            raise SerializationError(f"implausible embedding width {d}")
        (mid_len,) = struct.unpack_from("<H", data, off)
        off += 2
        try:
            model_id = data[off : off + mid_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SerializationError("model id is not valid UTF-8") from exc
        off += mid_len
        (base_seed,) = struct.unpack_from("<Q", data, off)
        off += 8
        n_bytes = SEQUENCE_WIDTH * d * 4
        if len(data) - 4 - off != n_bytes:
            raise SerializationError("row payload has the wrong size")
        rows = np.frombuffer(data, dtype="<f4", count=SEQUENCE_WIDTH * d, offset=off)
        rows = torch.from_numpy(rows.reshape(SEQUENCE_WIDTH, d).copy())
        if not torch.isfinite(rows).all():
            raise SerializationError("rows contain non-finite values")
        return cls(rows=rows, k=k, model_id=model_id, base_seed=base_seed, trainable=False)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "InstructionEmbedding":
        path = os.fspath(path)
        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise SerializationError(f"cannot read {path}: {exc}") from exc
        instr = cls.from_bytes(data)
        instr.created_at_ns = os.stat(path).st_mtime_ns
        return instr


# --- captioners -----------------------------------------------------------


@runtime_checkable
class Captioner(Protocol):
    def caption(self, image) -> str: ...


class StaticCaptioner:
    """Returns one fixed caption for every image."""

    def __init__(self, text: str):
        self.text = text

    def caption(self, image) -> str:
        return self.text


# --- constructors -----------------------------------------------------------


def init_from_text(
    backend: EditorBackend,
    text: str,
    k: int | None = None,
    base_seed: int = 0,
) -> InstructionEmbedding:
    """Seed an instruction with the frozen embedding of real text.

    k defaults to the token count of the text. An explicit smaller k keeps
    the first k tokens; a larger k pads the trainable span with copies of
    the pad-token embedding.
    """
    ids = backend.tokenize(text)
    # ids is [SOT, words..., EOT, pads...]; the word span ends at the EOT
    n = ids.index(wb.EOT_ID) - 1
    if n == 0:
        raise UsageError("instruction init text must contain at least one token")
    if k is None:
        k = n
    if k < 1:
        raise UsageError(f"k must be at least 1, got {k}")
    if k > MAX_CONTENT_TOKENS:
        raise TokenOverflowError(f"k={k} exceeds the {MAX_CONTENT_TOKENS}-token budget")
    kept = min(k, n)
    layout = [wb.SOT_ID] + ids[1 : 1 + kept] + [wb.PAD_ID] * (k - kept) + [wb.EOT_ID]
    layout += [wb.PAD_ID] * (SEQUENCE_WIDTH - len(layout))
    rows = torch.stack([row.embedding for row in backend.token_embeddings(layout)])
    return InstructionEmbedding(
        rows=rows,
        k=k,
        model_id=backend.model_id,
        base_seed=base_seed,
        trainable=True,
        config_hash=backend.config.stable_hash(),
    )


def init_from_captioner(
    backend: EditorBackend,
    after_image,
    captioner: Captioner,
    k: int | None = 10,
    base_seed: int = 0,
) -> InstructionEmbedding:
    """Seed an instruction from a caption of the target image.

    The caption is padded or truncated to k tokens (default 10).
    """
    caption = captioner.caption(after_image)
    if not isinstance(caption, str) or not caption.strip():
        raise CaptionerError("captioner produced an empty caption")
    try:
        return init_from_text(backend, caption, k=10 if k is None else k, base_seed=base_seed)
    except UsageError as exc:
        raise CaptionerError(f"caption {caption!r} is unusable: {exc}") from exc


def concat_user_text(
    backend: EditorBackend,
    instr: InstructionEmbedding,
    extra_text: str,
) -> InstructionEmbedding:
    """Append frozen embeddings of user text after the learned rows.

    The learned rows, the start/end rows, and the padding rows are reused
    bit for bit; only the appended words come from the token table. Empty
    text returns the instruction unchanged (marked non-trainable).
    """
    if instr.width != backend.config.text_width:
        raise UsageError("instruction width does not match backend text width")
    word_ids = [i for i in backend.tokenize(extra_text)[1:] if i not in (wb.PAD_ID, wb.EOT_ID)]
    if not word_ids:
        return dataclasses.replace(instr, trainable=False)
    total = instr.k + len(word_ids)
    if total > MAX_CONTENT_TOKENS:
        raise TokenOverflowError(
            f"{instr.k} learned + {len(word_ids)} text tokens exceed the "
            f"{MAX_CONTENT_TOKENS}-token budget"
        )
    extra = torch.stack([row.embedding for row in backend.token_embeddings(word_ids)])
    eot = instr.eot_index
    pads_needed = SEQUENCE_WIDTH - (2 + total)
    rows = torch.cat(
        [
            instr.rows[:1],
            instr.rows[1:eot],
            extra.to(instr.rows.dtype),
            instr.rows[eot : eot + 1],
            instr.rows[eot + 1 : eot + 1 + pads_needed],
        ]
    )
    return InstructionEmbedding(
        rows=rows,
        k=total,
        model_id=instr.model_id,
        base_seed=instr.base_seed,
        trainable=False,
        config_hash=instr.config_hash,
    )
