"""Instruction embeddings: layout, constructors, text concat, .visii format."""

from __future__ import annotations

import struct
import zlib

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from visii.backend import weights as wb
from visii.errors import (
    CaptionerError,
    SerializationError,
    TokenOverflowError,
    UsageError,
)
from visii.instruction import (
    InstructionEmbedding,
    StaticCaptioner,
    concat_user_text,
    init_from_captioner,
    init_from_text,
)
from visii.types import SEQUENCE_WIDTH


def _row_for(backend, token_id: int) -> torch.Tensor:
    return backend.token_embeddings([token_id])[0].embedding


class TestInitFromText:
    def test_layout(self, tiny_backend):
        instr = init_from_text(tiny_backend, "make it red", base_seed=42)
        assert instr.k == 3
        assert instr.eot_index == 4
        assert instr.base_seed == 42
        assert instr.trainable
        assert instr.config_hash == tiny_backend.config.stable_hash()
        assert torch.equal(instr.rows[0], _row_for(tiny_backend, wb.SOT_ID))
        assert torch.equal(instr.rows[4], _row_for(tiny_backend, wb.EOT_ID))
        pad = _row_for(tiny_backend, wb.PAD_ID)
        assert all(torch.equal(instr.rows[i], pad) for i in range(5, SEQUENCE_WIDTH))

    def test_rows_match_token_table(self, tiny_backend):
        instr = init_from_text(tiny_backend, "make it red")
        ids = tiny_backend.tokenize("make it red")
        for pos in range(1, 4):
            assert torch.equal(instr.rows[pos], _row_for(tiny_backend, ids[pos]))

    def test_explicit_k_truncates(self, tiny_backend):
        full = init_from_text(tiny_backend, "make it red")
        instr = init_from_text(tiny_backend, "make it red", k=2)
        assert instr.k == 2
        assert torch.equal(instr.rows[1:3], full.rows[1:3])
        assert torch.equal(instr.rows[3], _row_for(tiny_backend, wb.EOT_ID))

    def test_explicit_k_pads(self, tiny_backend):
        instr = init_from_text(tiny_backend, "make it red", k=5)
        pad = _row_for(tiny_backend, wb.PAD_ID)
        assert instr.k == 5
        assert torch.equal(instr.rows[4], pad)
        assert torch.equal(instr.rows[5], pad)
        assert torch.equal(instr.rows[6], _row_for(tiny_backend, wb.EOT_ID))

    def test_rejects_empty_text(self, tiny_backend):
        with pytest.raises(UsageError):
            init_from_text(tiny_backend, "?!")

    def test_rejects_bad_k(self, tiny_backend):
        with pytest.raises(UsageError):
            init_from_text(tiny_backend, "make it red", k=0)
        with pytest.raises(TokenOverflowError):
            init_from_text(tiny_backend, "make it red", k=76)

    def test_trainable_rows_slice(self, tiny_backend):
        instr = init_from_text(tiny_backend, "make it red")
        assert instr.trainable_rows().shape == (3, tiny_backend.config.text_width)

    def test_with_rows_keeps_shape(self, tiny_backend):
        instr = init_from_text(tiny_backend, "make it red")
        replaced = instr.with_rows(instr.rows * 2)
        assert replaced.k == instr.k
        assert replaced.created_at_ns == instr.created_at_ns
        with pytest.raises(UsageError):
            instr.with_rows(torch.zeros(10, 4))


class TestCaptionerInit:
    def test_default_k_is_ten(self, tiny_backend):
        instr = init_from_captioner(tiny_backend, None, StaticCaptioner("a very dark scene"))
        assert instr.k == 10

    def test_empty_caption_rejected(self, tiny_backend):
        with pytest.raises(CaptionerError):
            init_from_captioner(tiny_backend, None, StaticCaptioner("   "))

    def test_unusable_caption_wrapped(self, tiny_backend):
        with pytest.raises(CaptionerError):
            init_from_captioner(tiny_backend, None, StaticCaptioner("!!!"))


class TestConcatUserText:
    def test_appends_after_learned_rows(self, tiny_backend):
        instr = init_from_text(tiny_backend, "make it red", base_seed=7)
        merged = concat_user_text(tiny_backend, instr, "with more contrast")
        assert merged.k == 6
        assert not merged.trainable
        assert merged.base_seed == 7
        assert torch.equal(merged.rows[0], instr.rows[0])
        assert torch.equal(merged.rows[1:4], instr.rows[1:4])
        ids = [i for i in tiny_backend.tokenize("with more contrast")[1:] if i >= wb.FIRST_WORD_ID]
        for offset, token_id in enumerate(ids):
            assert torch.equal(merged.rows[4 + offset], _row_for(tiny_backend, token_id))
        assert torch.equal(merged.rows[7], instr.rows[4])  # the original end row, shifted

    def test_empty_text_is_identity(self, tiny_backend):
        instr = init_from_text(tiny_backend, "make it red")
        for text in ("", "   ", "?!"):
            merged = concat_user_text(tiny_backend, instr, text)
            assert merged.k == instr.k
            assert not merged.trainable
            assert torch.equal(merged.rows, instr.rows)

    def test_overflow_rejected(self, tiny_backend):
        instr = init_from_text(tiny_backend, "make it red")
        with pytest.raises(TokenOverflowError):
            concat_user_text(tiny_backend, instr, " ".join(f"w{i}" for i in range(73)))
        # 72 extra words on top of k=3 hit the budget exactly
        merged = concat_user_text(tiny_backend, instr, " ".join(f"w{i}" for i in range(72)))
        assert merged.k == 75

    def test_width_mismatch_rejected(self, tiny_backend, synthetic_backend):
        narrow = init_from_text(synthetic_backend, "make it red")
        with pytest.raises(UsageError):
            concat_user_text(tiny_backend, narrow, "more")


def _random_instruction(rng: np.random.Generator, d: int = 8) -> InstructionEmbedding:
    k = int(rng.integers(1, SEQUENCE_WIDTH - 1))
    rows = rng.standard_normal((SEQUENCE_WIDTH, d), dtype=np.float32)
    return InstructionEmbedding(
        rows=torch.from_numpy(rows),
        k=k,
        model_id="tiny-editor/v1",
        base_seed=int(rng.integers(0, 2**63)),
        trainable=False,
    )


class TestSerialization:
    def test_round_trip_fields(self, rng):
        instr = _random_instruction(rng)
        back = InstructionEmbedding.from_bytes(instr.to_bytes())
        assert back.k == instr.k
        assert back.model_id == instr.model_id
        assert back.base_seed == instr.base_seed
        assert not back.trainable
        assert torch.equal(back.rows, instr.rows)

    def test_save_load(self, tmp_path, rng):
        instr = _random_instruction(rng)
        path = tmp_path / "edit.visii"
        instr.save(path)
        back = InstructionEmbedding.load(path)
        assert torch.equal(back.rows, instr.rows)
        assert back.created_at_ns == path.stat().st_mtime_ns

    def test_null_instruction_not_serializable(self, tiny_backend):
        with pytest.raises(UsageError):
            tiny_backend.null_instruction.to_bytes()

    def test_truncated_rejected(self, rng):
        data = _random_instruction(rng).to_bytes()
        for cut in (0, 5, 10, len(data) // 2, len(data) - 1):
            with pytest.raises(SerializationError):
                InstructionEmbedding.from_bytes(data[:cut])

    def test_bad_magic_rejected(self, rng):
        data = bytearray(_random_instruction(rng).to_bytes())
        data[0] ^= 0xFF
        with pytest.raises(SerializationError):
            InstructionEmbedding.from_bytes(bytes(data))

    def test_crc_flip_rejected(self, rng):
        data = bytearray(_random_instruction(rng).to_bytes())
        data[len(data) // 2] ^= 0x01
        with pytest.raises(SerializationError):
            InstructionEmbedding.from_bytes(bytes(data))

    @staticmethod
    def _patched(data: bytes, offset: int, fmt: str, value) -> bytes:
        body = bytearray(data[:-4])
        struct.pack_into(fmt, body, offset, value)
        return bytes(body) + struct.pack("<I", zlib.crc32(bytes(body)))

    def test_unknown_version_rejected(self, rng):
        data = _random_instruction(rng).to_bytes()
        with pytest.raises(SerializationError, match="version"):
            InstructionEmbedding.from_bytes(self._patched(data, 6, "<H", 2))

    def test_stored_k_zero_rejected(self, rng):
        data = _random_instruction(rng).to_bytes()
        with pytest.raises(SerializationError, match="k="):
            InstructionEmbedding.from_bytes(self._patched(data, 8, "<H", 0))

    def test_payload_size_mismatch_rejected(self, rng):
        data = _random_instruction(rng).to_bytes()
        body = data[:-4] + b"\x00" * 4
        grown = body + struct.pack("<I", zlib.crc32(body))
        with pytest.raises(SerializationError, match="size"):
            InstructionEmbedding.from_bytes(grown)

    def test_non_finite_rows_rejected(self):
        rows = torch.zeros(SEQUENCE_WIDTH, 4)
        rows[3, 2] = float("inf")
        instr = InstructionEmbedding(rows=rows, k=2, model_id="m", trainable=False)
        with pytest.raises(SerializationError, match="finite"):
            InstructionEmbedding.from_bytes(instr.to_bytes())

    def test_invalid_utf8_model_id_rejected(self):
        rows = np.zeros((SEQUENCE_WIDTH, 2), dtype="<f4").tobytes()
        body = b"VISII\x00" + struct.pack("<HHI", 1, 1, 2)
        body += struct.pack("<H", 2) + b"\xff\xfe"
        body += struct.pack("<Q", 0) + rows
        data = body + struct.pack("<I", zlib.crc32(body))
        with pytest.raises(SerializationError, match="UTF-8"):
            InstructionEmbedding.from_bytes(data)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(SerializationError):
            InstructionEmbedding.load(tmp_path / "absent.visii")

    @settings(max_examples=30, deadline=None)
    @given(
        k=st.integers(min_value=1, max_value=75),
        d=st.sampled_from([1, 8, 64]),
        base_seed=st.integers(min_value=0, max_value=2**64 - 1),
        model_id=st.text(min_size=1, max_size=40),
        data_seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_round_trip_property(self, k, d, base_seed, model_id, data_seed):
        rows = np.random.default_rng(data_seed).standard_normal(
            (SEQUENCE_WIDTH, d), dtype=np.float32
        )
        instr = InstructionEmbedding(
            rows=torch.from_numpy(rows), k=k, model_id=model_id,
            base_seed=base_seed, trainable=False,
        )
        data = instr.to_bytes()
        back = InstructionEmbedding.from_bytes(data)
        assert back.to_bytes() == data
        assert (back.k, back.model_id, back.base_seed) == (k, model_id, base_seed)
        assert torch.equal(back.rows, instr.rows)


class TestConstruction:
    def test_row_count_enforced(self):
        with pytest.raises(UsageError):
            InstructionEmbedding(rows=torch.zeros(76, 4), k=1, model_id="m")

    def test_k_range_enforced(self):
        with pytest.raises(UsageError):
            InstructionEmbedding(rows=torch.zeros(SEQUENCE_WIDTH, 4), k=76, model_id="m")

    def test_seed_range_enforced(self):
        with pytest.raises(UsageError):
            InstructionEmbedding(rows=torch.zeros(SEQUENCE_WIDTH, 4), k=1, model_id="m", base_seed=-1)
