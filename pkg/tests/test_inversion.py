"""Inversion engine: losses, config validation, optimization loop, artifacts."""

from __future__ import annotations

import csv

import numpy as np
import pytest
import torch

from visii.errors import DegenerateDirectionError, UsageError
from visii.instruction import InstructionEmbedding, StaticCaptioner, init_from_text
from visii.inversion import (
    ImagePair,
    InversionConfig,
    checkpoint,
    clip_alignment_loss,
    compute_edit_direction,
    invert,
    loss_csv_path,
    reconstruction_loss,
    write_loss_csv,
)
from visii.samples import shift_channel, synthetic_scene
from visii.types import ClipVector


@pytest.fixture(scope="module")
def small_pair(small_scene):
    return ImagePair(small_scene, shift_channel(small_scene, 0, 0.4), ident="red")


def _config(**kwargs) -> InversionConfig:
    base = dict(n_steps=5, n_timesteps=1000, init_text="make it red", seed=3)
    base.update(kwargs)
    return InversionConfig(**base)


class TestLosses:
    def test_reconstruction_is_mean_square(self):
        noise = torch.tensor([1.0, 2.0, 3.0, 4.0], dtype=torch.float64)
        estimate = torch.tensor([1.5, 2.0, 2.0, 6.0], dtype=torch.float64)
        assert float(reconstruction_loss(noise, estimate)) == pytest.approx(
            (0.25 + 0.0 + 1.0 + 4.0) / 4.0
        )

    def test_reconstruction_shape_mismatch(self):
        with pytest.raises(UsageError):
            reconstruction_loss(torch.zeros(3), torch.zeros(4))

    def test_alignment_is_one_minus_cosine(self):
        text = ClipVector(torch.tensor([0.6, 0.8, 0.0], dtype=torch.float64))
        direction = ClipVector(torch.tensor([0.0, 1.0, 0.0], dtype=torch.float64))
        assert float(clip_alignment_loss(text, direction)) == pytest.approx(0.2)

    def test_alignment_accepts_edit_direction(self, synthetic_backend):
        a = synthetic_scene(1, 2)
        pair = ImagePair(a, (a * 0.5).astype(np.uint8))
        direction = compute_edit_direction([pair], synthetic_backend)
        text = synthetic_backend.embed_text("darker")
        loss = clip_alignment_loss(text, direction)
        assert 0.0 <= float(loss) <= 2.0


class TestEditDirection:
    def test_unit_norm_and_per_pair(self, synthetic_backend):
        imgs = [synthetic_scene(s, 2) for s in (1, 2)]
        pairs = [ImagePair(i, (i * 0.6).astype(np.uint8)) for i in imgs]
        direction = compute_edit_direction(pairs, synthetic_backend)
        assert float(direction.delta.values.norm()) == pytest.approx(1.0, abs=1e-6)
        assert len(direction.per_pair) == 2

    def test_identical_pair_is_degenerate(self, synthetic_backend):
        img = synthetic_scene(1, 2)
        with pytest.raises(DegenerateDirectionError):
            compute_edit_direction([ImagePair(img, img.copy())], synthetic_backend)

    def test_empty_pairs(self, synthetic_backend):
        with pytest.raises(UsageError):
            compute_edit_direction([], synthetic_backend)


class TestConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_steps=-1),
            dict(n_timesteps=0),
            dict(lambda_mse=-0.1),
            dict(lambda_clip=-0.1),
            dict(learning_rate=0.0),
            dict(weight_decay=-1.0),
            dict(seed=-1),
            dict(seed=2**64),
            dict(init_source="oracle"),
            dict(init_text="  "),
        ],
    )
    def test_rejected(self, kwargs):
        with pytest.raises(UsageError):
            _config(**kwargs).validate()

    def test_defaults_match_documented_values(self):
        config = InversionConfig(init_text="x")
        assert (config.n_steps, config.n_timesteps) == (1000, 1000)
        assert (config.lambda_mse, config.lambda_clip) == (4.0, 0.1)
        assert config.learning_rate == pytest.approx(1e-3)
        assert config.weight_decay == pytest.approx(0.01)
        assert config.use_clip_loss


class TestInvert:
    def test_zero_steps_returns_init(self, tiny_backend, small_pair):
        instr, history = invert([small_pair], _config(n_steps=0), tiny_backend)
        assert history == []
        reference = init_from_text(tiny_backend, "make it red", base_seed=3)
        assert torch.equal(instr.rows, reference.rows)

    def test_timestep_mismatch_rejected(self, tiny_backend, small_pair):
        with pytest.raises(UsageError, match="schedule"):
            invert([small_pair], _config(n_timesteps=500), tiny_backend)

    def test_no_pairs_rejected(self, tiny_backend):
        with pytest.raises(UsageError):
            invert([], _config(), tiny_backend)

    def test_identical_pair_degenerate_with_clip_loss(self, tiny_backend, small_scene):
        pair = ImagePair(small_scene, small_scene.copy())
        with pytest.raises(DegenerateDirectionError):
            invert([pair], _config(), tiny_backend)

    def test_identical_pair_ok_without_clip_loss(self, tiny_backend, small_scene):
        pair = ImagePair(small_scene, small_scene.copy())
        _, history = invert([pair], _config(use_clip_loss=False), tiny_backend)
        assert all(h.clip == 0.0 for h in history)

    def test_history_contents(self, tiny_backend, small_pair):
        _, history = invert([small_pair], _config(), tiny_backend)
        assert [h.step for h in history] == list(range(5))
        assert all(0 <= h.t < 1000 for h in history)
        assert all(h.pair == 0 for h in history)
        for h in history:
            assert h.total == pytest.approx(4.0 * h.mse + 0.1 * h.clip, abs=1e-6)

    def test_on_step_called_per_step(self, tiny_backend, small_pair):
        seen = []
        invert([small_pair], _config(), tiny_backend, on_step=seen.append)
        assert [e.step for e in seen] == list(range(5))

    def test_repeat_run_identical(self, tiny_backend, small_pair):
        _, h1 = invert([small_pair], _config(), tiny_backend)
        _, h2 = invert([small_pair], _config(), tiny_backend)
        assert [h.total for h in h1] == [h.total for h in h2]

    def test_fresh_noise_changes_draws(self, tiny_backend, small_pair):
        _, fixed = invert([small_pair], _config(), tiny_backend)
        _, fresh = invert([small_pair], _config(fresh_noise_per_step=True), tiny_backend)
        assert [h.total for h in fixed] != [h.total for h in fresh]

    def test_multi_pair_samples_all_pairs(self, tiny_backend):
        scenes = [synthetic_scene(s, 32) for s in (11, 22)]
        pairs = [ImagePair(s, shift_channel(s, 0, 0.4)) for s in scenes]
        _, history = invert(pairs, _config(n_steps=16), tiny_backend)
        assert {h.pair for h in history} == {0, 1}

    def test_caption_init(self, tiny_backend, small_pair):
        config = _config(init_source="caption", init_text="")
        instr, _ = invert(
            [small_pair], config, tiny_backend, captioner=StaticCaptioner("a scene")
        )
        assert instr.k == 10

    def test_caption_init_requires_captioner(self, tiny_backend, small_pair):
        with pytest.raises(UsageError, match="captioner"):
            invert([small_pair], _config(init_source="caption", init_text=""), tiny_backend)


class TestArtifacts:
    def test_loss_csv_round_trip(self, tiny_backend, small_pair, tmp_path):
        _, history = invert([small_pair], _config(), tiny_backend)
        path = tmp_path / "run.loss.csv"
        write_loss_csv(history, path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(history)
        for row, entry in zip(rows, history):
            assert int(row["step"]) == entry.step
            assert float(row["total"]) == entry.total  # repr() round-trips exactly
            assert float(row["mse"]) == entry.mse
            assert float(row["clip"]) == entry.clip

    def test_checkpoint_writes_both_artifacts(self, tiny_backend, small_pair, tmp_path):
        instr, history = invert([small_pair], _config(), tiny_backend)
        out = tmp_path / "edit.visii"
        csv_path = checkpoint(instr, history, out)
        assert csv_path == str(tmp_path / "edit.loss.csv")
        loaded = InstructionEmbedding.load(out)
        assert torch.equal(loaded.rows, instr.rows.detach())

    def test_loss_csv_path(self):
        assert loss_csv_path("/a/b/edit.visii") == "/a/b/edit.loss.csv"
