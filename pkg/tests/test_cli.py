"""CLI surface: exit codes, printed defaults, written artifacts."""

from __future__ import annotations

import json

import pytest

import visii.cli as cli
from visii.images import save_png
from visii.samples import shift_channel, synthetic_scene


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """PNG pair plus a 5-step learned instruction, all through main()."""
    root = tmp_path_factory.mktemp("cli")
    scene = synthetic_scene(5, 32)
    save_png(scene, root / "before.png")
    save_png(shift_channel(scene, 0, 0.4), root / "after.png")
    rc = cli.main(
        [
            "invert",
            "--before", str(root / "before.png"),
            "--after", str(root / "after.png"),
            "--out", str(root / "learned.visii"),
            "--steps", "5",
        ]
    )
    assert rc == 0
    return root


class TestInvert:
    def test_bare_run_prints_default_config_line(self, workspace, monkeypatch, capsys):
        monkeypatch.setattr(cli, "invert", lambda pairs, config, backend: (None, []))
        monkeypatch.setattr(cli, "checkpoint", lambda instr, history, out: out + ".loss.csv")
        rc = cli.main(
            [
                "invert",
                "--before", str(workspace / "before.png"),
                "--after", str(workspace / "after.png"),
                "--out", str(workspace / "stub.visii"),
            ]
        )
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "N=1000 lmse=4 lclip=0.1 lr=0.001"

    def test_writes_instruction_and_loss_curve(self, workspace, capsys):
        # the module fixture already ran the command; check its leavings
        assert (workspace / "learned.visii").exists()
        assert (workspace / "learned.loss.csv").exists()

    def test_pair_count_mismatch(self, workspace, capsys):
        rc = cli.main(
            [
                "invert",
                "--before", str(workspace / "before.png"),
                "--before", str(workspace / "after.png"),
                "--after", str(workspace / "after.png"),
                "--out", str(workspace / "x.visii"),
            ]
        )
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_no_pairs(self, workspace, capsys):
        rc = cli.main(["invert", "--out", str(workspace / "x.visii")])
        assert rc == 1

    def test_missing_image(self, workspace, capsys):
        rc = cli.main(
            [
                "invert",
                "--before", str(workspace / "nope.png"),
                "--after", str(workspace / "after.png"),
                "--out", str(workspace / "x.visii"),
            ]
        )
        assert rc == 3

    def test_unknown_flag(self, capsys):
        assert cli.main(["invert", "--frobnicate"]) == 1

    def test_unknown_subcommand(self, capsys):
        assert cli.main(["transmogrify"]) == 1

    def test_unknown_backend_family(self, workspace, tmp_path, capsys):
        cfg = tmp_path / "backend.json"
        cfg.write_text(json.dumps({"model_id": "bogus/v0"}))
        rc = cli.main(
            [
                "--backend-config", str(cfg),
                "invert",
                "--before", str(workspace / "before.png"),
                "--after", str(workspace / "after.png"),
                "--out", str(workspace / "x.visii"),
            ]
        )
        assert rc == 2
        assert "bogus" in capsys.readouterr().err


class TestApply:
    def _apply(self, workspace, out, *extra):
        return cli.main(
            [
                "apply",
                "--instruction", str(workspace / "learned.visii"),
                "--image", str(workspace / "before.png"),
                "--out", str(out),
                "--sampler-steps", "5",
                *extra,
            ]
        )

    def test_fixed_noise_replays_exactly(self, workspace, tmp_path, capsys):
        assert self._apply(workspace, tmp_path / "a.png") == 0
        assert self._apply(workspace, tmp_path / "b.png") == 0
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()

    def test_sidecar_defaults(self, workspace, tmp_path, capsys):
        assert self._apply(workspace, tmp_path / "c.png") == 0
        sidecar = json.loads((tmp_path / "c.json").read_text())
        assert sidecar["text_scale"] == 7.5
        assert sidecar["image_scale"] == 1.5
        assert sidecar["noise_mode"] == "fixed"

    def test_corrupt_instruction(self, workspace, tmp_path, capsys):
        bad = tmp_path / "bad.visii"
        bad.write_bytes(b"not an instruction at all")
        rc = cli.main(
            [
                "apply",
                "--instruction", str(bad),
                "--image", str(workspace / "before.png"),
                "--out", str(tmp_path / "x.png"),
            ]
        )
        assert rc == 3

    def test_extra_text_overflow(self, workspace, tmp_path, capsys):
        words = " ".join(f"w{i}" for i in range(76))
        rc = self._apply(workspace, tmp_path / "x.png", "--extra-text", words)
        assert rc == 1
        assert "token" in capsys.readouterr().err.lower()


class TestEval:
    def test_empty_manifest(self, tmp_path, capsys):
        manifest = tmp_path / "empty.json"
        manifest.write_text("[]")
        rc = cli.main(["eval", "--manifest", str(manifest), "--out-dir", str(tmp_path / "out")])
        assert rc == 3
        assert "no directions" in capsys.readouterr().err

    def test_healthy_manifest(self, tmp_path, capsys):
        scene = synthetic_scene(7, 32)
        save_png(scene, tmp_path / "b0.png")
        save_png(shift_channel(scene, 0, 0.35), tmp_path / "a0.png")
        other = synthetic_scene(8, 32)
        save_png(other, tmp_path / "b1.png")
        save_png(shift_channel(other, 0, 0.35), tmp_path / "a1.png")
        manifest = tmp_path / "m.json"
        manifest.write_text(
            json.dumps(
                [
                    {
                        "direction_id": "redden",
                        "before_caption": "the scene",
                        "after_caption": "the scene in red",
                        "examples": [["b0.png", "a0.png"]],
                        "tests": [["b1.png", "a1.png"]],
                    }
                ]
            )
        )
        out_dir = tmp_path / "out"
        rc = cli.main(["eval", "--manifest", str(manifest), "--out-dir", str(out_dir)])
        assert rc == 0
        assert (out_dir / "results.csv").exists()
        assert (out_dir / "report.json").exists()
        assert "scored 1 records (1 ok, 0 flagged)" in capsys.readouterr().out
