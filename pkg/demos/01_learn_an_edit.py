"""Learn an instruction embedding from a single before/after pair.

Builds a synthetic scene, reddens it, and optimizes an instruction that
reproduces the edit. Writes the learned .visii file and its loss curve
under demos/out/.
"""

from pathlib import Path

from visii.backend import load_backend
from visii.images import save_png
from visii.inversion import ImagePair, InversionConfig, checkpoint, invert
from visii.samples import shift_channel, synthetic_scene

OUT = Path(__file__).parent / "out"


def main() -> None:
    OUT.mkdir(exist_ok=True)
    backend = load_backend()
    print(f"backend: {backend.model_id}, schedule of {backend.timesteps} timesteps")

    before = synthetic_scene(5, 64)
    after = shift_channel(before, 0, 0.4)
    save_png(before, OUT / "before.png")
    save_png(after, OUT / "after.png")

    config = InversionConfig(
        n_steps=300,
        n_timesteps=backend.timesteps,
        init_text="make it red",
        seed=7,
    )
    print(f"optimizing {config.n_steps} steps from init text {config.init_text!r} ...")
    instr, history = invert([ImagePair(before, after, ident="demo")], config, backend)

    csv_path = checkpoint(instr, history, OUT / "redden.visii")
    first, last = history[0], history[-1]
    print(f"step {first.step:4d}: total={first.total:.4f} (mse={first.mse:.4f} clip={first.clip:.4f})")
    print(f"step {last.step:4d}: total={last.total:.4f} (mse={last.mse:.4f} clip={last.clip:.4f})")
    print(f"learned k={instr.k} trainable rows, base_seed={instr.base_seed}")
    print(f"wrote {OUT / 'redden.visii'} and {csv_path}")


if __name__ == "__main__":
    main()
