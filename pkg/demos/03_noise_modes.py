"""Fixed-noise replay versus random noise at apply time.

Fixed mode replays the exact noises the optimization saw, which keeps the
output close to the input; random mode re-rolls them per run seed. The
image-space similarity printed per run makes the faithfulness gap visible.
"""

from pathlib import Path

from visii.backend import load_backend
from visii.editor import GuidanceConfig, apply_instruction
from visii.images import save_png
from visii.instruction import InstructionEmbedding
from visii.metrics import image_clip_similarity
from visii.samples import synthetic_scene

OUT = Path(__file__).parent / "out"


def main() -> None:
    instr_path = OUT / "redden.visii"
    if not instr_path.exists():
        raise SystemExit("run demos/01_learn_an_edit.py first")
    backend = load_backend()
    instr = InstructionEmbedding.load(instr_path)
    scene = synthetic_scene(42, 64)

    fixed = apply_instruction(
        backend, instr, scene,
        GuidanceConfig(sampler="ancestral", noise_mode="fixed", sampler_steps=50),
    )
    save_png(fixed.image, OUT / "noise_fixed.png")
    score = image_clip_similarity(backend, scene, fixed.image)
    print(f"fixed replay:        similarity to input {score:+.4f}")

    for run_seed in (1, 2, 3):
        random = apply_instruction(
            backend, instr, scene,
            GuidanceConfig(
                sampler="ancestral", noise_mode="random",
                sampler_steps=50, run_seed=run_seed,
            ),
        )
        save_png(random.image, OUT / f"noise_random_{run_seed}.png")
        score = image_clip_similarity(backend, scene, random.image)
        print(f"random (seed {run_seed}):     similarity to input {score:+.4f}")

    again = apply_instruction(
        backend, instr, scene,
        GuidanceConfig(sampler="ancestral", noise_mode="fixed", sampler_steps=50),
    )
    identical = (again.image == fixed.image).all()
    print(f"fixed replay repeated -> byte-identical output: {bool(identical)}")


if __name__ == "__main__":
    main()
