"""Apply a learned instruction to a new image, plain and with hybrid text.

Run demos/01_learn_an_edit.py first; this loads its .visii output, edits a
scene the instruction never saw, then appends user text to the learned rows
and edits again.
"""

import json
from pathlib import Path

from visii.backend import load_backend
from visii.editor import GuidanceConfig, apply_instruction
from visii.images import save_png
from visii.instruction import InstructionEmbedding
from visii.samples import synthetic_scene

OUT = Path(__file__).parent / "out"


def main() -> None:
    instr_path = OUT / "redden.visii"
    if not instr_path.exists():
        raise SystemExit("run demos/01_learn_an_edit.py first")
    backend = load_backend()
    instr = InstructionEmbedding.load(instr_path)
    print(f"loaded {instr_path.name}: k={instr.k}, model {instr.model_id}")

    scene = synthetic_scene(42, 64)
    save_png(scene, OUT / "test_scene.png")
    guidance = GuidanceConfig(sampler_steps=50)

    result = apply_instruction(backend, instr, scene, guidance, instruction_ref=instr_path.name)
    save_png(result.image, OUT / "edited.png")
    print(f"plain apply -> {OUT / 'edited.png'}")

    hybrid = apply_instruction(
        backend, instr, scene, guidance,
        extra_text="and much darker", instruction_ref=instr_path.name,
    )
    save_png(hybrid.image, OUT / "edited_hybrid.png")
    (OUT / "edited_hybrid.json").write_text(json.dumps(hybrid.sidecar, indent=2))
    print(f"hybrid apply ({hybrid.sidecar['extra_text']!r}, "
          f"k grew {instr.k} -> {hybrid.sidecar['instruction_k']}) -> {OUT / 'edited_hybrid.png'}")
    print("sidecar records every knob:", ", ".join(sorted(hybrid.sidecar)))


if __name__ == "__main__":
    main()
