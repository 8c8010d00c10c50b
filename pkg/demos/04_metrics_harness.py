"""Score a small editing benchmark with the metrics harness.

Builds a two-direction manifest on the fly (a red shift and a darkening),
evaluates every test pair, and prints the aggregate similarities from the
report. Artifacts land in demos/out/benchmark/.
"""

import json
from pathlib import Path

from visii.images import save_png
from visii.metrics import evaluate_dataset
from visii.samples import scale_brightness, shift_channel, synthetic_scene

OUT = Path(__file__).parent / "out"


def main() -> None:
    root = OUT / "benchmark"
    root.mkdir(parents=True, exist_ok=True)

    directions = []
    edits = {
        "redden": (lambda img: shift_channel(img, 0, 0.35), "the scene", "the scene in red"),
        "darken": (lambda img: scale_brightness(img, 0.5), "the scene", "the scene at night"),
    }
    for d_idx, (name, (edit, cap_b, cap_a)) in enumerate(edits.items()):
        example = synthetic_scene(10 + d_idx, 64)
        save_png(example, root / f"{name}_ex_before.png")
        save_png(edit(example), root / f"{name}_ex_after.png")
        tests = []
        for t_idx in range(3):
            scene = synthetic_scene(20 + 3 * d_idx + t_idx, 64)
            save_png(scene, root / f"{name}_t{t_idx}_before.png")
            save_png(edit(scene), root / f"{name}_t{t_idx}_after.png")
            tests.append([f"{name}_t{t_idx}_before.png", f"{name}_t{t_idx}_after.png"])
        directions.append(
            {
                "direction_id": name,
                "before_caption": cap_b,
                "after_caption": cap_a,
                "examples": [[f"{name}_ex_before.png", f"{name}_ex_after.png"]],
                "tests": tests,
            }
        )
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps(directions, indent=2))

    report = evaluate_dataset(manifest, root)
    print(f"scored {report['n_records']} test pairs "
          f"({report['n_ok']} ok, {report['n_flagged']} flagged)")
    for metric, mean in report["aggregates"].items():
        print(f"  {metric:16s} mean={mean:+.4f}")
    print(f"full table: {root / 'results.csv'}")
    print(f"report with histograms: {root / 'report.json'}")


if __name__ == "__main__":
    main()
