"""Evaluation scores and the dataset-level harness.

Three scores, all cosines in embedding space:

  * image similarity: how much of the input survived the edit,
  * directional similarity: does the image-space change move the same way
    as the caption-space change,
  * visual similarity: does the test pair's change move the same way as the
    example pair's change.

The harness walks a manifest of editing directions, scores every test pair,
and writes a per-record CSV plus an aggregate report with 20-bin histograms.
Degenerate records are flagged and the run continues.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import torch

from .backend import BackendConfig, EditorBackend, load_backend
from .errors import DataError, DegenerateDirectionError, VisiiError
from .images import load_image

_EPS = 1e-8


def _cos(a: torch.Tensor, b: torch.Tensor) -> float:
    a64, b64 = a.to(torch.float64), b.to(torch.float64)
    denom = a64.norm() * b64.norm()
    if denom < _EPS:
        raise DegenerateDirectionError("cosine of a zero vector is undefined")
    return float(a64 @ b64 / denom)


def image_clip_similarity(backend: EditorBackend, input_image, edited_image) -> float:
    return _cos(backend.embed_image(input_image).values, backend.embed_image(edited_image).values)


def directional_clip_similarity(
    backend: EditorBackend,
    before_img,
    after_img,
    before_caption: str,
    after_caption: str,
) -> float:
    """Alignment of the image-space change with the caption-space change.

    A zero caption delta is an error; a zero image delta returns 0 by
    convention (the caller is expected to flag it).
    """
    d_txt = (
        backend.embed_text(after_caption).values - backend.embed_text(before_caption).values
    )
    if d_txt.to(torch.float64).norm() < _EPS:
        raise DegenerateDirectionError("captions embed identically; text delta is zero")
    d_img = backend.embed_image(after_img).values - backend.embed_image(before_img).values
    if d_img.to(torch.float64).norm() < _EPS:
        return 0.0
    return _cos(d_img, d_txt)


def visual_clip_similarity(backend: EditorBackend, example_pair, test_pair) -> float:
    """Cosine between the example pair's image delta and the test pair's."""
    d_ex = (
        backend.embed_image(example_pair[1]).values - backend.embed_image(example_pair[0]).values
    )
    d_te = backend.embed_image(test_pair[1]).values - backend.embed_image(test_pair[0]).values
    return _cos(d_ex, d_te)


# --- dataset harness --------------------------------------------------------


@dataclass
class EvalRecord:
    direction_id: str
    test_id: int
    image_sim: float | None
    directional_sim: float | None
    visual_sim: float | None
    status: str


def load_manifest(path: str | os.PathLike) -> list[dict]:
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise DataError("manifest must be a JSON array of directions")
    if not raw:
        raise DataError("no directions in manifest")
    root = os.path.dirname(os.path.abspath(path))
    directions = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise DataError(f"direction #{i} is not an object")
        did = entry.get("direction_id")
        if not isinstance(did, str) or not did:
            raise DataError(f"direction #{i} lacks a direction_id")
        examples = entry.get("examples")
        tests = entry.get("tests")
        for name, pairs in (("examples", examples), ("tests", tests)):
            if not isinstance(pairs, list) or not pairs:
                raise DataError(f"direction {did!r}: {name} must be a non-empty array")
            for pair in pairs:
                if not isinstance(pair, list) or len(pair) != 2:
                    raise DataError(f"direction {did!r}: each {name} entry must be [before, after]")
        directions.append(
            {
                "direction_id": did,
                "examples": [[os.path.join(root, p) for p in pair] for pair in examples],
                "tests": [[os.path.join(root, p) for p in pair] for pair in tests],
                "before_caption": entry.get("before_caption", ""),
                "after_caption": entry.get("after_caption", ""),
            }
        )
    return directions


def _score_record(backend: EditorBackend, direction: dict, test_idx: int) -> EvalRecord:
    did = direction["direction_id"]
    reasons: list[str] = []
    image_sim = directional_sim = visual_sim = None
    try:
        before = load_image(direction["tests"][test_idx][0])
        after = load_image(direction["tests"][test_idx][1])
        e_before = backend.embed_image(before).values
        e_after = backend.embed_image(after).values
        image_sim = _cos(e_before, e_after)
        d_test = e_after - e_before
        degenerate_test = bool(d_test.to(torch.float64).norm() < _EPS)

        bc, ac = direction["before_caption"], direction["after_caption"]
        if not bc.strip() or not ac.strip():
            reasons.append("no_captions")
        elif degenerate_test:
            directional_sim = 0.0
            reasons.append("zero_image_delta")
        else:
            try:
                directional_sim = directional_clip_similarity(backend, before, after, bc, ac)
            except DegenerateDirectionError:
                reasons.append("zero_text_delta")

        if degenerate_test:
            visual_sim = 0.0
            if "zero_image_delta" not in reasons:
                reasons.append("zero_image_delta")
        else:
            sims = []
            for ex in direction["examples"]:
                ex_before, ex_after = load_image(ex[0]), load_image(ex[1])
                try:
                    sims.append(visual_clip_similarity(backend, (ex_before, ex_after), (before, after)))
                except DegenerateDirectionError:
                    pass
            if sims:
                visual_sim = float(np.mean(sims))
            else:
                reasons.append("degenerate_examples")
    except (VisiiError, OSError) as exc:
        reasons.append(f"error:{exc}")
    status = "ok" if not reasons else ";".join(reasons)
    return EvalRecord(did, test_idx, image_sim, directional_sim, visual_sim, status)


_WORKER_BACKEND: EditorBackend | None = None


def _init_worker(config: BackendConfig) -> None:
    global _WORKER_BACKEND
    _WORKER_BACKEND = load_backend(config)


def _pool_score(payload: tuple[dict, int]) -> EvalRecord:
    direction, test_idx = payload
    assert _WORKER_BACKEND is not None
    return _score_record(_WORKER_BACKEND, direction, test_idx)


def _histogram(values: list[float]) -> dict:
    if not values:
        return {"bin_edges": [], "counts": []}
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=20)
    return {"bin_edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def evaluate_dataset(
    manifest_path: str | os.PathLike,
    output_dir: str | os.PathLike,
    backend: EditorBackend | None = None,
    config: BackendConfig | None = None,
    workers: int = 1,
) -> dict:
    """Score every test pair in the manifest; write results.csv and report.json."""
    directions = load_manifest(manifest_path)
    jobs = [(d, i) for d in directions for i in range(len(d["tests"]))]

    if workers > 1:
        cfg = config or (backend.config if backend is not None else BackendConfig())
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(cfg,)) as pool:
            records = list(pool.map(_pool_score, jobs))
    else:
        be = backend if backend is not None else load_backend(config)
        records = [_score_record(be, d, i) for d, i in jobs]

    records.sort(key=lambda r: (r.direction_id, r.test_id))
    os.makedirs(output_dir, exist_ok=True)
    csv_path = os.path.join(os.fspath(output_dir), "results.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["direction_id", "test_id", "image_sim", "directional_sim", "visual_sim", "status"])
        for r in records:
            writer.writerow(
                [
                    r.direction_id,
                    r.test_id,
                    "" if r.image_sim is None else repr(r.image_sim),
                    "" if r.directional_sim is None else repr(r.directional_sim),
                    "" if r.visual_sim is None else repr(r.visual_sim),
                    r.status,
                ]
            )

    report = {
        "n_records": len(records),
        "n_ok": sum(1 for r in records if r.status == "ok"),
        "n_flagged": sum(1 for r in records if r.status != "ok"),
        "aggregates": {},
        "histograms": {},
    }
    for name in ("image_sim", "directional_sim", "visual_sim"):
        values = [getattr(r, name) for r in records if getattr(r, name) is not None]
        report["aggregates"][name] = float(np.mean(values)) if values else None
        report["histograms"][name] = _histogram(values)
    with open(os.path.join(os.fspath(output_dir), "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    return report
