"""HTTP job API over the library.

One worker thread drains a FIFO queue against one backend instance, so at
most one optimization or edit runs at a time and HTTP handlers stay cheap.
The store directory is the source of truth for instructions: a restart
rebuilds the listing by scanning *.visii files.
"""

from __future__ import annotations

import dataclasses
import json
import os
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Form, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse

from .backend import load_backend
from .editor import GuidanceConfig, apply_instruction
from .errors import DataError, TokenOverflowError, UsageError, VisiiError
from .images import center_crop_resize, decode_image_bytes, save_png
from .instruction import InstructionEmbedding, concat_user_text
from .inversion import ImagePair, InversionConfig, LossBreakdown, checkpoint, invert

MAX_UPLOAD_BYTES = 16 * 1024 * 1024
LOSS_TAIL = 50


@dataclass
class Job:
    id: str
    kind: str                      # invert | apply
    state: str = "queued"          # queued -> running -> done | failed
    completed: int = 0
    total: int = 0
    loss_tail: list = field(default_factory=list)
    result_path: str = ""
    sidecar: dict | None = None
    error: str = ""
    created: float = field(default_factory=time.time)
    config: dict = field(default_factory=dict)
    instruction_id: str = ""
    payload: dict = field(default_factory=dict)   # worker inputs, not serialized


def _config_from(cls, data: dict, label: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise UsageError(f"unknown {label} keys: {sorted(unknown)}")
    try:
        return cls(**data).validate()
    except TypeError as exc:
        raise UsageError(f"bad {label}: {exc}") from exc


def _json_error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


class _Store:
    """Instruction files on disk plus an id -> path index."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def rescan(self) -> dict[str, Path]:
        return {p.stem: p for p in sorted(self.root.glob("*.visii"))}

    def path_for(self, instruction_id: str) -> Path | None:
        p = self.root / f"{instruction_id}.visii"
        return p if p.is_file() else None

    def listing(self) -> list[dict]:
        out = []
        for iid, path in self.rescan().items():
            try:
                instr = InstructionEmbedding.load(path)
            except VisiiError:
                continue  # foreign or corrupt file; not ours to list
            out.append(
                {
                    "id": iid,
                    "k": instr.k,
                    "model_id": instr.model_id,
                    "created": path.stat().st_mtime,
                }
            )
        return out


def create_app(store_dir: str | os.PathLike, config_path: str | None = None) -> FastAPI:
    backend = load_backend(config_path=config_path)
    store = _Store(store_dir)
    jobs: dict[str, Job] = {}
    jobs_lock = threading.Lock()
    work: "queue.Queue[str]" = queue.Queue()
    worker_started = threading.Event()

    def _run_invert(job: Job) -> None:
        pairs = job.payload["pairs"]
        config = job.payload["config"]

        def on_step(entry: LossBreakdown) -> None:
            with jobs_lock:
                job.completed = entry.step + 1
                job.loss_tail.append(
                    {
                        "step": entry.step,
                        "t": entry.t,
                        "total": entry.total,
                        "mse": entry.mse,
                        "clip": entry.clip,
                    }
                )
                del job.loss_tail[:-LOSS_TAIL]

        instr, history = invert(pairs, config, backend, on_step=on_step)
        out = store.root / f"{job.instruction_id}.visii"
        checkpoint(instr, history, out)
        with jobs_lock:
            job.result_path = str(out)

    def _run_apply(job: Job) -> None:
        instr = InstructionEmbedding.load(job.payload["instruction_path"])
        guidance = job.payload["guidance"]
        result = apply_instruction(
            backend,
            instr,
            job.payload["image"],
            guidance,
            extra_text=job.payload["extra_text"],
            instruction_ref=job.instruction_id,
        )
        out = store.root / f"result-{job.id}.png"
        tmp = out.with_suffix(".png.tmp")
        save_png(result.image, tmp)
        os.replace(tmp, out)
        with jobs_lock:
            job.result_path = str(out)
            job.sidecar = result.sidecar
            job.completed = job.total

    def _worker() -> None:
        runners = {"invert": _run_invert, "apply": _run_apply}
        while True:
            job_id = work.get()
            with jobs_lock:
                job = jobs[job_id]
                job.state = "running"
            try:
                runners[job.kind](job)
            except Exception as exc:  # job failure must not kill the worker
                with jobs_lock:
                    job.state = "failed"
                    job.error = str(exc)
            else:
                with jobs_lock:
                    job.state = "done"

    def _ensure_worker() -> None:
        if not worker_started.is_set():
            worker_started.set()
            threading.Thread(target=_worker, daemon=True, name="visii-worker").start()

    def _enqueue(job: Job) -> JSONResponse:
        with jobs_lock:
            jobs[job.id] = job
        _ensure_worker()
        work.put(job.id)
        return JSONResponse(status_code=202, content={"job_id": job.id})

    class _Oversize(Exception):
        def __init__(self, name: str):
            self.name = name

    def _read_upload(upload: UploadFile) -> bytes:
        data = upload.file.read(MAX_UPLOAD_BYTES + 1)
        if len(data) > MAX_UPLOAD_BYTES:
            raise _Oversize(upload.filename or "upload")
        return data

    def _job_json(job: Job) -> dict:
        body = {
            "id": job.id,
            "kind": job.kind,
            "state": job.state,
            "progress": {"completed": job.completed, "total": job.total},
            "created": job.created,
            "error": job.error or None,
        }
        if job.kind == "invert":
            body["config"] = job.config
            body["loss"] = list(job.loss_tail)
            if job.state == "done":
                body["instruction_id"] = job.instruction_id
                body["instruction_url"] = f"/instructions/{job.instruction_id}/file"
        else:
            body["instruction_id"] = job.instruction_id
            if job.state == "done":
                body["image_url"] = f"/jobs/{job.id}/image"
                body["sidecar"] = job.sidecar
        return body

    app = FastAPI(title="visii", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    def _bad_request(request, exc):
        return _json_error(400, f"invalid request: {exc.errors()[0].get('msg', 'validation failed')}")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "model_id": backend.model_id}

    @app.post("/inversions")
    def post_inversions(
        before: list[UploadFile],
        after: list[UploadFile],
        config: str = Form("{}"),
    ):
        if len(before) != len(after):
            return _json_error(400, f"{len(before)} before files but {len(after)} after files")
        if not before:
            return _json_error(400, "need at least one before/after pair")
        try:
            raw = json.loads(config)
            if not isinstance(raw, dict):
                raise UsageError("config must be a JSON object")
            raw.setdefault("init_text", "edit the image")
            raw.setdefault("n_timesteps", backend.timesteps)
            inv_config = _config_from(InversionConfig, raw, "inversion config")
            pairs = []
            for i, (b, a) in enumerate(zip(before, after)):
                img_b = center_crop_resize(decode_image_bytes(_read_upload(b)), backend.config.native_size)
                img_a = center_crop_resize(decode_image_bytes(_read_upload(a)), backend.config.native_size)
                pairs.append(ImagePair(img_b, img_a, ident=f"pair-{i}"))
        except _Oversize as exc:
            return _json_error(413, f"{exc.name} exceeds the {MAX_UPLOAD_BYTES // (1024 * 1024)} MiB upload cap")
        except json.JSONDecodeError as exc:
            return _json_error(400, f"config is not valid JSON: {exc}")
        except VisiiError as exc:
            return _json_error(400, str(exc))
        job = Job(
            id=str(uuid.uuid4()),
            kind="invert",
            total=inv_config.n_steps,
            config=dataclasses.asdict(inv_config),
            instruction_id=str(uuid.uuid4()),
            payload={"pairs": pairs, "config": inv_config},
        )
        return _enqueue(job)

    @app.get("/inversions/{job_id}")
    def get_inversion(job_id: str):
        with jobs_lock:
            job = jobs.get(job_id)
            if job is None or job.kind != "invert":
                return _json_error(404, "unknown inversion job")
            return _job_json(job)

    @app.post("/apply")
    def post_apply(
        image: UploadFile,
        instruction_id: str = Form(...),
        extra_text: str = Form(""),
        guidance: str = Form("{}"),
    ):
        path = store.path_for(instruction_id)
        if path is None:
            return _json_error(404, f"unknown instruction {instruction_id!r}")
        try:
            raw = json.loads(guidance)
            if not isinstance(raw, dict):
                raise UsageError("guidance must be a JSON object")
            g_config = _config_from(GuidanceConfig, raw, "guidance config")
            instr = InstructionEmbedding.load(path)
            if extra_text.strip():
                concat_user_text(backend, instr, extra_text)  # overflow check up front
            img = center_crop_resize(decode_image_bytes(_read_upload(image)), backend.config.native_size)
        except _Oversize as exc:
            return _json_error(413, f"{exc.name} exceeds the {MAX_UPLOAD_BYTES // (1024 * 1024)} MiB upload cap")
        except json.JSONDecodeError as exc:
            return _json_error(400, f"guidance is not valid JSON: {exc}")
        except TokenOverflowError as exc:
            return _json_error(400, str(exc))
        except VisiiError as exc:
            return _json_error(400, str(exc))
        job = Job(
            id=str(uuid.uuid4()),
            kind="apply",
            total=1,
            instruction_id=instruction_id,
            config=dataclasses.asdict(g_config),
            payload={
                "instruction_path": str(path),
                "image": img,
                "extra_text": extra_text,
                "guidance": g_config,
            },
        )
        return _enqueue(job)

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        with jobs_lock:
            job = jobs.get(job_id)
            if job is None:
                return _json_error(404, "unknown job")
            return _job_json(job)

    @app.get("/jobs/{job_id}/image")
    def get_job_image(job_id: str):
        with jobs_lock:
            job = jobs.get(job_id)
            if job is None or job.kind != "apply":
                return _json_error(404, "unknown apply job")
            if job.state != "done":
                return _json_error(404, f"job is {job.state}, no image yet")
            path = job.result_path
        return FileResponse(path, media_type="image/png")

    @app.get("/jobs/{job_id}/sidecar")
    def get_job_sidecar(job_id: str):
        with jobs_lock:
            job = jobs.get(job_id)
            if job is None or job.kind != "apply" or job.state != "done":
                return _json_error(404, "no sidecar for this job")
            return job.sidecar

    @app.get("/instructions")
    def get_instructions() -> list[dict]:
        return store.listing()

    @app.get("/instructions/{instruction_id}/file")
    def get_instruction_file(instruction_id: str):
        path = store.path_for(instruction_id)
        if path is None:
            return _json_error(404, f"unknown instruction {instruction_id!r}")
        return FileResponse(path, media_type="application/octet-stream", filename=path.name)

    return app
