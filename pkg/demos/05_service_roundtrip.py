"""Drive the HTTP API end to end, in process.

Uses the test client so no port is opened: post an inversion job, poll its
loss tail, download the learned instruction, then run an apply job and save
the returned image. `visii serve` exposes the same API over a real socket.
"""

import json
import time
from pathlib import Path

from fastapi.testclient import TestClient

from visii.images import png_bytes
from visii.samples import shift_channel, synthetic_scene
from visii.service import create_app

OUT = Path(__file__).parent / "out"


def wait(client: TestClient, url: str) -> dict:
    while True:
        body = client.get(url).json()
        if body["state"] in ("done", "failed"):
            return body
        time.sleep(0.05)


def main() -> None:
    OUT.mkdir(exist_ok=True)
    store = OUT / "store"
    app = create_app(store_dir=store)

    with TestClient(app) as client:
        health = client.get("/health").json()
        print(f"service up, backend {health['model_id']}")

        scene = synthetic_scene(5, 64)
        resp = client.post(
            "/inversions",
            files=[
                ("before", ("before.png", png_bytes(scene), "image/png")),
                ("after", ("after.png", png_bytes(shift_channel(scene, 0, 0.4)), "image/png")),
            ],
            data={"config": json.dumps({"n_steps": 120, "init_text": "make it red"})},
        )
        job_id = resp.json()["job_id"]
        print(f"inversion job {job_id} accepted (202)")

        body = wait(client, f"/inversions/{job_id}")
        tail = body["loss"][-1]
        print(f"done after {body['progress']['completed']} steps; "
              f"last loss total={tail['total']:.4f}")

        iid = body["instruction_id"]
        blob = client.get(f"/instructions/{iid}/file").content
        (OUT / "from_service.visii").write_bytes(blob)
        print(f"downloaded instruction {iid} ({len(blob)} bytes)")

        resp = client.post(
            "/apply",
            files={"image": ("scene.png", png_bytes(synthetic_scene(42, 64)), "image/png")},
            data={
                "instruction_id": iid,
                "extra_text": "and much darker",
                "guidance": json.dumps({"sampler_steps": 50}),
            },
        )
        body = wait(client, f"/jobs/{resp.json()['job_id']}")
        image = client.get(f"/jobs/{body['id']}/image").content
        (OUT / "service_edited.png").write_bytes(image)
        print(f"apply job done; sidecar noise_mode={body['sidecar']['noise_mode']}, "
              f"wrote {OUT / 'service_edited.png'}")


if __name__ == "__main__":
    main()
