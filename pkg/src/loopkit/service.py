"""HTTP service for the annotation UI: sequence management, versioned
per-frame annotations, background label propagation and label export.

A thin adapter over the library modules; all state lives on disk under the
store root, so the service is stateless across restarts (running jobs
excepted).
"""
from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, PlainTextResponse

from . import dataset as ds
from . import propagation as prop

__all__ = ["ProjectStore", "create_app"]


def _atomic_write_text(path: Path, text: str) -> None:
    """Write via a temp file + rename so concurrent readers never see a
    truncated file (status is polled while the propagation thread writes)."""
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


class ProjectStore:
    """On-disk project layout: ``root/sequences/<id>/`` holding
    manifest.json, frame rasters, ``annotations/<i>.json`` (versioned) and
    ``labels/<i>.json`` (propagated ground truth)."""

    def __init__(self, root: Path):
        self.root = Path(root)
        (self.root / "sequences").mkdir(parents=True, exist_ok=True)

    def sequence_dir(self, seq_id: str) -> Path:
        d = self.root / "sequences" / seq_id
        if not (d / "manifest.json").exists():
            raise KeyError(seq_id)
        return d

    def list_sequences(self):
        out = []
        base = self.root / "sequences"
        for d in sorted(base.iterdir()):
            if (d / "manifest.json").exists():
                manifest = ds.load_manifest(d / "manifest.json")
                out.append({"id": d.name, "num_frames": len(manifest["frames"])})
        return out

    def create_sequence(self, seq_id: str, manifest_obj: dict) -> None:
        d = self.root / "sequences" / seq_id
        if (d / "manifest.json").exists():
            raise FileExistsError(seq_id)
        d.mkdir(parents=True, exist_ok=True)
        (d / "manifest.json").write_text(json.dumps(manifest_obj, indent=2) + "\n")

    def manifest(self, seq_id: str) -> dict:
        return ds.load_manifest(self.sequence_dir(seq_id) / "manifest.json")

    def frame_path(self, seq_id: str, index: int) -> Path:
        frames = self.manifest(seq_id)["frames"]
        if not 0 <= index < len(frames):
            raise KeyError(index)
        return Path(frames[index])

    # --- annotations (versioned) ---

    def annotation_path(self, seq_id: str, index: int) -> Path:
        d = self.sequence_dir(seq_id) / "annotations"
        d.mkdir(exist_ok=True)
        return d / f"{index}.json"

    def read_annotation(self, seq_id: str, index: int) -> dict:
        p = self.annotation_path(seq_id, index)
        if not p.exists():
            return {"version": 0, "labels": []}
        return json.loads(p.read_text())

    def write_annotation(self, seq_id: str, index: int, seen_version: int, labels) -> dict:
        current = self.read_annotation(seq_id, index)
        if seen_version != current["version"]:
            raise ValueError("stale version")
        rec = {"version": current["version"] + 1, "labels": labels}
        _atomic_write_text(self.annotation_path(seq_id, index), json.dumps(rec) + "\n")
        return rec

    # --- propagated labels ---

    def labels_path(self, seq_id: str, index: int) -> Path:
        d = self.sequence_dir(seq_id) / "labels"
        d.mkdir(exist_ok=True)
        return d / f"{index}.json"

    def write_frame_labels(self, seq_id: str, index: int, label_objs) -> None:
        _atomic_write_text(
            self.labels_path(seq_id, index),
            json.dumps(label_objs, separators=(",", ":")) + "\n",
        )

    def read_frame_labels(self, seq_id: str, index: int):
        p = self.labels_path(seq_id, index)
        if not p.exists():
            return None
        return json.loads(p.read_text())

    def labels_jsonl(self, seq_id: str) -> str:
        n = len(self.manifest(seq_id)["frames"])
        lines = []
        for i in range(n):
            objs = self.read_frame_labels(seq_id, i)
            lines.append(
                json.dumps({"frame": i, "labels": objs or []}, separators=(",", ":"))
            )
        return "\n".join(lines) + "\n"

    def status_path(self, seq_id: str) -> Path:
        return self.sequence_dir(seq_id) / "status.json"

    def read_status(self, seq_id: str) -> dict:
        p = self.status_path(seq_id)
        if not p.exists():
            return {"state": "idle"}
        return json.loads(p.read_text())

    def write_status(self, seq_id: str, status: dict) -> None:
        _atomic_write_text(self.status_path(seq_id), json.dumps(status) + "\n")


def _run_propagation(store: ProjectStore, seq_id: str, from_frame: int, config: dict, lock):
    try:
        store.write_status(seq_id, {"state": "running", "from_frame": from_frame})
        manifest = store.manifest(seq_id)
        frame_paths = manifest["frames"][from_frame:]
        ann = store.read_annotation(seq_id, from_frame)
        seed = [ds.label_from_obj(rec) for rec in ann["labels"]]
        frames = [ds.load_image(p) for p in frame_paths]
        ransac = prop.RansacConfig(
            iterations=int(config.get("iterations", 1000)),
            inlier_threshold=float(config.get("inlier_threshold", 2.0)),
            seed=int(config.get("seed", 0)),
        )
        result = prop.propagate_labels(
            len(frames),
            seed,
            prop.frame_matching_provider(frames),
            ransac=ransac,
            frame_shape=frames[0].shape[:2],
        )
        with lock:
            for i, labels in enumerate(result.labels):
                store.write_frame_labels(
                    seq_id, from_frame + i, [ds.label_to_obj(l) for l in labels]
                )
            store.write_status(seq_id, {"state": "done", "from_frame": from_frame})
    except prop.PropagationBroken as exc:
        with lock:
            for i, labels in enumerate(exc.partial.labels):
                store.write_frame_labels(
                    seq_id, from_frame + i, [ds.label_to_obj(l) for l in labels]
                )
            store.write_status(
                seq_id,
                {
                    "state": "broken",
                    "from_frame": from_frame,
                    "broken_at": from_frame + exc.index + 1,
                    "error": str(exc),
                },
            )
    except Exception as exc:
        store.write_status(
            seq_id, {"state": "error", "from_frame": from_frame, "error": str(exc)}
        )


def create_app(root) -> FastAPI:
    store = ProjectStore(Path(root))
    app = FastAPI(title="loopkit annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    jobs: dict = {}
    jobs_lock = threading.Lock()
    seq_locks: dict = {}

    def seq_lock(seq_id: str) -> threading.Lock:
        with jobs_lock:
            return seq_locks.setdefault(seq_id, threading.Lock())

    def get_dir_or_404(seq_id: str):
        try:
            return store.sequence_dir(seq_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown sequence {seq_id!r}")

    @app.get("/sequences")
    def list_sequences():
        out = store.list_sequences()
        for rec in out:
            rec["status"] = store.read_status(rec["id"])
        return {"sequences": out}

    @app.post("/sequences", status_code=201)
    def create_sequence(payload: dict):
        seq_id = payload.get("id")
        manifest = payload.get("manifest")
        if not seq_id or not isinstance(manifest, dict) or "frames" not in manifest:
            raise HTTPException(status_code=400, detail="need id and manifest.frames")
        try:
            store.create_sequence(str(seq_id), manifest)
        except FileExistsError:
            raise HTTPException(status_code=409, detail=f"sequence {seq_id!r} exists")
        return {"id": seq_id}

    @app.get("/sequences/{seq_id}/frames/{index}")
    def get_frame(seq_id: str, index: int):
        get_dir_or_404(seq_id)
        try:
            path = store.frame_path(seq_id, index)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no frame {index}")
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"missing raster {path.name}")
        return FileResponse(path, media_type="image/png")

    @app.get("/sequences/{seq_id}/annotations/{index}")
    def get_annotation(seq_id: str, index: int):
        get_dir_or_404(seq_id)
        return store.read_annotation(seq_id, index)

    @app.post("/sequences/{seq_id}/annotations/{index}")
    def post_annotation(seq_id: str, index: int, payload: dict):
        get_dir_or_404(seq_id)
        if "version" not in payload or "labels" not in payload:
            raise HTTPException(status_code=400, detail="need version and labels")
        # client-side shapes must already be valid rectangles
        try:
            for rec in payload["labels"]:
                ds.label_from_obj(rec)
        except Exception as exc:
            raise HTTPException(status_code=400, detail=f"bad label: {exc}")
        with seq_lock(seq_id):
            try:
                rec = store.write_annotation(
                    seq_id, index, int(payload["version"]), payload["labels"]
                )
            except ValueError:
                current = store.read_annotation(seq_id, index)
                raise HTTPException(
                    status_code=409,
                    detail={"message": "stale version", "version": current["version"]},
                )
        return rec

    @app.post("/sequences/{seq_id}/propagate", status_code=202)
    def propagate(seq_id: str, payload: dict | None = None):
        get_dir_or_404(seq_id)
        payload = payload or {}
        from_frame = int(payload.get("from_frame", 0))
        config = payload.get("config", {}) or {}
        ann = store.read_annotation(seq_id, from_frame)
        if not ann["labels"]:
            raise HTTPException(
                status_code=400, detail=f"no annotation at frame {from_frame}"
            )
        lock = seq_lock(seq_id)
        with jobs_lock:
            job = jobs.get(seq_id)
            if job is not None and job.is_alive():
                raise HTTPException(status_code=409, detail="propagation already running")
            store.write_status(seq_id, {"state": "queued", "from_frame": from_frame})
            t = threading.Thread(
                target=_run_propagation,
                args=(store, seq_id, from_frame, config, lock),
                daemon=True,
            )
            jobs[seq_id] = t
            t.start()
        return {"state": "queued", "from_frame": from_frame}

    @app.get("/sequences/{seq_id}/status")
    def status(seq_id: str):
        get_dir_or_404(seq_id)
        return store.read_status(seq_id)

    @app.get("/sequences/{seq_id}/labels.jsonl")
    def labels_jsonl(seq_id: str):
        get_dir_or_404(seq_id)
        return PlainTextResponse(store.labels_jsonl(seq_id))

    return app
