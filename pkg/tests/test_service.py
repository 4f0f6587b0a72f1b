import json
import time

import pytest
from fastapi.testclient import TestClient

from loopkit import dataset as ds
from loopkit.cli import main as cli_main
from loopkit.service import ProjectStore, create_app


@pytest.fixture(scope="module")
def seq_source(tmp_path_factory):
    """A small rendered sequence on disk, reused across service tests."""
    out = tmp_path_factory.mktemp("source") / "seq"
    assert cli_main([
        "synth", "--out", str(out), "--frames", "5", "--objects", "2",
        "--seed", "3", "--rotation-deg", "1.0", "--scale", "1.0",
        "--jitter", "0.5",
    ]) == 0
    return out


@pytest.fixture
def client(tmp_path):
    app = create_app(tmp_path / "store")
    with TestClient(app) as c:
        yield c


def create_sequence(client, seq_source, seq_id="seq0"):
    manifest = json.loads((seq_source / "manifest.json").read_text())
    manifest["frames"] = [str(seq_source / f) for f in manifest["frames"]]
    r = client.post("/sequences", json={"id": seq_id, "manifest": manifest})
    assert r.status_code == 201
    return seq_id


def wait_for_done(client, seq_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = client.get(f"/sequences/{seq_id}/status").json()
        if status["state"] in ("done", "broken", "error"):
            return status
        time.sleep(0.1)
    raise TimeoutError("propagation did not finish")


class TestSequences:
    def test_create_and_list(self, client, seq_source):
        assert client.get("/sequences").json() == {"sequences": []}
        create_sequence(client, seq_source)
        out = client.get("/sequences").json()["sequences"]
        assert len(out) == 1
        assert out[0]["id"] == "seq0"
        assert out[0]["num_frames"] == 5
        assert out[0]["status"] == {"state": "idle"}

    def test_duplicate_is_409(self, client, seq_source):
        create_sequence(client, seq_source)
        manifest = json.loads((seq_source / "manifest.json").read_text())
        r = client.post("/sequences", json={"id": "seq0", "manifest": manifest})
        assert r.status_code == 409

    def test_bad_payload_is_400(self, client):
        assert client.post("/sequences", json={"id": "x"}).status_code == 400

    def test_frames_served_as_png(self, client, seq_source):
        create_sequence(client, seq_source)
        r = client.get("/sequences/seq0/frames/0")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.content[:8] == b"\x89PNG\r\n\x1a\n"
        assert client.get("/sequences/seq0/frames/99").status_code == 404
        assert client.get("/sequences/nope/frames/0").status_code == 404


class TestAnnotations:
    def test_versioned_write(self, client, seq_source):
        create_sequence(client, seq_source)
        labels = ds.read_labels_jsonl(seq_source / "labels.jsonl")
        objs = [ds.label_to_obj(l) for l in labels[0]]
        r = client.get("/sequences/seq0/annotations/0")
        assert r.json() == {"version": 0, "labels": []}
        r = client.post(
            "/sequences/seq0/annotations/0", json={"version": 0, "labels": objs}
        )
        assert r.status_code == 200
        assert r.json()["version"] == 1
        # stale write is rejected and reports the current version
        r = client.post(
            "/sequences/seq0/annotations/0", json={"version": 0, "labels": objs}
        )
        assert r.status_code == 409
        assert r.json()["detail"]["version"] == 1

    def test_invalid_labels_rejected(self, client, seq_source):
        create_sequence(client, seq_source)
        bad = [{"class_id": 0, "vertices": [[0, 0], [1, 0], [1, 1], [0, 2]],
                "theta_deg": 0.0}]
        r = client.post(
            "/sequences/seq0/annotations/0", json={"version": 0, "labels": bad}
        )
        assert r.status_code == 400


class TestPropagation:
    def test_requires_seed_annotation(self, client, seq_source):
        create_sequence(client, seq_source)
        assert client.post("/sequences/seq0/propagate", json={}).status_code == 400

    def test_full_run_and_export(self, client, seq_source):
        create_sequence(client, seq_source)
        labels = ds.read_labels_jsonl(seq_source / "labels.jsonl")
        objs = [ds.label_to_obj(l) for l in labels[0]]
        client.post("/sequences/seq0/annotations/0", json={"version": 0, "labels": objs})
        r = client.post("/sequences/seq0/propagate", json={"from_frame": 0})
        assert r.status_code == 202
        status = wait_for_done(client, "seq0")
        assert status["state"] == "done"

        text = client.get("/sequences/seq0/labels.jsonl").text
        lines = text.strip().splitlines()
        assert len(lines) == 5
        for i, line in enumerate(lines):
            rec = json.loads(line)
            assert rec["frame"] == i
            assert len(rec["labels"]) == 2

        # propagated boxes track the analytic ground truth
        from loopkit.geometry import polygon_iou

        for i, line in enumerate(lines):
            got = [ds.label_from_obj(r_) for r_ in json.loads(line)["labels"]]
            for g, t in zip(got, labels[i]):
                assert polygon_iou(g.obb, t.obb) > 0.9

    def test_repropagate_from_midpoint_keeps_prefix(self, client, seq_source):
        create_sequence(client, seq_source)
        labels = ds.read_labels_jsonl(seq_source / "labels.jsonl")
        objs0 = [ds.label_to_obj(l) for l in labels[0]]
        client.post("/sequences/seq0/annotations/0", json={"version": 0, "labels": objs0})
        client.post("/sequences/seq0/propagate", json={"from_frame": 0})
        assert wait_for_done(client, "seq0")["state"] == "done"
        before = client.get("/sequences/seq0/labels.jsonl").text.splitlines()

        # correct frame 2 with the exact truth and re-run from there
        objs2 = [ds.label_to_obj(l) for l in labels[2]]
        r = client.post(
            "/sequences/seq0/annotations/2", json={"version": 0, "labels": objs2}
        )
        assert r.status_code == 200
        client.post("/sequences/seq0/propagate", json={"from_frame": 2})
        assert wait_for_done(client, "seq0")["state"] == "done"
        after = client.get("/sequences/seq0/labels.jsonl").text.splitlines()

        # frames before the re-run start are byte-identical
        assert after[0] == before[0]
        assert after[1] == before[1]
        # frame 2 now carries the exact corrected labels
        rec = json.loads(after[2])
        assert rec["labels"] == objs2


class TestProjectStore:
    def test_labels_jsonl_matches_cli_serialization(self, tmp_path, seq_source):
        store = ProjectStore(tmp_path)
        manifest = json.loads((seq_source / "manifest.json").read_text())
        store.create_sequence("s", manifest)
        labels = ds.read_labels_jsonl(seq_source / "labels.jsonl")
        for i, frame in enumerate(labels):
            store.write_frame_labels("s", i, [ds.label_to_obj(l) for l in frame])
        expected = (seq_source / "labels.jsonl").read_text()
        assert store.labels_jsonl("s") == expected

    def test_unknown_sequence(self, tmp_path):
        store = ProjectStore(tmp_path)
        with pytest.raises(KeyError):
            store.sequence_dir("missing")
