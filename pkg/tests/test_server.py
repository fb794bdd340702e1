import numpy as np
import pytest
from fastapi.testclient import TestClient

from scriptorium.corpus import make_demo_glyph_set, synthesize_line
from scriptorium.raster import BinaryImage, save_pgm
from scriptorium.segmentation import SegParams
from scriptorium.server import create_app


@pytest.fixture()
def client(tmp_path):
    gs = make_demo_glyph_set(4)
    img, _ = synthesize_line(gs, [1, 2, gs.space_id, 3], seed=1)
    canvas = np.zeros((40, 64), dtype=bool)
    canvas[5 : 5 + img.height, 4 : 4 + img.width] = img.foreground
    canvas[30, 50] = True  # a dot
    save_pgm(tmp_path / "sample.pgm", BinaryImage(canvas))
    app = create_app(tmp_path, SegParams())
    return TestClient(app)


def test_health(client):
    r = client.get("/api/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_images_and_png(client):
    imgs = client.get("/api/images").json()
    assert imgs == [{"id": "sample", "width": 64, "height": 40}]
    r = client.get("/api/image/sample")
    assert r.status_code == 200
    assert r.headers["content-type"] == "image/png"
    assert r.content.startswith(b"\x89PNG")
    assert client.get("/api/image/ghost").status_code == 404


def test_segment_endpoint(client):
    r = client.post("/api/segment", json={"image_id": "sample", "params": {}})
    assert r.status_code == 200
    doc = r.json()
    assert doc["width"] == 64 and doc["height"] == 40
    assert len(doc["lines"]) == 1


def test_segment_param_validation(client):
    r = client.post("/api/segment", json={"image_id": "sample",
                                          "params": {"line_gap": -2}})
    assert r.status_code == 400
    assert "line_gap" in r.json()["errors"]
    r = client.post("/api/segment", json={"params": {}})
    assert r.status_code == 400
    assert "image_id" in r.json()["errors"]


def test_segment_responses_are_stable(client):
    a = client.post("/api/segment", json={"image_id": "sample", "params": {}})
    b = client.post("/api/segment", json={"image_id": "sample", "params": {}})
    assert a.content == b.content


def test_overlay(client):
    r = client.get("/api/overlay/sample")
    assert r.status_code == 200
    assert r.content.startswith(b"\x89PNG")
    # at small_blob_area=1 the dot becomes a core blob with its own line
    r2 = client.get("/api/overlay/sample", params={"small_blob_area": 1})
    assert r2.status_code == 200
    assert r2.content != r.content
    r = client.get("/api/overlay/sample", params={"line_gap": -5})
    assert r.status_code == 400


def test_params_roundtrip(client):
    before = client.get("/api/params").json()
    assert before == SegParams().to_dict()
    doc = {"connectivity": 4, "small_blob_area": 9, "line_gap": 17, "reading_order": "rtl"}
    r = client.put("/api/params", json=doc)
    assert r.status_code == 200
    assert client.get("/api/params").json() == doc
    r = client.put("/api/params", json={"connectivity": 5})
    assert r.status_code == 400
    assert client.get("/api/params").json() == doc  # rejected put left state alone


def test_segment_uses_current_params_as_defaults(client):
    client.put("/api/params", json={"connectivity": 8, "small_blob_area": 2,
                                    "line_gap": 12, "reading_order": "ltr"})
    r = client.post("/api/segment", json={"image_id": "sample", "params": {}})
    assert r.json()["params"]["small_blob_area"] == 2
    r = client.post("/api/segment", json={"image_id": "sample",
                                          "params": {"small_blob_area": 50}})
    assert r.json()["params"]["small_blob_area"] == 50
