import json

import pytest
from fastapi.testclient import TestClient

from conftest import narrative_line
from tracekit import __version__
from tracekit.main import app

client = TestClient(app)


def test_root():
    assert client.get("/").json() == {"status": "ok", "app": "tracekit", "version": __version__}


class TestSimplifyEndpoint:
    def test_simplifies_a_record(self):
        record = json.loads(narrative_line("img-7", n_points=40))
        resp = client.post("/api/simplify", json=record)
        assert resp.status_code == 200
        body = resp.json()
        assert body["image_id"] == "img-7"
        assert body["report"]["input_points"] == 40
        assert len(body["trace"]) == body["report"]["output_points"]

    def test_bad_record_is_unprocessable(self):
        record = json.loads(narrative_line())
        record["traces"] = []
        resp = client.post("/api/simplify", json=record)
        assert resp.status_code == 422


class TestTokenEndpoints:
    def test_tokenize(self):
        resp = client.post(
            "/api/tokenize",
            json={"points": [[0, 0], [599.9, 799.9]], "image_width": 600, "image_height": 800},
        )
        assert resp.json() == {"tokens": "<traj>(0,0),(999,999)</traj>"}

    def test_zero_size_rejected(self):
        resp = client.post("/api/tokenize", json={"points": [[1, 1]], "image_width": 0, "image_height": 10})
        assert resp.status_code == 422

    def test_parse(self):
        resp = client.post("/api/parse", json={"text": "<Trajectory>(12,40), (13,41) </Trajectory>"})
        assert resp.json() == {"coords": [[12, 40], [13, 41]]}

    def test_parse_error_reports_offset(self):
        resp = client.post("/api/parse", json={"text": "<traj>(1,2"})
        assert resp.status_code == 422
        assert resp.json()["detail"].startswith("TrajSyntaxError")


class TestLbmEndpoint:
    def test_translated_trace(self):
        gt = [[100.0 + 10 * i, 200.0] for i in range(5)]
        pred = [[x + 3.0, y + 4.0] for x, y in gt]
        resp = client.post("/api/lbm", json={"pred": pred, "gt": gt, "image_width": 600, "image_height": 800})
        body = resp.json()
        assert body["scores"]["lbm_k0"] == pytest.approx(5.0 / 1000.0)
        assert body["scores"]["lbm_k1"] == pytest.approx(5.0 / 1000.0)
        assert body["definition"] == "lbm-v1"

    def test_empty_prediction(self):
        resp = client.post("/api/lbm", json={"pred": [], "gt": [[1, 1]], "image_width": 10, "image_height": 10})
        assert resp.status_code == 422
