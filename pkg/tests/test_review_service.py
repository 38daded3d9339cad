import json
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from ecgproto.errors import ConfigurationError
from ecgproto.prototypes import PrototypeKind, make_bank
from ecgproto.records import records_by_id
from ecgproto.review_service import create_app, prototype_table, summarize


@pytest.fixture()
def service(mini_pipeline, tmp_path):
    split, tax, fused = mini_pipeline
    app = create_app(fused.banks(), records_by_id(split), tmp_path / "log.ndjson",
                     render_dir=tmp_path / "renders")
    return TestClient(app), app, tmp_path / "log.ndjson"


def submit(client, reviewer, proto, rep, clarity, excluded=False):
    return client.post("/ratings", json={
        "reviewer_id": reviewer, "prototype_id": proto,
        "representativeness": rep, "clarity": clarity, "excluded": excluded,
    })


class TestListing:
    def test_every_prototype_listed_once(self, service):
        client, app, _ = service
        total = len(app.state.table)
        seen = []
        page = 0
        while True:
            data = client.get(f"/prototypes?page={page}&page_size=7").json()
            assert data["total"] == total
            if not data["items"]:
                break
            seen.extend(item["prototype_id"] for item in data["items"])
            page += 1
        assert seen == list(range(total))

    def test_listing_is_blinded(self, service):
        client, _, _ = service
        item = client.get("/prototypes").json()["items"][0]
        assert set(item) == {"prototype_id", "class_code", "kind", "render_url"}

    def test_stable_ordering(self, service):
        client, _, _ = service
        a = client.get("/prototypes").json()["items"]
        b = client.get("/prototypes").json()["items"]
        assert a == b

    def test_render_endpoint_serves_svg(self, service):
        client, _, _ = service
        resp = client.get("/prototypes/0/render")
        assert resp.status_code == 200
        assert resp.headers["content-type"].startswith("image/svg+xml")
        assert resp.content.startswith(b"<?xml")

    def test_render_unknown_prototype(self, service):
        client, _, _ = service
        assert client.get("/prototypes/999999/render").status_code == 404

    def test_unprojected_bank_refused_at_startup(self, mini_pipeline, tmp_path):
        bank = make_bank(PrototypeKind.GLOBAL_1D, ["a"], 2, seed=0)
        with pytest.raises(ConfigurationError):
            prototype_table([bank])


class TestRatings:
    def test_round_trip(self, service):
        client, _, log = service
        assert submit(client, "rev1", 0, 4, 5).status_code == 200
        events = [json.loads(line) for line in log.read_text().splitlines()]
        assert events[-1]["representativeness"] == 4
        assert events[-1]["clarity"] == 5

    def test_out_of_range_rejected(self, service):
        client, _, _ = service
        assert submit(client, "rev1", 0, 6, 3).status_code == 422
        assert submit(client, "rev1", 0, 0, 3).status_code == 422

    def test_unknown_prototype_rejected(self, service):
        client, _, _ = service
        assert submit(client, "rev1", 10_000, 3, 3).status_code == 404

    def test_scores_required_unless_excluding(self, service):
        client, _, _ = service
        resp = client.post("/ratings", json={"reviewer_id": "r", "prototype_id": 0})
        assert resp.status_code == 422
        resp = client.post("/ratings", json={
            "reviewer_id": "r", "prototype_id": 0, "excluded": True,
        })
        assert resp.status_code == 200

    def test_resubmission_latest_wins(self, service):
        client, _, _ = service
        submit(client, "rev1", 0, 2, 2)
        submit(client, "rev1", 0, 5, 4)
        rows = client.get("/summary").json()["rows"]
        rep = next(r for r in rows if r["reviewer"] == "rev1"
                   and r["criterion"] == "representativeness")
        assert rep["n"] == 1
        assert rep["mean"] == 5.0


class TestSummary:
    def test_mean_and_ci_for_three_ratings(self, service):
        client, _, log = service
        for proto, (rep, cl) in enumerate([(4, 4), (4, 4), (5, 5)]):
            submit(client, "rev1", proto, rep, cl)
        rows = client.get("/summary").json()["rows"]
        rep = next(r for r in rows if r["criterion"] == "representativeness")
        assert rep["n"] == 3
        assert rep["mean"] == pytest.approx(13 / 3, abs=1e-9)
        # documented CI: mean +- 1.96 s / sqrt(n)
        s = np.std([4, 4, 5], ddof=1)
        half = 1.96 * s / np.sqrt(3)
        assert rep["ci"][0] == pytest.approx(13 / 3 - half, abs=1e-9)
        assert rep["ci"][1] == pytest.approx(13 / 3 + half, abs=1e-9)
        # brute-force recomputation from the raw log agrees
        events = [json.loads(line) for line in log.read_text().splitlines()]
        assert summarize(events) == rows

    def test_zero_variance_collapses_to_point(self, service):
        client, _, _ = service
        for proto in range(3):
            submit(client, "rev1", proto, 4, 3)
        rows = client.get("/summary").json()["rows"]
        rep = next(r for r in rows if r["criterion"] == "representativeness")
        assert rep["ci"] == [4.0, 4.0]

    def test_excluded_prototypes_leave_denominators(self, service):
        client, _, _ = service
        submit(client, "rev1", 0, 1, 1)
        submit(client, "rev1", 1, 5, 5)
        submit(client, "rev2", 0, 2, 2)
        client.post("/prototypes/0/exclude", json={"reviewer_id": "rev2"})
        rows = client.get("/summary").json()["rows"]
        rep1 = next(r for r in rows if r["reviewer"] == "rev1"
                    and r["criterion"] == "representativeness")
        assert rep1["n"] == 1  # prototype 0 excluded globally
        assert rep1["mean"] == 5.0
        assert not any(r["reviewer"] == "rev2" for r in rows)

    def test_empty_summary(self, service):
        client, _, _ = service
        assert client.get("/summary").json()["rows"] == []


class TestConcurrency:
    def test_no_write_loss_two_reviewers(self, service):
        client, _, log = service
        n_each = 100

        def hammer(reviewer):
            for i in range(n_each):
                resp = submit(client, reviewer, i % 8, (i % 5) + 1, ((i + 2) % 5) + 1)
                assert resp.status_code == 200

        threads = [threading.Thread(target=hammer, args=(f"rev{k}",)) for k in (1, 2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        lines = log.read_text().splitlines()
        assert len(lines) == 2 * n_each
        for line in lines:
            json.loads(line)  # every line intact
