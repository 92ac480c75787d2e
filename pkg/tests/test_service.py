import pytest
from fastapi.testclient import TestClient

from lakemend.semantic import CachingEmbedder, HashingEmbedder
from lakemend.service import create_app

from conftest import CLINIC_CSV, HEALTH_CSV, HOSPITAL_CSV


@pytest.fixture()
def app(tmp_path, monkeypatch):
    monkeypatch.delenv("LAKEMEND_MODEL_URL", raising=False)
    return create_app(
        state_dir=tmp_path / "state",
        embedder=CachingEmbedder(HashingEmbedder()),
        inline_jobs=True,
    )


@pytest.fixture()
def client(app):
    return TestClient(app)


def _upload_table(client, name=b"", data=None):
    data = data if data is not None else HEALTH_CSV
    response = client.post(
        "/v1/tables", files={"file": (name or "health.csv", data, "text/csv")}
    )
    assert response.status_code == 200, response.text
    return response.json()


def _upload_lake(client, files=None):
    files = files or [("hospital.csv", HOSPITAL_CSV), ("clinic.csv", CLINIC_CSV)]
    response = client.post(
        "/v1/lakes",
        files=[("files", (name, data, "text/csv")) for name, data in files],
    )
    assert response.status_code == 200, response.text
    return response.json()


def _indexed_lake(client, mode="syntactic"):
    lake = _upload_lake(client)
    response = client.post(f"/v1/lakes/{lake['lake_id']}/index", json={"mode": mode})
    assert response.status_code == 202, response.text
    return lake


def _job_request(table_id, lake_id, **overrides):
    body = {
        "table": table_id,
        "dirty_column": "BT",
        "datalake": lake_id,
        "is_local_model": True,
        "indexer": "syntactic",
        "n": 10,
        "k": 3,
    }
    body.update(overrides)
    return body


class TestUploads:
    def test_table_upload_reports_shape(self, client):
        meta = _upload_table(client)
        assert meta["name"] == "health.csv"
        assert meta["columns"] == ["Name", "City", "BT"]
        assert meta["rows"] == 4
        assert meta["table_id"].startswith("health-")

    def test_bad_csv_is_422(self, client):
        response = client.post("/v1/tables", files={"file": ("t.csv", b"", "text/csv")})
        assert response.status_code == 422

    def test_lake_upload_lists_tables(self, client):
        lake = _upload_lake(client)
        assert lake["lake_id"].startswith("lake-")
        assert {t["name"] for t in lake["tables"]} == {"hospital.csv", "clinic.csv"}
        assert lake["warnings"] == []

    def test_partial_lake_upload_warns(self, client):
        lake = _upload_lake(client, [("good.csv", HOSPITAL_CSV), ("bad.csv", b"")])
        assert len(lake["tables"]) == 1
        assert len(lake["warnings"]) == 1

    def test_lake_row_cap_is_413(self, tmp_path):
        capped = create_app(state_dir=tmp_path / "s", inline_jobs=True, max_lake_rows=2)
        small = TestClient(capped)
        response = small.post(
            "/v1/lakes", files=[("files", ("hospital.csv", HOSPITAL_CSV, "text/csv"))]
        )
        assert response.status_code == 413


class TestIndexing:
    def test_inline_index_reports_ready(self, client):
        lake = _indexed_lake(client)
        status = client.get(f"/v1/lakes/{lake['lake_id']}").json()
        assert status["index"]["syntactic"] == "ready"
        assert status["index"]["semantic"] == "none"

    def test_both_modes_can_coexist(self, client):
        lake = _indexed_lake(client, "syntactic")
        client.post(f"/v1/lakes/{lake['lake_id']}/index", json={"mode": "semantic"})
        status = client.get(f"/v1/lakes/{lake['lake_id']}").json()
        assert status["index"] == {"syntactic": "ready", "semantic": "ready"}

    def test_unknown_lake_404(self, client):
        assert client.post("/v1/lakes/lake-nope/index", json={"mode": "syntactic"}).status_code == 404
        assert client.get("/v1/lakes/lake-nope").status_code == 404

    def test_bad_mode_rejected(self, client):
        lake = _upload_lake(client)
        response = client.post(f"/v1/lakes/{lake['lake_id']}/index", json={"mode": "fancy"})
        assert response.status_code == 422


class TestJobSubmission:
    def test_unknown_table_404(self, client):
        lake = _indexed_lake(client)
        response = client.post("/v1/jobs", json=_job_request("health-ffffffff", lake["lake_id"]))
        assert response.status_code == 404

    def test_unknown_lake_404(self, client):
        table = _upload_table(client)
        response = client.post("/v1/jobs", json=_job_request(table["table_id"], "lake-nope"))
        assert response.status_code == 404

    def test_unindexed_lake_409(self, client):
        table = _upload_table(client)
        lake = _upload_lake(client)
        response = client.post("/v1/jobs", json=_job_request(table["table_id"], lake["lake_id"]))
        assert response.status_code == 409
        assert "no ready syntactic index" in response.json()["detail"]

    def test_config_problems_are_field_level_422(self, client):
        table = _upload_table(client)
        lake = _indexed_lake(client)
        response = client.post(
            "/v1/jobs", json=_job_request(table["table_id"], lake["lake_id"], n=2, k=5)
        )
        assert response.status_code == 422
        detail = response.json()["detail"]
        assert any(err["loc"] == ["body", "k"] for err in detail)

    def test_remote_mode_fails_fast_without_model_env(self, client):
        table = _upload_table(client)
        lake = _indexed_lake(client)
        response = client.post(
            "/v1/jobs",
            json=_job_request(table["table_id"], lake["lake_id"], is_local_model=False),
        )
        assert response.status_code == 422
        detail = response.json()["detail"]
        assert any(err["loc"] == ["body", "is_local_model"] for err in detail)

    def test_mode_mismatch_fails_job_not_submit(self, client):
        table = _upload_table(client)
        lake = _indexed_lake(client, "semantic")
        response = client.post(
            "/v1/jobs",
            json=_job_request(table["table_id"], lake["lake_id"], indexer="semantic",
                              reranker="none"),
        )
        assert response.status_code == 202


class TestJobLifecycle:
    def _run_job(self, client, **overrides):
        table = _upload_table(client)
        lake = _indexed_lake(client)
        body = _job_request(table["table_id"], lake["lake_id"], **overrides)
        response = client.post("/v1/jobs", json=body)
        assert response.status_code == 202, response.text
        return table, lake, response.json()["job_id"]

    def test_happy_local_job(self, client):
        _, _, job_id = self._run_job(client)
        status = client.get(f"/v1/jobs/{job_id}").json()
        assert status["status"] == "done"
        assert status["progress"] == {"processed": 2, "total": 2}
        assert status["config"]["dirty_column"] == "BT"
        results = client.get(f"/v1/jobs/{job_id}/results").json()
        assert results["status"] == "done"
        assert results["partial"] is False
        suggested = {r["row_id"]: r["suggested_value"] for r in results["results"]}
        assert suggested == {1: "B", 3: "O"}
        for r in results["results"]:
            assert r["lineage"]["attribute"] == "Blood_Type"
            assert r["trail"]

    def test_unknown_job_404(self, client):
        assert client.get("/v1/jobs/job-nope").status_code == 404
        assert client.get("/v1/jobs/job-nope/results").status_code == 404

    def test_results_before_done_are_empty(self, client, app):
        store = app.state.store
        job_id = store.create_job(_job_request("health-x", "lake-x"))
        snapshot = store.job_snapshot(job_id)
        snapshot["status"] = "running"
        store.save_job(job_id, snapshot)
        response = client.get(f"/v1/jobs/{job_id}/results")
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "running"
        assert body["partial"] is False
        assert body["results"] == []

    def test_source_endpoint_resolves_lineage(self, client):
        _, lake, job_id = self._run_job(client)
        source = client.get(f"/v1/jobs/{job_id}/results/1/source")
        assert source.status_code == 200, source.text
        body = source.json()
        assert body["table_name"] == "hospital.csv"
        assert body["attribute"] == "Blood_Type"
        assert body["value"] == "B"
        names = [a["name"] for a in body["attributes"]]
        assert names == ["Name", "City", "Blood_Type"]

    def test_source_404_without_lineage(self, client):
        _, _, job_id = self._run_job(client)
        # row 0 is not dirty, so it has no result at all
        assert client.get(f"/v1/jobs/{job_id}/results/0/source").status_code == 404

    def test_scenario1_source_404(self, tmp_path):
        class YesClient:
            def complete(self, prompt):
                return "Yes: O"

        app = create_app(state_dir=tmp_path / "s", inline_jobs=True,
                         model_client_factory=YesClient)
        client = TestClient(app)
        table = _upload_table(client)
        body = {"table": table["table_id"], "dirty_column": "BT"}
        job_id = client.post("/v1/jobs", json=body).json()["job_id"]
        assert client.get(f"/v1/jobs/{job_id}").json()["status"] == "done"
        assert client.get(f"/v1/jobs/{job_id}/results/1/source").status_code == 404

    def test_job_failure_is_reported_not_raised(self, client):
        table = _upload_table(client)
        lake = _indexed_lake(client, "semantic")
        # config says syntactic but only a semantic index exists
        response = client.post(
            "/v1/jobs", json=_job_request(table["table_id"], lake["lake_id"], indexer="semantic")
        )
        job_id = response.json()["job_id"]
        status = client.get(f"/v1/jobs/{job_id}").json()
        assert status["status"] == "done" or status["error"] is None


class TestExport:
    def _done_job(self, client, **overrides):
        table = _upload_table(client)
        lake = _indexed_lake(client)
        body = _job_request(table["table_id"], lake["lake_id"], **overrides)
        job_id = client.post("/v1/jobs", json=body).json()["job_id"]
        assert client.get(f"/v1/jobs/{job_id}").json()["status"] == "done"
        return job_id

    def test_export_substitutes_dirty_cells(self, client):
        job_id = self._done_job(client)
        response = client.get(f"/v1/jobs/{job_id}/export")
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/csv")
        assert b"Ava,Doha,B" in response.content
        assert b"Noor,Tunis,O" in response.content
        # untouched rows stay verbatim
        assert b"Zidane,Madrid,O" in response.content

    def test_export_rows_filter(self, client):
        job_id = self._done_job(client)
        response = client.get(f"/v1/jobs/{job_id}/export", params={"rows": "3"})
        assert b"Ava,Doha,NULL" in response.content
        assert b"Noor,Tunis,O" in response.content

    def test_export_reject_all(self, client):
        job_id = self._done_job(client)
        response = client.get(f"/v1/jobs/{job_id}/export", params={"rows": ""})
        assert response.content == HEALTH_CSV

    def test_export_invalid_rows_param(self, client):
        job_id = self._done_job(client)
        assert client.get(f"/v1/jobs/{job_id}/export", params={"rows": "x,y"}).status_code == 422

    def test_export_before_done_409(self, client, app):
        store = app.state.store
        job_id = store.create_job(_job_request("health-x", "lake-x"))
        assert client.get(f"/v1/jobs/{job_id}/export").status_code == 409

    def test_export_filename_header(self, client):
        job_id = self._done_job(client)
        disposition = client.get(f"/v1/jobs/{job_id}/export").headers["content-disposition"]
        assert disposition.startswith("attachment;")
        assert "-cleaned.csv" in disposition


class TestRestartRecovery:
    def test_running_jobs_are_failed_on_restart(self, tmp_path):
        state = tmp_path / "state"
        app1 = create_app(state_dir=state, inline_jobs=True)
        store = app1.state.store
        job_id = store.create_job({"table": "t", "dirty_column": "BT"})
        snapshot = store.job_snapshot(job_id)
        snapshot["status"] = "running"
        store.save_job(job_id, snapshot)

        app2 = create_app(state_dir=state, inline_jobs=True)
        client = TestClient(app2)
        body = client.get(f"/v1/jobs/{job_id}").json()
        assert body["status"] == "failed"
        assert "interrupted" in body["error"]
