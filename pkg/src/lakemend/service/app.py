"""The /v1 HTTP API: table and lake uploads, index builds, cleaning jobs.

Everything the UI can do goes through these endpoints; the UI holds no
cleaning logic of its own. Jobs run on a small executor (one at a time by
default) and are polled, never pushed.
"""

from __future__ import annotations

import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional, Union

from fastapi import FastAPI, File, HTTPException, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware

from ..errors import ArtifactError, IngestError, LakemendError
from ..ingest import load_index, load_table, persist_index
from ..model import ALL, CleaningConfig
from ..pipeline import (
    CleaningJob,
    apply_suggestions,
    clean,
    results_to_json_bytes,
    suggestion_from_json,
)
from ..reason import HttpModelClient, RemoteModelClient
from ..semantic import CachingEmbedder, Embedder, HashingEmbedder, VectorIndex
from ..syntactic import InvertedIndex
from .schemas import (
    IndexAccepted,
    IndexRequest,
    JobCreated,
    JobRequest,
    JobResultsResponse,
    JobStatusResponse,
    LakeStatusResponse,
    LakeUploadResponse,
    SourceResponse,
    TableUploadResponse,
)
from .store import ServiceStore

DEFAULT_STATE_DIR = "lakemend-state"
MODEL_URL_ENV = "LAKEMEND_MODEL_URL"
MODEL_KEY_ENV_ENV = "LAKEMEND_MODEL_KEY_ENV"
DEFAULT_MODEL_KEY_ENV = "LAKEMEND_MODEL_KEY"


def _field_errors(problems: list[tuple[str, str]]) -> list[dict]:
    return [
        {"loc": ["body", field], "msg": msg, "type": "value_error"} for field, msg in problems
    ]


def _to_config(request: JobRequest) -> CleaningConfig:
    relevant = ALL if request.relevant_columns == "ALL" else list(request.relevant_columns)
    return CleaningConfig(
        table=request.table,
        dirty_column=request.dirty_column,
        relevant_columns=relevant,
        dirty_marker=request.value,
        datalake=request.datalake,
        reasoner_mode="local" if request.is_local_model else "remote",
        indexer_mode=request.indexer,
        reranker_mode=request.reranker,
        n=request.n,
        k=request.k,
        repair_mode=request.repair,
    )


def create_app(
    state_dir: Union[str, Path, None] = None,
    model_client_factory: Optional[Callable[[], RemoteModelClient]] = None,
    embedder: Optional[Embedder] = None,
    inline_jobs: bool = False,
    max_lake_rows: int = 100_000,
    job_workers: int = 1,
) -> FastAPI:
    """Build the service; injection points exist so tests never need a network."""
    store = ServiceStore(state_dir or os.environ.get("LAKEMEND_STATE_DIR", DEFAULT_STATE_DIR))
    shared_embedder = embedder or CachingEmbedder(HashingEmbedder())
    executor = ThreadPoolExecutor(max_workers=job_workers)
    live_jobs: dict[str, CleaningJob] = {}
    live_lock = threading.Lock()

    app = FastAPI(title="lakemend", version="1")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store

    def _model_client() -> RemoteModelClient:
        if model_client_factory is not None:
            return model_client_factory()
        url = os.environ.get(MODEL_URL_ENV)
        key_env = os.environ.get(MODEL_KEY_ENV_ENV, DEFAULT_MODEL_KEY_ENV)
        if not url:
            raise LakemendError(f"{MODEL_URL_ENV} is not set")
        return HttpModelClient(url, auth_env=key_env)

    def _remote_configured() -> Optional[str]:
        """None when a remote model can be reached, else the problem text."""
        if model_client_factory is not None:
            return None
        if not os.environ.get(MODEL_URL_ENV):
            return f"remote model endpoint env var {MODEL_URL_ENV} is not set"
        key_env = os.environ.get(MODEL_KEY_ENV_ENV, DEFAULT_MODEL_KEY_ENV)
        if not os.environ.get(key_env):
            return f"remote model credential env var {key_env} is not set"
        return None

    # -- uploads ---------------------------------------------------------------

    @app.post("/v1/tables", response_model=TableUploadResponse)
    async def upload_table(file: UploadFile = File(...)) -> TableUploadResponse:
        data = await file.read()
        try:
            meta = store.save_table(file.filename or "table.csv", data)
        except IngestError as exc:
            raise HTTPException(422, detail=str(exc))
        return TableUploadResponse(**meta)

    @app.post("/v1/lakes", response_model=LakeUploadResponse)
    async def upload_lake(files: list[UploadFile] = File(...)) -> LakeUploadResponse:
        payload: list[tuple[str, bytes]] = []
        for f in files:
            payload.append((f.filename or "table.csv", await f.read()))
        try:
            lake, meta = store.save_lake(payload)
        except IngestError as exc:
            raise HTTPException(422, detail=str(exc))
        total_rows = sum(t["rows"] for t in meta["tables"])
        if total_rows > max_lake_rows:
            raise HTTPException(413, detail=f"lake has {total_rows} rows; cap is {max_lake_rows}")
        return LakeUploadResponse(
            lake_id=meta["lake_id"], tables=meta["tables"], warnings=meta["warnings"]
        )

    # -- indexing ----------------------------------------------------------------

    def _build_index(lake_id: str, mode: str) -> None:
        try:
            lake = store.load_lake(lake_id)
            if mode == "semantic":
                index: Union[InvertedIndex, VectorIndex] = VectorIndex.build(
                    lake.tuples(), shared_embedder, lake.digest
                )
            else:
                index = InvertedIndex.build(lake.tuples(), lake_digest=lake.digest)
            persist_index(index, store.index_path(lake_id, mode))
            store.set_index_status(lake_id, mode, "ready")
        except LakemendError as exc:
            store.set_index_status(lake_id, mode, "failed", str(exc))

    @app.post("/v1/lakes/{lake_id}/index", response_model=IndexAccepted, status_code=202)
    def build_lake_index(lake_id: str, request: IndexRequest) -> IndexAccepted:
        if store.lake_meta(lake_id) is None:
            raise HTTPException(404, detail=f"unknown lake {lake_id}")
        store.set_index_status(lake_id, request.mode, "building")
        if inline_jobs:
            _build_index(lake_id, request.mode)
        else:
            executor.submit(_build_index, lake_id, request.mode)
        status = store.index_status(lake_id)[request.mode]
        return IndexAccepted(lake_id=lake_id, mode=request.mode, status=status)

    @app.get("/v1/lakes/{lake_id}", response_model=LakeStatusResponse)
    def lake_status(lake_id: str) -> LakeStatusResponse:
        meta = store.lake_meta(lake_id)
        if meta is None:
            raise HTTPException(404, detail=f"unknown lake {lake_id}")
        status = store.index_status(lake_id)
        return LakeStatusResponse(
            lake_id=lake_id,
            tables=meta["tables"],
            index={m: status.get(m, "none") for m in ("syntactic", "semantic")},
            index_errors=status.get("errors", {}),
        )

    # -- jobs ---------------------------------------------------------------------

    def _execute_job(job_id: str, request: JobRequest) -> None:
        snapshot = store.job_snapshot(job_id)
        assert snapshot is not None
        config = _to_config(request)
        job = CleaningJob(config=config)
        with live_lock:
            live_jobs[job_id] = job
        snapshot["status"] = "running"
        store.save_job(job_id, snapshot)
        try:
            table_bytes = store.table_bytes(request.table)
            assert table_bytes is not None  # checked at submission
            meta = store.table_meta(request.table)
            _, rows = load_table(table_bytes, meta["name"] if meta else request.table)
            if config.datalake is None:
                clean(config, rows, client=_model_client(), job=job)
            else:
                lake = store.load_lake(config.datalake)
                index = load_index(
                    store.index_path(config.datalake, config.indexer_mode), lake.digest
                )
                client = _model_client() if config.reasoner_mode == "remote" else None
                clean(
                    config,
                    rows,
                    lake,
                    index,
                    client=client,
                    embedder=shared_embedder,
                    job=job,
                )
        except LakemendError as exc:
            job.error = str(exc)
            if job.status != "failed":
                job.set_status("failed")
        except Exception as exc:  # a crashed worker must still leave a readable job
            job.error = f"internal error: {exc}"
            if job.status != "failed":
                job.set_status("failed")
        if job.status == "done":
            store.save_results(job_id, results_to_json_bytes(job.results))
        snapshot.update(
            status=job.status,
            processed=job.processed,
            total=job.total,
            telemetry=job.telemetry.to_json(),
            warnings=list(job.warnings),
            error=job.error,
        )
        store.save_job(job_id, snapshot)

    @app.post("/v1/jobs", response_model=JobCreated, status_code=202)
    def submit_job(request: JobRequest) -> JobCreated:
        config = _to_config(request)
        problems = config.problems()
        if problems:
            raise HTTPException(422, detail=_field_errors(problems))
        if store.table_meta(request.table) is None:
            raise HTTPException(404, detail=f"unknown table {request.table}")
        if request.datalake is not None:
            if store.lake_meta(request.datalake) is None:
                raise HTTPException(404, detail=f"unknown lake {request.datalake}")
            status = store.index_status(request.datalake).get(request.indexer, "none")
            if status != "ready":
                raise HTTPException(
                    409,
                    detail=f"lake {request.datalake} has no ready {request.indexer} index"
                    f" (status: {status})",
                )
        if not request.is_local_model:
            problem = _remote_configured()
            if problem is not None:
                raise HTTPException(
                    422, detail=_field_errors([("is_local_model", problem)])
                )
        job_id = store.create_job(request.model_dump())
        if inline_jobs:
            _execute_job(job_id, request)
        else:
            executor.submit(_execute_job, job_id, request)
        return JobCreated(job_id=job_id)

    def _job_view(job_id: str) -> tuple[dict, Optional[CleaningJob]]:
        snapshot = store.job_snapshot(job_id)
        if snapshot is None:
            raise HTTPException(404, detail=f"unknown job {job_id}")
        with live_lock:
            live = live_jobs.get(job_id)
        return snapshot, live

    @app.get("/v1/jobs/{job_id}", response_model=JobStatusResponse)
    def job_status(job_id: str) -> JobStatusResponse:
        snapshot, live = _job_view(job_id)
        if live is not None and snapshot["status"] not in ("done", "failed"):
            snapshot = dict(
                snapshot,
                status=live.status,
                processed=live.processed,
                total=live.total,
                telemetry=live.telemetry.to_json(),
                warnings=list(live.warnings),
                error=live.error,
            )
        return JobStatusResponse(
            job_id=job_id,
            status=snapshot["status"],
            progress={"processed": snapshot["processed"], "total": snapshot["total"]},
            telemetry=snapshot["telemetry"],
            warnings=snapshot["warnings"],
            error=snapshot["error"],
            config=JobRequest(**snapshot["config"]),
        )

    def _results_list(job_id: str, snapshot: dict) -> list[dict]:
        if snapshot["status"] != "done":
            return []
        data = store.results_bytes(job_id)
        return json.loads(data.decode("utf-8")) if data else []

    @app.get("/v1/jobs/{job_id}/results", response_model=JobResultsResponse)
    def job_results(job_id: str) -> JobResultsResponse:
        snapshot, live = _job_view(job_id)
        status = live.status if live is not None and snapshot["status"] not in ("done", "failed") else snapshot["status"]
        return JobResultsResponse(
            status=status, partial=False, results=_results_list(job_id, snapshot)
        )

    @app.get("/v1/jobs/{job_id}/results/{row_id}/source", response_model=SourceResponse)
    def result_source(job_id: str, row_id: int) -> SourceResponse:
        snapshot, _ = _job_view(job_id)
        rows = _results_list(job_id, snapshot)
        row = next((r for r in rows if r["row_id"] == row_id), None)
        if row is None:
            raise HTTPException(404, detail=f"no result for row {row_id}")
        if not row.get("lineage"):
            raise HTTPException(404, detail=f"row {row_id} has no lineage")
        lake_id = snapshot["config"].get("datalake")
        if lake_id is None:
            raise HTTPException(404, detail="job ran without a datalake")
        lineage = row["lineage"]
        try:
            lake = store.load_lake(lake_id)
            from ..model import TupleRef

            source = lake.resolve(TupleRef(lineage["table"], lineage["row"]))
            table_name = lake.table_name(lineage["table"])
        except (KeyError, IngestError) as exc:
            raise HTTPException(404, detail=str(exc))
        return SourceResponse(
            table=lineage["table"],
            table_name=table_name,
            row=lineage["row"],
            attribute=lineage["attribute"],
            value=source.get(lineage["attribute"]),
            attributes=[{"name": name, "value": value} for name, value in source.attrs],
        )

    @app.get("/v1/jobs/{job_id}/export")
    def export_job(
        job_id: str, rows: Optional[str] = None, apply_repairs: bool = False
    ) -> Response:
        snapshot, _ = _job_view(job_id)
        if snapshot["status"] != "done":
            raise HTTPException(409, detail=f"job is {snapshot['status']}, not done")
        accepted: Optional[list[int]] = None
        if rows is not None:
            try:
                accepted = [int(part) for part in rows.split(",") if part.strip() != ""]
            except ValueError:
                raise HTTPException(422, detail="rows must be a comma-separated list of row ids")
        table_id = snapshot["config"]["table"]
        original = store.table_bytes(table_id)
        if original is None:
            raise HTTPException(404, detail=f"unknown table {table_id}")
        results = [suggestion_from_json(obj) for obj in _results_list(job_id, snapshot)]
        try:
            cleaned = apply_suggestions(original, results, accepted, apply_repairs)
        except (LakemendError, ArtifactError) as exc:
            raise HTTPException(422, detail=str(exc))
        return Response(
            content=cleaned,
            media_type="text/csv",
            headers={"Content-Disposition": f'attachment; filename="{table_id}-cleaned.csv"'},
        )

    return app
