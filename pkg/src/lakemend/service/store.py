"""On-disk service state: uploaded tables, lakes, index artifacts, jobs.

One directory, JSON metadata plus raw CSV and index artifact files, so the
service restarts cleanly with no database. Jobs found non-terminal at startup
are marked failed (their worker died with the process).
"""

from __future__ import annotations

import json
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Union

from ..ingest import Lake, load_table, register_lake


def _read_json(path: Path) -> Optional[dict]:
    if not path.is_file():
        return None
    return json.loads(path.read_text("utf-8"))


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", "utf-8")
    tmp.replace(path)


INDEX_STATES = ("none", "building", "ready", "failed")


class ServiceStore:
    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        for sub in ("tables", "lakes", "jobs"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._mark_interrupted_jobs()

    # -- tables ---------------------------------------------------------------

    def save_table(self, name: str, data: bytes) -> dict:
        table_id, rows = load_table(data, name)
        columns = list(rows[0].names()) if rows else []
        meta = {"table_id": table_id, "name": name, "columns": columns, "rows": len(rows)}
        with self._lock:
            (self.root / "tables" / f"{table_id}.csv").write_bytes(data)
            _write_json(self.root / "tables" / f"{table_id}.json", meta)
        return meta

    def table_meta(self, table_id: str) -> Optional[dict]:
        return _read_json(self.root / "tables" / f"{table_id}.json")

    def table_bytes(self, table_id: str) -> Optional[bytes]:
        path = self.root / "tables" / f"{table_id}.csv"
        return path.read_bytes() if path.is_file() else None

    # -- lakes ----------------------------------------------------------------

    def save_lake(self, files: list[tuple[str, bytes]]) -> tuple[Lake, dict]:
        lake = register_lake(files)
        lake_dir = self.root / "lakes" / lake.catalog.lake_id
        meta = {
            "lake_id": lake.catalog.lake_id,
            "tables": [
                {
                    "table_id": t.table_id,
                    "name": t.name,
                    "columns": list(t.columns),
                    "rows": t.row_count,
                }
                for t in lake.catalog.tables
            ],
            "warnings": list(lake.warnings),
            "created_at": lake.catalog.created_at,
        }
        with self._lock:
            files_dir = lake_dir / "files"
            files_dir.mkdir(parents=True, exist_ok=True)
            for name, data in files:
                (files_dir / Path(name).name).write_bytes(data)
            _write_json(lake_dir / "catalog.json", meta)
            if not (lake_dir / "index-status.json").is_file():
                _write_json(
                    lake_dir / "index-status.json",
                    {"syntactic": "none", "semantic": "none", "errors": {}},
                )
        return lake, meta

    def lake_meta(self, lake_id: str) -> Optional[dict]:
        return _read_json(self.root / "lakes" / lake_id / "catalog.json")

    def load_lake(self, lake_id: str) -> Lake:
        files_dir = self.root / "lakes" / lake_id / "files"
        return register_lake(files_dir)

    def index_status(self, lake_id: str) -> dict:
        status = _read_json(self.root / "lakes" / lake_id / "index-status.json")
        return status or {"syntactic": "none", "semantic": "none", "errors": {}}

    def set_index_status(self, lake_id: str, mode: str, state: str, error: str = "") -> None:
        assert state in INDEX_STATES
        with self._lock:
            status = self.index_status(lake_id)
            status[mode] = state
            errors = status.setdefault("errors", {})
            if error:
                errors[mode] = error
            else:
                errors.pop(mode, None)
            _write_json(self.root / "lakes" / lake_id / "index-status.json", status)

    def index_path(self, lake_id: str, mode: str) -> Path:
        return self.root / "lakes" / lake_id / f"index-{mode}.lmix"

    # -- jobs -----------------------------------------------------------------

    def create_job(self, config: dict) -> str:
        job_id = f"job-{uuid.uuid4().hex[:12]}"
        snapshot = {
            "job_id": job_id,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "config": config,
            "status": "pending",
            "processed": 0,
            "total": 0,
            "telemetry": {"retrieved": 0, "matched": 0, "extracted": 0, "refusals": 0},
            "warnings": [],
            "error": None,
        }
        self.save_job(job_id, snapshot)
        return job_id

    def save_job(self, job_id: str, snapshot: dict) -> None:
        with self._lock:
            _write_json(self.root / "jobs" / job_id / "job.json", snapshot)

    def job_snapshot(self, job_id: str) -> Optional[dict]:
        return _read_json(self.root / "jobs" / job_id / "job.json")

    def save_results(self, job_id: str, data: bytes) -> None:
        with self._lock:
            (self.root / "jobs" / job_id / "results.json").write_bytes(data)

    def results_bytes(self, job_id: str) -> Optional[bytes]:
        path = self.root / "jobs" / job_id / "results.json"
        return path.read_bytes() if path.is_file() else None

    def _mark_interrupted_jobs(self) -> None:
        for job_file in (self.root / "jobs").glob("*/job.json"):
            snapshot = _read_json(job_file)
            if snapshot and snapshot.get("status") in ("pending", "running"):
                snapshot["status"] = "failed"
                snapshot["error"] = "interrupted by service restart"
                _write_json(job_file, snapshot)
