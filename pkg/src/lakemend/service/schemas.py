"""Request/response bodies for the /v1 API."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field


class TableUploadResponse(BaseModel):
    table_id: str
    name: str
    columns: list[str]
    rows: int


class LakeTableInfo(BaseModel):
    table_id: str
    name: str
    columns: list[str]
    rows: int


class LakeUploadResponse(BaseModel):
    lake_id: str
    tables: list[LakeTableInfo]
    warnings: list[str] = Field(default_factory=list)


class IndexRequest(BaseModel):
    mode: Literal["syntactic", "semantic"]


class IndexAccepted(BaseModel):
    lake_id: str
    mode: str
    status: str


class LakeStatusResponse(BaseModel):
    lake_id: str
    tables: list[LakeTableInfo]
    index: dict[str, str]
    index_errors: dict[str, str] = Field(default_factory=dict)


class JobRequest(BaseModel):
    """Cleaning job specification; key names mirror the config-file keys."""

    table: str
    dirty_column: str
    relevant_columns: Union[Literal["ALL"], list[str]] = "ALL"
    value: str = "NULL"
    datalake: Optional[str] = None
    is_local_model: bool = False
    indexer: Literal["syntactic", "semantic"] = "syntactic"
    reranker: Literal["maxsim", "cross", "none"] = "maxsim"
    n: int = 100
    k: int = 5
    repair: bool = False


class JobCreated(BaseModel):
    job_id: str


class JobProgress(BaseModel):
    processed: int
    total: int


class JobStatusResponse(BaseModel):
    job_id: str
    status: Literal["pending", "running", "done", "failed"]
    progress: JobProgress
    telemetry: dict[str, int]
    warnings: list[str] = Field(default_factory=list)
    error: Optional[str] = None
    config: JobRequest


class LineageOut(BaseModel):
    table: str
    row: int
    attribute: str


class TrailEntryOut(BaseModel):
    table: str
    row: int
    matched: bool


class ResultRow(BaseModel):
    row_id: int
    dirty_column: str
    existing_value: Optional[str] = None
    suggested_value: Optional[str] = None
    is_conflict: bool = False
    lineage: Optional[LineageOut] = None
    trail: list[TrailEntryOut] = Field(default_factory=list)


class JobResultsResponse(BaseModel):
    status: str
    partial: bool
    results: list[ResultRow]


class SourceAttribute(BaseModel):
    name: str
    value: Optional[str] = None


class SourceResponse(BaseModel):
    table: str
    table_name: str
    row: int
    attribute: str
    value: Optional[str] = None
    attributes: list[SourceAttribute]
