"""Scenario orchestration: direct prompting, retrieval-augmented cleaning,
repair mode, evaluation, and CSV export.

Rows are independent work items. The worker pool may complete them in any
order, but the result list is assembled in row order and telemetry is folded
sequentially afterwards, so a run is deterministic whenever its reasoner is.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

from .errors import (
    ArtifactError,
    ConfigError,
    EvaluationError,
    ModelRefusal,
    ModelTimeout,
    ModelTransportError,
)
from .ingest import Lake
from .model import (
    CleaningConfig,
    Lineage,
    RepairSuggestion,
    TrailEntry,
    Tuple,
    fold_name,
    is_dirty,
    normalize_value,
    project,
    resolve_pivots,
    serialize_record,
)
from .reason import (
    LocalReasonerParams,
    PromptTemplate,
    ReasonerDecision,
    RemoteModelClient,
    build_pair_prompt,
    build_standalone_prompt,
    local_decide,
    postprocess_response,
)
from .rerank import CrossScorer, MaxsimCrossScorer, ScoredCandidate, rerank_cross, rerank_maxsim, take_top_k
from .semantic import CachingEmbedder, Embedder, HashingEmbedder, VectorIndex
from .syntactic import InvertedIndex


@dataclass
class Telemetry:
    """Run counters: candidates retrieved, pair matches, values extracted,
    remote refusals (empty responses and typed transport failures)."""

    retrieved: int = 0
    matched: int = 0
    extracted: int = 0
    refusals: int = 0

    def add(self, other: "Telemetry") -> None:
        self.retrieved += other.retrieved
        self.matched += other.matched
        self.extracted += other.extracted
        self.refusals += other.refusals

    def to_json(self) -> dict:
        return {
            "retrieved": self.retrieved,
            "matched": self.matched,
            "extracted": self.extracted,
            "refusals": self.refusals,
        }


_STATUS_ORDER = {"pending": 0, "running": 1, "done": 2, "failed": 2}


@dataclass
class CleaningJob:
    """Mutable job state; results are immutable once status reaches done."""

    config: CleaningConfig
    status: str = "pending"
    processed: int = 0
    total: int = 0
    results: list[RepairSuggestion] = field(default_factory=list)
    telemetry: Telemetry = field(default_factory=Telemetry)
    warnings: list[str] = field(default_factory=list)
    error: Optional[str] = None

    def set_status(self, status: str) -> None:
        # transitions are monotone: pending -> running -> done|failed
        if _STATUS_ORDER[status] < _STATUS_ORDER[self.status]:
            raise ConfigError(f"job status cannot move {self.status} -> {status}")
        self.status = status


@dataclass
class _RowOutcome:
    suggestion: RepairSuggestion
    telemetry: Telemetry
    warning: Optional[str] = None
    remote_attempts: int = 0
    remote_successes: int = 0
    transport_failures: int = 0


def in_scope_rows(rows: Sequence[Tuple], config: CleaningConfig) -> list[Tuple]:
    """Rows the job acts on: dirty-valued rows, or all rows in repair mode."""
    if not rows:
        return []
    if not rows[0].has(config.dirty_column):
        raise ConfigError(f"dirty_column {config.dirty_column!r} not in table")
    if config.repair_mode:
        return list(rows)
    return [t for t in rows if is_dirty(t.get(config.dirty_column), config.dirty_marker)]


def _existing_value(t: Tuple, config: CleaningConfig) -> Optional[str]:
    raw = t.get(config.dirty_column)
    return None if is_dirty(raw, config.dirty_marker) else raw


def _conflict(existing: Optional[str], suggested: Optional[str]) -> bool:
    if existing is None or suggested is None:
        return False
    return normalize_value(existing) != normalize_value(suggested)


def _run_rows(
    job: CleaningJob,
    rows: Sequence[Tuple],
    worker: Callable[[Tuple], _RowOutcome],
    workers: int,
) -> list[_RowOutcome]:
    """Run workers over rows, keeping results in row order and progress
    updates single-writer."""
    job.total = len(rows)
    job.set_status("running")
    if workers <= 1:
        outcomes = []
        for t in rows:
            outcomes.append(worker(t))
            job.processed += 1
        return outcomes

    lock = threading.Lock()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(worker, t) for t in rows]
        for future in as_completed(futures):
            future.exception()  # surface later via .result(); here only progress
            with lock:
                job.processed += 1
        return [f.result() for f in futures]


def _finish(job: CleaningJob, outcomes: Sequence[_RowOutcome]) -> CleaningJob:
    for outcome in outcomes:
        job.results.append(outcome.suggestion)
        job.telemetry.add(outcome.telemetry)
        if outcome.warning:
            job.warnings.append(outcome.warning)
    job.set_status("done")
    return job


def run_scenario1(
    config: CleaningConfig,
    rows: Sequence[Tuple],
    client: RemoteModelClient,
    template: PromptTemplate = PromptTemplate(),
    workers: int = 1,
    job: Optional[CleaningJob] = None,
) -> CleaningJob:
    """Direct prompting: no retrieval, no lineage; one prompt per in-scope row."""
    config.validate()
    if config.datalake is not None:
        raise ConfigError("direct prompting runs without a datalake")
    job = job or CleaningJob(config=config)
    scope = in_scope_rows(rows, config)

    def worker(t: Tuple) -> _RowOutcome:
        telemetry = Telemetry()
        existing = _existing_value(t, config)
        prompt = build_standalone_prompt(t, config.dirty_column, config.relevant_columns, template)
        value: Optional[str] = None
        attempts, successes, transport = 1, 0, 0
        try:
            raw = client.complete(prompt)
            successes = 1
            decision = postprocess_response(raw, config.dirty_column)
            if decision.refused:
                telemetry.refusals += 1
            value = decision.value
        except (ModelTimeout, ModelTransportError) as exc:
            transport = 1
            telemetry.refusals += 1
        except ModelRefusal:
            telemetry.refusals += 1
        if value is not None and is_dirty(value, config.dirty_marker):
            value = None
        if value is not None:
            telemetry.extracted += 1
        suggestion = RepairSuggestion(
            row_id=t.row_id,
            dirty_column=t.canonical_name(config.dirty_column),
            suggested_value=value,
            lineage=None,
            existing_value=existing,
            is_conflict=_conflict(existing, value),
        )
        return _RowOutcome(suggestion, telemetry, None, attempts, successes, transport)

    outcomes = _run_rows(job, scope, worker, workers)
    attempts = sum(o.remote_attempts for o in outcomes)
    successes = sum(o.remote_successes for o in outcomes)
    transport = sum(o.transport_failures for o in outcomes)
    if attempts and successes == 0 and transport == attempts:
        for outcome in outcomes:
            job.telemetry.add(outcome.telemetry)
        job.error = "remote model unreachable: every call failed in transport"
        job.set_status("failed")
        return job
    return _finish(job, outcomes)


def run_retrieval(
    config: CleaningConfig,
    rows: Sequence[Tuple],
    lake: Lake,
    index: Union[InvertedIndex, VectorIndex],
    embedder: Optional[Embedder] = None,
    client: Optional[RemoteModelClient] = None,
    params: LocalReasonerParams = LocalReasonerParams(),
    template: PromptTemplate = PromptTemplate(),
    cross_scorer: Optional[CrossScorer] = None,
    workers: int = 1,
    job: Optional[CleaningJob] = None,
) -> CleaningJob:
    """Retrieve top-n, rerank to top-k, and decide every kept candidate.

    The first candidate in rank order that matches and carries an extractable
    value supplies the suggestion; remaining candidates are still decided so
    the trail is complete and the remote prompt budget is exact.
    """
    config.validate()
    job = job or CleaningJob(config=config)
    embedder = embedder or CachingEmbedder(HashingEmbedder())
    if config.reasoner_mode == "remote" and client is None:
        raise ConfigError("remote reasoner requires a model client")
    if config.indexer_mode == "syntactic" and not isinstance(index, InvertedIndex):
        raise ArtifactError("config says syntactic but the index artifact is semantic")
    if config.indexer_mode == "semantic" and not isinstance(index, VectorIndex):
        raise ArtifactError("config says semantic but the index artifact is syntactic")
    if index.lake_digest and index.lake_digest != lake.digest:
        job.error = "index artifact was built from a different lake (digest mismatch)"
        job.set_status("failed")
        return job
    if config.reranker_mode == "cross" and cross_scorer is None:
        cross_scorer = MaxsimCrossScorer(embedder)
    scope = in_scope_rows(rows, config)
    marker = config.dirty_marker
    dirty = config.dirty_column

    def worker(t: Tuple) -> _RowOutcome:
        telemetry = Telemetry()
        existing = _existing_value(t, config)
        row_base = dict(
            row_id=t.row_id,
            dirty_column=t.canonical_name(dirty),
            existing_value=existing,
        )
        pivot_names = resolve_pivots(t, dirty, config.relevant_columns)
        if all(is_dirty(t.get(p), marker) for p in pivot_names):
            return _RowOutcome(
                RepairSuggestion(**row_base),
                telemetry,
                warning=f"row {t.row_id}: every pivot value is dirty; nothing to retrieve on",
            )
        query_text = serialize_record(project(t, pivot_names))
        if isinstance(index, VectorIndex):
            hits = index.query_text(query_text, config.n, embedder)
        else:
            hits = index.query(query_text, config.n)
        candidates = [ScoredCandidate(ref, score) for ref, score in hits]
        telemetry.retrieved += len(candidates)

        if config.reranker_mode == "maxsim":
            top = rerank_maxsim(t, candidates, lake, config.k, embedder, dirty, config.relevant_columns)
        elif config.reranker_mode == "cross":
            assert cross_scorer is not None
            top = rerank_cross(t, candidates, cross_scorer, config.k, lake, dirty, config.relevant_columns)
        else:
            top = take_top_k(candidates, config.k)

        trail: list[TrailEntry] = []
        attempts = successes = 0
        chosen: Optional[str] = None
        chosen_lineage: Optional[Lineage] = None
        for cand in top:
            cand_tuple = lake.resolve(cand.ref)
            if config.reasoner_mode == "local":
                decision = local_decide(t, cand_tuple, dirty, config.relevant_columns, embedder, params)
            else:
                assert client is not None
                prompt = build_pair_prompt(t, cand_tuple, dirty, config.relevant_columns, template)
                attempts += 1
                try:
                    raw = client.complete(prompt)
                    successes += 1
                    decision = postprocess_response(raw, dirty, require_match=True)
                    if decision.refused:
                        telemetry.refusals += 1
                except (ModelTimeout, ModelTransportError, ModelRefusal):
                    # a failed pair is a non-match, not a failed job
                    telemetry.refusals += 1
                    decision = ReasonerDecision(matched=False)
            trail.append(TrailEntry(cand.ref, decision.matched))
            if decision.matched:
                telemetry.matched += 1
            if chosen is not None or not decision.matched:
                continue
            value = decision.value
            if value is None or is_dirty(value, marker):
                continue  # matched but nothing extractable; try the next candidate
            if config.reasoner_mode == "local":
                assert decision.source_attribute is not None
                chosen = value
                chosen_lineage = Lineage(cand.ref.table_id, cand.ref.row_id, decision.source_attribute)
            else:
                # lineage only when the model's value is verbatim some candidate cell
                chosen = value
                chosen_lineage = None
                for name, cell in cand_tuple.attrs:
                    if cell == value:
                        chosen_lineage = Lineage(cand.ref.table_id, cand.ref.row_id, name)
                        break
        if chosen is not None:
            telemetry.extracted += 1
        suggestion = RepairSuggestion(
            **row_base,
            suggested_value=chosen,
            lineage=chosen_lineage,
            is_conflict=_conflict(existing, chosen),
            candidate_trail=tuple(trail),
        )
        return _RowOutcome(suggestion, telemetry, None, attempts, successes, 0)

    outcomes = _run_rows(job, scope, worker, workers)
    return _finish(job, outcomes)


def clean(
    config: CleaningConfig,
    rows: Sequence[Tuple],
    lake: Optional[Lake] = None,
    index: Optional[Union[InvertedIndex, VectorIndex]] = None,
    *,
    client: Optional[RemoteModelClient] = None,
    embedder: Optional[Embedder] = None,
    params: LocalReasonerParams = LocalReasonerParams(),
    template: PromptTemplate = PromptTemplate(),
    cross_scorer: Optional[CrossScorer] = None,
    workers: int = 1,
    job: Optional[CleaningJob] = None,
) -> CleaningJob:
    """Dispatch on the configured scenario; repair mode rides along via config."""
    config.validate()
    if config.datalake is None:
        if client is None:
            raise ConfigError("direct prompting requires a remote model client")
        return run_scenario1(config, rows, client, template, workers, job)
    if lake is None or index is None:
        raise ConfigError("retrieval requires a registered, indexed datalake")
    return run_retrieval(
        config, rows, lake, index, embedder, client, params, template, cross_scorer, workers, job
    )


# -- result serialization -----------------------------------------------------


def suggestion_to_json(s: RepairSuggestion) -> dict:
    lineage = None
    if s.lineage is not None:
        lineage = {
            "table": s.lineage.source_table,
            "row": s.lineage.source_row,
            "attribute": s.lineage.source_attribute,
        }
    return {
        "row_id": s.row_id,
        "dirty_column": s.dirty_column,
        "existing_value": s.existing_value,
        "suggested_value": s.suggested_value,
        "is_conflict": s.is_conflict,
        "lineage": lineage,
        "trail": [
            {"table": e.ref.table_id, "row": e.ref.row_id, "matched": e.matched}
            for e in s.candidate_trail
        ],
    }


def results_to_json_bytes(results: Sequence[RepairSuggestion]) -> bytes:
    text = json.dumps([suggestion_to_json(s) for s in results], indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def suggestion_from_json(obj: dict) -> RepairSuggestion:
    from .model import TupleRef

    lineage = None
    if obj.get("lineage"):
        lineage = Lineage(
            source_table=obj["lineage"]["table"],
            source_row=obj["lineage"]["row"],
            source_attribute=obj["lineage"]["attribute"],
        )
    trail = tuple(
        TrailEntry(TupleRef(e["table"], e["row"]), e["matched"]) for e in obj.get("trail", [])
    )
    return RepairSuggestion(
        row_id=obj["row_id"],
        dirty_column=obj["dirty_column"],
        suggested_value=obj.get("suggested_value"),
        lineage=lineage,
        existing_value=obj.get("existing_value"),
        is_conflict=bool(obj.get("is_conflict", False)),
        candidate_trail=trail,
    )


# -- evaluation ----------------------------------------------------------------


@dataclass(frozen=True)
class EvaluationReport:
    dataset: str
    tuples: int
    accuracy: float
    verdicts: tuple[dict, ...]

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "tuples": self.tuples,
            "accuracy": self.accuracy,
            "verdicts": list(self.verdicts),
        }


def evaluate(
    results: Sequence[RepairSuggestion],
    truth: Mapping[int, Optional[str]],
    dataset: str = "",
) -> EvaluationReport:
    """Accuracy under trim + case-fold equality; absent suggestions count wrong."""
    if not results:
        raise EvaluationError("no results to evaluate")
    verdicts: list[dict] = []
    correct = 0
    for s in results:
        if s.row_id not in truth or truth[s.row_id] is None:
            raise EvaluationError(f"ground truth missing for row {s.row_id}")
        expected = truth[s.row_id]
        assert expected is not None
        ok = s.suggested_value is not None and normalize_value(s.suggested_value) == normalize_value(expected)
        correct += ok
        verdicts.append(
            {
                "row_id": s.row_id,
                "suggested": s.suggested_value,
                "truth": expected,
                "correct": bool(ok),
            }
        )
    return EvaluationReport(dataset, len(results), correct / len(results), tuple(verdicts))


# -- CSV export ----------------------------------------------------------------


def _split_records(text: str) -> list[str]:
    """Split CSV text into records, each keeping its own line terminator.

    Newlines inside quoted fields do not end a record; the quote scanner
    mirrors ingestion (doubled quotes stay inside the field).
    """
    records: list[str] = []
    start = 0
    in_quotes = False
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if in_quotes:
            if ch == '"':
                if i + 1 < n and text[i + 1] == '"':
                    i += 1
                else:
                    in_quotes = False
        elif ch == '"':
            in_quotes = True
        elif ch == "\n":
            records.append(text[start : i + 1])
            start = i + 1
        i += 1
    if start < n:
        records.append(text[start:])
    return records


def _rewrite_record(record: str, column_index: int, new_value: str) -> str:
    import csv
    import io

    terminator = ""
    body = record
    if body.endswith("\r\n"):
        terminator, body = "\r\n", body[:-2]
    elif body.endswith("\n"):
        terminator, body = "\n", body[:-1]
    fields = next(csv.reader(io.StringIO(body)))
    while len(fields) <= column_index:
        fields.append("")
    fields[column_index] = new_value
    out = io.StringIO()
    csv.writer(out, lineterminator="").writerow(fields)
    return out.getvalue() + terminator


def apply_suggestions(
    original: bytes,
    results: Sequence[RepairSuggestion],
    accepted_rows: Optional[Sequence[int]] = None,
    apply_repairs: bool = False,
) -> bytes:
    """Substitute accepted suggestions into the original CSV bytes.

    Previously-dirty cells always take their accepted suggestion; cells that
    already held a value are rewritten only for conflict rows under
    apply_repairs. Untouched rows stay byte-identical, so rejecting everything
    returns the input unchanged.
    """
    import csv
    import io

    substitutions: dict[int, str] = {}
    accepted = None if accepted_rows is None else set(accepted_rows)
    dirty_column = results[0].dirty_column if results else None
    for s in results:
        if s.suggested_value is None:
            continue
        if accepted is not None and s.row_id not in accepted:
            continue
        if s.existing_value is None:
            substitutions[s.row_id] = s.suggested_value
        elif apply_repairs and s.is_conflict:
            substitutions[s.row_id] = s.suggested_value
    if not substitutions or dirty_column is None:
        return original

    text = original.decode("utf-8")
    records = _split_records(text)
    if not records:
        return original
    header = next(csv.reader(io.StringIO(records[0])))
    column_index = None
    for idx, name in enumerate(header):
        if fold_name(name) == fold_name(dirty_column):
            column_index = idx
            break
    if column_index is None:
        raise ConfigError(f"dirty_column {dirty_column!r} not in exported table header")

    out: list[str] = [records[0]]
    for row_id, record in enumerate(records[1:]):
        if row_id in substitutions:
            out.append(_rewrite_record(record, column_index, substitutions[row_id]))
        else:
            out.append(record)
    return "".join(out).encode("utf-8")
