"""Late-interaction reranking: chunk tuples into attribute-value pairs and
score each candidate by summed per-chunk maximum cosine (maxsim), with a
pluggable cross-scorer alternative.

Rerank scores replace the retrieval ordering; they are never blended with
retrieval scores, which participate only in tie-breaks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .errors import ConfigError, InternalError, RerankError
from .ingest import Lake
from .model import ALL, ColumnSelection, Tuple, TupleRef, project, serialize_record, serialize_tuple
from .semantic import Embedder


@dataclass(frozen=True)
class Chunk:
    text: str
    vector: np.ndarray


@dataclass(frozen=True)
class ChunkedTuple:
    ref: Optional[TupleRef]
    chunks: tuple[Chunk, ...]


@dataclass(frozen=True)
class ScoredCandidate:
    ref: TupleRef
    retrieval_score: float
    rerank_score: Optional[float] = None


def chunk(t: Tuple, cols: ColumnSelection, embedder: Embedder) -> ChunkedTuple:
    """One "name : value" chunk per non-absent attribute, embedded independently."""
    selected = project(t, cols)
    chunks = tuple(
        Chunk(f"{name} : {value}", embedder.embed(f"{name} : {value}"))
        for name, value in selected.attrs
        if value is not None
    )
    return ChunkedTuple(t.ref, chunks)


def maxsim_score(query: ChunkedTuple, candidate: ChunkedTuple) -> float:
    """Sum over query chunks of the max cosine against any candidate chunk.

    Either side empty scores 0. Negative cosines are kept as-is.
    """
    if not query.chunks or not candidate.chunks:
        return 0.0
    d = query.chunks[0].vector.shape[0]
    for c in query.chunks + candidate.chunks:
        if c.vector.shape[0] != d:
            raise ConfigError("chunk embeddings have mismatched dimensions")
    q = np.stack([c.vector for c in query.chunks])
    m = np.stack([c.vector for c in candidate.chunks])
    return float((q @ m.T).max(axis=1).sum())


def _sort_candidates(scored: list[ScoredCandidate], k: int) -> list[ScoredCandidate]:
    ordered = sorted(
        scored,
        key=lambda c: (-(c.rerank_score if c.rerank_score is not None else 0.0),
                       -c.retrieval_score, c.ref.order_key()),
    )
    return ordered[:k]


def rerank_maxsim(
    query: Tuple,
    candidates: Sequence[ScoredCandidate],
    lake: Lake,
    k: int,
    embedder: Embedder,
    dirty: str,
    pivots: ColumnSelection = ALL,
) -> list[ScoredCandidate]:
    """Top-k candidates by maxsim: query chunked over pivots, candidates over
    all columns (the dirty attribute's counterpart in the candidate is
    evidence, not noise)."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    from .model import resolve_pivots

    query_chunked = chunk(query, resolve_pivots(query, dirty, pivots), embedder)
    scored: list[ScoredCandidate] = []
    for cand in candidates:
        try:
            cand_tuple = lake.resolve(cand.ref)
        except KeyError as exc:
            raise InternalError(str(exc)) from exc
        score = maxsim_score(query_chunked, chunk(cand_tuple, ALL, embedder))
        scored.append(ScoredCandidate(cand.ref, cand.retrieval_score, score))
    return _sort_candidates(scored, k)


class CrossScorer(Protocol):
    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]: ...


class HttpCrossScorer:
    """Cross-scorer behind HTTP: {"pairs": [[q, c], ...]} -> {"scores": [...]}."""

    def __init__(self, url: str, timeout: float = 30.0):
        import httpx

        self.url = url
        self._client = httpx.Client(timeout=timeout)

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        import httpx

        try:
            response = self._client.post(self.url, json={"pairs": [list(p) for p in pairs]})
            response.raise_for_status()
            scores = response.json()["scores"]
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise RerankError(f"cross scorer failed: {exc}") from exc
        if len(scores) != len(pairs):
            raise RerankError("cross scorer returned a mismatched score count")
        return [float(s) for s in scores]


class MaxsimCrossScorer:
    """Adapter scoring serialized pairs with maxsim over their re-split chunks.

    Splitting "[a : v ; b : w]" on " ; " recovers exactly the chunk texts the
    maxsim path embeds, so reranking through this adapter matches
    rerank_maxsim.
    """

    def __init__(self, embedder: Embedder):
        self.embedder = embedder

    def _chunks(self, serialized: str) -> ChunkedTuple:
        inner = serialized.strip()
        if inner.startswith("[") and inner.endswith("]"):
            inner = inner[1:-1]
        pieces = [p for p in inner.split(" ; ") if p]
        return ChunkedTuple(None, tuple(Chunk(p, self.embedder.embed(p)) for p in pieces))

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [maxsim_score(self._chunks(q), self._chunks(c)) for q, c in pairs]


def rerank_cross(
    query: Tuple,
    candidates: Sequence[ScoredCandidate],
    scorer: CrossScorer,
    k: int,
    lake: Lake,
    dirty: str,
    pivots: ColumnSelection = ALL,
) -> list[ScoredCandidate]:
    """Top-k by cross-scorer over (serialized query pivots, serialized candidate).

    Scorer failures fail the job loudly; there is no silent fallback.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    from .model import resolve_pivots

    query_text = serialize_record(project(query, resolve_pivots(query, dirty, pivots)))
    pairs: list[tuple[str, str]] = []
    for cand in candidates:
        try:
            cand_tuple = lake.resolve(cand.ref)
        except KeyError as exc:
            raise InternalError(str(exc)) from exc
        pairs.append((query_text, serialize_record(cand_tuple)))
    scores = scorer.score_pairs(pairs) if pairs else []
    if len(scores) != len(pairs):
        raise RerankError("cross scorer returned a mismatched score count")
    scored = [
        ScoredCandidate(cand.ref, cand.retrieval_score, score)
        for cand, score in zip(candidates, scores)
    ]
    return _sort_candidates(scored, k)


def take_top_k(candidates: Sequence[ScoredCandidate], k: int) -> list[ScoredCandidate]:
    """No-rerank path: top-k by retrieval score with the canonical tie rule."""
    ordered = sorted(candidates, key=lambda c: (-c.retrieval_score, c.ref.order_key()))
    return ordered[:k]
