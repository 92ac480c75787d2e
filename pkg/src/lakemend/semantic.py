"""Embedder contract plus an exact-scan vector index over lake tuples.

The default embedder hashes character 3-grams into signed buckets (feature
hashing): deterministic and dependency-free, so every query is checkable
against a brute-force oracle. A remote neural embedder plugs in behind the
same contract for production use and must declare itself non-oracle.
"""

from __future__ import annotations

import hashlib
import io
import re
import struct
from typing import Protocol, Sequence

import numpy as np

from .errors import ConfigError, IngestError, RetrievalError
from .ingest import KIND_SEMANTIC, read_str, write_str
from .model import Tuple, TupleRef, serialize_record

DEFAULT_DIM = 256
_GRAM = 3
_WS_RE = re.compile(r"\s+")


def _hash64(gram: str) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def hash_embed(text: str, d: int = DEFAULT_DIM) -> np.ndarray:
    """Unit-norm hashed 3-gram vector; the zero vector for gram-less text.

    The text is case-folded and whitespace-normalized (words joined by single
    spaces) before grams are taken, so spaces participate in grams and
    "Blood  Type" embeds identically to "blood type".
    """
    if d < 16:
        raise ConfigError("embedding dimension must be >= 16")
    normalized = _WS_RE.sub(" ", text.casefold().strip())
    vec = np.zeros(d, dtype=np.float64)
    if len(normalized) < _GRAM:
        return vec
    for i in range(len(normalized) - _GRAM + 1):
        h = _hash64(normalized[i : i + _GRAM])
        sign = -1.0 if h >> 63 else 1.0
        vec[h % d] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return np.zeros(d, dtype=np.float64)
    return vec / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine over stored vectors; vectors are unit or zero, so this is a dot."""
    if a.shape != b.shape:
        raise ConfigError(f"embedding dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


class Embedder(Protocol):
    name: str
    d: int

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Default embedder: signed hashed character 3-grams."""

    def __init__(self, d: int = DEFAULT_DIM):
        self.d = d
        self.name = f"hash3gram-{d}"

    def embed(self, text: str) -> np.ndarray:
        return hash_embed(text, self.d)


class CachingEmbedder:
    """Memoizes an embedder by exact text.

    Returned vectors are shared between callers and must be treated as
    read-only. The cache resets wholesale at the size cap; reranking revisits
    the same candidate chunks for every query row, so hits dominate.
    """

    def __init__(self, inner: Embedder, max_entries: int = 200_000):
        self.inner = inner
        self.name = inner.name
        self.d = inner.d
        self.max_entries = max_entries
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, text: str) -> np.ndarray:
        vec = self._cache.get(text)
        if vec is None:
            vec = self.inner.embed(text)
            if len(self._cache) >= self.max_entries:
                self._cache.clear()
            self._cache[text] = vec
        return vec


class RemoteEmbedder:
    """Embedder behind an HTTP endpoint: {"texts": [...]} -> {"vectors": [[...]]}.

    Transport errors surface as retrieval errors, never as empty results.
    """

    def __init__(self, url: str, d: int, name: str = "remote", timeout: float = 30.0):
        import httpx

        self.url = url
        self.d = d
        self.name = name
        self.timeout = timeout
        self._client = httpx.Client(timeout=timeout)

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        import httpx

        try:
            response = self._client.post(self.url, json={"texts": texts})
            response.raise_for_status()
            vectors = response.json()["vectors"]
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise RetrievalError(f"remote embedder failed: {exc}") from exc
        if len(vectors) != len(texts):
            raise RetrievalError("remote embedder returned a mismatched vector count")
        return [np.asarray(v, dtype=np.float64) for v in vectors]


class VectorIndex:
    """One embedding per lake tuple; query is an exact cosine scan."""

    artifact_kind = KIND_SEMANTIC

    def __init__(
        self,
        refs: list[TupleRef],
        matrix: np.ndarray,
        embedder_name: str,
        d: int,
        lake_digest: str = "",
    ):
        self.refs = refs
        self.matrix = matrix  # shape (n_entries, d)
        self.embedder_name = embedder_name
        self.d = d
        self.lake_digest = lake_digest

    @classmethod
    def build(cls, tuples: Sequence[Tuple], embedder: Embedder, lake_digest: str = "") -> "VectorIndex":
        """Embed the full serialization of every tuple, canonical ref order."""
        if not tuples:
            raise IngestError("cannot index an empty lake")
        ordered = sorted(tuples, key=lambda t: t.ref.order_key())
        refs = [t.ref for t in ordered]
        matrix = np.stack([embedder.embed(serialize_record(t)) for t in ordered])
        return cls(refs, matrix, embedder.name, embedder.d, lake_digest)

    def query(self, query_vec: np.ndarray, n: int) -> list[tuple[TupleRef, float]]:
        """Top-n by cosine, descending; ties by (table_id, row_id)."""
        if n < 1:
            raise ConfigError("n must be >= 1")
        if query_vec.shape != (self.matrix.shape[1],):
            raise ConfigError("query embedding dimension does not match the index")
        scores = self.matrix @ query_vec
        order = sorted(range(len(self.refs)), key=lambda i: (-scores[i], self.refs[i].order_key()))
        return [(self.refs[i], float(scores[i])) for i in order[:n]]

    def query_text(self, text: str, n: int, embedder: Embedder) -> list[tuple[TupleRef, float]]:
        if embedder.name != self.embedder_name:
            raise ConfigError(
                f"index built with embedder {self.embedder_name!r}, queried with {embedder.name!r}"
            )
        return self.query(embedder.embed(text), n)

    # -- persistence ---------------------------------------------------------

    def to_body(self) -> bytes:
        buf = io.BytesIO()
        write_str(buf, self.embedder_name)
        buf.write(struct.pack("<IQ", self.d, len(self.refs)))
        for ref in self.refs:
            write_str(buf, ref.table_id)
            buf.write(struct.pack("<Q", ref.row_id))
        buf.write(np.ascontiguousarray(self.matrix, dtype="<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_body(cls, buf: io.BytesIO, lake_digest: str) -> "VectorIndex":
        embedder_name = read_str(buf)
        d, n_entries = struct.unpack("<IQ", buf.read(12))
        refs = []
        for _ in range(n_entries):
            table_id = read_str(buf)
            (row_id,) = struct.unpack("<Q", buf.read(8))
            refs.append(TupleRef(table_id, row_id))
        raw = buf.read(8 * d * n_entries)
        matrix = np.frombuffer(raw, dtype="<f8").reshape(n_entries, d).copy()
        return cls(refs, matrix, embedder_name, d, lake_digest)
