"""Q-gram inverted index with BM25 scoring over serialized lake tuples.

Tokens are whole words plus their contiguous q-grams, so exact-word matches
outscore partial-gram matches while typos still share most grams.
"""

from __future__ import annotations

import io
import math
import re
import struct
from collections import Counter
from typing import Sequence

from .errors import ConfigError, IngestError
from .ingest import KIND_SYNTACTIC, read_str, write_str
from .model import Tuple, TupleRef, serialize_record

DEFAULT_Q = 3
DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

# alphanumeric runs, unicode-aware, underscore excluded
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str, q: int = DEFAULT_Q) -> list[str]:
    """Token multiset: each case-folded word plus its q-grams when longer than q."""
    if q < 1:
        raise ConfigError("q must be >= 1")
    tokens: list[str] = []
    for word in _WORD_RE.findall(text.casefold()):
        tokens.append(word)
        if len(word) > q:
            tokens.extend(word[i : i + q] for i in range(len(word) - q + 1))
    return tokens


class InvertedIndex:
    """Postings over tuple serializations with BM25 statistics.

    score(d) = sum over query tokens t of
        idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
    with idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)).
    """

    artifact_kind = KIND_SYNTACTIC

    def __init__(
        self,
        refs: list[TupleRef],
        doc_len: list[int],
        postings: dict[str, list[tuple[int, int]]],
        q: int,
        k1: float,
        b: float,
        lake_digest: str = "",
    ):
        self.refs = refs
        self.doc_len = doc_len
        self.postings = postings  # token -> [(doc index, term frequency)]
        self.q = q
        self.k1 = k1
        self.b = b
        self.lake_digest = lake_digest
        self.doc_count = len(refs)
        self.avg_doc_len = sum(doc_len) / len(doc_len) if doc_len else 0.0

    # -- construction -------------------------------------------------------

    @classmethod
    def build(
        cls,
        tuples: Sequence[Tuple],
        q: int = DEFAULT_Q,
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
        lake_digest: str = "",
    ) -> "InvertedIndex":
        """Index the full serialization (all columns, values included) of every tuple."""
        if not tuples:
            raise IngestError("cannot index an empty lake")
        ordered = sorted(tuples, key=lambda t: t.ref.order_key())
        refs: list[TupleRef] = []
        doc_len: list[int] = []
        postings: dict[str, list[tuple[int, int]]] = {}
        for doc_idx, t in enumerate(ordered):
            tokens = tokenize(serialize_record(t), q)
            refs.append(t.ref)
            doc_len.append(len(tokens))
            for token, tf in sorted(Counter(tokens).items()):
                postings.setdefault(token, []).append((doc_idx, tf))
        return cls(refs, doc_len, postings, q, k1, b, lake_digest)

    # -- querying ------------------------------------------------------------

    def idf(self, token: str) -> float:
        df = len(self.postings.get(token, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def query(self, text: str, n: int) -> list[tuple[TupleRef, float]]:
        """Top-n by BM25, score descending; ties by (table_id, row_id).

        Documents sharing no token with the query are excluded.
        """
        if n < 1:
            raise ConfigError("n must be >= 1")
        scores: dict[int, float] = {}
        for token in tokenize(text, self.q):
            plist = self.postings.get(token)
            if not plist:
                continue
            idf = self.idf(token)
            for doc_idx, tf in plist:
                norm = self.k1 * (1.0 - self.b + self.b * self.doc_len[doc_idx] / self.avg_doc_len)
                scores[doc_idx] = scores.get(doc_idx, 0.0) + idf * tf * (self.k1 + 1.0) / (tf + norm)
        ranked = sorted(
            ((idx, s) for idx, s in scores.items() if s > 0.0),
            key=lambda pair: (-pair[1], self.refs[pair[0]].order_key()),
        )
        return [(self.refs[idx], s) for idx, s in ranked[:n]]

    # -- persistence ---------------------------------------------------------

    def to_body(self) -> bytes:
        buf = io.BytesIO()
        buf.write(struct.pack("<IddQd", self.q, self.k1, self.b, self.doc_count, self.avg_doc_len))
        for ref, dl in zip(self.refs, self.doc_len):
            write_str(buf, ref.table_id)
            buf.write(struct.pack("<QQ", ref.row_id, dl))
        buf.write(struct.pack("<Q", len(self.postings)))
        for token in sorted(self.postings):
            plist = self.postings[token]
            write_str(buf, token)
            buf.write(struct.pack("<Q", len(plist)))
            for doc_idx, tf in plist:
                buf.write(struct.pack("<QQ", doc_idx, tf))
        return buf.getvalue()

    @classmethod
    def from_body(cls, buf: io.BytesIO, lake_digest: str) -> "InvertedIndex":
        q, k1, b, doc_count, avg_doc_len = struct.unpack("<IddQd", buf.read(struct.calcsize("<IddQd")))
        refs: list[TupleRef] = []
        doc_len: list[int] = []
        for _ in range(doc_count):
            table_id = read_str(buf)
            row_id, dl = struct.unpack("<QQ", buf.read(16))
            refs.append(TupleRef(table_id, row_id))
            doc_len.append(dl)
        (n_tokens,) = struct.unpack("<Q", buf.read(8))
        postings: dict[str, list[tuple[int, int]]] = {}
        for _ in range(n_tokens):
            token = read_str(buf)
            (length,) = struct.unpack("<Q", buf.read(8))
            plist = [struct.unpack("<QQ", buf.read(16)) for _ in range(length)]
            postings[token] = [(int(d), int(tf)) for d, tf in plist]
        index = cls(refs, doc_len, postings, q, k1, b, lake_digest)
        # stored mean wins over the recomputed one so scores stay bit-exact
        index.avg_doc_len = avg_doc_len
        return index
