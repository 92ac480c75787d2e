"""CSV ingestion, lake catalog, and index-artifact persistence.

Dialect is fixed: comma separator, RFC-style double-quote escaping, UTF-8.
Table identity is content-addressed so lineage stays stable across
re-registrations of unchanged files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .errors import ArtifactError, IngestError
from .model import Tuple, TupleRef, fold_name

CSV_DIALECT = dict(delimiter=",", quotechar='"', quoting=csv.QUOTE_MINIMAL)


def _file_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _check_quotes_balanced(text: str, name: str) -> None:
    """Reject input whose final quoted field is never closed.

    The csv module silently swallows an unterminated quote, so scan the raw
    text with the dialect's doubling rule before parsing.
    """
    in_quote = False
    line = 1
    quote_line = 0
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
        if ch == '"':
            if in_quote:
                if i + 1 < len(text) and text[i + 1] == '"':
                    i += 2  # escaped quote inside a quoted field
                    continue
                in_quote = False
            else:
                in_quote = True
                quote_line = line
        i += 1
    if in_quote:
        raise IngestError(f"{name}: unbalanced quote starting at line {quote_line}")


def load_table(source: Union[bytes, io.IOBase], name: str) -> tuple[str, list[Tuple]]:
    """Parse one CSV into tuples.

    The first record is the header. Missing trailing fields become absent
    values; a row with more fields than headers is a hard error (silent
    truncation would corrupt lineage).
    """
    if isinstance(source, bytes):
        data = source
    else:
        data = source.read()
        if isinstance(data, str):
            data = data.encode("utf-8")
    if not data.strip():
        raise IngestError(f"{name}: empty file")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IngestError(f"{name}: not valid UTF-8 ({exc})") from exc
    _check_quotes_balanced(text, name)

    reader = csv.reader(io.StringIO(text), strict=True, **CSV_DIALECT)
    try:
        rows = list(reader)
    except csv.Error as exc:
        raise IngestError(f"{name}: malformed CSV near line {reader.line_num}: {exc}") from exc
    if not rows:
        raise IngestError(f"{name}: empty file")

    header = rows[0]
    if not any(h.strip() for h in header):
        raise IngestError(f"{name}: header row has no non-empty column name")
    seen: set[str] = set()
    for idx, col in enumerate(header):
        if not col.strip():
            raise IngestError(f"{name}: empty header name in column {idx + 1}")
        folded = fold_name(col)
        if folded in seen:
            raise IngestError(f"{name}: duplicate header name {col!r} in column {idx + 1}")
        seen.add(folded)

    stem = Path(name).stem.casefold() or "table"
    table_id = f"{stem}-{_file_digest(data)[:8]}"

    tuples: list[Tuple] = []
    for row_id, row in enumerate(rows[1:]):
        if len(row) > len(header):
            raise IngestError(
                f"{name}: row {row_id + 1} has {len(row)} fields but the header has {len(header)}"
            )
        values: list[Optional[str]] = list(row) + [None] * (len(header) - len(row))
        tuples.append(Tuple(table_id, row_id, tuple(zip(header, values))))
    return table_id, tuples


@dataclass(frozen=True)
class TableInfo:
    table_id: str
    name: str
    columns: tuple[str, ...]
    row_count: int
    digest: str


@dataclass(frozen=True)
class LakeCatalog:
    """What the lake holds: per-table schema, row counts, and content digests.

    The lake digest is order-independent over files but content-dependent.
    """

    lake_id: str
    tables: tuple[TableInfo, ...]
    created_at: str

    @property
    def digest(self) -> str:
        return lake_digest_of(info.digest for info in self.tables)

    def to_json(self) -> dict:
        return {
            "lake_id": self.lake_id,
            "digest": self.digest,
            "created_at": self.created_at,
            "tables": [
                {
                    "table_id": t.table_id,
                    "name": t.name,
                    "columns": list(t.columns),
                    "rows": t.row_count,
                    "digest": t.digest,
                }
                for t in self.tables
            ],
        }


def lake_digest_of(table_digests: Iterable[str]) -> str:
    joined = "\n".join(sorted(table_digests))
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()


class Lake:
    """A registered data lake: catalog plus the loaded tuples, ref-resolvable."""

    def __init__(self, catalog: LakeCatalog, tables: dict[str, list[Tuple]], warnings: Sequence[str] = ()):
        self.catalog = catalog
        self._tables = tables
        self.warnings = tuple(warnings)

    @property
    def digest(self) -> str:
        return self.catalog.digest

    def tuples(self) -> list[Tuple]:
        """All lake tuples in canonical (table_id, row_id) order."""
        out: list[Tuple] = []
        for table_id in sorted(self._tables):
            out.extend(self._tables[table_id])
        return out

    def resolve(self, ref: TupleRef) -> Tuple:
        rows = self._tables.get(ref.table_id)
        if rows is None or not 0 <= ref.row_id < len(rows):
            raise KeyError(f"unresolvable tuple ref {ref.table_id}:{ref.row_id}")
        return rows[ref.row_id]

    def table_name(self, table_id: str) -> str:
        for info in self.catalog.tables:
            if info.table_id == table_id:
                return info.name
        raise KeyError(f"unknown table {table_id}")


def register_lake(source: Union[str, Path, Sequence[tuple[str, bytes]]]) -> Lake:
    """Load a folder of CSV files (or an in-memory list) into a lake.

    Individual bad files become warnings; registration fails only when no
    table loads.
    """
    items: list[tuple[str, bytes]] = []
    if isinstance(source, (str, Path)):
        root = Path(source)
        if not root.is_dir():
            raise IngestError(f"datalake path {root} is not a directory")
        for path in sorted(root.glob("*.csv")):
            items.append((path.name, path.read_bytes()))
    else:
        items = [(name, data) for name, data in source]

    tables: dict[str, list[Tuple]] = {}
    infos: list[TableInfo] = []
    warnings: list[str] = []
    for name, data in items:
        try:
            table_id, tuples = load_table(data, name)
        except IngestError as exc:
            warnings.append(str(exc))
            continue
        columns = tuples[0].names() if tuples else _header_of(data)
        tables[table_id] = tuples
        infos.append(TableInfo(table_id, name, columns, len(tuples), _file_digest(data)))
    if not tables:
        raise IngestError("no loadable tables in datalake")

    infos.sort(key=lambda i: i.table_id)
    digest = lake_digest_of(i.digest for i in infos)
    catalog = LakeCatalog(
        lake_id=f"lake-{digest[:12]}",
        tables=tuple(infos),
        created_at=datetime.now(timezone.utc).isoformat(),
    )
    return Lake(catalog, tables, warnings)


def _header_of(data: bytes) -> tuple[str, ...]:
    reader = csv.reader(io.StringIO(data.decode("utf-8")), **CSV_DIALECT)
    for row in reader:
        return tuple(row)
    return ()


# ---------------------------------------------------------------------------
# Index artifact framing. Layout (little-endian, documented in README):
#   magic b"LMIX" | u16 version | u8 kind | u16 len + utf8 lake digest | body
# The body is produced by the index module; load is refused on a bad magic,
# an unknown version, or a digest that no longer matches the catalog.
# ---------------------------------------------------------------------------

ARTIFACT_MAGIC = b"LMIX"
ARTIFACT_VERSION = 1
KIND_SYNTACTIC = 1
KIND_SEMANTIC = 2


def write_str(buf: io.BytesIO, s: str) -> None:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ArtifactError("string too long for artifact format")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def read_str(buf: io.BytesIO) -> str:
    (length,) = struct.unpack("<H", _take(buf, 2))
    return _take(buf, length).decode("utf-8")


def _take(buf: io.BytesIO, count: int) -> bytes:
    data = buf.read(count)
    if len(data) != count:
        raise ArtifactError("truncated index artifact")
    return data


def persist_index(index, path: Union[str, Path]) -> None:
    """Write an index artifact. The index supplies (kind, lake_digest, body bytes)."""
    buf = io.BytesIO()
    buf.write(ARTIFACT_MAGIC)
    buf.write(struct.pack("<H", ARTIFACT_VERSION))
    buf.write(struct.pack("<B", index.artifact_kind))
    write_str(buf, index.lake_digest)
    buf.write(index.to_body())
    Path(path).write_bytes(buf.getvalue())


def load_index(path: Union[str, Path], expected_lake_digest: Optional[str] = None):
    """Read an index artifact back; queries over the result are bit-identical.

    When ``expected_lake_digest`` is given (the current catalog digest), a
    stale artifact is refused.
    """
    from . import semantic, syntactic  # local import, avoids a cycle

    data = Path(path).read_bytes()
    buf = io.BytesIO(data)
    magic = buf.read(4)
    if magic != ARTIFACT_MAGIC:
        raise ArtifactError(f"{path}: bad magic bytes, not an index artifact")
    (version,) = struct.unpack("<H", _take(buf, 2))
    if version != ARTIFACT_VERSION:
        raise ArtifactError(f"{path}: unsupported artifact version {version}")
    (kind,) = struct.unpack("<B", _take(buf, 1))
    digest = read_str(buf)
    if expected_lake_digest is not None and digest != expected_lake_digest:
        raise ArtifactError(
            f"{path}: artifact digest {digest[:12]}… does not match the registered lake"
        )
    try:
        if kind == KIND_SYNTACTIC:
            return syntactic.InvertedIndex.from_body(buf, digest)
        if kind == KIND_SEMANTIC:
            return semantic.VectorIndex.from_body(buf, digest)
    except ArtifactError:
        raise
    except (struct.error, ValueError, EOFError) as exc:
        raise ArtifactError(f"{path}: artifact body is corrupt or truncated ({exc})") from exc
    raise ArtifactError(f"{path}: unknown index kind {kind}")
