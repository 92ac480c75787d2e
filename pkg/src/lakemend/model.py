"""Domain types shared by every stage: tuples, cleaning configuration,
suggestions, plus the serialization / dirty-detection / projection primitives.

Everything here is immutable after construction and safe to share across
worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

from .errors import ConfigError


class AllColumns:
    """Sentinel meaning "every column except the dirty one"."""

    _instance: Optional["AllColumns"] = None

    def __new__(cls) -> "AllColumns":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ALL"


ALL = AllColumns()

ColumnSelection = Union[Sequence[str], AllColumns]


def fold_name(name: str) -> str:
    """Canonical form for attribute-name comparison: trimmed, case-folded."""
    return name.strip().casefold()


def normalize_value(value: str) -> str:
    """Normalization used for value comparison and evaluation: trim + case-fold."""
    return value.strip().casefold()


@dataclass(frozen=True)
class TupleRef:
    """Provenance handle for a tuple inside a registered lake."""

    table_id: str
    row_id: int

    def order_key(self) -> tuple[str, int]:
        return (self.table_id, self.row_id)


@dataclass(frozen=True)
class Tuple:
    """One record: ordered (attribute, value) pairs with table/row identity.

    Values are text or None (absent). Attribute order is the source column
    order and is preserved through every operation.
    """

    table_id: str
    row_id: int
    attrs: tuple[tuple[str, Optional[str]], ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for name, _ in self.attrs:
            folded = fold_name(name)
            if folded in seen:
                raise ConfigError(f"duplicate attribute name {name!r} in tuple")
            seen.add(folded)

    @property
    def ref(self) -> TupleRef:
        return TupleRef(self.table_id, self.row_id)

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.attrs)

    def has(self, name: str) -> bool:
        folded = fold_name(name)
        return any(fold_name(a) == folded for a, _ in self.attrs)

    def get(self, name: str) -> Optional[str]:
        folded = fold_name(name)
        for attr, value in self.attrs:
            if fold_name(attr) == folded:
                return value
        raise ConfigError(f"unknown attribute {name!r}")

    def canonical_name(self, name: str) -> str:
        """The attribute name as spelled in this tuple."""
        folded = fold_name(name)
        for attr, _ in self.attrs:
            if fold_name(attr) == folded:
                return attr
        raise ConfigError(f"unknown attribute {name!r}")


@dataclass(frozen=True)
class Lineage:
    """Provenance of a suggested value: one cell of the registered lake."""

    source_table: str
    source_row: int
    source_attribute: str


@dataclass(frozen=True)
class TrailEntry:
    """One reasoner decision recorded for explainability."""

    ref: TupleRef
    matched: bool


@dataclass(frozen=True)
class RepairSuggestion:
    """Outcome for one row: the inferred value plus provenance and audit trail."""

    row_id: int
    dirty_column: str
    suggested_value: Optional[str] = None
    lineage: Optional[Lineage] = None
    existing_value: Optional[str] = None
    is_conflict: bool = False
    candidate_trail: tuple[TrailEntry, ...] = ()


REASONER_MODES = ("remote", "local")
INDEXER_MODES = ("syntactic", "semantic")
RERANKER_MODES = ("maxsim", "cross", "none")


@dataclass(frozen=True)
class CleaningConfig:
    """Full job specification.

    ``datalake`` absent means the direct-prompt scenario; present means
    retrieval. ``relevant_columns`` is a list of pivot names or ALL
    (every column except the dirty one).
    """

    table: str
    dirty_column: str
    relevant_columns: ColumnSelection = ALL
    dirty_marker: str = "NULL"
    datalake: Optional[str] = None
    reasoner_mode: str = "remote"
    indexer_mode: str = "syntactic"
    reranker_mode: str = "maxsim"
    n: int = 100
    k: int = 5
    repair_mode: bool = False

    def validate(self) -> None:
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(f"{f}: {m}" for f, m in problems))

    def problems(self) -> list[tuple[str, str]]:
        """Field-level validation messages, empty when the config is sound."""
        out: list[tuple[str, str]] = []
        if not isinstance(self.relevant_columns, AllColumns):
            folded = {fold_name(c) for c in self.relevant_columns}
            if fold_name(self.dirty_column) in folded:
                out.append(("relevant_columns", "dirty_column must not be a relevant column"))
        if self.n < 1:
            out.append(("n", "n must be a positive integer"))
        if self.k < 1:
            out.append(("k", "k must be a positive integer"))
        if self.k > self.n:
            out.append(("k", "k must not exceed n"))
        if self.reasoner_mode not in REASONER_MODES:
            out.append(("reasoner_mode", f"unknown reasoner mode {self.reasoner_mode!r}"))
        if self.indexer_mode not in INDEXER_MODES:
            out.append(("indexer_mode", f"unknown indexer mode {self.indexer_mode!r}"))
        if self.reranker_mode not in RERANKER_MODES:
            out.append(("reranker_mode", f"unknown reranker mode {self.reranker_mode!r}"))
        if self.datalake is None and self.reasoner_mode == "local":
            # The local reasoner decides query/candidate pairs; without a lake
            # there is no candidate side.
            out.append(("reasoner_mode", "local reasoner requires a datalake"))
        return out

    def with_overrides(self, **kw) -> "CleaningConfig":
        return replace(self, **kw)


def resolve_pivots(t: Tuple, dirty: str, pivots: ColumnSelection) -> tuple[str, ...]:
    """Pivot names in tuple order, validated against the tuple's schema.

    ALL expands to every attribute except the dirty one. The dirty column is
    never an acceptable pivot.
    """
    dirty_folded = fold_name(dirty)
    if not t.has(dirty):
        raise ConfigError(f"unknown attribute {dirty!r}")
    if isinstance(pivots, AllColumns):
        return tuple(name for name, _ in t.attrs if fold_name(name) != dirty_folded)
    wanted = set()
    for p in pivots:
        folded = fold_name(p)
        if folded == dirty_folded:
            raise ConfigError(f"dirty column {dirty!r} cannot be a pivot")
        if not t.has(p):
            raise ConfigError(f"unknown attribute {p!r}")
        wanted.add(folded)
    return tuple(name for name, _ in t.attrs if fold_name(name) in wanted)


def serialize_tuple(t: Tuple, dirty: str, pivots: ColumnSelection) -> str:
    """Render the prompt/query form: pivots in tuple order, dirty slot last, empty.

    ``[p1 : v1 ; p2 : v2 ; ... ; dirty : ]``. Values are emitted verbatim,
    absent values as empty text. Non-pivot, non-dirty attributes are omitted.
    """
    names = resolve_pivots(t, dirty, pivots)
    parts = [f"{t.canonical_name(n)} : {t.get(n) or ''}" for n in names]
    parts.append(f"{t.canonical_name(dirty)} : ")
    return "[" + " ; ".join(parts) + "]"


def serialize_record(t: Tuple, cols: ColumnSelection = ALL) -> str:
    """Render a tuple with its values: ``[a : v1 ; b : v2]``.

    Used for indexing and for the candidate side of pair prompts. Attributes
    with absent values contribute nothing; ALL here means every attribute.
    """
    if isinstance(cols, AllColumns):
        names: Iterable[str] = (name for name, _ in t.attrs)
    else:
        names = (name for name, _ in project(t, cols).attrs)
    parts = [
        f"{t.canonical_name(n)} : {t.get(n)}" for n in names if t.get(n) is not None
    ]
    return "[" + " ; ".join(parts) + "]"


def is_dirty(value: Optional[str], marker: str) -> bool:
    """True iff the cell counts as missing: absent, blank, or marker-equal.

    Marker comparison is whitespace-trimmed and case-insensitive.
    """
    if value is None:
        return True
    trimmed = value.strip()
    if not trimmed:
        return True
    return trimmed.casefold() == marker.strip().casefold()


def project(t: Tuple, cols: ColumnSelection) -> Tuple:
    """Keep only the named attributes, preserving tuple order. ALL is identity."""
    if isinstance(cols, AllColumns):
        return t
    wanted = set()
    for c in cols:
        if not t.has(c):
            raise ConfigError(f"unknown attribute {c!r}")
        wanted.add(fold_name(c))
    kept = tuple((name, value) for name, value in t.attrs if fold_name(name) in wanted)
    return Tuple(t.table_id, t.row_id, kept)
