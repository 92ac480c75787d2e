"""Retrieval-backed cell imputation and validation over CSV data lakes."""

from .model import (
    ALL,
    CleaningConfig,
    Lineage,
    RepairSuggestion,
    TrailEntry,
    Tuple,
    TupleRef,
    is_dirty,
    project,
    serialize_record,
    serialize_tuple,
)

__version__ = "0.1.0"

__all__ = [
    "ALL",
    "CleaningConfig",
    "Lineage",
    "RepairSuggestion",
    "TrailEntry",
    "Tuple",
    "TupleRef",
    "is_dirty",
    "project",
    "serialize_record",
    "serialize_tuple",
    "__version__",
]
