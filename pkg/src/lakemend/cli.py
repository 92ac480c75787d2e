"""Command line entry points: index, clean, evaluate, serve.

The config file is key = value lines in the configuration shape users write
by hand: quoted strings, a bracketed list or the bare keyword ALL for
relevant_columns, bare True/False, and # comments. Exit codes: 0 success,
1 configuration error, 2 runtime error; errors go to stderr as one JSON
object so scripts can parse them.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Union

from .errors import ConfigError, LakemendError
from .ingest import load_index, load_table, persist_index, register_lake
from .model import ALL, AllColumns, CleaningConfig
from .pipeline import apply_suggestions, clean, evaluate, results_to_json_bytes, suggestion_from_json
from .reason import HttpModelClient
from .semantic import CachingEmbedder, HashingEmbedder, VectorIndex
from .syntactic import InvertedIndex

CONFIG_KEYS = {
    "table": str,
    "dirty_column": str,
    "relevant_columns": object,  # list of names or ALL
    "value": str,
    "datalake": str,
    "is_local_model": bool,
    "indexer": str,
    "reranker": str,
    "n": int,
    "k": int,
    "repair": bool,
}
REQUIRED_KEYS = ("table", "dirty_column")


def _strip_comment(line: str) -> str:
    """Drop a # comment, ignoring # inside quoted text."""
    quote: Optional[str] = None
    for i, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "#":
            return line[:i]
    return line


def _parse_scalar(text: str, key: str):
    text = text.strip()
    if text == "ALL":
        return ALL
    if text == "True":
        return True
    if text == "False":
        return False
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError(f"{key}: unterminated list")
        inner = text[1:-1].strip()
        if not inner:
            return []
        items = []
        for part in inner.split(","):
            part = part.strip()
            if len(part) >= 2 and part[0] == part[-1] and part[0] in "'\"":
                items.append(part[1:-1])
            else:
                raise ConfigError(f"{key}: list items must be quoted strings")
        return items
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse value {text!r}")


def parse_config_file(path: Union[str, Path]) -> CleaningConfig:
    """Read a key = value config file into a validated CleaningConfig."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw: dict[str, object] = {}
    for line_no, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        line = _strip_comment(line).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key = value")
        key, _, value_text = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {line_no}: unknown config key {key!r}")
        if key in raw:
            raise ConfigError(f"line {line_no}: duplicate config key {key!r}")
        raw[key] = _parse_scalar(value_text, key)

    for key in REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(f"config is missing required key {key!r}")
    for key, value in raw.items():
        expected = CONFIG_KEYS[key]
        if expected is object:
            if not isinstance(value, (list, AllColumns)):
                raise ConfigError("relevant_columns must be a list of names or ALL")
        elif expected is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"{key} must be True or False")
        elif expected is int:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{key} must be an integer")
        elif not isinstance(value, str):
            raise ConfigError(f"{key} must be a quoted string")

    base = path.parent

    def _resolve(p: object) -> str:
        candidate = Path(str(p))
        return str(candidate if candidate.is_absolute() else base / candidate)

    config = CleaningConfig(
        table=_resolve(raw["table"]),
        dirty_column=str(raw["dirty_column"]),
        relevant_columns=raw.get("relevant_columns", ALL),  # type: ignore[arg-type]
        dirty_marker=str(raw.get("value", "NULL")),
        datalake=_resolve(raw["datalake"]) if "datalake" in raw else None,
        reasoner_mode="local" if raw.get("is_local_model", False) else "remote",
        indexer_mode=str(raw.get("indexer", "syntactic")),
        reranker_mode=str(raw.get("reranker", "maxsim")),
        n=int(raw.get("n", 100)),  # type: ignore[arg-type]
        k=int(raw.get("k", 5)),  # type: ignore[arg-type]
        repair_mode=bool(raw.get("repair", False)),
    )
    config.validate()
    return config


def _fail(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    return code


def _cmd_index(args: argparse.Namespace) -> int:
    lake = register_lake(args.lake)
    if args.mode == "semantic":
        index: Union[InvertedIndex, VectorIndex] = VectorIndex.build(
            lake.tuples(), CachingEmbedder(HashingEmbedder()), lake.digest
        )
    else:
        index = InvertedIndex.build(lake.tuples(), lake_digest=lake.digest)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    persist_index(index, out)
    print(
        json.dumps(
            {
                "lake_id": lake.catalog.lake_id,
                "tables": len(lake.catalog.tables),
                "tuples": len(lake.tuples()),
                "mode": args.mode,
                "out": str(out),
            }
        )
    )
    return 0


def _cmd_clean(args: argparse.Namespace) -> int:
    config = parse_config_file(args.config)
    table_path = Path(config.table)
    if not table_path.is_file():
        raise ConfigError(f"table file not found: {table_path}")
    _, rows = load_table(table_path.read_bytes(), table_path.name)

    client = None
    if config.reasoner_mode == "remote":
        url = os.environ.get("LAKEMEND_MODEL_URL")
        if not url:
            raise ConfigError("remote reasoner needs LAKEMEND_MODEL_URL set")
        key_env = os.environ.get("LAKEMEND_MODEL_KEY_ENV", "LAKEMEND_MODEL_KEY")
        client = HttpModelClient(url, auth_env=key_env)

    lake = index = None
    if config.datalake is not None:
        lake = register_lake(config.datalake)
        if args.index:
            index = load_index(args.index, lake.digest)
        elif config.indexer_mode == "semantic":
            index = VectorIndex.build(lake.tuples(), CachingEmbedder(HashingEmbedder()), lake.digest)
        else:
            index = InvertedIndex.build(lake.tuples(), lake_digest=lake.digest)

    job = clean(config, rows, lake, index, client=client, embedder=CachingEmbedder(HashingEmbedder()))
    if job.status == "failed":
        raise LakemendError(job.error or "job failed")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(results_to_json_bytes(job.results))
    if args.export:
        cleaned = apply_suggestions(
            table_path.read_bytes(), job.results, apply_repairs=args.apply_repairs
        )
        Path(args.export).write_bytes(cleaned)
    print(
        json.dumps(
            {
                "status": job.status,
                "rows": len(job.results),
                "telemetry": job.telemetry.to_json(),
                "warnings": len(job.warnings),
                "out": str(out),
            }
        )
    )
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    results_path = Path(args.results)
    if not results_path.is_file():
        raise ConfigError(f"results file not found: {results_path}")
    truth_path = Path(args.truth)
    if not truth_path.is_file():
        raise ConfigError(f"truth file not found: {truth_path}")
    results = [suggestion_from_json(obj) for obj in json.loads(results_path.read_text("utf-8"))]
    _, truth_rows = load_table(truth_path.read_bytes(), truth_path.name)
    if truth_rows and not truth_rows[0].has(args.column):
        raise ConfigError(f"truth table has no column {args.column!r}")
    truth = {t.row_id: t.get(args.column) for t in truth_rows}
    report = evaluate(results, truth, dataset=truth_path.stem)
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_json(), indent=2, ensure_ascii=False) + "\n", "utf-8"
        )
    print(f"accuracy {report.accuracy:.3f}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(state_dir=args.state_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lakemend", description="Retrieval-backed data cleaning")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build an index artifact over a lake folder")
    p_index.add_argument("--lake", required=True, help="folder of CSV files")
    p_index.add_argument("--mode", choices=("syntactic", "semantic"), default="syntactic")
    p_index.add_argument("--out", required=True, help="artifact file to write")
    p_index.set_defaults(func=_cmd_index)

    p_clean = sub.add_parser("clean", help="run a cleaning job from a config file")
    p_clean.add_argument("--config", required=True)
    p_clean.add_argument("--out", required=True, help="results JSON path")
    p_clean.add_argument("--index", help="prebuilt index artifact (else built in memory)")
    p_clean.add_argument("--export", help="write the cleaned CSV here")
    p_clean.add_argument("--apply-repairs", action="store_true", help="overwrite conflicting cells too")
    p_clean.set_defaults(func=_cmd_clean)

    p_eval = sub.add_parser("evaluate", help="score results against a ground-truth column")
    p_eval.add_argument("--results", required=True)
    p_eval.add_argument("--truth", required=True, help="CSV with the ground-truth column")
    p_eval.add_argument("--column", required=True)
    p_eval.add_argument("--out", help="write the full report JSON here")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--state-dir", default=None)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(exc, 1)
    except LakemendError as exc:
        return _fail(exc, 2)
    except OSError as exc:
        return _fail(exc, 2)


if __name__ == "__main__":
    sys.exit(main())
