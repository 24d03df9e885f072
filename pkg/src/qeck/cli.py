"""Command-line entry point: ``qeck <command> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage error. JSON goes to
stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from collections import Counter
from datetime import datetime, timezone
from typing import Dict, List, Optional

from . import __version__
from .code_ingest import ingest_jsonl, ingest_tree
from .engine import ConfigurationError, QeckConfig, baseline_search, check_analyzers, qeck_search
from .evaluation import compare_runs, format_table, read_judgments, read_run
from .index import IndexStoreError, InvertedIndex
from .qa_ingest import PostsParseError, build_qa_index, pair_dump, read_id_list, read_pairs_jsonl
from .sweep import DEFAULT_N_VALUES, format_sweep, sweep
from .text import AnalyzerConfig, default_stopwords, load_stopwords

log = logging.getLogger("qeck")

CONFIG_ENV = "QECK_CONFIG"
_CONFIG_KEYS = {
    "m": int,
    "n": int,
    "k": int,
    "first_pass_pool": int,
    "df_cutoff": float,
    "question_weight": float,
    "answer_weight": float,
    "idf_source": str,
}


class UsageError(Exception):
    pass


def _emit(payload) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True, ensure_ascii=False)
    sys.stdout.write("\n")


def _analyzer_from_args(args) -> AnalyzerConfig:
    stopwords = load_stopwords(args.stopwords) if args.stopwords else default_stopwords()
    return AnalyzerConfig(stopwords=stopwords, min_token_length=args.min_token_length,
                          keep_digits=args.keep_digits)


def _add_analyzer_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stopwords", help="stop-word file (one word per line) replacing the built-in list")
    p.add_argument("--min-token-length", type=int, default=2)
    p.add_argument("--keep-digits", action="store_true")


def read_config_file(path) -> Dict[str, object]:
    """``key = value`` lines, ``#`` comments; an optional ``[qeck]`` header is allowed."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if not text.lstrip().startswith("["):
        text = "[qeck]\n" + text
    parser.read_string(text, source=str(path))
    section = parser["qeck"] if parser.has_section("qeck") else parser[parser.sections()[0]]
    out = {}
    for key, raw in section.items():
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}: unknown config key {key!r}")
        out[key] = _CONFIG_KEYS[key](raw.strip().strip('"').strip("'"))
    return out


def resolve_config(args, analyzer: AnalyzerConfig) -> QeckConfig:
    """Flags override the config file, which overrides built-in defaults."""
    values: Dict[str, object] = {}
    config_path = args.config or os.environ.get(CONFIG_ENV)
    if config_path:
        values.update(read_config_file(config_path))
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if "m" in values and "first_pass_pool" not in values:
        values["first_pass_pool"] = max(QeckConfig.first_pass_pool, int(values["m"]))
    return QeckConfig(analyzer=analyzer, **values)


def run_manifest(config: QeckConfig, args, timestamp: bool = True) -> dict:
    manifest = {
        "config": config.to_dict(),
        "qa_index_path": getattr(args, "qa", None),
        "code_index_path": getattr(args, "code", None),
        "tool_version": __version__,
    }
    if timestamp:
        manifest["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return manifest


# -- commands ------------------------------------------------------------------


def cmd_build_qa_index(args) -> int:
    analyzer = _analyzer_from_args(args)
    counters: Counter = Counter()
    if args.posts:
        pairs = pair_dump(args.posts, args.tag, counters)
    else:
        pairs = [p for p in read_pairs_jsonl(args.pairs) if args.tag.lower() in p.tags]
        counters["pairs"] = len(pairs)
    exclude = read_id_list(args.exclude_ids) if args.exclude_ids else set()
    index = build_qa_index(pairs, analyzer, args.out, exclude_ids=exclude, counters=counters)
    stats = index.stats
    _emit({
        "index": args.out,
        "pair_count": stats.doc_count,
        "avg_doc_length": stats.avg_doc_length,
        "counters": dict(sorted(counters.items())),
    })
    return 0


def cmd_build_code_index(args) -> int:
    analyzer = _analyzer_from_args(args)
    counters: Counter = Counter()
    if args.src:
        if not os.path.isdir(args.src):
            raise FileNotFoundError(f"source directory not found: {args.src}")
        index = ingest_tree(args.src, analyzer, args.out, counters)
    else:
        index = ingest_jsonl(args.jsonl, analyzer, args.out, counters)
    stats = index.stats
    if stats.doc_count == 0:
        print("warning: no methods found; the index is empty", file=sys.stderr)
    _emit({
        "index": args.out,
        "snippet_count": stats.doc_count,
        "avg_doc_length": stats.avg_doc_length,
        "counters": dict(sorted(counters.items())),
    })
    return 0


def _read_queries(path) -> Dict[str, str]:
    queries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'query_id<TAB>query text'")
            qid, text = line.split("\t", 1)
            queries[qid.strip()] = text.strip()
    return queries


def _open_indexes(args):
    qa = InvertedIndex.open(args.qa)
    code = InvertedIndex.open(args.code)
    return qa, code


def _search_record(qa, code, text: str, config: QeckConfig, args) -> dict:
    if args.baseline:
        result = baseline_search(code, text, config)
    else:
        result = qeck_search(qa, code, text, config)
    record = result.to_dict()
    if not args.explain:
        record = {"query": record["query"], "hits": record["hits"]}
    return record


def cmd_search(args) -> int:
    qa, code = _open_indexes(args)
    config = resolve_config(args, qa.analyzer)
    check_analyzers(config, qa, code)
    manifest = run_manifest(config, args, timestamp=not args.no_timestamp)
    manifest["baseline"] = bool(args.baseline)
    if args.query is not None:
        record = _search_record(qa, code, args.query, config, args)
        if args.format == "text":
            for hit in record["hits"]:
                print(f"{hit['rank']:>3}  {hit['score']:.6f}  {hit['doc_id']}")
            return 0
        _emit({"manifest": manifest, **record})
        return 0
    queries = _read_queries(args.queries)
    results = {qid: _search_record(qa, code, queries[qid], config, args) for qid in sorted(queries)}
    if args.format == "text":
        for qid, record in results.items():
            for hit in record["hits"]:
                print(f"{qid}\t{hit['rank']}\t{hit['score']:.6f}\t{hit['doc_id']}")
        return 0
    _emit({"manifest": manifest, "results": results})
    return 0


def cmd_eval(args) -> int:
    if len(args.run) > 2:
        raise UsageError("--run may be given at most twice")
    judgments = read_judgments(args.judgments)
    runs = {}
    for path in args.run:
        name = os.path.splitext(os.path.basename(path))[0]
        while name in runs:
            name += "'"
        runs[name] = read_run(path)
    comparison = compare_runs(runs, judgments, args.k)
    if args.format == "text":
        print(format_table(comparison))
        return 0
    payload = comparison.to_dict()
    payload["table"] = format_table(comparison).splitlines()
    _emit(payload)
    return 0


def cmd_sweep(args) -> int:
    qa, code = _open_indexes(args)
    config = resolve_config(args, qa.analyzer)
    check_analyzers(config, qa, code)
    values = [int(v) for v in args.values.split(",")] if args.values else list(DEFAULT_N_VALUES)
    rows = sweep(qa, code, _read_queries(args.queries), read_judgments(args.judgments),
                 parameter=args.param, values=values, config=config)
    if args.format == "text":
        print(format_sweep(rows))
        return 0
    _emit({
        "manifest": run_manifest(config, args, timestamp=not args.no_timestamp),
        "parameter": args.param,
        "rows": [r.to_dict() for r in rows],
    })
    return 0


# -- parser --------------------------------------------------------------------


def _add_engine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--qa", required=True, help="Q&A pair index directory")
    p.add_argument("--code", required=True, help="code snippet index directory")
    p.add_argument("--m", type=int, help="feedback pairs (default 5)")
    p.add_argument("--n", type=int, help="expansion words (default 9)")
    p.add_argument("--k", type=int, help="results per query (default 10)")
    p.add_argument("--first-pass-pool", type=int, help="BM25 candidates fused in the first pass (default 50)")
    p.add_argument("--df-cutoff", type=float, help="max collection document fraction for expansion words")
    p.add_argument("--idf-source", choices=["collection", "feedback"])
    p.add_argument("--config", help=f"key=value config file (default: ${CONFIG_ENV})")
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from the run manifest")
    p.add_argument("--format", choices=["json", "text"], default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qeck", description="Crowd-knowledge query expansion for code search.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-qa-index", help="build the Q&A pair index from a posts.xml dump")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--posts", help="Stack Exchange posts.xml")
    src.add_argument("--pairs", help="pre-paired JSONL (one Q&A pair per line)")
    p.add_argument("--tag", default="android", help="required question tag (default: android)")
    p.add_argument("--out", required=True)
    p.add_argument("--exclude-ids", help="file of post ids whose pairs are left out")
    _add_analyzer_args(p)
    p.set_defaults(func=cmd_build_qa_index)

    p = sub.add_parser("build-code-index", help="build the code snippet index")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--src", help="directory tree of .java files")
    src.add_argument("--jsonl", help="snippets as JSONL")
    p.add_argument("--out", required=True)
    _add_analyzer_args(p)
    p.set_defaults(func=cmd_build_code_index)

    p = sub.add_parser("search", help="search code with an expanded query")
    q = p.add_mutually_exclusive_group(required=True)
    q.add_argument("--query", help="free-form query text")
    q.add_argument("--queries", help="TSV file of query_id<TAB>query")
    _add_engine_args(p)
    p.add_argument("--baseline", action="store_true", help="skip expansion (plain BM25)")
    p.add_argument("--explain", action="store_true", help="include feedback pairs and expansion terms")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="score one or two runs against relevance judgments")
    p.add_argument("--run", action="append", required=True, help="run JSON (repeat for a paired comparison)")
    p.add_argument("--judgments", required=True, help="CSV query_id,snippet_id,relevance")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="metrics as the number of expansion words or feedback pairs varies")
    _add_engine_args(p)
    p.add_argument("--queries", required=True, help="TSV file of query_id<TAB>query")
    p.add_argument("--judgments", required=True)
    p.add_argument("--param", choices=["n", "m"], default="n")
    p.add_argument("--values", help="comma-separated values (default 1..10,15,20)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (OSError, ValueError, KeyError, IndexStoreError, ConfigurationError, PostsParseError) as exc:
        print(f"qeck: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
