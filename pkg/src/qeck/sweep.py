"""Metrics-vs-parameter sweeps (number of expansion words or feedback pairs)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Mapping, Sequence

from .engine import QeckConfig, baseline_search, qeck_search
from .evaluation import Judgment, evaluate_run
from .index import InvertedIndex

SWEEPABLE = ("n", "m")
DEFAULT_N_VALUES = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20)


@dataclass(frozen=True)
class SweepRow:
    parameter: str
    value: int
    precision_mean: float
    ndcg_mean: float
    queries: int

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "value": self.value,
            "precision_mean": self.precision_mean,
            "ndcg_mean": self.ndcg_mean,
            "queries": self.queries,
        }


def run_queries(qa_index: InvertedIndex, code_index: InvertedIndex, queries: Mapping[str, str],
                config: QeckConfig, baseline: bool = False) -> dict:
    """{query_id: [snippet ids]} for every query."""
    out = {}
    for qid in sorted(queries):
        if baseline:
            result = baseline_search(code_index, queries[qid], config)
        else:
            result = qeck_search(qa_index, code_index, queries[qid], config)
        out[qid] = [h.doc_id for h in result.hits]
    return out


def sweep(qa_index: InvertedIndex, code_index: InvertedIndex, queries: Mapping[str, str],
          judgments: Iterable[Judgment], parameter: str = "n",
          values: Sequence[int] = DEFAULT_N_VALUES, config: QeckConfig = None) -> List[SweepRow]:
    """Evaluate QECK once per parameter value, holding the rest of ``config`` fixed.

    A value of 0 means the unexpanded original query.
    """
    if parameter not in SWEEPABLE:
        raise ValueError(f"can only sweep {SWEEPABLE}, not {parameter!r}")
    config = config or QeckConfig()
    judgments = list(judgments)
    rows = []
    for value in values:
        changes = {parameter: value}
        if parameter == "m":
            changes["first_pass_pool"] = max(config.first_pass_pool, value)
        cfg = config.with_(**changes)
        results = run_queries(qa_index, code_index, queries, cfg, baseline=(value == 0))
        ev = evaluate_run(results, judgments, cfg.k)
        rows.append(SweepRow(parameter, value, ev.precision.mean, ev.ndcg.mean, len(ev.reports)))
    return rows


def format_sweep(rows: Sequence[SweepRow]) -> str:
    if not rows:
        return ""
    header = [rows[0].parameter, "Precision@K", "NDCG@K"]
    lines = [header] + [[str(r.value), f"{r.precision_mean:.4f}", f"{r.ndcg_mean:.4f}"] for r in rows]
    widths = [max(len(line[c]) for line in lines) for c in range(3)]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(line, widths)) for line in lines)
