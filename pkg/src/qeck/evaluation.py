"""Precision@K, zero-modified NDCG@K, summary tables and Wilcoxon tests."""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

RELEVANT_MIN = 3
UNJUDGED_RELEVANCE = 1
EXACT_WILCOXON_MAX_N = 25


@dataclass(frozen=True)
class Judgment:
    query_id: str
    snippet_id: str
    relevance: int

    def __post_init__(self):
        if self.relevance not in (1, 2, 3, 4):
            raise ValueError(f"relevance must be 1..4, got {self.relevance!r}")


@dataclass(frozen=True)
class MetricReport:
    query_id: str
    precision_at_k: float
    ndcg_at_k: float
    k: int


@dataclass(frozen=True)
class SummaryStats:
    samples: int
    min: float
    max: float
    median: float
    mean: float
    stddev: float


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    n_nonzero: int


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")


def _top_k(relevances: Sequence[int], k: int) -> List[int]:
    top = list(relevances[:k])
    return top + [UNJUDGED_RELEVANCE] * (k - len(top))


def precision_at_k(relevances: Sequence[int], k: int) -> float:
    """Share of the first ``k`` results judged 3 or 4; the denominator is always ``k``."""
    _check_k(k)
    return sum(1 for r in _top_k(relevances, k) if r >= RELEVANT_MIN) / k


def _dcg(gains: Sequence[float]) -> float:
    # rank 1 undiscounted, rank i >= 2 divided by log2(i)
    if not gains:
        return 0.0
    return gains[0] + sum(g / math.log2(i) for i, g in enumerate(gains[1:], start=2))


def ndcg_at_k(relevances: Sequence[int], k: int, zero_irrelevant: bool = True) -> float:
    """NDCG over the first ``k`` results.

    With ``zero_irrelevant`` (the default) grades 1 and 2 count as 0, so a
    list with nothing relevant scores 0. An all-zero ideal gives 0.
    """
    _check_k(k)
    gains = [float(r) for r in _top_k(relevances, k)]
    if zero_irrelevant:
        gains = [g if g >= RELEVANT_MIN else 0.0 for g in gains]
    ideal = _dcg(sorted(gains, reverse=True))
    if ideal == 0.0:
        return 0.0
    return _dcg(gains) / ideal


def summarize(values: Sequence[float]) -> SummaryStats:
    if not values:
        raise ValueError("summarize needs at least one value")
    values = [float(v) for v in values]
    stddev = statistics.stdev(values) if len(values) > 1 else 0.0
    return SummaryStats(
        samples=len(values),
        min=min(values),
        max=max(values),
        median=statistics.median(values),
        mean=statistics.fmean(values),
        stddev=stddev,
    )


def _average_ranks(values: Sequence[float]) -> List[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def _signed_rank_counts(doubled_ranks: Sequence[int]) -> Dict[int, int]:
    """Number of sign assignments giving each doubled positive-rank sum."""
    counts = {0: 1}
    for r in doubled_ranks:
        nxt: Dict[int, int] = {}
        for total, c in counts.items():
            nxt[total] = nxt.get(total, 0) + c
            nxt[total + r] = nxt.get(total + r, 0) + c
        counts = nxt
    return counts


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> WilcoxonResult:
    """Two-sided paired Wilcoxon signed-rank test of ``a`` against ``b``.

    Zero differences are dropped and tied magnitudes get average ranks.
    Up to 25 non-zero pairs the p-value is exact: the null distribution of
    the positive-rank sum over all ``2**n`` equally likely sign patterns
    is counted exactly. Beyond that a tie-corrected normal approximation
    with continuity correction is used. ``statistic`` is
    ``min(W+, W-)``.
    """
    if len(a) != len(b):
        raise ValueError(f"paired samples differ in length: {len(a)} != {len(b)}")
    if not a:
        raise ValueError("wilcoxon_signed_rank needs at least one pair")
    diffs = [float(x) - float(y) for x, y in zip(a, b)]
    diffs = [d for d in diffs if d != 0.0]
    n = len(diffs)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0)

    ranks = _average_ranks([abs(d) for d in diffs])
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    total = n * (n + 1) / 2.0
    statistic = min(w_plus, total - w_plus)

    if n <= EXACT_WILCOXON_MAX_N:
        # average ranks are multiples of 1/2, so doubled ranks are integers
        doubled = [int(round(2 * r)) for r in ranks]
        doubled_total = sum(doubled)
        observed = abs(2 * int(round(2 * w_plus)) - doubled_total)
        counts = _signed_rank_counts(doubled)
        extreme = sum(c for s, c in counts.items() if abs(2 * s - doubled_total) >= observed)
        p = extreme / 2 ** n
    else:
        _, tie_counts = _tie_groups(ranks)
        variance = n * (n + 1) * (2 * n + 1) / 24.0
        variance -= sum(t ** 3 - t for t in tie_counts) / 48.0
        if variance <= 0:
            p = 1.0
        else:
            z = (abs(w_plus - total / 2.0) - 0.5) / math.sqrt(variance)
            p = 1.0 if z <= 0 else math.erfc(z / math.sqrt(2.0))
    return WilcoxonResult(statistic, min(1.0, max(0.0, p)), n)


def _tie_groups(ranks: Sequence[float]):
    groups: Dict[float, int] = {}
    for r in ranks:
        groups[r] = groups.get(r, 0) + 1
    return list(groups), [c for c in groups.values() if c > 1]


# -- run-level evaluation ------------------------------------------------------


@dataclass
class RunEvaluation:
    k: int
    reports: List[MetricReport]
    precision: SummaryStats
    ndcg: SummaryStats

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "per_query": [asdict(r) for r in self.reports],
            "precision": asdict(self.precision),
            "ndcg": asdict(self.ndcg),
        }


@dataclass
class RunComparison:
    runs: Dict[str, RunEvaluation]
    precision_test: Optional[WilcoxonResult] = None
    ndcg_test: Optional[WilcoxonResult] = None
    query_ids: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"runs": {name: ev.to_dict() for name, ev in self.runs.items()}}
        if self.precision_test is not None:
            out["wilcoxon"] = {
                "precision": asdict(self.precision_test),
                "ndcg": asdict(self.ndcg_test),
            }
        return out


class UnknownQueryError(KeyError):
    pass


def _judgment_table(judgments: Iterable[Judgment]) -> Dict[str, Dict[str, int]]:
    table: Dict[str, Dict[str, int]] = {}
    for j in judgments:
        table.setdefault(j.query_id, {})[j.snippet_id] = j.relevance
    return table


def evaluate_run(results: Mapping[str, Sequence[str]], judgments: Iterable[Judgment],
                 k: int = 10) -> RunEvaluation:
    """Per-query Precision@k and NDCG@k plus their summaries.

    Retrieved snippets without a judgment count as relevance 1.
    """
    _check_k(k)
    table = _judgment_table(judgments)
    if not results:
        raise ValueError("run contains no queries")
    reports = []
    for qid in sorted(results):
        if qid not in table:
            raise UnknownQueryError(f"query {qid!r} has no judgments")
        grades = [table[qid].get(sid, UNJUDGED_RELEVANCE) for sid in results[qid]]
        reports.append(MetricReport(qid, precision_at_k(grades, k), ndcg_at_k(grades, k), k))
    return RunEvaluation(
        k=k,
        reports=reports,
        precision=summarize([r.precision_at_k for r in reports]),
        ndcg=summarize([r.ndcg_at_k for r in reports]),
    )


def compare_runs(runs: Mapping[str, Mapping[str, Sequence[str]]], judgments: Iterable[Judgment],
                 k: int = 10) -> RunComparison:
    """Evaluate one or two runs; two runs also get paired Wilcoxon tests."""
    if not 1 <= len(runs) <= 2:
        raise ValueError("compare_runs takes one or two runs")
    judgments = list(judgments)
    evaluations = {name: evaluate_run(res, judgments, k) for name, res in runs.items()}
    comparison = RunComparison(evaluations)
    if len(runs) == 2:
        first, second = evaluations.values()
        a = {r.query_id: r for r in first.reports}
        b = {r.query_id: r for r in second.reports}
        shared = sorted(set(a) & set(b))
        if not shared:
            raise ValueError("the two runs share no query ids")
        comparison.query_ids = shared
        comparison.precision_test = wilcoxon_signed_rank(
            [a[q].precision_at_k for q in shared], [b[q].precision_at_k for q in shared])
        comparison.ndcg_test = wilcoxon_signed_rank(
            [a[q].ndcg_at_k for q in shared], [b[q].ndcg_at_k for q in shared])
    return comparison


# -- file formats --------------------------------------------------------------


def read_judgments(path) -> List[Judgment]:
    """CSV with ``query_id,snippet_id,relevance`` (a header row is optional)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].startswith("#"):
                continue
            if lineno == 1 and [c.strip() for c in row] == ["query_id", "snippet_id", "relevance"]:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                out.append(Judgment(row[0].strip(), row[1].strip(), int(row[2])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def _hit_ids(value, where: str) -> List[str]:
    if isinstance(value, dict) and "hits" in value:
        value = value["hits"]
    if not isinstance(value, list):
        raise ValueError(f"{where}: expected a list of snippet ids or a search record with 'hits'")
    ids = []
    for item in value:
        if isinstance(item, str):
            ids.append(item)
        elif isinstance(item, dict) and "doc_id" in item:
            ids.append(str(item["doc_id"]))
        else:
            raise ValueError(f"{where}: unrecognized hit entry {item!r}")
    return ids


def parse_run(data, source: str = "<run>") -> Dict[str, List[str]]:
    """Normalize a run: ``{query_id: [snippet ids]}``, or search records keyed by query id.

    The batch output of ``qeck search`` (``{"results": {...}}``) is accepted as is.
    """
    if isinstance(data, dict) and isinstance(data.get("results"), dict):
        data = data["results"]
    if not isinstance(data, dict):
        raise ValueError(f"{source}: run file must be a JSON object keyed by query id")
    return {str(qid): _hit_ids(v, f"{source}[{qid!r}]") for qid, v in data.items()}


def read_run(path) -> Dict[str, List[str]]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    return parse_run(data, str(path))


def _fmt(value: float, percent: bool) -> str:
    if percent:
        return f"{value * 100:.1f}%"
    return f"{value:.4f}"


def format_table(comparison: RunComparison) -> str:
    """Aligned text table: Metrics, Approach, Samples, Min, Max, Median, Mean, StdDev."""
    header = ["Metrics", "Approach", "Samples", "Min", "Max", "Median", "Mean", "StdDev"]
    rows = [header]
    tests = {"Precision": comparison.precision_test, "NDCG": comparison.ndcg_test}
    names = list(comparison.runs)
    for metric, attr, percent in (("Precision", "precision", True), ("NDCG", "ndcg", False)):
        for i, name in enumerate(names):
            s: SummaryStats = getattr(comparison.runs[name], attr)
            mean = _fmt(s.mean, percent)
            test = tests[metric]
            if test is not None and i == len(names) - 1:
                mean += f" (p={test.p_value:.3f})"
            rows.append([
                metric if i == 0 else "", name, str(s.samples),
                _fmt(s.min, percent), _fmt(s.max, percent), _fmt(s.median, percent),
                mean, f"{s.stddev:.4f}",
            ])
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows)
