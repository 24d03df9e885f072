"""Two-pass query expansion over crowd Q&A pairs.

1. first pass: BM25 over the Q&A index, re-ranked by fusing the
   min-max normalized BM25 score with the pair's vote score;
   the top ``m`` pairs are the pseudo-relevant feedback set.
2. word selection: feedback terms weighted by summed
   ``sqrt(tf) * (ln(N / (df + 1)) + 1)``; terms present in more than
   ``df_cutoff`` of the collection are dropped; the top ``n`` are kept.
3. second pass: BM25 over the code index with the original terms plus
   the expansion terms, all equally weighted.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

from .index import InvertedIndex, SearchHit
from .text import AnalyzerConfig, TermBag, analyze

IDF_COLLECTION = "collection"
IDF_FEEDBACK = "feedback"

# final scores are compared at this precision so float noise cannot reorder ties
_SCORE_DECIMALS = 12


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class QeckConfig:
    m: int = 5
    n: int = 9
    k: int = 10
    first_pass_pool: int = 50
    df_cutoff: float = 0.25
    question_weight: float = 0.7
    answer_weight: float = 0.3
    idf_source: str = IDF_COLLECTION
    analyzer: AnalyzerConfig = field(default_factory=AnalyzerConfig)

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise ConfigurationError("m and n must be >= 0")
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        if self.first_pass_pool < max(self.m, 1):
            raise ConfigurationError(
                f"first_pass_pool ({self.first_pass_pool}) must be >= m ({self.m}) and >= 1"
            )
        if not 0.0 < self.df_cutoff <= 1.0:
            raise ConfigurationError(f"df_cutoff must be in (0, 1], got {self.df_cutoff}")
        if not math.isclose(self.question_weight + self.answer_weight, 1.0, abs_tol=1e-12):
            raise ConfigurationError("question_weight + answer_weight must equal 1")
        if self.idf_source not in (IDF_COLLECTION, IDF_FEEDBACK):
            raise ConfigurationError(f"unknown idf_source {self.idf_source!r}")

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "k": self.k,
            "first_pass_pool": self.first_pass_pool,
            "df_cutoff": self.df_cutoff,
            "question_weight": self.question_weight,
            "answer_weight": self.answer_weight,
            "idf_source": self.idf_source,
            "analyzer_fingerprint": self.analyzer.fingerprint,
        }

    def with_(self, **changes) -> "QeckConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class Query:
    raw: str
    terms: TermBag

    @classmethod
    def parse(cls, raw: str, analyzer: AnalyzerConfig) -> "Query":
        return cls(raw, analyze(raw, analyzer))


@dataclass(frozen=True)
class ScoredQAPair:
    pair_id: str
    lucene_score: float
    so_score: float
    norm_l: float
    norm_s: float
    final_score: float

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "lucene_score": self.lucene_score,
            "so_score": self.so_score,
            "norm_l": self.norm_l,
            "norm_s": self.norm_s,
            "final_score": self.final_score,
        }


@dataclass(frozen=True)
class FeedbackSet:
    entries: List[ScoredQAPair] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def pair_ids(self) -> List[str]:
        return [e.pair_id for e in self.entries]


@dataclass(frozen=True)
class ExpansionTerm:
    term: str
    weight: float
    feedback_tf: int
    collection_df: int

    def to_dict(self) -> dict:
        return {
            "term": self.term,
            "weight": self.weight,
            "feedback_tf": self.feedback_tf,
            "collection_df": self.collection_df,
        }


@dataclass(frozen=True)
class ExpandedQuery:
    base: Query
    expansion: List[ExpansionTerm]
    combined_terms: TermBag

    @property
    def expansion_terms(self) -> List[str]:
        return [e.term for e in self.expansion]


@dataclass(frozen=True)
class QeckResult:
    expanded: ExpandedQuery
    feedback: FeedbackSet
    hits: List[SearchHit]

    def to_dict(self) -> dict:
        """Explainability record: feedback pairs, chosen terms, final hits."""
        return {
            "query": self.expanded.base.raw,
            "query_terms": list(self.expanded.base.terms),
            "feedback": [e.to_dict() for e in self.feedback.entries],
            "expansion": [e.to_dict() for e in self.expanded.expansion],
            "expanded_terms": list(self.expanded.combined_terms),
            "hits": [h.to_dict() for h in self.hits],
        }


def min_max_normalize(values: Sequence[float]) -> List[float]:
    """Map values onto [0, 1]; a constant list maps to all ones."""
    if not values:
        raise ValueError("min_max_normalize needs at least one value")
    lo, hi = min(values), max(values)
    if hi == lo:
        return [1.0] * len(values)
    span = hi - lo
    return [(v - lo) / span for v in values]


def so_score_of(question_votes: float, answer_votes: float, config: QeckConfig) -> float:
    return config.question_weight * question_votes + config.answer_weight * answer_votes


def fuse_scores(candidates: Sequence[tuple], config: QeckConfig) -> List[ScoredQAPair]:
    """Fuse ``(pair_id, bm25, question_votes, answer_votes)`` candidates.

    Returns every candidate, best first; ties go to the smaller pair_id.
    """
    if not candidates:
        return []
    lucene = [float(c[1]) for c in candidates]
    so = [so_score_of(c[2], c[3], config) for c in candidates]
    norm_l = min_max_normalize(lucene)
    norm_s = min_max_normalize(so)
    scored = [
        ScoredQAPair(c[0], l, s, nl, ns, nl + ns)
        for c, l, s, nl, ns in zip(candidates, lucene, so, norm_l, norm_s)
    ]
    scored.sort(key=lambda e: (-round(e.final_score, _SCORE_DECIMALS), e.pair_id))
    return scored


def _vote(fields: Dict[str, str], name: str) -> float:
    value = fields.get(name, "0")
    try:
        return int(value)
    except ValueError:
        return float(value)


def first_pass(qa_index: InvertedIndex, query: Query, config: QeckConfig) -> FeedbackSet:
    if config.m == 0:
        return FeedbackSet([])
    hits = qa_index.bm25_search(query.terms, config.first_pass_pool)
    candidates = []
    for hit in hits:
        fields = qa_index.document(hit.doc_id).fields
        candidates.append((hit.doc_id, hit.score,
                           _vote(fields, "question_votes"), _vote(fields, "answer_votes")))
    return FeedbackSet(fuse_scores(candidates, config)[: config.m])


def term_weight(tf: int, df: int, doc_count: int) -> float:
    """Expansion weight of a term in one feedback document."""
    return math.sqrt(tf) * (math.log(doc_count / (df + 1)) + 1.0)


def select_expansion_terms(feedback: FeedbackSet, query: Query, qa_index: InvertedIndex,
                           config: QeckConfig) -> List[ExpansionTerm]:
    if config.n == 0 or not feedback.entries:
        return []
    doc_count = qa_index.doc_count
    per_doc = [qa_index.term_counts(pair_id) for pair_id in feedback.pair_ids]
    excluded = set(query.terms)

    if config.idf_source == IDF_FEEDBACK:
        idf_n = len(per_doc)
        idf_df: Counter = Counter()
        for counts in per_doc:
            idf_df.update(counts.keys())
    else:
        idf_n = doc_count

    weights: Dict[str, float] = {}
    feedback_tf: Counter = Counter()
    collection_df: Dict[str, int] = {}
    for counts in per_doc:
        for term in sorted(counts):
            if term in excluded:
                continue
            if term not in collection_df:
                collection_df[term] = qa_index.document_frequency(term)
            df = collection_df[term]
            if df > config.df_cutoff * doc_count:
                continue
            tf = counts[term]
            df_for_idf = idf_df[term] if config.idf_source == IDF_FEEDBACK else df
            weights[term] = weights.get(term, 0.0) + term_weight(tf, df_for_idf, idf_n)
            feedback_tf[term] += tf

    ranked = sorted(
        (t for t, w in weights.items() if w > 0.0),
        key=lambda t: (-round(weights[t], _SCORE_DECIMALS), t),
    )
    return [ExpansionTerm(t, weights[t], feedback_tf[t], collection_df[t]) for t in ranked[: config.n]]


def expand(query: Query, terms: Sequence[ExpansionTerm]) -> ExpandedQuery:
    combined = list(query.terms)
    seen = set(combined)
    kept = []
    for term in terms:
        if term.term in seen:
            continue
        seen.add(term.term)
        kept.append(term)
        combined.append(term.term)
    return ExpandedQuery(query, kept, combined)


def second_pass(code_index: InvertedIndex, expanded: ExpandedQuery, config: QeckConfig) -> List[SearchHit]:
    return code_index.bm25_search(expanded.combined_terms, config.k)


def check_analyzers(config: QeckConfig, *indexes: InvertedIndex) -> None:
    expected = config.analyzer.fingerprint
    for index in indexes:
        if index.analyzer.fingerprint != expected:
            where = index.path or "<in-memory index>"
            raise ConfigurationError(
                f"analyzer mismatch: index {where} was built with a different analyzer configuration"
            )


def qeck_search(qa_index: InvertedIndex, code_index: InvertedIndex, raw_query: str,
                config: Optional[QeckConfig] = None) -> QeckResult:
    config = config or QeckConfig()
    check_analyzers(config, qa_index, code_index)
    query = Query.parse(raw_query, config.analyzer)
    feedback = first_pass(qa_index, query, config)
    terms = select_expansion_terms(feedback, query, qa_index, config)
    expanded = expand(query, terms)
    return QeckResult(expanded, feedback, second_pass(code_index, expanded, config))


def baseline_search(code_index: InvertedIndex, raw_query: str,
                    config: Optional[QeckConfig] = None) -> QeckResult:
    """Plain BM25 over the code index with the unexpanded query."""
    config = config or QeckConfig()
    check_analyzers(config, code_index)
    query = Query.parse(raw_query, config.analyzer)
    expanded = expand(query, [])
    return QeckResult(expanded, FeedbackSet([]), second_pass(code_index, expanded, config))
