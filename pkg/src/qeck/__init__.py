"""Code search with query expansion mined from Stack Overflow Q&A pairs."""

__version__ = "0.1.0"

from .engine import (  # noqa: E402
    ExpandedQuery,
    ExpansionTerm,
    FeedbackSet,
    QeckConfig,
    QeckResult,
    Query,
    ScoredQAPair,
    baseline_search,
    expand,
    first_pass,
    min_max_normalize,
    qeck_search,
    second_pass,
    select_expansion_terms,
)
from .index import DocumentRecord, IndexStats, InvertedIndex, SearchHit  # noqa: E402
from .text import AnalyzerConfig, analyze, remove_stopwords, stem, tokenize  # noqa: E402

__all__ = [
    "AnalyzerConfig",
    "DocumentRecord",
    "ExpandedQuery",
    "ExpansionTerm",
    "FeedbackSet",
    "IndexStats",
    "InvertedIndex",
    "QeckConfig",
    "QeckResult",
    "Query",
    "ScoredQAPair",
    "SearchHit",
    "analyze",
    "baseline_search",
    "expand",
    "first_pass",
    "min_max_normalize",
    "qeck_search",
    "remove_stopwords",
    "second_pass",
    "select_expansion_terms",
    "stem",
    "tokenize",
]
