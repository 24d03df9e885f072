"""Persistent inverted index with BM25 ranking.

An index is built in memory (``InvertedIndex.create`` + ``add_document``),
frozen by ``commit`` and, when it has a path, written to a directory::

    manifest.json   format/version, collection statistics, analyzer
    terms.tsv       term <TAB> document frequency <TAB> postings offset
    postings.bin    little-endian uint32 (doc ordinal, tf) pairs
    docs.jsonl      one stored document per line, in ordinal order

Document ordinals follow ascending ``doc_id``, so postings sorted by
ordinal are sorted by ``doc_id`` too.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
import os
import shutil
import sys
import tempfile
from array import array
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .text import AnalyzerConfig, TermBag

log = logging.getLogger(__name__)

FORMAT_NAME = "qeck-index"
FORMAT_VERSION = 1

BM25_K1 = 1.2
BM25_B = 0.75


class IndexStoreError(Exception):
    """Base class for index failures."""


class DuplicateDocumentError(IndexStoreError):
    pass


class IndexStateError(IndexStoreError):
    pass


class IndexFormatError(IndexStoreError):
    pass


@dataclass
class DocumentRecord:
    doc_id: str
    fields: Dict[str, str] = field(default_factory=dict)
    term_bag: TermBag = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.term_bag)


@dataclass(frozen=True)
class IndexStats:
    doc_count: int
    avg_doc_length: float
    analyzer_fingerprint: str


@dataclass(frozen=True)
class SearchHit:
    doc_id: str
    score: float
    rank: int

    def to_dict(self) -> dict:
        return {"doc_id": self.doc_id, "score": self.score, "rank": self.rank}


def bm25_idf(doc_count: int, df: int) -> float:
    return math.log(1.0 + (doc_count - df + 0.5) / (df + 0.5))


class InvertedIndex:
    """Single-writer build, then immutable and thread-safe for reads."""

    def __init__(self, analyzer: AnalyzerConfig, path: Optional[Path] = None):
        self.analyzer = analyzer
        self.path = Path(path) if path is not None else None
        self._committed = False
        self._pending: Dict[str, DocumentRecord] = {}
        # populated by commit/open
        self._doc_ids: List[str] = []
        self._doc_fields: List[Dict[str, str]] = []
        self._doc_terms: List[TermBag] = []
        self._doc_lengths: List[int] = []
        self._ordinal: Dict[str, int] = {}
        self._terms: Dict[str, Tuple[int, int]] = {}
        self._postings = array("I")
        self._total_length = 0

    # -- build mode ------------------------------------------------------

    @classmethod
    def create(cls, path=None, analyzer: Optional[AnalyzerConfig] = None) -> "InvertedIndex":
        return cls(analyzer or AnalyzerConfig(), path)

    def add_document(self, record: DocumentRecord) -> None:
        if self._committed:
            raise IndexStateError("index is committed; no further documents can be added")
        if record.doc_id in self._pending:
            raise DuplicateDocumentError(f"duplicate doc_id: {record.doc_id!r}")
        self._pending[record.doc_id] = DocumentRecord(
            record.doc_id, dict(record.fields), list(record.term_bag)
        )

    def commit(self) -> None:
        """Freeze the index and, if it has a path, persist it atomically.

        A second commit is a no-op.
        """
        if self._committed:
            return
        self._freeze()
        if self.path is not None:
            try:
                self._write(self.path)
            except BaseException:
                self._unfreeze()
                raise
        self._committed = True

    def _freeze(self) -> None:
        docs = [self._pending[k] for k in sorted(self._pending)]
        self._doc_ids = [d.doc_id for d in docs]
        self._doc_fields = [d.fields for d in docs]
        self._doc_terms = [d.term_bag for d in docs]
        self._doc_lengths = [d.length for d in docs]
        self._total_length = sum(self._doc_lengths)
        self._ordinal = {doc_id: i for i, doc_id in enumerate(self._doc_ids)}

        inverted: Dict[str, List[Tuple[int, int]]] = {}
        for ordinal, terms in enumerate(self._doc_terms):
            for term, tf in Counter(terms).items():
                inverted.setdefault(term, []).append((ordinal, tf))

        self._terms = {}
        self._postings = array("I")
        for term in sorted(inverted):
            postings = inverted[term]
            self._terms[term] = (len(postings), len(self._postings) // 2)
            for ordinal, tf in postings:
                self._postings.append(ordinal)
                self._postings.append(tf)

    def _unfreeze(self) -> None:
        self._doc_ids, self._doc_fields, self._doc_terms, self._doc_lengths = [], [], [], []
        self._ordinal, self._terms, self._postings = {}, {}, array("I")
        self._total_length = 0

    # -- persistence -------------------------------------------------------

    def _manifest(self) -> dict:
        stats = self.stats
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "doc_count": stats.doc_count,
            "avg_doc_length": stats.avg_doc_length,
            "total_length": self._total_length,
            "term_count": len(self._terms),
            "analyzer_fingerprint": stats.analyzer_fingerprint,
            "analyzer": self.analyzer.to_dict(),
        }

    def _write(self, path: Path) -> None:
        path = path.resolve()
        if path.exists() and any(path.iterdir()) and not (path / "manifest.json").exists():
            raise IndexStoreError(f"refusing to overwrite non-index directory {path}")
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))
        try:
            with open(tmp / "terms.tsv", "w", encoding="utf-8", newline="\n") as fh:
                for term, (df, offset) in self._terms.items():
                    fh.write(f"{term}\t{df}\t{offset}\n")
            postings = array("I", self._postings)
            if sys.byteorder != "little":
                postings.byteswap()
            with open(tmp / "postings.bin", "wb") as fh:
                postings.tofile(fh)
            with open(tmp / "docs.jsonl", "w", encoding="utf-8", newline="\n") as fh:
                for doc_id, fields, terms in zip(self._doc_ids, self._doc_fields, self._doc_terms):
                    row = {"id": doc_id, "fields": fields, "terms": terms}
                    fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
            # manifest last: its presence marks a complete index
            with open(tmp / "manifest.json", "w", encoding="utf-8") as fh:
                json.dump(self._manifest(), fh, indent=2, sort_keys=True)
                fh.write("\n")

            os.chmod(tmp, 0o755)
            backup = None
            if path.exists():
                backup = path.with_name(f".{path.name}.old-{os.getpid()}")
                os.replace(path, backup)
            try:
                os.replace(tmp, path)
            except OSError:
                if backup is not None:
                    os.replace(backup, path)
                raise
            if backup is not None:
                shutil.rmtree(backup, ignore_errors=True)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise

    @classmethod
    def open(cls, path) -> "InvertedIndex":
        path = Path(path)
        manifest_path = path / "manifest.json"
        if not manifest_path.is_file():
            raise IndexFormatError(f"no index at {path} (missing manifest.json)")
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        if manifest.get("format") != FORMAT_NAME or manifest.get("version") != FORMAT_VERSION:
            raise IndexFormatError(
                f"unsupported index format {manifest.get('format')!r} "
                f"version {manifest.get('version')!r} at {path}"
            )
        analyzer = AnalyzerConfig.from_dict(manifest["analyzer"])
        if analyzer.fingerprint != manifest["analyzer_fingerprint"]:
            raise IndexFormatError(f"analyzer fingerprint mismatch in {manifest_path}")

        index = cls(analyzer, path)
        with open(path / "terms.tsv", encoding="utf-8") as fh:
            for line in fh:
                term, df, offset = line.rstrip("\n").split("\t")
                index._terms[term] = (int(df), int(offset))
        postings = array("I")
        with open(path / "postings.bin", "rb") as fh:
            postings.frombytes(fh.read())
        if sys.byteorder != "little":
            postings.byteswap()
        index._postings = postings
        with open(path / "docs.jsonl", encoding="utf-8") as fh:
            for line in fh:
                row = json.loads(line)
                index._doc_ids.append(row["id"])
                index._doc_fields.append(row["fields"])
                index._doc_terms.append(row["terms"])
                index._doc_lengths.append(len(row["terms"]))
        index._ordinal = {doc_id: i for i, doc_id in enumerate(index._doc_ids)}
        index._total_length = sum(index._doc_lengths)
        if len(index._doc_ids) != manifest["doc_count"] or index._total_length != manifest["total_length"]:
            raise IndexFormatError(f"document store does not match manifest in {path}")
        index._committed = True
        return index

    # -- read side ---------------------------------------------------------

    def _require_committed(self) -> None:
        if not self._committed:
            raise IndexStateError("index must be committed before it is read")

    @property
    def committed(self) -> bool:
        return self._committed

    @property
    def doc_count(self) -> int:
        return len(self._doc_ids)

    @property
    def stats(self) -> IndexStats:
        n = len(self._doc_ids)
        avg = self._total_length / n if n else 0.0
        return IndexStats(n, avg, self.analyzer.fingerprint)

    def doc_ids(self) -> List[str]:
        self._require_committed()
        return list(self._doc_ids)

    def _ordinal_of(self, doc_id: str) -> int:
        try:
            return self._ordinal[doc_id]
        except KeyError:
            raise KeyError(f"unknown doc_id: {doc_id!r}") from None

    def document(self, doc_id: str) -> DocumentRecord:
        self._require_committed()
        i = self._ordinal_of(doc_id)
        return DocumentRecord(self._doc_ids[i], dict(self._doc_fields[i]), list(self._doc_terms[i]))

    def term_counts(self, doc_id: str) -> Counter:
        self._require_committed()
        return Counter(self._doc_terms[self._ordinal_of(doc_id)])

    def postings(self, term: str) -> List[Tuple[str, int]]:
        """(doc_id, tf) pairs for ``term``, sorted by doc_id."""
        self._require_committed()
        return [(self._doc_ids[o], tf) for o, tf in self._iter_postings(term)]

    def _iter_postings(self, term: str):
        entry = self._terms.get(term)
        if entry is None:
            return
        df, offset = entry
        data = self._postings
        for j in range(offset, offset + df):
            yield data[2 * j], data[2 * j + 1]

    def document_frequency(self, term: str) -> int:
        self._require_committed()
        entry = self._terms.get(term)
        return entry[0] if entry else 0

    def term_frequency(self, term: str, doc_id: str) -> int:
        self._require_committed()
        ordinal = self._ordinal_of(doc_id)
        for o, tf in self._iter_postings(term):
            if o == ordinal:
                return tf
            if o > ordinal:
                break
        return 0

    def bm25_scores(self, query: Sequence[str]) -> Dict[int, float]:
        """Per-ordinal BM25 scores; repeated query terms contribute repeatedly."""
        n = len(self._doc_ids)
        if n == 0:
            return {}
        avg_len = self._total_length / n
        lengths = self._doc_lengths
        scores: Dict[int, float] = {}
        for term in query:
            entry = self._terms.get(term)
            if entry is None:
                continue
            idf = bm25_idf(n, entry[0])
            for ordinal, tf in self._iter_postings(term):
                norm = BM25_K1 * (1.0 - BM25_B + BM25_B * lengths[ordinal] / avg_len)
                scores[ordinal] = scores.get(ordinal, 0.0) + idf * (tf * (BM25_K1 + 1.0)) / (tf + norm)
        return scores

    def bm25_search(self, query: Sequence[str], top_r: int) -> List[SearchHit]:
        """Top ``top_r`` documents by BM25; zero-score documents are omitted."""
        if top_r < 1:
            raise ValueError(f"top_r must be >= 1, got {top_r}")
        self._require_committed()
        scores = self.bm25_scores(query)
        # ordinals ascend with doc_id, so (-score, ordinal) breaks ties by doc_id
        best = heapq.nsmallest(
            top_r,
            ((-s, o) for o, s in scores.items() if s > 0.0),
        )
        return [
            SearchHit(self._doc_ids[o], -neg, rank)
            for rank, (neg, o) in enumerate(best, start=1)
        ]


def build_index(records: Iterable[DocumentRecord], analyzer: AnalyzerConfig, path=None) -> InvertedIndex:
    index = InvertedIndex.create(path, analyzer)
    for record in records:
        index.add_document(record)
    index.commit()
    return index
