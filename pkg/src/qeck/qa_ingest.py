"""Stack Exchange ``posts.xml`` ingestion and the Q&A pair index."""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from enum import Enum
from html.parser import HTMLParser
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Set
from xml.parsers import expat

from .index import DocumentRecord, InvertedIndex
from .text import AnalyzerConfig, analyze

log = logging.getLogger(__name__)

QUESTION_WEIGHT = 0.7
ANSWER_WEIGHT = 0.3

_CHUNK_SIZE = 1 << 16
_ANGLE_TAG_RE = re.compile(r"<([^<>]+)>")


class PostType(str, Enum):
    QUESTION = "question"
    ANSWER = "answer"


_POST_TYPE_IDS = {"1": PostType.QUESTION, "2": PostType.ANSWER}


class PostsParseError(ValueError):
    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (at byte offset {byte_offset})")
        self.byte_offset = byte_offset


@dataclass
class RawPost:
    id: int
    post_type: PostType
    score: int = 0
    body: str = ""
    title: Optional[str] = None
    tags: List[str] = field(default_factory=list)
    accepted_answer_id: Optional[int] = None
    parent_id: Optional[int] = None


@dataclass
class QAPair:
    pair_id: str
    question_id: int
    answer_id: int
    title: str
    question_text: str
    answer_text: str
    tags: List[str]
    question_votes: int
    answer_votes: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "QAPair":
        return cls(
            pair_id=str(data["pair_id"]),
            question_id=int(data["question_id"]),
            answer_id=int(data["answer_id"]),
            title=data.get("title", ""),
            question_text=data.get("question_text", ""),
            answer_text=data.get("answer_text", ""),
            tags=list(data.get("tags", [])),
            question_votes=data.get("question_votes", 0),
            answer_votes=data.get("answer_votes", 0),
        )


def parse_tags(raw: str) -> List[str]:
    """Decode ``<a><b>`` (classic dumps) or ``|a|b|`` (newer dumps)."""
    if not raw:
        return []
    found = _ANGLE_TAG_RE.findall(raw)
    if not found and "|" in raw:
        found = raw.split("|")
    return [t.strip().lower() for t in found if t.strip()]


def _optional_int(value: Optional[str]) -> Optional[int]:
    if value is None or value == "":
        return None
    return int(value)


def _row_to_post(attrs: Dict[str, str], counters: Counter) -> Optional[RawPost]:
    if "Id" not in attrs or "PostTypeId" not in attrs:
        counters["rows_missing_id"] += 1
        log.warning("skipping <row> without Id/PostTypeId: %r", attrs.get("Id"))
        return None
    post_type = _POST_TYPE_IDS.get(attrs["PostTypeId"].strip())
    if post_type is None:
        counters["rows_other_type"] += 1
        return None
    try:
        post = RawPost(
            id=int(attrs["Id"]),
            post_type=post_type,
            score=int(attrs.get("Score") or 0),
            body=attrs.get("Body", ""),
            tags=parse_tags(attrs.get("Tags", "")),
            accepted_answer_id=_optional_int(attrs.get("AcceptedAnswerId")),
            parent_id=_optional_int(attrs.get("ParentId")),
        )
    except ValueError:
        counters["rows_malformed"] += 1
        log.warning("skipping <row> with non-integer fields: Id=%r", attrs.get("Id"))
        return None
    if post_type is PostType.QUESTION:
        post.title = attrs.get("Title", "")
        post.parent_id = None
    else:
        post.accepted_answer_id = None
    counters["posts"] += 1
    return post


def parse_posts(stream: BinaryIO, counters: Optional[Counter] = None) -> Iterator[RawPost]:
    """Stream ``RawPost`` objects out of a ``posts.xml`` byte stream.

    Only questions (PostTypeId 1) and answers (PostTypeId 2) are emitted.
    Rows without ``Id`` or ``PostTypeId`` are skipped and counted under
    ``rows_missing_id``. Malformed XML raises :class:`PostsParseError`
    carrying the byte offset reported by expat.
    """
    counters = counters if counters is not None else Counter()
    pending: List[RawPost] = []

    def start(name, attrs):
        if name == "row":
            post = _row_to_post(attrs, counters)
            if post is not None:
                pending.append(post)

    parser = expat.ParserCreate(encoding="utf-8")
    parser.StartElementHandler = start

    def feed(data: bytes, final: bool) -> None:
        try:
            parser.Parse(data, final)
        except expat.ExpatError as exc:
            raise PostsParseError(f"malformed XML: {expat.errors.messages[exc.code]}",
                                  parser.ErrorByteIndex) from exc

    while True:
        chunk = stream.read(_CHUNK_SIZE)
        if not chunk:
            break
        feed(chunk, False)
        yield from pending
        pending.clear()
    feed(b"", True)
    yield from pending
    pending.clear()


def iter_posts_file(path, counters: Optional[Counter] = None) -> Iterator[RawPost]:
    with open(path, "rb") as fh:
        yield from parse_posts(fh, counters)


_BLOCK_TAGS = frozenset(
    "p br div li ul ol pre blockquote h1 h2 h3 h4 h5 h6 tr td th table hr".split()
)


class _TextExtractor(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: List[str] = []

    def handle_starttag(self, tag, attrs):
        if tag in _BLOCK_TAGS:
            self.parts.append(" ")

    def handle_endtag(self, tag):
        if tag in _BLOCK_TAGS:
            self.parts.append(" ")

    def handle_data(self, data):
        self.parts.append(data)


def strip_html(body: str) -> str:
    """Plain text of a post body; text inside ``<code>``/``<pre>`` is kept."""
    if not body:
        return ""
    extractor = _TextExtractor()
    extractor.feed(body)
    extractor.close()
    return " ".join("".join(extractor.parts).split())


def so_score(pair: QAPair, question_weight: float = QUESTION_WEIGHT,
             answer_weight: float = ANSWER_WEIGHT) -> float:
    """Crowd-vote quality of a pair: weighted question and answer votes."""
    return question_weight * pair.question_votes + answer_weight * pair.answer_votes


def _join(first: Iterable[RawPost], second: Iterable[RawPost], tag_filter: str,
          counters: Counter) -> List[QAPair]:
    tag_filter = tag_filter.lower()
    questions: Dict[int, RawPost] = {}
    wanted: Dict[int, int] = {}  # accepted answer id -> question id
    for post in first:
        if post.post_type is not PostType.QUESTION:
            continue
        counters["questions"] += 1
        if tag_filter not in post.tags:
            counters["questions_without_tag"] += 1
            continue
        counters["questions_with_tag"] += 1
        if post.accepted_answer_id is None:
            counters["questions_without_accepted_answer"] += 1
            continue
        questions[post.id] = post
        wanted[post.accepted_answer_id] = post.id

    answers: Dict[int, RawPost] = {}
    for post in second:
        if post.post_type is not PostType.ANSWER:
            continue
        qid = wanted.get(post.id)
        if qid is None:
            counters["answers_unused"] += 1
            continue
        if post.parent_id != qid:
            counters["accepted_answer_parent_mismatch"] += 1
            continue
        answers[post.id] = post

    pairs = []
    for qid, question in questions.items():
        answer = answers.get(question.accepted_answer_id)
        if answer is None:
            counters["accepted_answer_missing"] += 1
            continue
        body = strip_html(question.body)
        title = question.title or ""
        pairs.append(QAPair(
            pair_id=str(qid),
            question_id=qid,
            answer_id=answer.id,
            title=title,
            question_text=f"{title} {body}".strip(),
            answer_text=strip_html(answer.body),
            tags=list(question.tags),
            question_votes=question.score,
            answer_votes=answer.score,
        ))
    counters["pairs"] += len(pairs)
    return pairs


def pair_posts(posts: Iterable[RawPost], tag_filter: str = "android",
               counters: Optional[Counter] = None) -> List[QAPair]:
    """Join tagged questions with their accepted answers.

    The join takes two passes over ``posts`` so that answers may precede
    their question; a one-shot iterator is materialized first.
    """
    counters = counters if counters is not None else Counter()
    if iter(posts) is posts:
        posts = list(posts)
    return _join(posts, posts, tag_filter, counters)


def pair_dump(path, tag_filter: str = "android", counters: Optional[Counter] = None) -> List[QAPair]:
    """``pair_posts`` over a dump file, streaming it twice instead of buffering it."""
    counters = counters if counters is not None else Counter()
    parse_counts: Counter = Counter()
    pairs = _join(iter_posts_file(path, parse_counts), iter_posts_file(path), tag_filter, counters)
    counters.update(parse_counts)
    return pairs


def read_pairs_jsonl(path) -> List[QAPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                pairs.append(QAPair.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: invalid Q&A pair: {exc}") from exc
    return pairs


def write_pairs_jsonl(pairs: Iterable[QAPair], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def qa_document(pair: QAPair, analyzer: AnalyzerConfig) -> DocumentRecord:
    text = " ".join((pair.title, pair.question_text, pair.answer_text))
    return DocumentRecord(
        doc_id=pair.pair_id,
        fields={
            "pair_id": pair.pair_id,
            "title": pair.title,
            "question_votes": str(pair.question_votes),
            "answer_votes": str(pair.answer_votes),
        },
        term_bag=analyze(text, analyzer),
    )


def build_qa_index(pairs: Iterable[QAPair], analyzer: AnalyzerConfig, out_path=None,
                   exclude_ids: Optional[Set[int]] = None,
                   counters: Optional[Counter] = None) -> InvertedIndex:
    """Index each pair as one document and commit to ``out_path``.

    ``exclude_ids`` drops pairs whose question or answer post id is listed.
    """
    counters = counters if counters is not None else Counter()
    exclude_ids = exclude_ids or set()
    index = InvertedIndex.create(out_path, analyzer)
    for pair in pairs:
        if pair.question_id in exclude_ids or pair.answer_id in exclude_ids:
            counters["pairs_excluded"] += 1
            continue
        index.add_document(qa_document(pair, analyzer))
        counters["pairs_indexed"] += 1
    if not counters["pairs_indexed"]:
        log.warning("no Q&A pairs to index; writing an empty index")
    index.commit()
    return index


def read_id_list(path) -> Set[int]:
    ids = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                ids.add(int(line))
    return ids
