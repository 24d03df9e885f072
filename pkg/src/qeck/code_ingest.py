"""Method-level code snippets from Java sources, and the snippet index.

Extraction is lexical rather than a full parse: a tokenizer that knows
about comments, string/char literals and text blocks feeds a brace
matcher, and every ``{`` is classified by the tokens that precede it
(type declaration, method/constructor body, or any other block).
"""

from __future__ import annotations

import bisect
import json
import logging
import re
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

from .index import DocumentRecord, DuplicateDocumentError, InvertedIndex
from .text import AnalyzerConfig, analyze

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(
    r"""
    (?P<comment>/\*[\s\S]*?(?:\*/|\Z)|//[^\n]*)
  | (?P<textblock>\"\"\"[\s\S]*?(?:\"\"\"|\Z))
  | (?P<string>"(?:\\.|[^"\\\n])*"?)
  | (?P<char>'(?:\\.|[^'\\\n])*'?)
  | (?P<ident>[^\W\d][\w$]*|\$[\w$]*)
  | (?P<number>\d[\w.]*)
  | (?P<ws>\s+)
  | (?P<punct>->|::|\.\.\.|.)
    """,
    re.VERBOSE,
)

_TYPE_KEYWORDS = frozenset({"class", "interface", "enum", "record"})
_NOT_METHOD_NAMES = frozenset({
    "if", "for", "while", "switch", "catch", "synchronized", "try", "do", "else",
    "return", "new", "throw", "case", "assert", "super", "this", "finally",
})
_MODIFIERS = frozenset({
    "public", "protected", "private", "static", "final", "abstract", "native",
    "synchronized", "transient", "volatile", "strictfp", "default",
})
_HEADER_DELIMITERS = frozenset({";", "{", "}"})
_TYPE_NAME_PUNCT = frozenset({".", "<", ">", ",", "?", "&", "[", "]"})


class UnbalancedSourceError(ValueError):
    pass


@dataclass
class CodeSnippet:
    snippet_id: str
    project: str
    file_path: str
    method_name: str
    signature: str
    body_text: str
    leading_comment: Optional[str] = None
    start_line: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CodeSnippet":
        if not isinstance(data, dict):
            raise ValueError("expected a JSON object")
        for key in ("snippet_id", "body_text"):
            if not data.get(key):
                raise ValueError(f"missing required field {key!r}")
        return cls(
            snippet_id=str(data["snippet_id"]),
            project=str(data.get("project", "")),
            file_path=str(data.get("file_path", "")),
            method_name=str(data.get("method_name", "")),
            signature=str(data.get("signature", "")),
            body_text=str(data["body_text"]),
            leading_comment=data.get("leading_comment"),
            start_line=int(data.get("start_line", 0)),
        )

    @property
    def index_text(self) -> str:
        parts = (self.method_name, self.signature, self.leading_comment or "", self.body_text)
        return " ".join(p for p in parts if p)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    start: int
    end: int


def _lex(source: str) -> Tuple[List[_Token], List[_Token]]:
    code, comments = [], []
    for m in _TOKEN_RE.finditer(source):
        kind = m.lastgroup
        if kind == "ws":
            continue
        tok = _Token(kind, m.group(), m.start(), m.end())
        (comments if kind == "comment" else code).append(tok)
    return code, comments


@dataclass
class _Frame:
    kind: str  # "type", "method" or "block"
    open_index: int
    name: Optional[str] = None
    header_start: int = 0
    name_index: int = 0


def _header_start(tokens: List[_Token], brace: int) -> int:
    """Index of the first token of the declaration ending at ``tokens[brace]``."""
    depth = 0
    j = brace - 1
    while j >= 0:
        text = tokens[j].text
        if text == ")":
            depth += 1
        elif text == "(":
            depth -= 1
        elif depth <= 0 and text in _HEADER_DELIMITERS:
            break
        j -= 1
    return j + 1


def _strip_throws(tokens: List[_Token], start: int, end: int) -> int:
    """End index (exclusive) of the header once a trailing throws clause is removed."""
    for j in range(end - 1, start - 1, -1):
        if tokens[j].text == "throws":
            return j
        if tokens[j].kind != "ident" and tokens[j].text not in {".", ",", "<", ">", "?", "&"}:
            break
    return end


def _matching_open_paren(tokens: List[_Token], close: int, start: int) -> Optional[int]:
    depth = 0
    for j in range(close, start - 1, -1):
        if tokens[j].text == ")":
            depth += 1
        elif tokens[j].text == "(":
            depth -= 1
            if depth == 0:
                return j
    return None


def _declares_type(header: List[_Token], k: int) -> bool:
    if k > 0 and header[k - 1].text == ".":
        return False
    if k + 1 >= len(header) or header[k + 1].kind != "ident":
        return False
    if header[k].text == "record":
        # "record" is also a legal identifier
        return k + 2 < len(header) and header[k + 2].text in {"(", "<"}
    return True


def _classify(tokens: List[_Token], brace: int, enclosing_type: Optional[str]) -> _Frame:
    start = _header_start(tokens, brace)
    header = tokens[start:brace]

    depth = 0
    for k, tok in enumerate(header):
        if tok.text == "(":
            depth += 1
        elif tok.text == ")":
            depth -= 1
        elif depth == 0 and tok.text in _TYPE_KEYWORDS and _declares_type(header, k):
            return _Frame("type", brace, name=header[k + 1].text, header_start=start)

    end = _strip_throws(tokens, start, brace)
    if end <= start or tokens[end - 1].text != ")":
        return _Frame("block", brace)
    open_paren = _matching_open_paren(tokens, end - 1, start)
    if open_paren is None or open_paren - 1 < start:
        return _Frame("block", brace)
    k = open_paren - 1
    while k >= start and (
        (tokens[k].kind == "ident" and tokens[k].text != "new") or tokens[k].text in _TYPE_NAME_PUNCT
    ):
        k -= 1
    if k >= start and tokens[k].text == "new":
        return _Frame("type", brace, name=None, header_start=start)

    name_tok = tokens[open_paren - 1]
    if name_tok.kind != "ident" or name_tok.text in _NOT_METHOD_NAMES:
        return _Frame("block", brace)
    before = tokens[open_paren - 2] if open_paren - 2 >= start else None
    if before is None or before.text in _MODIFIERS:
        # constructor: no return type, so the name must be the enclosing type
        if name_tok.text != enclosing_type:
            return _Frame("block", brace)
    elif not (before.kind == "ident" or before.text in {">", "]"}):
        return _Frame("block", brace)
    return _Frame("method", brace, name=name_tok.text, header_start=start, name_index=open_paren - 1)


def _leading_comment(source: str, comments: List[_Token], comment_starts: List[int],
                     lower: int, upper: int) -> Optional[str]:
    """Comments directly above offset ``upper`` (whitespace-only gaps), after ``lower``."""
    k = bisect.bisect_left(comment_starts, upper) - 1
    collected = []
    edge = upper
    while k >= 0:
        c = comments[k]
        if c.start < lower or c.end > edge or source[c.end:edge].strip():
            break
        collected.append(c.text)
        edge = c.start
        k -= 1
    if not collected:
        return None
    return "\n".join(reversed(collected))


def extract_methods(java_source: str, file_path: str = "", project: str = "") -> List[CodeSnippet]:
    """Segment Java source into one snippet per method or constructor body.

    Methods of nested and anonymous classes are returned as their own
    snippets and also stay inside the enclosing method's text. Source with
    unbalanced braces yields no snippets.
    """
    try:
        return _extract(java_source, file_path, project)
    except UnbalancedSourceError as exc:
        log.warning("skipping %s: %s", file_path or "<source>", exc)
        return []


def _extract(source: str, file_path: str, project: str) -> List[CodeSnippet]:
    tokens, comments = _lex(source)
    comment_starts = [c.start for c in comments]
    line_starts = [0] + [m.end() for m in re.finditer("\n", source)]

    def line_of(offset: int) -> int:
        return bisect.bisect_right(line_starts, offset)

    stack: List[_Frame] = []
    found: List[Tuple[int, _Frame, int]] = []
    for i, tok in enumerate(tokens):
        if tok.text == "{":
            enclosing = stack[-1].name if stack and stack[-1].kind == "type" else None
            stack.append(_classify(tokens, i, enclosing))
        elif tok.text == "}":
            if not stack:
                raise UnbalancedSourceError(f"unmatched '}}' on line {line_of(tok.start)}")
            frame = stack.pop()
            if frame.kind == "method":
                found.append((tokens[frame.header_start].start, frame, i))
    if stack:
        raise UnbalancedSourceError(f"{len(stack)} unclosed '{{' at end of file")

    snippets = []
    seen_ids: Counter = Counter()
    for header_offset, frame, close in sorted(found, key=lambda f: (f[0], f[1].open_index)):
        open_tok = tokens[frame.open_index]
        name_tok = tokens[frame.name_index]
        signature = " ".join(source[header_offset:open_tok.start].split())
        lower = tokens[frame.header_start - 1].end if frame.header_start > 0 else 0
        line = line_of(name_tok.start)
        snippet_id = f"{project}/{file_path}#{frame.name}@{line}"
        seen_ids[snippet_id] += 1
        if seen_ids[snippet_id] > 1:
            snippet_id = f"{snippet_id}~{seen_ids[snippet_id]}"
        snippets.append(CodeSnippet(
            snippet_id=snippet_id,
            project=project,
            file_path=file_path,
            method_name=frame.name,
            signature=signature,
            body_text=source[open_tok.start:tokens[close].end],
            leading_comment=_leading_comment(source, comments, comment_starts, lower, header_offset),
            start_line=line,
        ))
    return snippets


def code_document(snippet: CodeSnippet, analyzer: AnalyzerConfig) -> DocumentRecord:
    return DocumentRecord(
        doc_id=snippet.snippet_id,
        fields={
            "snippet_id": snippet.snippet_id,
            "project": snippet.project,
            "file_path": snippet.file_path,
            "method_name": snippet.method_name,
        },
        term_bag=analyze(snippet.index_text, analyzer),
    )


def iter_java_files(root) -> List[Path]:
    root = Path(root)
    return sorted((p for p in root.rglob("*.java") if p.is_file()),
                  key=lambda p: p.relative_to(root).as_posix())


def _project_and_path(root: Path, path: Path) -> Tuple[str, str]:
    rel = path.relative_to(root).parts
    if len(rel) == 1:
        return root.resolve().name, rel[0]
    return rel[0], "/".join(rel[1:])


def iter_tree_snippets(root_dir, counters: Optional[Counter] = None) -> Iterable[CodeSnippet]:
    counters = counters if counters is not None else Counter()
    root = Path(root_dir)
    for path in iter_java_files(root):
        try:
            source = path.read_bytes().decode("utf-8", errors="replace")
        except OSError as exc:
            counters["files_unreadable"] += 1
            log.warning("skipping unreadable file %s: %s", path, exc)
            continue
        project, file_path = _project_and_path(root, path)
        try:
            snippets = _extract(source, file_path, project)
        except UnbalancedSourceError as exc:
            counters["files_unbalanced"] += 1
            log.warning("skipping %s: %s", path, exc)
            continue
        counters["files"] += 1
        counters["methods"] += len(snippets)
        yield from snippets


def _build(snippets: Iterable[CodeSnippet], analyzer: AnalyzerConfig, out_path,
           counters: Counter) -> InvertedIndex:
    index = InvertedIndex.create(out_path, analyzer)
    for snippet in snippets:
        index.add_document(code_document(snippet, analyzer))
        counters["snippets_indexed"] += 1
    if not counters["snippets_indexed"]:
        log.warning("no code snippets to index; writing an empty index")
    index.commit()
    return index


def ingest_tree(root_dir, analyzer: AnalyzerConfig, out_path=None,
                counters: Optional[Counter] = None) -> InvertedIndex:
    """Index every method of every ``*.java`` file under ``root_dir``.

    Files are visited in lexicographic order of their relative path.
    """
    counters = counters if counters is not None else Counter()
    return _build(iter_tree_snippets(root_dir, counters), analyzer, out_path, counters)


def read_snippets_jsonl(path) -> List[CodeSnippet]:
    snippets = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                snippets.append(CodeSnippet.from_dict(json.loads(line)))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: invalid snippet: {exc}") from exc
    return snippets


def ingest_jsonl(path, analyzer: AnalyzerConfig, out_path=None,
                 counters: Optional[Counter] = None) -> InvertedIndex:
    counters = counters if counters is not None else Counter()
    snippets = read_snippets_jsonl(path)
    try:
        return _build(snippets, analyzer, out_path, counters)
    except DuplicateDocumentError as exc:
        raise ValueError(f"{path}: {exc}") from exc
