"""Text normalization: identifier splitting, stop-word removal, stemming."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from importlib import resources
from typing import Iterable, List

from .porter import stem

__all__ = [
    "AnalyzerConfig",
    "TermBag",
    "analyze",
    "default_stopwords",
    "load_stopwords",
    "remove_stopwords",
    "stem",
    "tokenize",
]

# ordered multiset of normalized terms
TermBag = List[str]


def _parse_word_lines(lines: Iterable[str]) -> frozenset:
    words = set()
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        words.add(line.lower())
    return frozenset(words)


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset:
    """The built-in SMART English stop-word list."""
    text = resources.files("qeck").joinpath("data/smart_stopwords.txt").read_text("utf-8")
    return _parse_word_lines(text.splitlines())


def load_stopwords(path) -> frozenset:
    """Read a stop-word file: one word per line, ``#`` lines are comments."""
    with open(path, encoding="utf-8") as fh:
        return _parse_word_lines(fh)


@dataclass(frozen=True)
class AnalyzerConfig:
    stopwords: frozenset = field(default_factory=default_stopwords)
    min_token_length: int = 2
    keep_digits: bool = False

    def __post_init__(self):
        if self.min_token_length < 1:
            raise ValueError(f"min_token_length must be >= 1, got {self.min_token_length}")
        if not isinstance(self.stopwords, frozenset):
            object.__setattr__(self, "stopwords", frozenset(self.stopwords))

    @classmethod
    def from_file(cls, stopword_path, **kwargs) -> "AnalyzerConfig":
        return cls(stopwords=load_stopwords(stopword_path), **kwargs)

    def to_dict(self) -> dict:
        return {
            "stemmer": "porter",
            "min_token_length": self.min_token_length,
            "keep_digits": self.keep_digits,
            "stopwords": sorted(self.stopwords),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnalyzerConfig":
        if data.get("stemmer", "porter") != "porter":
            raise ValueError(f"unsupported stemmer {data['stemmer']!r}")
        return cls(
            stopwords=frozenset(data["stopwords"]),
            min_token_length=int(data["min_token_length"]),
            keep_digits=bool(data["keep_digits"]),
        )

    @cached_property
    def fingerprint(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _is_upper(ch: str) -> bool:
    return "A" <= ch <= "Z"


def _is_lower(ch: str) -> bool:
    return "a" <= ch <= "z"


_ALPHA_RUN = re.compile(r"[A-Za-z]+")
_ALNUM_RUN = re.compile(r"[A-Za-z0-9]+")


def _split_camel(run: str) -> List[str]:
    # digits (when kept) behave like lowercase letters for boundary purposes
    parts = []
    start = 0
    for i in range(1, len(run)):
        prev, cur = run[i - 1], run[i]
        if not _is_upper(cur):
            continue
        if not _is_upper(prev):
            boundary = True
        else:
            boundary = i + 1 < len(run) and _is_lower(run[i + 1])
        if boundary:
            parts.append(run[start:i])
            start = i
    parts.append(run[start:])
    return parts


def tokenize(text: str, config: AnalyzerConfig) -> List[str]:
    """Split raw text into lowercase word tokens.

    Tokens are maximal runs of ASCII letters (plus digits when
    ``config.keep_digits``), further split at camel-case boundaries:
    ``"MediaRecorder"`` gives ``["media", "recorder"]`` and
    ``"XMLParser"`` gives ``["xml", "parser"]``.
    """
    run_re = _ALNUM_RUN if config.keep_digits else _ALPHA_RUN
    min_len = config.min_token_length
    tokens: List[str] = []
    for run in run_re.findall(text):
        for part in _split_camel(run):
            if len(part) >= min_len:
                tokens.append(part.lower())
    return tokens


def remove_stopwords(tokens: Iterable[str], config: AnalyzerConfig) -> List[str]:
    stopwords = config.stopwords
    return [t for t in tokens if t not in stopwords]


def analyze(text: str, config: AnalyzerConfig) -> TermBag:
    """tokenize, drop stop words, then Porter-stem each remaining token."""
    return [stem(t) for t in remove_stopwords(tokenize(text, config), config)]
