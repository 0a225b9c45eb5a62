"""Tokenization and lexical helpers shared by every stage of the pipeline."""
from __future__ import annotations

import math
import re
from functools import lru_cache
from importlib import resources
from typing import Iterable

_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercased tokens split on whitespace and punctuation; empty fragments dropped."""
    return _TOKEN_RE.findall(text.lower())


def count_tokens(text: str, mode: str = "tokens") -> int:
    """Token cost of ``text``.

    ``mode="tokens"`` uses :func:`tokenize`; ``mode="chars4"`` approximates one
    token per four characters.
    """
    if mode == "tokens":
        return len(tokenize(text))
    if mode == "chars4":
        return math.ceil(len(text) / 4)
    raise ValueError(f"unknown token mode: {mode!r}")


def jaccard(a: Iterable[str] | str, b: Iterable[str] | str) -> float:
    """Token-set Jaccard similarity. Strings are tokenized first; two empty sets score 0."""
    sa = set(tokenize(a)) if isinstance(a, str) else set(a)
    sb = set(tokenize(b)) if isinstance(b, str) else set(b)
    if not sa and not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def min_max(values: dict[str, float]) -> dict[str, float]:
    """Min-max normalize to [0, 1]. If every value is equal, everything maps to 0."""
    if not values:
        return {}
    lo = min(values.values())
    hi = max(values.values())
    if hi == lo:
        return {k: 0.0 for k in values}
    span = hi - lo
    return {k: (v - lo) / span for k, v in values.items()}


@lru_cache(maxsize=None)
def load_lexicon(name: str) -> tuple[str, ...]:
    """Read a bundled lexicon file (``data/<name>.txt``), skipping comments and blanks."""
    raw = resources.files("skillforge.data").joinpath(f"{name}.txt").read_text(encoding="utf-8")
    words = []
    for line in raw.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.append(line)
    return tuple(words)


def keyword_pattern(keywords: Iterable[str]) -> re.Pattern[str]:
    """Case-insensitive whole-word pattern; multi-word keywords allow any whitespace run."""
    parts = sorted({r"\s+".join(map(re.escape, k.split())) for k in keywords}, key=lambda p: (-len(p), p))
    if not parts:
        return re.compile(r"(?!x)x")
    return re.compile(r"\b(?:" + "|".join(parts) + r")\b", re.IGNORECASE)


# File-like token: a stem with at least one word character, a dot, then a short
# extension containing a letter.
_FILE_RE = re.compile(r"[\w./~-]*\w\.(?=[A-Za-z0-9]{0,7}[A-Za-z])[A-Za-z0-9]{1,8}")
_NOT_FILES = {"e.g", "i.e", "etc.", "vs.", "a.m", "p.m"}
_EDGE_CHARS = "`'\"()[]{}<>,;:!?"


def file_names(text: str) -> list[str]:
    """File-name-like tokens in order of appearance (``refs.bib``, ``out/report.pdf``)."""
    found = []
    for raw in text.split():
        tok = raw.strip(_EDGE_CHARS).rstrip(".")
        if tok.lower() in _NOT_FILES:
            continue
        if _FILE_RE.fullmatch(tok):
            found.append(tok)
    return found


_FLAG_RE = re.compile(r"(?:^|\s)--?[A-Za-z][\w-]*")


def looks_like_command(text: str) -> bool:
    """True for shell-prompt lines (``$ cmd``) or a command word followed by flags."""
    s = text.strip()
    if s.startswith("$ "):
        return True
    parts = s.split(None, 1)
    return len(parts) == 2 and bool(re.match(r"[A-Za-z][\w.+-]*$", parts[0])) and bool(_FLAG_RE.search(" " + parts[1]))
