"""Deterministic subunit extraction, normalization and global dedup."""
from __future__ import annotations

import hashlib
import re
import unicodedata
from dataclasses import dataclass
from typing import Iterable

from .config import SubunitConfig
from .corpus import SkillDocument
from .text import file_names, keyword_pattern, load_lexicon, looks_like_command, tokenize

PROCEDURAL = "procedural"
ELEMENT = "element"
CONSTRAINT = "constraint"
# When one normalized text is extracted under several kinds, the first of
# these wins; the choice is independent of document order.
KIND_PRIORITY = (CONSTRAINT, ELEMENT, PROCEDURAL)


@dataclass(frozen=True)
class Subunit:
    subunit_id: str
    text: str
    kind: str
    token_len: int


@dataclass(frozen=True, order=True)
class ExtractionEdge:
    skill_id: str
    subunit_id: str


_LIST_MARKER = re.compile(r"^(?:\d{1,3}[.)]|[-*+•]|\[[ xX]\])\s+")
_CODE_SPAN = re.compile(r"`([^`\n]+)`")
_TRAILING = ".,;:!?"
_WS = re.compile(r"\s+")


def _normalize_once(s: str) -> str:
    s = unicodedata.normalize("NFC", s).lower()
    s = _WS.sub(" ", s).strip()
    s = _LIST_MARKER.sub("", s)
    s = s.rstrip(_TRAILING).strip()
    if len(s) >= 2 and s[0] == "`" and s[-1] == "`":
        s = s[1:-1].strip()
    return s


def normalize_text(raw: str) -> str:
    """Canonical subunit text: NFC, lowercase, single spaces, no list marker,
    no trailing punctuation, no surrounding backticks."""
    prev = None
    s = raw
    # markers and punctuation can nest ("1. - `x`."), so iterate to a fixpoint
    while s != prev:
        prev, s = s, _normalize_once(s)
    return s


def subunit_id(text: str) -> str:
    return hashlib.blake2b(text.encode("utf-8"), digest_size=8).hexdigest()


class Extractor:
    """Rule-based candidate extractor; lexicons come from config or the bundled data files."""

    def __init__(self, cfg: SubunitConfig | None = None):
        self.cfg = cfg or SubunitConfig()
        verbs = self.cfg.imperative_verbs
        self.verbs = frozenset(v.lower() for v in (verbs if verbs is not None else load_lexicon("imperative_verbs")))
        keywords = self.cfg.requirement_keywords
        self.keywords = tuple(keywords if keywords is not None else load_lexicon("requirement_keywords"))
        self.requirement_re = keyword_pattern(self.keywords)

    def is_procedural(self, line: str) -> bool:
        if _LIST_MARKER.match(line):
            return True
        words = line.split(None, 1)
        return bool(words) and words[0].strip("`*_").lower() in self.verbs

    def is_constraint(self, line: str) -> bool:
        return len(tokenize(line)) <= self.cfg.max_constraint_tokens and bool(self.requirement_re.search(line))

    def elements(self, line: str) -> list[str]:
        out = []
        spans = _CODE_SPAN.findall(line)
        for span in spans:
            span = span.strip()
            if looks_like_command(span):
                out.append(span[2:] if span.startswith("$ ") else span)
            elif len(span.split()) == 1:
                out.append(span)
        bare = _CODE_SPAN.sub(" ", line)
        stripped = _LIST_MARKER.sub("", bare.strip())
        if stripped.startswith("$ "):
            out.append(stripped[2:])
        out.extend(file_names(line))
        return out

    def extract(self, doc: SkillDocument) -> list[tuple[str, str]]:
        """Candidates ``(normalized_text, kind)`` in order of appearance, unique per (text, kind)."""
        found: list[tuple[str, str]] = []
        seen: set[tuple[str, str]] = set()

        def add(raw: str, kind: str) -> None:
            text = normalize_text(raw)
            if text and (text, kind) not in seen:
                seen.add((text, kind))
                found.append((text, kind))

        in_fence = False
        for raw_line in doc.body:
            line = raw_line.strip()
            if line.startswith("```") or line.startswith("~~~"):
                in_fence = not in_fence
                continue
            if not line:
                continue
            if in_fence:
                if looks_like_command(line):
                    add(line[2:] if line.startswith("$ ") else line, ELEMENT)
                continue
            if line.startswith("#") or line.startswith("|"):
                for el in self.elements(line):
                    add(el, ELEMENT)
                continue
            if line.startswith(">"):
                line = line.lstrip("> ").strip()
            if self.is_procedural(line):
                add(line, PROCEDURAL)
            for el in self.elements(line):
                add(el, ELEMENT)
            if self.is_constraint(line):
                add(line, CONSTRAINT)
        return found


def extract_candidates(doc: SkillDocument, cfg: SubunitConfig | None = None) -> list[tuple[str, str]]:
    return Extractor(cfg).extract(doc)


def build_subunit_set(docs: Iterable[SkillDocument], cfg: SubunitConfig | None = None
                      ) -> tuple[list[Subunit], list[ExtractionEdge]]:
    cfg = cfg or SubunitConfig()
    extractor = Extractor(cfg)
    kinds: dict[str, set[str]] = {}
    edges: set[ExtractionEdge] = set()
    for doc in docs:
        for text, kind in extractor.extract(doc):
            n = len(tokenize(text))
            if not cfg.min_tokens <= n <= cfg.max_tokens:
                continue
            kinds.setdefault(text, set()).add(kind)
            edges.add(ExtractionEdge(doc.skill_id, subunit_id(text)))
    subunits = []
    for text, ks in kinds.items():
        kind = next(k for k in KIND_PRIORITY if k in ks)
        subunits.append(Subunit(subunit_id(text), text, kind, len(tokenize(text))))
    subunits.sort(key=lambda u: (u.subunit_id, u.text))
    ids = [u.subunit_id for u in subunits]
    if len(set(ids)) != len(ids):
        raise ValueError("subunit id collision")
    return subunits, sorted(edges)


def degrees(edges: Iterable[ExtractionEdge]) -> dict[str, int]:
    deg: dict[str, int] = {}
    for e in edges:
        deg[e.subunit_id] = deg.get(e.subunit_id, 0) + 1
    return deg
