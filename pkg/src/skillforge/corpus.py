"""Load a skill repository (``<root>/<skill-id>/SKILL.md``) into parsed documents."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger("skillforge.corpus")

SKILL_FILE = "SKILL.md"


class CorpusError(Exception):
    """Fatal repository problem (missing root, duplicate skill ids)."""


class FrontmatterError(ValueError):
    """Raised by :func:`parse_skill_file` in strict mode for an unterminated fence."""


@dataclass(frozen=True)
class SkillDocument:
    skill_id: str
    name: str
    description: str
    body: tuple[str, ...]
    resources: tuple[str, ...] = ()
    frontmatter: tuple[tuple[str, str], ...] = ()


@dataclass
class RepositoryManifest:
    root_path: str
    skill_ids: list[str] = field(default_factory=list)
    load_warnings: list[tuple[str, str]] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {"root_path": self.root_path, "skill_ids": self.skill_ids,
             "load_warnings": [list(w) for w in self.load_warnings]},
            sort_keys=True,
        )


def _warn(manifest: RepositoryManifest | None, skill_id: str, message: str) -> None:
    log.warning(json.dumps({"skill_id": skill_id, "message": message}, sort_keys=True))
    if manifest is not None:
        manifest.load_warnings.append((skill_id, message))


def parse_skill_file(text: str, strict: bool = False) -> tuple[dict[str, str], list[str]]:
    """Split a SKILL.md into a flat frontmatter mapping and body lines.

    The frontmatter reader only understands ``key: value`` lines between two
    ``---`` fences. Indented continuation lines (nested YAML) are folded into
    the raw string value of the preceding key. Without a leading fence the
    whole text is body. An unterminated fence is also treated as "no
    frontmatter" unless ``strict`` is set, in which case it raises.
    """
    text = text.lstrip("﻿").replace("\r\n", "\n").replace("\r", "\n")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines or lines[0].strip() != "---":
        return {}, lines
    try:
        end = next(i for i in range(1, len(lines)) if lines[i].strip() == "---")
    except StopIteration:
        if strict:
            raise FrontmatterError("unterminated frontmatter fence") from None
        log.warning(json.dumps({"skill_id": None, "message": "unterminated frontmatter fence; text kept as body"}))
        return {}, lines

    meta: dict[str, str] = {}
    key = None
    for line in lines[1:end]:
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        k, sep, v = line.partition(":")
        if line[0] in " \t-" or not sep or not k.strip():
            # continuation of a nested value, kept raw
            if key is not None:
                meta[key] = (meta[key] + "\n" + line.strip()).strip()
            continue
        key = k.strip()
        meta[key] = _unquote(v.strip())
    return meta, lines[end + 1:]


def _unquote(v: str) -> str:
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        return v[1:-1]
    # block scalar indicators keep their folded continuation lines
    if v in ("|", ">", "|-", ">-"):
        return ""
    return v


def _first_paragraph(body: list[str]) -> str:
    para: list[str] = []
    for line in body:
        s = line.strip()
        if not s:
            if para:
                break
            continue
        if s.startswith("#"):
            if para:
                break
            continue
        para.append(s)
    return " ".join(para)


def validate_skill_id(name: str) -> str:
    if "/" in name or "\\" in name or name in ("", ".", ".."):
        raise CorpusError(f"invalid skill id {name!r}")
    return name.lower()


def document_from_text(skill_id: str, text: str, resources=()) -> SkillDocument:
    """Build a SkillDocument from raw SKILL.md text.

    Raises FrontmatterError when the fence is unterminated or neither a name
    nor a description can be recovered.
    """
    meta, body = parse_skill_file(text, strict=True)
    name = meta.get("name", "").strip() or skill_id
    description = meta.get("description", "").strip() or _first_paragraph(body)
    if not description:
        raise FrontmatterError("empty name and description")
    return SkillDocument(
        skill_id=skill_id,
        name=name,
        description=" ".join(description.split()),
        body=tuple(body),
        resources=tuple(resources),
        frontmatter=tuple(sorted(meta.items())),
    )


def load_repository(root: str | Path) -> tuple[RepositoryManifest, list[SkillDocument]]:
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"skill repository root not found: {root}")
    manifest = RepositoryManifest(root_path=str(root))
    seen: dict[str, str] = {}
    docs: list[SkillDocument] = []
    for folder in sorted(p for p in root.iterdir() if p.is_dir()):
        skill_id = validate_skill_id(folder.name)
        skill_file = folder / SKILL_FILE
        if not skill_file.is_file():
            _warn(manifest, skill_id, f"no {SKILL_FILE}; skipped")
            continue
        if skill_id in seen:
            raise CorpusError(f"duplicate skill id {skill_id!r} ({seen[skill_id]} and {folder.name})")
        seen[skill_id] = folder.name
        resources = sorted(
            p.relative_to(folder).as_posix()
            for p in folder.rglob("*")
            if p.is_file() and p != skill_file
        )
        try:
            text = skill_file.read_text(encoding="utf-8")
            doc = document_from_text(skill_id, text, resources)
        except (UnicodeDecodeError, FrontmatterError) as exc:
            _warn(manifest, skill_id, f"unparseable {SKILL_FILE}: {exc}; skipped")
            continue
        docs.append(doc)
    docs.sort(key=lambda d: d.skill_id)
    manifest.skill_ids = [d.skill_id for d in docs]
    return manifest, docs
