"""Seeded synthetic skill corpora and planted-relevance tasks.

Each skill belongs to a domain and carries a few subunits unique to it (built
from invented words), a few shared with its domain, and one shared globally.
A task is made from one gold skill's unique subunits, reworded by a fixed
synonym table and wrapped in domain context, so the relevant skill and
subunits are known by construction.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from ..corpus import SkillDocument, document_from_text
from ..subunits import normalize_text, subunit_id

DOMAINS = [
    ("pdf", ["pdf", "page", "document", "merge"], "qpdf", "pdf"),
    ("citation", ["citation", "bibtex", "reference", "bibliography"], "pandoc", "bib"),
    ("spreadsheet", ["spreadsheet", "sheet", "cell", "workbook"], "openpyxl", "xlsx"),
    ("image", ["image", "pixel", "resize", "thumbnail"], "convert", "png"),
    ("audio", ["audio", "waveform", "sample", "track"], "ffmpeg", "wav"),
    ("database", ["database", "table", "query", "schema"], "sqlite3", "sql"),
    ("webpage", ["webpage", "html", "scrape", "link"], "curl", "html"),
    ("dataset", ["dataset", "column", "row", "csv"], "csvkit", "csv"),
    ("model", ["model", "training", "epoch", "checkpoint"], "python", "pt"),
    ("report", ["report", "summary", "chart", "section"], "quarto", "md"),
    ("archive", ["archive", "compress", "bundle", "extract"], "tar", "tgz"),
    ("geodata", ["geodata", "map", "coordinate", "polygon"], "ogr2ogr", "geojson"),
]

VERBS = ["generate", "validate", "merge", "convert", "extract", "compute", "filter", "render", "parse", "export"]
SYNONYMS = {
    "generate": "create", "validate": "check", "merge": "combine", "convert": "transform",
    "extract": "pull", "compute": "calculate", "filter": "screen", "render": "draw",
    "parse": "read", "export": "save", "the": "each", "with": "using", "file": "files",
}
GLOBAL_STEPS = [
    "Read the task instructions before changing any files",
    "Keep a log of every command you run",
    "Write outputs to the working directory root",
]
_SYLLABLES = [c + v for c in "bdfgklmnprstvz" for v in "aeiou"]


@dataclass
class SyntheticTask:
    task_id: str
    text: str
    gold_skill_ids: list[str]
    gold_subunit_ids: list[str] = field(default_factory=list)
    expected_files: list[str] = field(default_factory=list)
    expected_formats: list[str] = field(default_factory=list)


@dataclass
class SyntheticSkill:
    skill_id: str
    domain: str
    text: str
    unique_lines: list[str]


def _words(rng: random.Random, n: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < n:
        w = "".join(rng.choice(_SYLLABLES) for _ in range(rng.choice((2, 3))))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


def _domain_steps(name: str, nouns: list[str], tool: str, ext: str) -> list[str]:
    a, b, c, d = nouns
    return [
        f"Validate the output {a} {b} before delivery",
        f"Open the source {c} with {tool} first",
        f"Always keep the original .{ext} {d} unchanged",
        f"Check {b} counts against the {a} index",
        f"Export the final {a} {c} as .{ext}",
        f"Review each {d} {b} for {name} errors",
    ]


def generate_corpus(n_skills: int, seed: int = 0, n_domains: int | None = None) -> list[SyntheticSkill]:
    """``n_skills`` SKILL.md texts spread round-robin over ``n_domains`` domains."""
    rng = random.Random(seed)
    n_domains = n_domains or max(1, min(len(DOMAINS), math.isqrt(max(n_skills, 1))))
    domains = DOMAINS[:n_domains]
    taken: set[str] = set()
    skills = []
    for i in range(n_skills):
        name, nouns, tool, ext = domains[i % n_domains]
        w = _words(rng, 5, taken)
        verb1, verb2, verb3 = rng.sample(VERBS, 3)
        noun = rng.choice(nouns)
        skill_id = f"{name}-{w[0]}-{i:03d}"
        unique = [
            f"{verb1.capitalize()} the {w[1]} {noun} file with {w[2]} settings",
            f"{verb2.capitalize()} {w[3]} {rng.choice(nouns)} entries from the {w[1]} layout",
            f"{verb3.capitalize()} the {w[4]} {rng.choice(nouns)} table for {w[2]} review",
        ]
        shared = rng.sample(_domain_steps(name, nouns, tool, ext), 3)
        other = domains[rng.randrange(n_domains)]
        noise = rng.choice(_domain_steps(*other))
        steps = unique + shared + [noise, rng.choice(GLOBAL_STEPS)]
        rng.shuffle(steps)
        body = [f"# {name.capitalize()} {w[0]}", "", "## Steps", ""]
        body += [f"{j}. {s}" for j, s in enumerate(steps, 1)]
        body += ["", "## Usage", "", f"Run `{tool} --{w[2]} {w[1]}_{w[0]}.{ext}` on the input.",
                 f"Never edit {w[3]} {noun} records by hand."]
        description = (f"{name.capitalize()} {nouns[0]} tool for {w[0]} {noun} work: "
                       f"{verb1} and {verb2} {nouns[1]} {nouns[2]} content.")
        text = "\n".join(["---", f"name: {skill_id}", f"description: {description}", "---", ""] + body) + "\n"
        skills.append(SyntheticSkill(skill_id, name, text, unique))
    return skills


def write_corpus(skills: Sequence[SyntheticSkill], root: str | Path) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for s in skills:
        d = root / s.skill_id
        d.mkdir(exist_ok=True)
        (d / "SKILL.md").write_text(s.text, encoding="utf-8")
    return root


def corpus_documents(skills: Sequence[SyntheticSkill]) -> list[SkillDocument]:
    return [document_from_text(s.skill_id, s.text) for s in skills]


def _paraphrase(line: str) -> str:
    return " ".join(SYNONYMS.get(w.lower(), w.lower()) for w in line.split())


def generate_tasks(skills: Sequence[SyntheticSkill], n_tasks: int, seed: int = 0) -> list[SyntheticTask]:
    rng = random.Random(seed + 7919)
    by_domain = {name: nouns for name, nouns, _, _ in DOMAINS}
    ext_of = {name: ext for name, _, _, ext in DOMAINS}
    tasks = []
    for t in range(n_tasks):
        gold = skills[rng.randrange(len(skills))]
        picked = rng.sample(gold.unique_lines, 2)
        nouns = by_domain[gold.domain]
        out_file = f"output_{t:03d}.{ext_of[gold.domain]}"
        text = (f"In this {gold.domain} {rng.choice(nouns)} job, {_paraphrase(picked[0])}, "
                f"then {_paraphrase(picked[1])}. Save the result as {out_file}; "
                f"the {nouns[0]} output must stay valid.")
        tasks.append(SyntheticTask(
            task_id=f"synth-{t:03d}",
            text=text,
            gold_skill_ids=[gold.skill_id],
            gold_subunit_ids=sorted(subunit_id(normalize_text(f"1. {line}")) for line in picked),
            expected_files=[out_file],
            expected_formats=[ext_of[gold.domain]] if ext_of[gold.domain] in ("csv", "md", "pdf", "html") else [],
        ))
    return tasks


def save_taskset(tasks: Sequence[SyntheticTask], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps([asdict(t) for t in tasks], indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_taskset(path: str | Path) -> list[SyntheticTask]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("tasks", [])
    return [SyntheticTask(**{k: v for k, v in row.items() if k in SyntheticTask.__dataclass_fields__})
            for row in data]
