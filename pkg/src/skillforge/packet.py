"""Budgeted context packet: section layout, drop policy and the two file renderings."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .compilation import AffiliatedCue, OutputContract, cue_line
from .config import CompileConfig
from .graph import SkillGraph
from .retrieval import ScoredSkill, SubunitHighlight
from .text import count_tokens

SCHEMA_VERSION = 1
SECTION_ORDER = ("task", "selected_skills", "output_contract", "highlights", "affiliated_cues", "checklist")
HEADERS = {
    "task": "# READ_FIRST\n\n## Task",
    "selected_skills": "## Selected skills",
    "output_contract": "## Output contract",
    "highlights": "## Skill highlights",
    "affiliated_cues": "## Affiliated cues",
    "checklist": "## Execution checklist",
}
# lowest priority first
DROP_ORDER = ("affiliated_cues", "highlights", "checklist", "output_contract")


class BudgetInfeasibleError(ValueError):
    pass


@dataclass
class Item:
    item_id: str
    line: str
    score: float = 0.0
    data: dict = field(default_factory=dict)


@dataclass
class Section:
    kind: str
    rendered_text: str
    token_count: int
    items: list[Item] = field(default_factory=list)


@dataclass
class CompiledContext:
    task_id: str
    sections: list[Section]
    total_tokens: int
    budget: int
    dropped: list[tuple[str, str, str]]
    task_digest: str = ""
    selected: list[dict] = field(default_factory=list)
    token_mode: str = "tokens"

    def section(self, kind: str) -> Section | None:
        return next((s for s in self.sections if s.kind == kind), None)

    def items(self, kind: str) -> list[Item]:
        s = self.section(kind)
        return s.items if s else []


def digest(text: str, max_tokens: int, mode: str = "tokens") -> str:
    """Whitespace-joined prefix of ``text`` costing at most ``max_tokens``."""
    words = text.split()
    out: list[str] = []
    for w in words:
        if count_tokens(" ".join(out + [w]), mode) > max_tokens:
            return " ".join(out) + " ..."
        out.append(w)
    return " ".join(out)


def checklist_items(contract: OutputContract, has_evidence: bool) -> list[str]:
    items = ["Read each selected skill's SKILL.md before starting."]
    if contract.expected_files:
        items.append("Write the expected output files: " + ", ".join(contract.expected_files) + ".")
    if contract.constraint_lines:
        items.append("Re-check every constraint in the output contract before finishing.")
    if has_evidence:
        items.append("Apply highlights and cues only where they fit this task; they are advisory.")
    items.append("Verify the outputs exist and match the requested format.")
    return items


def _render_section(kind: str, items: list[Item]) -> str:
    return "\n".join([HEADERS[kind]] + [it.line for it in items])


def _layout(groups: dict[str, list[Item]], mode: str) -> list[Section]:
    sections = []
    for kind in SECTION_ORDER:
        items = groups.get(kind, [])
        if not items:
            continue
        text = _render_section(kind, items)
        sections.append(Section(kind, text, count_tokens(text, mode), list(items)))
    return sections


def render_sections(sections: Sequence[Section]) -> str:
    return "\n\n".join(s.rendered_text for s in sections) + "\n"


def _drop_key(kind: str, item: Item, index: int):
    # the item removed next is the max of this key
    if kind in ("affiliated_cues", "highlights"):
        return (-item.score, item.item_id)
    return (index,)


def compile_context(task_id: str, task_text: str, selected: Sequence[ScoredSkill], graph: SkillGraph,
                    highlights: dict[str, list[SubunitHighlight]], cues: Sequence[AffiliatedCue],
                    contract: OutputContract, cfg: CompileConfig | None = None, checklist: bool = True,
                    pre_dropped: Sequence[tuple[str, str, str]] = ()) -> CompiledContext:
    """Render sections in priority order and drop whole low-priority items until the packet fits."""
    cfg = cfg or CompileConfig()
    mode = cfg.token_mode
    task_line = digest(" ".join(task_text.split()), cfg.task_digest_tokens, mode)
    groups: dict[str, list[Item]] = {"task": [Item("task", task_line)]}
    skill_items = []
    for s in selected:
        node = graph.skill(s.skill_id)
        desc = digest(node.description, cfg.skill_desc_tokens, mode)
        label = node.name if node.name == s.skill_id else f"{node.name} ({s.skill_id})"
        skill_items.append(Item(s.skill_id, f"{s.rank}. {label}: {desc}", s.final_score,
                                {"id": s.skill_id, "name": node.name, "score": s.final_score, "rank": s.rank}))
    groups["selected_skills"] = skill_items
    groups["output_contract"] = (
        [Item(f"file:{f}", f"- expected file: {f}") for f in contract.expected_files]
        + [Item(f"format:{f}", f"- expected format: {f}") for f in contract.expected_formats]
        + [Item(f"constraint:{i}", f"- constraint: {c}") for i, c in enumerate(contract.constraint_lines)]
    )
    groups["highlights"] = [
        Item(f"{sid}:{h.subunit_id}", f"- [{sid}] {h.text}", h.contribution,
             {"skill": sid, "subunit_id": h.subunit_id, "text": h.text, "sigma": h.sigma,
              "contribution": h.contribution})
        for s in selected for sid in [s.skill_id] for h in highlights.get(sid, [])
    ]
    groups["affiliated_cues"] = [
        Item(c.subunit_id, cue_line(c), c.aff_score,
             {"subunit_id": c.subunit_id, "text": c.text, "attached_skill": c.attached_skill_id,
              "source_skill": c.parent_skill_id, "aff_score": c.aff_score})
        for c in cues
    ]
    if checklist:
        has_evidence = bool(groups["highlights"] or groups["affiliated_cues"])
        groups["checklist"] = [Item(f"check:{i}", f"- [ ] {t}")
                               for i, t in enumerate(checklist_items(contract, has_evidence))]

    core = render_sections(_layout({k: groups[k] for k in ("task", "selected_skills")}, mode))
    if count_tokens(core, mode) > cfg.budget:
        raise BudgetInfeasibleError(
            f"task digest and selected skills alone need {count_tokens(core, mode)} tokens > budget {cfg.budget}")

    dropped = list(pre_dropped)
    sections = _layout(groups, mode)
    total = count_tokens(render_sections(sections), mode)
    while total > cfg.budget:
        kind = next(k for k in DROP_ORDER if groups.get(k))
        items = groups[kind]
        idx = max(range(len(items)), key=lambda i: _drop_key(kind, items[i], i))
        victim = items.pop(idx)
        dropped.append((kind, victim.item_id, "over_budget"))
        sections = _layout(groups, mode)
        total = count_tokens(render_sections(sections), mode)

    return CompiledContext(task_id, sections, total, cfg.budget, dropped, task_line,
                           [it.data for it in skill_items], mode)


def render_read_first(ctx: CompiledContext) -> str:
    return render_sections(ctx.sections)


def packet_dict(ctx: CompiledContext) -> dict:
    kept_highlights: dict[str, list[dict]] = {}
    for it in ctx.items("highlights"):
        d = it.data
        kept_highlights.setdefault(d["skill"], []).append(
            {"subunit_id": d["subunit_id"], "text": d["text"], "sigma": d["sigma"], "contribution": d["contribution"]})
    contract = {"expected_files": [], "expected_formats": [], "constraint_lines": []}
    for it in ctx.items("output_contract"):
        kind, _, _ = it.item_id.partition(":")
        value = it.line.split(": ", 1)[1]
        contract[{"file": "expected_files", "format": "expected_formats",
                  "constraint": "constraint_lines"}[kind]].append(value)
    return {
        "schema": SCHEMA_VERSION,
        "task_id": ctx.task_id,
        "task": ctx.task_digest,
        "selected_skills": [dict(s, highlights=kept_highlights.get(s["id"], [])) for s in ctx.selected],
        "output_contract": contract,
        "affiliated_cues": [it.data for it in ctx.items("affiliated_cues")],
        "checklist": [it.line[len("- [ ] "):] for it in ctx.items("checklist")],
        "budget": {
            "limit": ctx.budget,
            "total": ctx.total_tokens,
            "token_mode": ctx.token_mode,
            "dropped": [{"section": s, "item": i, "reason": r} for s, i, r in ctx.dropped],
        },
    }


def render_packet_json(ctx: CompiledContext) -> str:
    return json.dumps(packet_dict(ctx), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_packet(ctx: CompiledContext, out_dir: str | Path) -> Path:
    """Write ``<out_dir>/<task_id>/READ_FIRST.md`` and ``COORDINATOR_PACKET.json``."""
    d = Path(out_dir) / ctx.task_id
    d.mkdir(parents=True, exist_ok=True)
    (d / "READ_FIRST.md").write_text(render_read_first(ctx), encoding="utf-8")
    (d / "COORDINATOR_PACKET.json").write_text(render_packet_json(ctx), encoding="utf-8")
    return d
