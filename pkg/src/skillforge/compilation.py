"""Rescue filtering, affiliate attachment, cue gating and output-contract extraction.

All steps are pure functions of the retrieval result and the graph.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .config import CompileConfig
from .graph import SkillGraph
from .retrieval import RescueCandidateRecord, ScoredSkill, SubunitHighlight
from .subunits import CONSTRAINT, ELEMENT
from .text import file_names, jaccard, keyword_pattern, load_lexicon, looks_like_command, min_max, tokenize

log = logging.getLogger("skillforge.compilation")

FEATURE_NAMES = ("q_rel", "f_skill", "r_sel", "g_same", "g_active")
FORMAT_LEXICON = ("csv", "json", "pdf", "md", "bibtex", "xlsx", "html", "txt")


@dataclass(frozen=True)
class RescuedSubunit:
    subunit_id: str
    text: str
    sigma: float
    parent_skill_id: str
    parent_score: float
    kind: str = ""


@dataclass
class AffiliatedCue:
    subunit_id: str
    text: str
    kind: str
    attached_skill_id: str
    parent_skill_id: str
    features: tuple[float, float, float, float, float]
    base_score: float
    bonus: float
    penalty: float
    aff_score: float
    candidates: list[tuple[str, float]] = field(default_factory=list)
    accepted: bool = False
    reason: str = ""


@dataclass
class OutputContract:
    expected_files: list[str] = field(default_factory=list)
    expected_formats: list[str] = field(default_factory=list)
    constraint_lines: list[str] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.expected_files or self.expected_formats or self.constraint_lines)


def filter_rescue(records: Sequence[RescueCandidateRecord], highlights: dict[str, list[SubunitHighlight]],
                  graph: SkillGraph, cfg: CompileConfig | None = None) -> list[RescuedSubunit]:
    """Pick at most a few high-relevance subunits from non-selected skills.

    Parents are visited by normalized score (desc), subunits within a parent
    by similarity (desc). A candidate is skipped when its parent or its own
    score is under threshold, when it overlaps an already-kept rescue or any
    selected-skill highlight too much, or when a cap is full.
    """
    cfg = cfg or CompileConfig()
    kept: list[RescuedSubunit] = []
    seen_texts = [h.text for hs in highlights.values() for h in hs]
    for rec in sorted(records, key=lambda r: (-r.parent_score_normalized, r.parent_skill_id)):
        if len(kept) >= cfg.global_rescue_cap:
            break
        if rec.parent_score_normalized < cfg.parent_threshold:
            continue
        taken = 0
        for uid, sigma in sorted(rec.candidate_subunits, key=lambda t: (-t[1], t[0])):
            if taken >= cfg.per_parent_cap or len(kept) >= cfg.global_rescue_cap:
                break
            if sigma < cfg.subunit_threshold:
                continue
            text = graph.subunit(uid).text
            if any(jaccard(text, t) >= cfg.redundancy_jaccard for t in seen_texts):
                continue
            kept.append(RescuedSubunit(uid, text, sigma, rec.parent_skill_id, rec.parent_score_normalized,
                                       graph.subunit(uid).kind))
            seen_texts.append(text)
            taken += 1
    return kept


def weighted(features: Sequence[float], weights: Sequence[float]) -> float:
    return math.fsum(w * f for w, f in zip(weights, features))


def affiliate_features(u: RescuedSubunit, skill_id: str, skill_highlights: Sequence[SubunitHighlight],
                       r_sel: float, active_groups: set[int], graph: SkillGraph, task_text: str
                       ) -> tuple[float, float, float, float, float]:
    q_rel = jaccard(u.text, task_text)
    f_skill = max([jaccard(u.text, graph.skill(skill_id).representation_text)]
                  + [jaccard(u.text, h.text) for h in skill_highlights])
    parent_group = graph.assignment[u.parent_skill_id]
    g_same = 1.0 if parent_group == graph.assignment[skill_id] else 0.0
    g_active = 1.0 if parent_group in active_groups else 0.0
    return (q_rel, f_skill, r_sel, g_same, g_active)


def affiliate_score(features: Sequence[float], cfg: CompileConfig | None = None) -> float:
    """Fixed-weight compatibility of a rescued subunit with one selected skill."""
    cfg = cfg or CompileConfig()
    return weighted(features, cfg.affiliate_weights)


def attach(rescued: Sequence[RescuedSubunit], selected: Sequence[ScoredSkill],
           highlights: dict[str, list[SubunitHighlight]], graph: SkillGraph, task_text: str,
           cfg: CompileConfig | None = None) -> list[AffiliatedCue]:
    """Attach each rescued subunit to its most compatible selected skill."""
    cfg = cfg or CompileConfig()
    if not selected:
        if rescued:
            log.warning("no selected skills; %d rescued subunits left unattached", len(rescued))
        return []
    r_sel = min_max({s.skill_id: s.final_score for s in selected})
    active = {graph.assignment[s.skill_id] for s in selected}
    cues = []
    for u in rescued:
        scored = []
        for s in selected:
            feats = affiliate_features(u, s.skill_id, highlights.get(s.skill_id, []), r_sel[s.skill_id],
                                       active, graph, task_text)
            scored.append((affiliate_score(feats, cfg), s.skill_id, feats))
        scored.sort(key=lambda t: (-t[0], t[1]))
        best, best_id, feats = scored[0]
        bonus = 0.0
        if len(scored) >= 2 and best - scored[1][0] >= cfg.exclusivity_gap:
            bonus = cfg.exclusivity_bonus
        penalty = cfg.inactive_penalty if feats[4] == 0.0 else 0.0
        cues.append(AffiliatedCue(
            subunit_id=u.subunit_id, text=u.text, kind=u.kind, attached_skill_id=best_id,
            parent_skill_id=u.parent_skill_id, features=feats, base_score=best, bonus=bonus,
            penalty=penalty, aff_score=best + bonus - penalty,
            candidates=[(sid, sc) for sc, sid, _ in scored],
        ))
    return cues


def recompute_aff_score(cue: AffiliatedCue, cfg: CompileConfig | None = None) -> float:
    return affiliate_score(cue.features, cfg) + cue.bonus - cue.penalty


def is_concrete(text: str, kind: str) -> bool:
    if kind in (ELEMENT, CONSTRAINT):
        return True
    return bool(file_names(text)) or looks_like_command(text) or "`" in text


def cue_line(cue: AffiliatedCue) -> str:
    return f"- [{cue.attached_skill_id} <- {cue.parent_skill_id}] {cue.text}"


def gate_cues(cues: Sequence[AffiliatedCue], highlights: dict[str, list[SubunitHighlight]], task_text: str,
              cue_budget: int, cfg: CompileConfig | None = None,
              cost: Callable[[str], int] | None = None) -> tuple[list[AffiliatedCue], list[AffiliatedCue]]:
    """Split attached cues into (accepted, rejected); each rejected cue carries a reason.

    Cues are considered by aff_score (desc). ``cue_budget`` is the token room
    left for cue lines once the other sections are rendered.
    """
    cfg = cfg or CompileConfig()
    cost = cost or (lambda s: len(tokenize(s)))
    rendered = [h.text for hs in highlights.values() for h in hs]
    accepted: list[AffiliatedCue] = []
    rejected: list[AffiliatedCue] = []
    used = 0
    for cue in sorted(cues, key=lambda c: (-c.aff_score, c.subunit_id)):
        reason = ""
        if cue.aff_score < cfg.affiliation_threshold:
            reason = "below_affiliation_threshold"
        elif not is_concrete(cue.text, cue.kind):
            reason = "not_concrete"
        elif cue.features[0] <= 0.0:
            reason = "not_task_aligned"
        elif any(jaccard(cue.text, t) >= cfg.redundancy_jaccard for t in rendered + [c.text for c in accepted]):
            reason = "redundant"
        elif used + cost(cue_line(cue)) > cue_budget:
            reason = "over_cue_budget"
        cue.accepted = not reason
        cue.reason = reason
        if reason:
            rejected.append(cue)
        else:
            used += cost(cue_line(cue))
            accepted.append(cue)
    return accepted, rejected


_SENTENCE = re.compile(r"(?<=[.!?])\s+")


def extract_output_contract(text: str, keywords: Sequence[str] | None = None,
                            injected: OutputContract | dict | None = None) -> OutputContract:
    """Expected files, formats and requirement lines found in the task text.

    ``injected`` (benchmark-provided contract metadata) replaces the scanned
    value of every field it sets.
    """
    kw_re = keyword_pattern(keywords if keywords is not None else load_lexicon("requirement_keywords"))
    files = list(dict.fromkeys(file_names(text)))
    toks = tokenize(text)
    formats = list(dict.fromkeys(t for t in toks if t in FORMAT_LEXICON))
    lines = []
    for raw in text.splitlines():
        for sent in _SENTENCE.split(raw.strip()):
            sent = sent.strip()
            if sent and kw_re.search(sent):
                lines.append(sent)
    contract = OutputContract(files, formats, list(dict.fromkeys(lines)))
    if injected:
        data = injected if isinstance(injected, dict) else injected.__dict__
        for key in ("expected_files", "expected_formats", "constraint_lines"):
            if data.get(key):
                setattr(contract, key, list(data[key]))
    return contract
