import re

import pytest

from builders import CFG, EMBEDDER, fixtures, graph_for, synthetic
from skillforge.compilation import (AffiliatedCue, RescuedSubunit, affiliate_score, attach, extract_output_contract,
                                    filter_rescue, gate_cues, is_concrete, recompute_aff_score)
from skillforge.config import CompileConfig
from skillforge.eval import generate_tasks
from skillforge.retrieval import TaskRequest, retrieve
from skillforge.text import jaccard


def replay_rescue(records, highlights, graph):
    """Independent replay of the rescue rules with plain loops."""
    kept, texts = [], [h.text for hs in highlights.values() for h in hs]
    parents = sorted(records, key=lambda r: (-r.parent_score_normalized, r.parent_skill_id))
    for r in parents:
        if r.parent_score_normalized < 0.35:
            continue
        for uid, sigma in sorted(r.candidate_subunits, key=lambda t: (-t[1], t[0])):
            if len(kept) == 3:
                return kept
            text = graph.subunit(uid).text
            if sigma < 0.12 or any(jaccard(text, t) >= 0.6 for t in texts):
                continue
            kept.append(uid)
            texts.append(text)
            break
    return kept


def test_filter_rescue_matches_replay():
    for g, text in fixtures(200, seed=21):
        res = retrieve(TaskRequest(text), g, EMBEDDER, CFG.retrieval)
        got = [r.subunit_id for r in filter_rescue(res.rescue, res.highlights, g)]
        assert got == replay_rescue(res.rescue, res.highlights, g)


def test_affiliate_weights():
    assert affiliate_score((1, 1, 1, 1, 1)) == 1.0
    assert affiliate_score((0, 1, 0, 0, 0)) == 0.45
    assert affiliate_score((1, 0, 0, 0, 0)) == 0.15
    assert affiliate_score((0, 0, 1, 1, 1)) == pytest.approx(0.40)


def _cue(uid, text, kind="element", score=0.5, q_rel=0.2, bonus=0.0, penalty=0.0):
    feats = (q_rel, 0.5, 1.0, 1.0, 1.0)
    return AffiliatedCue(uid, text, kind, "a", "b", feats, score, bonus, penalty, score + bonus - penalty)


def test_gate_reasons_in_order():
    cues = [
        _cue("u1", "qpdf --empty out.pdf", score=0.9),
        _cue("u2", "low scoring but concrete out.csv", score=0.1),
        _cue("u3", "a vague procedural sentence here", kind="procedural", score=0.8),
        _cue("u4", "concrete but unrelated tool.py", score=0.7, q_rel=0.0),
        _cue("u5", "qpdf --empty out.pdf now", score=0.6),
        _cue("u6", "another concrete report.md line with many extra words", score=0.5),
    ]
    accepted, rejected = gate_cues(cues, {}, "task", cue_budget=12)
    assert [c.subunit_id for c in accepted] == ["u1"]
    reasons = {c.subunit_id: c.reason for c in rejected}
    assert reasons == {"u2": "below_affiliation_threshold", "u3": "not_concrete", "u4": "not_task_aligned",
                       "u5": "redundant", "u6": "over_cue_budget"}


def test_concreteness():
    assert is_concrete("anything", "element") and is_concrete("anything", "constraint")
    assert is_concrete("save it as out.csv", "procedural")
    assert not is_concrete("do the thing carefully", "procedural")


def test_attach_picks_argmax_and_applies_bonus_and_penalty():
    g = graph_for(25, 11)
    text = "combine the pdf page files then check page counts against the pdf index"
    res = retrieve(TaskRequest(text), g, EMBEDDER, CFG.retrieval)
    rescued = [RescuedSubunit(u.subunit_id, u.text, 0.5, res.rescue[i].parent_skill_id, 1.0, u.kind)
               for i, u in enumerate(g.subunits[:8])]
    cues = attach(rescued, res.selected, res.highlights, g, text)
    cfg = CompileConfig()
    for cue in cues:
        scores = dict(cue.candidates)
        assert set(scores) == set(res.selected_ids)
        best = max(scores.values())
        assert cue.base_score == best
        assert cue.attached_skill_id == min(s for s, v in scores.items() if v == best)
        ordered = sorted(scores.values(), reverse=True)
        assert cue.bonus == (0.05 if ordered[0] - ordered[1] >= 0.10 else 0.0)
        assert cue.penalty == (0.10 if cue.features[4] == 0.0 else 0.0)
        assert cue.aff_score == recompute_aff_score(cue, cfg)
        assert cue.features[3] == float(g.assignment[cue.parent_skill_id] == g.assignment[cue.attached_skill_id])


def test_bonus_and_penalty_net_effect():
    # same base score: exclusive + active versus contested + inactive
    a = _cue("x", "t", score=0.5, bonus=0.05)
    b = _cue("y", "t", score=0.5, penalty=0.10)
    assert a.aff_score - b.aff_score == pytest.approx(0.15)


def test_attach_without_selection_is_empty():
    assert attach([RescuedSubunit("u", "t", 0.5, "p", 1.0)], [], {}, graph_for(4, 0), "task") == []


_FILE = re.compile(r"\b[\w/.-]*\w\.[A-Za-z][A-Za-z0-9]{0,7}\b")


def test_contract_extraction_against_regex_oracle():
    tasks = generate_tasks(synthetic(30, 8), 50, 8)
    for t in tasks:
        c = extract_output_contract(t.text)
        assert c.expected_files == t.expected_files
        expected_formats = [w for w in dict.fromkeys(re.findall(r"[a-z0-9]+", t.text.lower()))
                            if w in ("csv", "json", "pdf", "md", "bibtex", "xlsx", "html", "txt")]
        assert c.expected_formats == expected_formats
        sentences = [s for s in re.split(r"(?<=[.!?])\s+", t.text) if re.search(r"\bmust\b", s, re.I)]
        assert c.constraint_lines == sentences


def test_contract_injection_overrides_fields():
    c = extract_output_contract("Write out.csv. You must be fast.", injected={"expected_files": ["x.json"]})
    assert c.expected_files == ["x.json"]
    assert c.constraint_lines == ["You must be fast."]
    assert c.expected_formats == ["csv"]
    assert extract_output_contract("nothing here").is_empty()
