import random

from hypothesis import given, settings, strategies as st

from skillforge.corpus import document_from_text
from skillforge.subunits import (CONSTRAINT, ELEMENT, PROCEDURAL, build_subunit_set, degrees, extract_candidates,
                                 normalize_text, subunit_id)


def doc(skill_id, body, name=None):
    return document_from_text(skill_id, f"---\nname: {name or skill_id}\ndescription: d\n---\n{body}\n")


def test_normalization_examples():
    assert normalize_text("1. Generate properly formatted BibTeX entries.") == "generate properly formatted bibtex entries"
    assert normalize_text("  - `refs.bib`  ") == "refs.bib"
    assert normalize_text("* Do   NOT\tedit!") == "do not edit"


@given(st.text())
def test_normalization_idempotent(s):
    once = normalize_text(s)
    assert normalize_text(once) == once


@given(st.text(alphabet="abc .-*1`", max_size=30))
def test_normalization_idempotent_on_marker_heavy_text(s):
    once = normalize_text(s)
    assert normalize_text(once) == once


def test_extraction_kinds():
    d = doc("bib", "1. Generate properly formatted BibTeX entries\n"
                   "Run `pandoc --citeproc refs.bib` on the input.\n"
                   "Never edit the reference list by hand.\n"
                   "```\n$ make all\nplain text here\n```\n")
    cands = extract_candidates(d)
    assert ("generate properly formatted bibtex entries", PROCEDURAL) in cands
    assert ("pandoc --citeproc refs.bib", ELEMENT) in cands
    assert ("refs.bib", ELEMENT) in cands
    assert ("never edit the reference list by hand", CONSTRAINT) in cands
    assert ("make all", ELEMENT) in cands
    assert all(t != "plain text here" for t, _ in cands)


def test_length_filter_and_global_dedup():
    a = doc("a", "1. Open the source table first\n2. Go\n- Open the source table first.")
    b = doc("b", "* open   the SOURCE table first")
    subunits, edges = build_subunit_set([a, b])
    texts = [u.text for u in subunits]
    assert texts == ["open the source table first"]
    assert "go" not in texts
    uid = subunits[0].subunit_id
    assert edges == [type(edges[0])("a", uid), type(edges[0])("b", uid)]
    assert degrees(edges) == {uid: 2}
    assert uid == subunit_id("open the source table first")


def test_kind_priority_is_order_independent():
    a = doc("a", "1. Always keep the raw file")
    b = doc("b", "Always keep the raw file")
    for docs in ([a, b], [b, a]):
        subunits, _ = build_subunit_set(docs)
        assert [u.kind for u in subunits] == [CONSTRAINT]


LINES = ["1. Merge the page files", "- Never delete inputs ever", "Run `qpdf --empty out.pdf` now",
         "Check the page counts twice", "2. Export the final table as csv", "Use `tool.py` carefully here"]


@settings(max_examples=50)
@given(st.lists(st.lists(st.sampled_from(LINES), min_size=1, max_size=5), min_size=1, max_size=6),
       st.randoms())
def test_set_is_invariant_to_document_order(bodies, rnd):
    docs = [doc(f"s{i}", "\n".join(b)) for i, b in enumerate(bodies)]
    shuffled = list(docs)
    rnd.shuffle(shuffled)
    assert build_subunit_set(docs) == build_subunit_set(shuffled)


@settings(max_examples=50)
@given(st.lists(st.lists(st.sampled_from(LINES), min_size=1, max_size=5), min_size=1, max_size=6))
def test_edges_unique_and_degrees_match(bodies):
    docs = [doc(f"s{i}", "\n".join(b)) for i, b in enumerate(bodies)]
    subunits, edges = build_subunit_set(docs)
    assert len(set(edges)) == len(edges)
    deg = degrees(edges)
    assert set(deg) == {u.subunit_id for u in subunits}
    for u in subunits:
        assert 3 <= u.token_len <= 32
        # brute-force degree: documents whose candidates contain the text
        owners = {d.skill_id for d in docs if any(t == u.text for t, _ in extract_candidates(d))}
        assert deg[u.subunit_id] == len(owners)
