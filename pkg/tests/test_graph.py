import math
import struct

import numpy as np
import pytest

from builders import CFG, EMBEDDER, graph_for, synthetic
from skillforge.corpus import document_from_text
from skillforge.graph import (MAGIC, CorruptIndexError, EmptyCorpusError, IndexVersionError, build_graph,
                              build_skill_representation, compute_idf, empty_graph, from_bytes, load_graph,
                              persist_graph, to_bytes)
from skillforge.subunits import build_subunit_set


def test_idf_matches_log_ratio():
    g = graph_for(16, 1)
    n = len(g.skills)
    for u in g.subunits:
        owners = [e.skill_id for e in g.edges if e.subunit_id == u.subunit_id]
        assert g.idf[u.subunit_id] == math.log(n / len(owners))
    assert compute_idf(g.subunits, g.edges, n) == g.idf


def test_representation_top_r_by_idf():
    idf = {f"u{i}": float(v) for i, v in enumerate([0.1, 2.0, 2.0, 1.5, 0.0, 3.0, 0.7, 1.1, 0.2, 0.9])}
    texts = {f"u{i}": f"text {chr(ord('j') - i)}" for i in range(10)}
    rep = build_skill_representation("n", "d.", texts, idf, top_r=3)
    # idf 3.0 first, then the two 2.0 ties by text
    assert rep == "n. d. text e; text h; text i"
    assert build_skill_representation("n", "d.", {}, idf) == "n. d."


def test_every_skill_representation_uses_its_own_subunits():
    g = graph_for(16, 2)
    for s in g.skills:
        own = {uid: g.subunit(uid).text for uid in g.subunits_of(s.skill_id)}
        # oracle: full sort by (-idf, text), first 8
        ranked = sorted(own.items(), key=lambda kv: (-g.idf[kv[0]], kv[1]))[:8]
        expected = f"{s.name}. {s.description}" + (" " + "; ".join(t for _, t in ranked) if ranked else "")
        assert s.representation_text == expected


def test_communities_partition_and_representatives():
    g = graph_for(36, 3)
    g.validate()
    assert len(g.communities) == 6
    for c in g.communities:
        assert all(g.assignment[m] == c.community_id for m in c.member_skill_ids)
        cent = c.centroid.astype(np.float64)
        dists = []
        for m in c.member_skill_ids:
            v = g.repr_matrix[[s.skill_id for s in g.skills].index(m)].astype(np.float64)
            dists.append((float(((v - cent) ** 2).sum()), m))
        assert c.representative_skill_ids == [m for _, m in sorted(dists)[:3]]
        assert c.community_text.startswith(f"label: {c.label}. skills: ")
        assert c.label


def test_build_is_deterministic_and_order_independent():
    skills = synthetic(20, 4)
    docs = [document_from_text(s.skill_id, s.text) for s in skills]
    a = build_graph(docs, EMBEDDER, CFG)
    b = build_graph(list(reversed(docs)), EMBEDDER, CFG)
    assert to_bytes(a) == to_bytes(b)
    assert a.build_meta["built_at"] is None
    assert a.fingerprint() == b.fingerprint()


def test_zero_skills_rejected():
    with pytest.raises(EmptyCorpusError):
        build_graph([], EMBEDDER, CFG)


def test_empty_graph_round_trips():
    g = empty_graph(256)
    assert from_bytes(to_bytes(g)).equals(g)


def test_persist_load_directory_and_file(tmp_path):
    g = graph_for(9, 5)
    path = persist_graph(g, tmp_path)
    assert path.name == "skillgraph.idx"
    assert load_graph(tmp_path).equals(g)
    assert load_graph(path).equals(g)


def test_truncated_and_flipped_files(tmp_path):
    data = to_bytes(graph_for(9, 5))
    with pytest.raises(CorruptIndexError):
        from_bytes(data[:-10])
    with pytest.raises(CorruptIndexError):
        from_bytes(data[:20])
    flipped = bytearray(data)
    flipped[len(data) // 2] ^= 0xFF
    with pytest.raises(CorruptIndexError):
        from_bytes(bytes(flipped))
    with pytest.raises(CorruptIndexError):
        from_bytes(b"NOTGRAPH" + data[8:])


def test_version_mismatch():
    data = bytearray(to_bytes(graph_for(4, 5)))
    struct.pack_into("<I", data, len(MAGIC), 99)
    with pytest.raises(IndexVersionError):
        from_bytes(bytes(data))


def test_matrices_align_with_nodes():
    g = graph_for(16, 6)
    for i, u in enumerate(g.subunits[:20]):
        assert np.array_equal(g.subunit_matrix[i], EMBEDDER.embed([u.text])[0])
    for i, s in enumerate(g.skills):
        assert np.array_equal(g.desc_matrix[i], EMBEDDER.embed([s.description])[0])
    subunits, edges = build_subunit_set([document_from_text(s.skill_id, s.text) for s in synthetic(16, 6)])
    assert subunits == g.subunits and edges == g.edges
