import json

import pytest
from hypothesis import given, strategies as st

from skillforge.config import Config, ConfigError, merge, resolve
from skillforge.text import count_tokens, file_names, jaccard, keyword_pattern, looks_like_command, min_max, tokenize


def test_tokenize_splits_punctuation_and_underscores():
    assert tokenize("Run `pandoc --citeproc refs.bib` NOW_please") == ["run", "pandoc", "citeproc", "refs", "bib",
                                                                      "now", "please"]


def test_count_tokens_modes():
    assert count_tokens("a b, c") == 3
    assert count_tokens("abcdefgh", "chars4") == 2
    assert count_tokens("abcdefghi", "chars4") == 3
    with pytest.raises(ValueError):
        count_tokens("x", "words")


@given(st.text(), st.text())
def test_jaccard_bounded_and_symmetric(a, b):
    j = jaccard(a, b)
    assert 0.0 <= j <= 1.0
    assert j == jaccard(b, a)


def test_jaccard_empty_pair_is_zero():
    assert jaccard("", "...") == 0.0
    assert jaccard("a b", "b a") == 1.0


@given(st.dictionaries(st.text(max_size=3), st.floats(-1e6, 1e6), min_size=1))
def test_min_max_range(values):
    out = min_max(values)
    assert set(out) == set(values)
    assert all(0.0 <= v <= 1.0 for v in out.values())
    if len(set(values.values())) > 1:
        assert max(out.values()) == 1.0 and min(out.values()) == 0.0
    else:
        assert set(out.values()) == {0.0}


@given(st.dictionaries(st.text(max_size=3), st.floats(-100, 100), min_size=2),
       st.floats(0.5, 10), st.floats(-50, 50))
def test_min_max_affine_invariant(values, scale, shift):
    a = min_max(values)
    b = min_max({k: v * scale + shift for k, v in values.items()})
    if len(set(values.values())) > 1 and max(values.values()) - min(values.values()) > 1e-6:
        assert all(abs(a[k] - b[k]) < 1e-6 for k in values)


def test_file_names():
    assert file_names("Save as out/report.pdf, then refs.bib; e.g. this. Version 1.5 too.") == [
        "out/report.pdf", "refs.bib"]


def test_looks_like_command():
    assert looks_like_command("$ ls")
    assert looks_like_command("pandoc --citeproc refs.bib")
    assert not looks_like_command("Keep the file safe")


def test_keyword_pattern_whole_words_and_phrases():
    pat = keyword_pattern(["must", "do not"])
    assert pat.search("You MUST do it")
    assert pat.search("Do   not touch")
    assert not pat.search("mustard")
    assert not keyword_pattern([]).search("anything")


def test_defaults():
    cfg = Config()
    assert (cfg.retrieval.alpha, cfg.retrieval.beta, cfg.retrieval.gamma, cfg.retrieval.lam) == (0.5, 0.3, 0.2, 0.25)
    assert cfg.compile.budget == 384
    assert cfg.compile.affiliate_weights == (0.15, 0.45, 0.10, 0.15, 0.15)
    assert cfg.graph.kmeans_seed == 42 and cfg.graph.kmeans_n_init == 10


def test_merge_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        merge(Config(), {"retrieval": {"top_kk": 3}})
    with pytest.raises(ConfigError):
        merge(Config(), {"nonsense": {}})


def test_precedence_file_env_flags(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"retrieval": {"top_k": 7}, "compile": {"budget": 500},
                                "embedding": {"provider": "remote"}}))
    env = {"SKILLFORGE_EMBED_ENDPOINT": "http://env/embed"}
    cfg = resolve(path, flags={"compile": {"budget": 300}, "retrieval": {"top_k": None}}, env=env)
    assert cfg.retrieval.top_k == 7
    assert cfg.compile.budget == 300
    assert cfg.embedding.endpoint_url == "http://env/embed"
    cfg = resolve(path, flags={"embedding": {"endpoint_url": "http://flag"}}, env=env)
    assert cfg.embedding.endpoint_url == "http://flag"


def test_remote_without_endpoint_rejected():
    with pytest.raises(ConfigError):
        resolve(None, flags={"embedding": {"provider": "remote"}}, env={})


def test_round_trip_and_index_hash():
    cfg = Config()
    again = Config.from_dict(json.loads(cfg.to_json()))
    assert again.to_json() == cfg.to_json()
    changed = merge(cfg, {"compile": {"budget": 100}})
    assert changed.index_hash() == cfg.index_hash()
    assert merge(cfg, {"graph": {"kmeans_seed": 1}}).index_hash() != cfg.index_hash()
