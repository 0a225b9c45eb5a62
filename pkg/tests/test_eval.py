import pytest

from builders import CFG, EMBEDDER, graph_for, synthetic
from skillforge.eval import (UnknownVariantError, generate_corpus, generate_tasks, load_taskset, report_markdown,
                             run_eval, save_taskset)
from skillforge.eval.harness import VanillaRetriever, baseline_llm_pool, baseline_vanilla
from skillforge.pipeline import Engine
from skillforge.retrieval import TaskRequest


def test_corpus_is_seeded():
    assert [s.text for s in generate_corpus(10, 3)] == [s.text for s in generate_corpus(10, 3)]
    assert generate_corpus(10, 3)[0].text != generate_corpus(10, 4)[0].text


def test_planted_subunits_exist_in_gold_skill():
    g = graph_for(16, 16)
    for t in generate_tasks(synthetic(16, 16), 20, 16):
        own = set(g.subunits_of(t.gold_skill_ids[0]))
        assert set(t.gold_subunit_ids) <= own


def test_taskset_round_trip(tmp_path):
    tasks = generate_tasks(synthetic(9, 1), 5, 1)
    assert load_taskset(save_taskset(tasks, tmp_path / "t.json")) == tasks


def test_run_eval_report():
    engine = Engine(graph_for(16, 17), CFG, EMBEDDER)
    tasks = generate_tasks(synthetic(16, 17), 15, 17)
    report = run_eval(engine, tasks, ["full", "no_cc", "vanilla", "vanilla_lite", "llm_pool"])
    rows = report["variants"]
    assert all(0 <= r["recall@5"] <= 1 and r["budget_compliance"] == 1.0 for r in rows.values())
    assert rows["no_cc"]["recall@5"] == rows["full"]["recall@5"]
    assert rows["vanilla"]["recall@5"] == rows["llm_pool"]["recall@5"]
    assert rows["full"]["highlight_hit_rate"] > 0
    assert run_eval(engine, tasks, ["full"])["variants"]["full"]["packet_hash"] == rows["full"]["packet_hash"]
    assert "| vanilla_lite |" in report_markdown(report)
    with pytest.raises(UnknownVariantError):
        run_eval(engine, tasks, ["nope"])


def test_llm_pool_rejects_out_of_pool_selection():
    g = graph_for(16, 17)
    task = TaskRequest("merge pages")
    pool, chosen = baseline_llm_pool(task, g, EMBEDDER)
    assert [s.skill_id for s in chosen] == [s.skill_id for s in baseline_vanilla(task, g, EMBEDDER)]
    outsider = VanillaRetriever(g, EMBEDDER).rank(task)[-1]
    small = CFG.retrieval.__class__(llm_pool_size=3)
    with pytest.raises(ValueError):
        baseline_llm_pool(task, g, EMBEDDER, small, selector=lambda t, p, k: [outsider])
