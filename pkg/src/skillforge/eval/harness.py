"""Brute-force ranking oracle, flat baselines and the variant evaluation loop."""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

from ..compilation import extract_output_contract
from ..config import Config, RetrievalConfig
from ..embedding import Embedder, cosine_similarity
from ..graph import SkillGraph
from ..packet import CompiledContext, compile_context, render_packet_json
from ..pipeline import AblationSpec, Engine
from ..retrieval import ScoredSkill, TaskRequest
from .synthetic import SyntheticTask

VARIANTS = {
    "full": AblationSpec(),
    "no_bu": AblationSpec(disable_bottom_up=True),
    "no_td": AblationSpec(disable_top_down=True),
    "no_cc": AblationSpec(disable_compilation=True),
    "vanilla": None,
    "vanilla_lite": None,
    "llm_pool": None,
}


class UnknownVariantError(ValueError):
    pass


def brute_force_rank(task_text: str, graph: SkillGraph, embedder: Embedder, cfg: RetrievalConfig | None = None,
                     top_down: bool = True) -> list[tuple[str, float]]:
    """Recompute every skill score with plain loops and full sorts.

    Returns ``[(skill_id, final_score)]`` over all skills, best first, ties by
    skill_id. Nothing is shared with the retrieval module except the embedder
    and the cosine primitive.
    """
    cfg = cfg or RetrievalConfig()
    q = embedder.embed_query(task_text)

    def norm(raw: dict[str, float]) -> dict[str, float]:
        vals = list(raw.values())
        lo, hi = min(vals), max(vals)
        return {k: (0.0 if hi == lo else (v - lo) / (hi - lo)) for k, v in raw.items()}

    boosted: set[str] = set()
    if top_down and graph.communities:
        cscores = []
        for c in graph.communities:
            cscores.append((cosine_similarity(q, c.community_text_embedding), c.community_id, c.member_skill_ids))
        cscores.sort(key=lambda t: (-t[0], t[1]))
        for _, _, members in cscores[:cfg.n_communities]:
            boosted.update(members)

    sig = []
    for i, u in enumerate(graph.subunits):
        sig.append((cosine_similarity(q, graph.subunit_matrix[i]), u.subunit_id))
    sig.sort(key=lambda t: (-t[0], t[1]))
    retained = sig[:cfg.n_subunits]

    edge_set = {(e.skill_id, e.subunit_id) for e in graph.edges}
    deg = {}
    for u in graph.subunits:
        deg[u.subunit_id] = sum(1 for e in graph.edges if e.subunit_id == u.subunit_id)

    def words(text: str) -> set[str]:
        return set(re.findall(r"[^\W_]+", text.lower()))

    l0_raw, l1_raw, p_raw = {}, {}, {}
    qtok = words(task_text)
    for i, s in enumerate(graph.skills):
        parts = []
        for sigma, uid in retained:
            if (s.skill_id, uid) in edge_set:
                parts.append(sigma / deg[uid])
        l0_raw[s.skill_id] = math.fsum(parts)
        l1_raw[s.skill_id] = cosine_similarity(q, graph.desc_matrix[i])
        ntok = words(s.name)
        union = qtok | ntok
        p_raw[s.skill_id] = len(qtok & ntok) / len(union) if union else 0.0
    l0, l1, p = norm(l0_raw), norm(l1_raw), norm(p_raw)
    final = []
    for s in graph.skills:
        sid = s.skill_id
        base = cfg.alpha * l1[sid] + cfg.beta * l0[sid] + cfg.gamma * p[sid]
        final.append((sid, base * (1 + cfg.lam * (1 if sid in boosted else 0))))
    final.sort(key=lambda t: (-t[1], t[0]))
    return final


class VanillaRetriever:
    """Rank skills by cosine to an embedding of ``"name: description"``."""

    def __init__(self, graph: SkillGraph, embedder: Embedder):
        self.graph = graph
        self.embedder = embedder
        self.matrix = embedder.embed([f"{s.name}: {s.description}" for s in graph.skills])

    def rank(self, task: TaskRequest) -> list[ScoredSkill]:
        q = task.embed(self.embedder)
        scored = [ScoredSkill(s.skill_id, 0.0, 0.0, 0.0, False, cosine_similarity(q, self.matrix[i]))
                  for i, s in enumerate(self.graph.skills)]
        scored.sort(key=lambda s: (-s.final_score, s.skill_id))
        for i, s in enumerate(scored, 1):
            s.rank = i
        return scored


def baseline_vanilla(task: TaskRequest, graph: SkillGraph, embedder: Embedder, k: int = 5,
                     retriever: VanillaRetriever | None = None) -> list[ScoredSkill]:
    return (retriever or VanillaRetriever(graph, embedder)).rank(task)[:k]


Selector = Callable[[TaskRequest, list[ScoredSkill], int], list[ScoredSkill]]


def identity_selector(task: TaskRequest, pool: list[ScoredSkill], k: int) -> list[ScoredSkill]:
    return pool[:k]


def baseline_llm_pool(task: TaskRequest, graph: SkillGraph, embedder: Embedder, cfg: RetrievalConfig | None = None,
                      selector: Selector | None = None, retriever: VanillaRetriever | None = None
                      ) -> tuple[list[ScoredSkill], list[ScoredSkill]]:
    """(pool, selected): embedding pool of ``llm_pool_size`` skills, then the pluggable selector."""
    cfg = cfg or RetrievalConfig()
    pool = (retriever or VanillaRetriever(graph, embedder)).rank(task)[:cfg.llm_pool_size]
    chosen = (selector or identity_selector)(task, pool, cfg.top_k)
    ids = {s.skill_id for s in pool}
    if any(s.skill_id not in ids for s in chosen):
        raise ValueError("selector returned a skill outside the candidate pool")
    return pool, chosen[:cfg.top_k]


def lite_compile(selected: Sequence[ScoredSkill], task: TaskRequest, graph: SkillGraph,
                 cfg: Config | None = None) -> CompiledContext:
    """Selected skills + output contract + checklist; no highlights, rescue or cues."""
    cfg = cfg or Config()
    contract = extract_output_contract(task.text, cfg.subunits.requirement_keywords)
    return compile_context(task.task_id, task.text, list(selected), graph, {}, [], contract, cfg.compile)


@dataclass
class TaskOutcome:
    ranking: list[str]
    selected: list[str]
    context: CompiledContext
    rescued: list[str]


def run_variant(engine: Engine, task: TaskRequest, variant: str, vanilla: VanillaRetriever,
                selector: Selector | None = None) -> TaskOutcome:
    cfg = engine.cfg
    if variant in ("vanilla", "vanilla_lite", "llm_pool"):
        ranked = vanilla.rank(task)
        if variant == "llm_pool":
            _, selected = baseline_llm_pool(task, engine.graph, engine.embedder, cfg.retrieval, selector, vanilla)
        else:
            selected = ranked[:cfg.retrieval.top_k]
        if variant == "vanilla_lite":
            ctx = lite_compile(selected, task, engine.graph, cfg)
        else:
            ctx = compile_context(task.task_id, task.text, selected, engine.graph, {}, [], extract_output_contract(""),
                                  cfg.compile, checklist=False)
        return TaskOutcome([s.skill_id for s in ranked], [s.skill_id for s in selected], ctx, [])
    spec = VARIANTS[variant]
    out = engine.run(task, spec)
    return TaskOutcome([s.skill_id for s in out.retrieval.ranked], out.retrieval.selected_ids, out.context,
                       out.rescued_ids)


def run_eval(engine: Engine, tasks: Sequence[SyntheticTask], variants: Sequence[str],
             selector: Selector | None = None) -> dict:
    """Per-variant retrieval and packet metrics over a planted-relevance task set."""
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown:
        raise UnknownVariantError(f"unknown variants: {unknown}; choose from {sorted(VARIANTS)}")
    vanilla = VanillaRetriever(engine.graph, engine.embedder)
    k = engine.cfg.retrieval.top_k
    budget = engine.cfg.compile.budget
    rows = {}
    for variant in variants:
        recall, rr, hits, gold_units, rescued, rescued_good, compliant = 0.0, 0.0, 0, 0, 0, 0, 0
        digest = hashlib.sha256()
        for t in tasks:
            task = TaskRequest(t.text, task_id=t.task_id)
            o = run_variant(engine, task, variant, vanilla, selector)
            gold = set(t.gold_skill_ids)
            recall += len(gold & set(o.selected[:k])) / len(gold) if gold else 0.0
            first = next((i for i, sid in enumerate(o.ranking, 1) if sid in gold), None)
            rr += 1.0 / first if first else 0.0
            shown = {it.data["subunit_id"] for it in o.context.items("highlights")}
            hits += len(shown & set(t.gold_subunit_ids))
            gold_units += len(t.gold_subunit_ids)
            for uid in o.rescued:
                rescued += 1
                rescued_good += bool(gold & set(engine.graph.skills_of(uid)))
            compliant += o.context.total_tokens <= budget
            digest.update(render_packet_json(o.context).encode("utf-8"))
        n = max(len(tasks), 1)
        rows[variant] = {
            f"recall@{k}": recall / n,
            "mrr": rr / n,
            "highlight_hit_rate": hits / gold_units if gold_units else 0.0,
            "rescue_precision": rescued_good / rescued if rescued else None,
            "rescued": rescued,
            "budget_compliance": compliant / n,
            "packet_hash": digest.hexdigest()[:16],
        }
    return {"n_tasks": len(tasks), "top_k": k, "budget": budget, "graph": engine.graph.fingerprint(),
            "variants": rows}


def report_markdown(report: dict) -> str:
    k = report["top_k"]
    cols = [f"recall@{k}", "mrr", "highlight_hit_rate", "rescue_precision", "budget_compliance", "packet_hash"]
    lines = [f"# Evaluation report ({report['n_tasks']} tasks, graph {report['graph']})", "",
             "| variant | " + " | ".join(cols) + " |", "|" + "---|" * (len(cols) + 1)]
    for name, row in report["variants"].items():
        cells = []
        for c in cols:
            v = row[c]
            cells.append("n/a" if v is None else (f"{v:.4f}" if isinstance(v, float) else str(v)))
        lines.append(f"| {name} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
