"""Online skill retrieval: fuse community (top-down) and subunit (bottom-up) evidence."""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import RetrievalConfig
from .embedding import Embedder, cosine_similarity, similarities
from .graph import SkillGraph
from .text import jaccard, min_max, tokenize


class RetrievalError(ValueError):
    pass


@dataclass
class TaskRequest:
    text: str
    task_id: str = ""
    embedding: np.ndarray | None = None
    tokens: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise RetrievalError("task text must be non-empty")
        if not self.task_id:
            self.task_id = "task-" + hashlib.sha256(self.text.encode("utf-8")).hexdigest()[:10]
        if not self.tokens:
            self.tokens = tokenize(self.text)

    def embed(self, embedder: Embedder) -> np.ndarray:
        if self.embedding is None:
            self.embedding = embedder.embed_query(self.text)
        return self.embedding


@dataclass
class ScoredSkill:
    skill_id: str
    l1: float
    l0: float
    name_score: float
    community_boosted: bool
    final_score: float
    rank: int = 0
    l0_raw: float = 0.0


@dataclass
class SubunitHighlight:
    subunit_id: str
    text: str
    sigma: float
    contribution: float
    source_skill_id: str


@dataclass
class RescueCandidateRecord:
    parent_skill_id: str
    parent_score_normalized: float
    candidate_subunits: list[tuple[str, float]]


@dataclass
class RetrievalResult:
    task_id: str
    selected: list[ScoredSkill]
    highlights: dict[str, list[SubunitHighlight]]
    rescue: list[RescueCandidateRecord]
    matched_communities: list[int]
    retained_subunits: list[tuple[str, float]]
    ranked: list[ScoredSkill] = field(default_factory=list)
    boosted: list[str] = field(default_factory=list)

    @property
    def selected_ids(self) -> list[str]:
        return [s.skill_id for s in self.selected]

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "selected": [asdict(s) for s in self.selected],
            "highlights": {k: [asdict(h) for h in v] for k, v in self.highlights.items()},
            "rescue": [
                {"parent_skill_id": r.parent_skill_id, "parent_score_normalized": r.parent_score_normalized,
                 "candidate_subunits": [[u, s] for u, s in r.candidate_subunits]}
                for r in self.rescue
            ],
            "matched_communities": self.matched_communities,
            "boosted": self.boosted,
            "retained_subunits": [[u, s] for u, s in self.retained_subunits],
            "ranked": [asdict(s) for s in self.ranked],
        }


def match_communities(q_emb: np.ndarray, graph: SkillGraph, n: int = 2) -> tuple[list[int], set[str]]:
    """Top-n communities by cosine to their text; members form the boosted set."""
    scored = sorted(
        ((cosine_similarity(q_emb, c.community_text_embedding), c.community_id) for c in graph.communities),
        key=lambda t: (-t[0], t[1]),
    )
    top = [cid for _, cid in scored[:n]]
    by_id = {c.community_id: c for c in graph.communities}
    boosted = {sid for cid in top for sid in by_id[cid].member_skill_ids}
    return top, boosted


def match_subunits(q_emb: np.ndarray, graph: SkillGraph, n: int = 30) -> list[tuple[str, float]]:
    """The n subunits most similar to the task, ties broken by subunit_id."""
    if not graph.subunits:
        return []
    sims = similarities(q_emb, graph.subunit_matrix)
    pairs = sorted(zip((u.subunit_id for u in graph.subunits), sims), key=lambda t: (-t[1], t[0]))
    return pairs[:n]


def project_l0(retained: list[tuple[str, float]], graph: SkillGraph) -> tuple[dict[str, float], dict[str, float]]:
    """Degree-normalized subunit evidence per skill, raw and min-max normalized.

    Each retained subunit u spreads sigma(q,u)/deg(u) to every skill it was
    extracted from. Skills without retained evidence sit at raw 0 and take
    part in the normalization.
    """
    parts: dict[str, list[float]] = {s.skill_id: [] for s in graph.skills}
    for uid, sigma in retained:
        share = sigma / graph.deg(uid)
        for sid in graph.skills_of(uid):
            parts[sid].append(share)
    raw = {sid: math.fsum(v) for sid, v in parts.items()}
    return raw, min_max(raw)


def name_tokens(name: str) -> set[str]:
    return set(tokenize(name.replace("-", " ").replace("_", " ")))


def skill_level_scores(q_emb: np.ndarray, q_tokens: list[str], graph: SkillGraph
                       ) -> tuple[dict[str, float], dict[str, float]]:
    """(l1, p): min-max normalized description cosine and name-token Jaccard."""
    sims = similarities(q_emb, graph.desc_matrix)
    l1_raw = {s.skill_id: v for s, v in zip(graph.skills, sims)}
    qset = set(q_tokens)
    p_raw = {s.skill_id: jaccard(qset, name_tokens(s.name)) for s in graph.skills}
    return min_max(l1_raw), min_max(p_raw)


def fuse(l1: float, l0: float, p: float, boosted: bool, cfg: RetrievalConfig) -> float:
    return (cfg.alpha * l1 + cfg.beta * l0 + cfg.gamma * p) * (1 + cfg.lam * (1 if boosted else 0))


def score_and_select(l1: dict[str, float], l0: dict[str, float], p: dict[str, float], boosted: set[str],
                     cfg: RetrievalConfig, l0_raw: dict[str, float] | None = None
                     ) -> tuple[list[ScoredSkill], list[ScoredSkill]]:
    """Score every skill, rank (score desc, skill_id asc) and take the top k."""
    scored = [
        ScoredSkill(sid, l1[sid], l0[sid], p[sid], sid in boosted, fuse(l1[sid], l0[sid], p[sid], sid in boosted, cfg),
                    l0_raw=(l0_raw or {}).get(sid, 0.0))
        for sid in l1
    ]
    scored.sort(key=lambda s: (-s.final_score, s.skill_id))
    for i, s in enumerate(scored, 1):
        s.rank = i
    return scored, scored[:cfg.top_k]


def export_highlights(selected: list[ScoredSkill], retained: list[tuple[str, float]], graph: SkillGraph,
                      max_highlights: int = 3) -> dict[str, list[SubunitHighlight]]:
    retained_sigma = dict(retained)
    out: dict[str, list[SubunitHighlight]] = {}
    for s in selected:
        cands = {}
        for uid in graph.subunits_of(s.skill_id):
            if uid in retained_sigma and uid not in cands:
                sigma = retained_sigma[uid]
                cands[uid] = SubunitHighlight(uid, graph.subunit(uid).text, sigma, sigma / graph.deg(uid), s.skill_id)
        ranked = sorted(cands.values(), key=lambda h: (-h.contribution, -h.sigma, h.subunit_id))
        out[s.skill_id] = ranked[:max_highlights]
    return out


def rescue_pool_size(n_ranked: int, k: int, floor: int = 10, per_k: int = 4) -> int:
    return min(n_ranked, max(floor, per_k * k))


def export_rescue_candidates(ranked: list[ScoredSkill], selected: list[ScoredSkill],
                             retained: list[tuple[str, float]], graph: SkillGraph,
                             cfg: RetrievalConfig) -> list[RescueCandidateRecord]:
    """Records for the best non-selected skills, parent scores min-max normalized over that frontier."""
    chosen = {s.skill_id for s in selected}
    rest = [s for s in ranked if s.skill_id not in chosen]
    frontier = rest[:rescue_pool_size(len(rest), cfg.top_k, cfg.pool_floor, cfg.pool_per_k)]
    norm = min_max({s.skill_id: s.final_score for s in frontier})
    order = {uid: i for i, (uid, _) in enumerate(retained)}
    sigma = dict(retained)
    records = []
    for s in frontier:
        subs = sorted((uid for uid in graph.subunits_of(s.skill_id) if uid in sigma), key=order.__getitem__)
        records.append(RescueCandidateRecord(s.skill_id, norm[s.skill_id], [(uid, sigma[uid]) for uid in subs]))
    return records


def retrieve(task: TaskRequest, graph: SkillGraph, embedder: Embedder, cfg: RetrievalConfig | None = None,
             top_down: bool = True) -> RetrievalResult:
    """Full retrieval: communities, subunits, fusion, top-k, highlights, rescue records."""
    cfg = cfg or RetrievalConfig()
    if not graph.skills:
        raise RetrievalError("graph has no skills")
    q = task.embed(embedder)
    if top_down and graph.communities:
        matched, boosted = match_communities(q, graph, cfg.n_communities)
    else:
        matched, boosted = [], set()
    retained = match_subunits(q, graph, cfg.n_subunits)
    l0_raw, l0 = project_l0(retained, graph)
    l1, p = skill_level_scores(q, task.tokens, graph)
    ranked, selected = score_and_select(l1, l0, p, boosted, cfg, l0_raw)
    return RetrievalResult(
        task_id=task.task_id,
        selected=selected,
        highlights=export_highlights(selected, retained, graph, cfg.max_highlights),
        rescue=export_rescue_candidates(ranked, selected, retained, graph, cfg),
        matched_communities=matched,
        retained_subunits=retained,
        ranked=ranked,
        boosted=sorted(boosted),
    )
