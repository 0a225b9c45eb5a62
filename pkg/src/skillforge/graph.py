"""The multi-level skill graph: communities, skills, subunits, edges and assignment."""
from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import Config, GraphConfig
from .corpus import SkillDocument
from .embedding import Embedder
from .kmeans import kmeans, n_clusters_for
from .subunits import ExtractionEdge, Subunit, build_subunit_set, degrees
from .text import load_lexicon, tokenize

FORMAT_VERSION = 1
MAGIC = b"SKGRAPH\x00"
INDEX_FILENAME = "skillgraph.idx"


class EmptyCorpusError(ValueError):
    pass


class IndexFormatError(Exception):
    pass


class IndexVersionError(IndexFormatError):
    """Index written by a different format version; rebuild or migrate it."""


class CorruptIndexError(IndexFormatError):
    pass


@dataclass(frozen=True)
class SkillNode:
    skill_id: str
    name: str
    description: str
    representation_text: str
    resource_count: int = 0


@dataclass
class SkillCommunity:
    community_id: int
    member_skill_ids: list[str]
    centroid: np.ndarray
    label: str
    representative_skill_ids: list[str]
    community_text: str
    community_text_embedding: np.ndarray


@dataclass
class SkillGraph:
    skills: list[SkillNode]
    subunits: list[Subunit]
    edges: list[ExtractionEdge]
    communities: list[SkillCommunity]
    assignment: dict[str, int]
    idf: dict[str, float]
    subunit_matrix: np.ndarray  # rows aligned with ``subunits``
    desc_matrix: np.ndarray  # rows aligned with ``skills``
    repr_matrix: np.ndarray  # rows aligned with ``skills``
    build_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._skill_index = {s.skill_id: i for i, s in enumerate(self.skills)}
        self._subunit_index = {u.subunit_id: i for i, u in enumerate(self.subunits)}
        self._deg = degrees(self.edges)
        by_skill: dict[str, list[str]] = {s.skill_id: [] for s in self.skills}
        by_subunit: dict[str, list[str]] = {u.subunit_id: [] for u in self.subunits}
        for e in self.edges:
            by_skill[e.skill_id].append(e.subunit_id)
            by_subunit[e.subunit_id].append(e.skill_id)
        self._skill_subunits = by_skill
        self._subunit_skills = by_subunit

    @property
    def dim(self) -> int:
        return int(self.build_meta.get("dim", self.subunit_matrix.shape[1]))

    def skill(self, skill_id: str) -> SkillNode:
        return self.skills[self._skill_index[skill_id]]

    def subunit(self, subunit_id: str) -> Subunit:
        return self.subunits[self._subunit_index[subunit_id]]

    def deg(self, subunit_id: str) -> int:
        return self._deg[subunit_id]

    def subunits_of(self, skill_id: str) -> list[str]:
        return self._skill_subunits[skill_id]

    def skills_of(self, subunit_id: str) -> list[str]:
        return self._subunit_skills[subunit_id]

    def desc_embedding(self, skill_id: str) -> np.ndarray:
        return self.desc_matrix[self._skill_index[skill_id]]

    def subunit_embedding(self, subunit_id: str) -> np.ndarray:
        return self.subunit_matrix[self._subunit_index[subunit_id]]

    def validate(self) -> None:
        ids = {s.skill_id for s in self.skills}
        cids = {c.community_id for c in self.communities}
        if set(self.assignment) != ids or not set(self.assignment.values()) <= cids:
            raise ValueError("community assignment must be total over skills")
        members = [m for c in self.communities for m in c.member_skill_ids]
        if sorted(members) != sorted(ids):
            raise ValueError("communities must partition the skills")
        for e in self.edges:
            if e.skill_id not in ids or e.subunit_id not in self._subunit_index:
                raise ValueError(f"dangling edge {e}")
        if self.subunit_matrix.shape[0] != len(self.subunits) or self.desc_matrix.shape[0] != len(self.skills):
            raise ValueError("embedding rows out of step with nodes")

    def fingerprint(self) -> str:
        return hashlib.sha256(to_bytes(self)).hexdigest()[:16]

    def equals(self, other: "SkillGraph") -> bool:
        return to_bytes(self) == to_bytes(other)


def compute_idf(subunits: Sequence[Subunit], edges: Sequence[ExtractionEdge], n_skills: int) -> dict[str, float]:
    """idf(u) = ln(|S| / deg(u))."""
    deg = degrees(edges)
    return {u.subunit_id: math.log(n_skills / deg[u.subunit_id]) for u in subunits}


def build_skill_representation(name: str, description: str, subunit_texts: dict[str, str],
                               idf: dict[str, float], top_r: int = 8) -> str:
    """``"name. description"`` followed by the skill's top-r subunits by idf.

    ``subunit_texts`` maps subunit_id -> text for the skill's own subunits.
    Ties in idf are broken by subunit text.
    """
    base = f"{name}. {description}"
    ranked = sorted(subunit_texts.items(), key=lambda kv: (-idf[kv[0]], kv[1]))[:top_r]
    if not ranked:
        return base
    return base + " " + "; ".join(text for _, text in ranked)


def cluster_communities(reprs: np.ndarray, cfg: GraphConfig | None = None) -> tuple[list[int], np.ndarray]:
    """Hard-cluster skill vectors into floor(sqrt(|S|)) communities.

    Community ids are renumbered by first appearance in row order so the
    assignment is canonical.
    """
    cfg = cfg or GraphConfig()
    reprs = np.asarray(reprs)
    if reprs.shape[0] < 1:
        raise EmptyCorpusError("cannot cluster an empty skill set")
    if not np.all(np.isfinite(reprs)):
        raise ValueError("non-finite skill embedding")
    k = n_clusters_for(reprs.shape[0])
    res = kmeans(reprs, k, seed=cfg.kmeans_seed, n_init=cfg.kmeans_n_init,
                 max_iter=cfg.kmeans_max_iter, tol=cfg.kmeans_tol)
    remap: dict[int, int] = {}
    for lab in res.labels.tolist():
        remap.setdefault(lab, len(remap))
    labels = [remap[lab] for lab in res.labels.tolist()]
    centroids = np.zeros_like(res.centroids)
    for old, new in remap.items():
        centroids[new] = res.centroids[old]
    return labels, centroids.astype(np.float32)


def _label_terms(texts: dict[str, str], members: Sequence[str], n_terms: int) -> list[str]:
    stop = set(load_lexicon("stopwords"))

    def terms(t: str) -> list[str]:
        return [w for w in tokenize(t) if w not in stop and len(w) > 1 and not w.isdigit()]

    df: Counter[str] = Counter()
    for t in texts.values():
        df.update(set(terms(t)))
    n = len(texts)
    weight: Counter[str] = Counter()
    for sid in members:
        for w, c in Counter(terms(texts[sid])).items():
            weight[w] += c * (math.log((1 + n) / (1 + df[w])) + 1.0)
    return [w for w, _ in sorted(weight.items(), key=lambda kv: (-kv[1], kv[0]))[:n_terms]]


def _truncate(text: str, limit: int) -> str:
    if len(text) <= limit:
        return text
    cut = text[:limit].rsplit(" ", 1)[0]
    return cut.rstrip(" ,;:.") + "..."


def build_community(community_id: int, members: Sequence[str], centroid: np.ndarray,
                    skills: dict[str, SkillNode], repr_vectors: dict[str, np.ndarray],
                    all_reprs: dict[str, str], embedder: Embedder,
                    cfg: GraphConfig | None = None) -> SkillCommunity:
    cfg = cfg or GraphConfig()
    c64 = np.asarray(centroid, dtype=np.float64)

    def dist(sid: str) -> float:
        diff = np.asarray(repr_vectors[sid], dtype=np.float64) - c64
        return float(diff @ diff)

    reps = sorted(members, key=lambda sid: (dist(sid), sid))[:cfg.n_representatives]
    label = " ".join(_label_terms(all_reprs, members, cfg.label_terms))
    rep_text = "; ".join(
        f"{skills[sid].name}: {_truncate(skills[sid].description, cfg.desc_truncate_chars)}" for sid in reps)
    text = f"label: {label}. skills: {rep_text}"
    return SkillCommunity(
        community_id=community_id,
        member_skill_ids=sorted(members),
        centroid=np.asarray(centroid, dtype=np.float32),
        label=label,
        representative_skill_ids=reps,
        community_text=text,
        community_text_embedding=embedder.embed([text])[0],
    )


def build_graph(docs: Sequence[SkillDocument], embedder: Embedder, cfg: Config | None = None,
                built_at: str | None = None) -> SkillGraph:
    """Offline stage: documents -> subunits/edges -> representations -> communities."""
    cfg = cfg or Config()
    docs = sorted(docs, key=lambda d: d.skill_id)
    if not docs:
        raise EmptyCorpusError("skill repository contains no skills")
    subunits, edges = build_subunit_set(docs, cfg.subunits)
    idf = compute_idf(subunits, edges, len(docs))
    text_of = {u.subunit_id: u.text for u in subunits}
    own: dict[str, dict[str, str]] = {d.skill_id: {} for d in docs}
    for e in edges:
        own[e.skill_id][e.subunit_id] = text_of[e.subunit_id]

    skills = [
        SkillNode(d.skill_id, d.name, d.description,
                  build_skill_representation(d.name, d.description, own[d.skill_id], idf, cfg.graph.repr_top_r),
                  len(d.resources))
        for d in docs
    ]
    dim = embedder.cfg.dim
    sub_matrix = embedder.embed([u.text for u in subunits]) if subunits else np.zeros((0, dim), np.float32)
    desc_matrix = embedder.embed([s.description for s in skills])
    repr_matrix = embedder.embed([s.representation_text for s in skills])

    labels, centroids = cluster_communities(repr_matrix, cfg.graph)
    by_id = {s.skill_id: s for s in skills}
    repr_vectors = {s.skill_id: repr_matrix[i] for i, s in enumerate(skills)}
    all_reprs = {s.skill_id: s.representation_text for s in skills}
    communities = []
    for cid in range(centroids.shape[0]):
        members = [s.skill_id for s, lab in zip(skills, labels) if lab == cid]
        communities.append(build_community(cid, members, centroids[cid], by_id, repr_vectors,
                                           all_reprs, embedder, cfg.graph))
    assignment = {s.skill_id: lab for s, lab in zip(skills, labels)}
    meta = {
        "format_version": FORMAT_VERSION,
        "embedder": embedder.fingerprint,
        "dim": dim,
        "config_hash": cfg.index_hash(),
        "built_at": built_at,
    }
    g = SkillGraph(skills, subunits, edges, communities, assignment, idf,
                   sub_matrix.astype(np.float32), desc_matrix.astype(np.float32),
                   repr_matrix.astype(np.float32), meta)
    g.validate()
    return g


# -- persistence ---------------------------------------------------------------

def _block(arr: np.ndarray, dim: int) -> bytes:
    arr = np.asarray(arr, dtype="<f4").reshape(-1, dim) if arr.size else np.zeros((0, dim), "<f4")
    return arr.tobytes()


def to_bytes(g: SkillGraph) -> bytes:
    dim = g.dim
    arrays = {
        "subunit_embeddings": g.subunit_matrix,
        "skill_desc_embeddings": g.desc_matrix,
        "skill_repr_embeddings": g.repr_matrix,
        "community_centroids": np.stack([c.centroid for c in g.communities]) if g.communities else np.zeros((0, dim)),
        "community_text_embeddings": (np.stack([c.community_text_embedding for c in g.communities])
                                      if g.communities else np.zeros((0, dim))),
    }
    blocks, blob, offset = [], [], 0
    for name, arr in arrays.items():
        data = _block(arr, dim)
        rows = len(data) // (4 * dim)
        blocks.append({"name": name, "offset": offset, "rows": rows})
        blob.append(data)
        offset += len(data)
    header = {
        "build_meta": g.build_meta,
        "dim": dim,
        "blocks": blocks,
        "skills": [[s.skill_id, s.name, s.description, s.representation_text, s.resource_count] for s in g.skills],
        "subunits": [[u.subunit_id, u.text, u.kind, u.token_len] for u in g.subunits],
        "edges": [[e.skill_id, e.subunit_id] for e in g.edges],
        "idf": [[u.subunit_id, g.idf[u.subunit_id]] for u in g.subunits],
        "communities": [[c.community_id, c.member_skill_ids, c.label, c.representative_skill_ids, c.community_text]
                        for c in g.communities],
        "assignment": [[s.skill_id, g.assignment[s.skill_id]] for s in g.skills],
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    body = MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(hbytes)) + hbytes + b"".join(blob)
    return body + hashlib.sha256(body).digest()


def from_bytes(data: bytes) -> SkillGraph:
    if len(data) < len(MAGIC) + 12 + 32 or data[:len(MAGIC)] != MAGIC:
        raise CorruptIndexError("not a skill graph index (bad magic or truncated)")
    version, hlen = struct.unpack_from("<IQ", data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise IndexVersionError(f"index format version {version}, this build reads {FORMAT_VERSION}; re-run index")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptIndexError("index checksum mismatch")
    start = len(MAGIC) + 12
    try:
        header = json.loads(body[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptIndexError(f"unreadable index header: {exc}") from exc
    dim = header["dim"]
    blob = body[start + hlen:]
    arrays = {}
    for b in header["blocks"]:
        n = b["rows"] * dim * 4
        chunk = blob[b["offset"]:b["offset"] + n]
        if len(chunk) != n:
            raise CorruptIndexError(f"block {b['name']} truncated")
        arrays[b["name"]] = np.frombuffer(chunk, dtype="<f4").reshape(b["rows"], dim).astype(np.float32)
    skills = [SkillNode(*row) for row in header["skills"]]
    subunits = [Subunit(*row) for row in header["subunits"]]
    edges = [ExtractionEdge(*row) for row in header["edges"]]
    communities = [
        SkillCommunity(cid, members, arrays["community_centroids"][i], label, reps, text,
                       arrays["community_text_embeddings"][i])
        for i, (cid, members, label, reps, text) in enumerate(header["communities"])
    ]
    g = SkillGraph(
        skills=skills, subunits=subunits, edges=edges, communities=communities,
        assignment={sid: cid for sid, cid in header["assignment"]},
        idf={uid: v for uid, v in header["idf"]},
        subunit_matrix=arrays["subunit_embeddings"],
        desc_matrix=arrays["skill_desc_embeddings"],
        repr_matrix=arrays["skill_repr_embeddings"],
        build_meta=header["build_meta"],
    )
    g.validate()
    return g


def persist_graph(g: SkillGraph, path: str | Path) -> Path:
    path = Path(path)
    if path.is_dir():
        path = path / INDEX_FILENAME
    g.validate()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(to_bytes(g))
    os.replace(tmp, path)
    return path


def load_graph(path: str | Path) -> SkillGraph:
    path = Path(path)
    if path.is_dir():
        path = path / INDEX_FILENAME
    return from_bytes(path.read_bytes())


def empty_graph(dim: int) -> SkillGraph:
    z = np.zeros((0, dim), np.float32)
    return SkillGraph([], [], [], [], {}, {}, z, z.copy(), z.copy(),
                      {"format_version": FORMAT_VERSION, "dim": dim, "embedder": None,
                       "config_hash": None, "built_at": None})
