#!/usr/bin/env python3
"""Write a synthetic corpus + task set, index it, and print build statistics.

    python3 scripts/build_fixture_corpus.py --skills 207 --out /tmp/fixture
"""
from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from skillforge.config import Config
from skillforge.corpus import load_repository
from skillforge.embedding import make_embedder
from skillforge.eval import generate_corpus, generate_tasks, save_taskset, write_corpus
from skillforge.graph import build_graph, persist_graph


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--skills", type=int, default=64)
    ap.add_argument("--tasks", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args()

    skills = generate_corpus(args.skills, args.seed)
    write_corpus(skills, args.out / "corpus")
    save_taskset(generate_tasks(skills, args.tasks, args.seed), args.out / "taskset.json")

    cfg = Config()
    t0 = time.perf_counter()
    _, docs = load_repository(args.out / "corpus")
    graph = build_graph(docs, make_embedder(cfg.embedding), cfg)
    path = persist_graph(graph, args.out / "index")
    sizes = sorted(len(c.member_skill_ids) for c in graph.communities)
    print(json.dumps({
        "skills": len(graph.skills), "subunits": len(graph.subunits), "edges": len(graph.edges),
        "communities": len(graph.communities), "community_sizes": sizes,
        "index": str(path), "index_bytes": path.stat().st_size, "fingerprint": graph.fingerprint(),
        "seconds": round(time.perf_counter() - t0, 3),
    }, indent=2))


if __name__ == "__main__":
    main()
