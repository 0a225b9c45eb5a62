#!/usr/bin/env python3
"""Ablation table on seeded synthetic suites, one row block per seed.

    python3 scripts/run_ablation.py --skills 64 --tasks 100 --seeds 0 1 2 --out ablation.md
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

from skillforge.config import Config
from skillforge.embedding import make_embedder
from skillforge.eval import VARIANTS, corpus_documents, generate_corpus, generate_tasks, run_eval
from skillforge.graph import build_graph
from skillforge.pipeline import Engine


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--skills", type=int, default=64)
    ap.add_argument("--tasks", type=int, default=100)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--variants", default=",".join(VARIANTS))
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    cfg = Config()
    embedder = make_embedder(cfg.embedding)
    variants = [v for v in args.variants.split(",") if v]
    lines = [f"# Ablations: |S|={args.skills}, {args.tasks} tasks", "",
             "| seed | variant | recall@5 | mrr | highlight_hit_rate | rescue_precision |", "|---|---|---|---|---|---|"]
    for seed in args.seeds:
        t0 = time.perf_counter()
        skills = generate_corpus(args.skills, seed)
        graph = build_graph(corpus_documents(skills), embedder, cfg)
        report = run_eval(Engine(graph, cfg, embedder), generate_tasks(skills, args.tasks, seed), variants)
        for name, row in report["variants"].items():
            rp = row["rescue_precision"]
            lines.append(f"| {seed} | {name} | {row['recall@5']:.3f} | {row['mrr']:.3f} | "
                         f"{row['highlight_hit_rate']:.3f} | {'n/a' if rp is None else f'{rp:.3f}'} |")
        print(f"seed {seed} done in {time.perf_counter() - t0:.1f}s")
    text = "\n".join(lines) + "\n"
    print(text)
    if args.out:
        args.out.write_text(text, encoding="utf-8")


if __name__ == "__main__":
    main()
