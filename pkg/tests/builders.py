"""Seeded graph and task fixtures shared by the test modules."""
from __future__ import annotations

import functools
import random

from skillforge.config import Config
from skillforge.corpus import document_from_text
from skillforge.embedding import DeterministicEmbedder
from skillforge.eval import generate_corpus, generate_tasks
from skillforge.graph import build_graph

CFG = Config()
EMBEDDER = DeterministicEmbedder(CFG.embedding)


@functools.lru_cache(maxsize=None)
def synthetic(n: int, seed: int = 0):
    return tuple(generate_corpus(n, seed))


@functools.lru_cache(maxsize=None)
def graph_for(n: int, seed: int = 0, duplicates: int = 0):
    """Graph over a synthetic corpus; ``duplicates`` clones add exact score ties."""
    skills = synthetic(n, seed)
    docs = [document_from_text(s.skill_id, s.text) for s in skills]
    rng = random.Random(seed * 31 + duplicates)
    for j in range(duplicates):
        src = skills[rng.randrange(len(skills))]
        # same name and body under a new folder id
        docs.append(document_from_text(f"{src.skill_id}-dup{j}", src.text))
    return build_graph(docs, EMBEDDER, CFG)


def random_task_text(rng: random.Random, n: int, seed: int) -> str:
    """Either a planted task or a salad of corpus words."""
    skills = synthetic(n, seed)
    if rng.random() < 0.5:
        return generate_tasks(skills, 1, rng.randrange(10_000))[0].text
    vocab = " ".join(s.text for s in rng.sample(skills, min(3, len(skills)))).split()
    return " ".join(rng.choice(vocab) for _ in range(rng.randint(3, 40)))


def fixtures(count: int, seed: int, max_skills: int = 30, tasks_per_graph: int = 10):
    """``count`` (graph, task_text) pairs over ``count // tasks_per_graph`` random graphs."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        n = rng.randint(2, max_skills)
        gseed = rng.randrange(1_000)
        dups = rng.choice((0, 0, 1, 3))
        g = graph_for(n, gseed, dups)
        for _ in range(min(tasks_per_graph, count - len(out))):
            out.append((g, random_task_text(rng, n, gseed)))
    return out
