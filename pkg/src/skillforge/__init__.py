"""Skill graph indexing, fused skill retrieval and budgeted context compilation."""
from .config import Config
from .corpus import SkillDocument, load_repository, parse_skill_file
from .graph import SkillGraph, build_graph, load_graph, persist_graph
from .pipeline import AblationSpec, Engine
from .retrieval import RetrievalResult, TaskRequest, retrieve

__version__ = "0.1.0"

__all__ = [
    "AblationSpec", "Config", "Engine", "RetrievalResult", "SkillDocument", "SkillGraph", "TaskRequest",
    "build_graph", "load_graph", "load_repository", "parse_skill_file", "persist_graph", "retrieve",
]
