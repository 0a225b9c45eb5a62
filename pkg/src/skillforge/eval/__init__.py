"""Evaluation harness: ranking oracle, baselines, ablations and synthetic tasks."""
from .harness import (VARIANTS, UnknownVariantError, VanillaRetriever, baseline_llm_pool, baseline_vanilla,
                      brute_force_rank, lite_compile, report_json, report_markdown, run_eval)
from .synthetic import (SyntheticTask, corpus_documents, generate_corpus, generate_tasks, load_taskset,
                        save_taskset, write_corpus)

__all__ = [
    "VARIANTS", "UnknownVariantError", "VanillaRetriever", "baseline_llm_pool", "baseline_vanilla",
    "brute_force_rank", "lite_compile", "report_json", "report_markdown", "run_eval",
    "SyntheticTask", "corpus_documents", "generate_corpus", "generate_tasks", "load_taskset",
    "save_taskset", "write_corpus",
]
