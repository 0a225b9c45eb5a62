"""Retrieve-then-compile over a loaded graph, with the ablation switches used by eval."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .compilation import AffiliatedCue, OutputContract, attach, extract_output_contract, filter_rescue, gate_cues
from .config import Config
from .embedding import Embedder, make_embedder
from .graph import SkillGraph
from .packet import HEADERS, CompiledContext, compile_context, render_sections
from .retrieval import RetrievalResult, TaskRequest, retrieve
from .text import count_tokens


class EmbedderMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class AblationSpec:
    disable_bottom_up: bool = False
    disable_top_down: bool = False
    disable_compilation: bool = False
    lite_compilation: bool = False


@dataclass
class PipelineOutput:
    retrieval: RetrievalResult
    context: CompiledContext
    cues: list[AffiliatedCue]
    rescued_ids: list[str]


class Engine:
    """Holds an immutable graph plus the embedder that built it."""

    def __init__(self, graph: SkillGraph, cfg: Config | None = None, embedder: Embedder | None = None):
        self.graph = graph
        self.cfg = cfg or Config()
        self.embedder = embedder or make_embedder(self.cfg.embedding)
        built_with = graph.build_meta.get("embedder")
        if built_with and built_with != self.embedder.fingerprint:
            raise EmbedderMismatchError(
                f"index built with embedder {built_with}, query embedder is {self.embedder.fingerprint}")

    def retrieve(self, task: TaskRequest, ablation: AblationSpec = AblationSpec()) -> RetrievalResult:
        rcfg = self.cfg.retrieval
        if ablation.disable_bottom_up:
            rcfg = dataclasses.replace(rcfg, beta=0.0)
        if ablation.disable_top_down:
            rcfg = dataclasses.replace(rcfg, lam=0.0)
        return retrieve(task, self.graph, self.embedder, rcfg, top_down=not ablation.disable_top_down)

    def compile(self, task: TaskRequest, result: RetrievalResult, ablation: AblationSpec = AblationSpec(),
                contract: OutputContract | dict | None = None) -> PipelineOutput:
        ccfg = self.cfg.compile
        kw = self.cfg.subunits.requirement_keywords
        if ablation.disable_compilation:
            ctx = compile_context(task.task_id, task.text, result.selected, self.graph, {}, [],
                                  OutputContract(), ccfg, checklist=False)
            return PipelineOutput(result, ctx, [], [])
        out_contract = extract_output_contract(task.text, kw, injected=contract)
        if ablation.lite_compilation:
            ctx = compile_context(task.task_id, task.text, result.selected, self.graph, {}, [], out_contract, ccfg)
            return PipelineOutput(result, ctx, [], [])

        rescued = filter_rescue(result.rescue, result.highlights, self.graph, ccfg)
        cues = attach(rescued, result.selected, result.highlights, self.graph, task.text, ccfg)
        # optional-cue room: what is left once every non-cue section is in place
        base = compile_context(task.task_id, task.text, result.selected, self.graph, result.highlights, [],
                               out_contract, ccfg)
        mode = ccfg.token_mode
        used = count_tokens(render_sections(base.sections), mode)
        room = ccfg.budget - used - count_tokens(HEADERS["affiliated_cues"], mode)
        accepted, rejected = gate_cues(cues, result.highlights, task.text, max(room, 0), ccfg,
                                       cost=lambda s: count_tokens(s, mode))
        pre = [("affiliated_cues", c.subunit_id, c.reason) for c in rejected]
        ctx = compile_context(task.task_id, task.text, result.selected, self.graph, result.highlights, accepted,
                              out_contract, ccfg, pre_dropped=pre)
        return PipelineOutput(result, ctx, cues, [r.subunit_id for r in rescued])

    def run(self, task: TaskRequest, ablation: AblationSpec = AblationSpec(),
            contract: OutputContract | dict | None = None) -> PipelineOutput:
        return self.compile(task, self.retrieve(task, ablation), ablation, contract)

