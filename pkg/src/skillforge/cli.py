"""``skillforge index|query|compile|serve|eval|synth``.

Machine output is JSON on stdout; logs and errors go to stderr.
Exit codes: 0 ok, 2 usage/input error, 3 runtime error.
"""
from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from .config import Config, ConfigError, resolve
from .corpus import CorpusError, load_repository
from .embedding import make_embedder
from .graph import EmptyCorpusError, INDEX_FILENAME, build_graph, load_graph, persist_graph
from .packet import write_packet
from .pipeline import EmbedderMismatchError, Engine
from .retrieval import RetrievalError, TaskRequest

EXIT_INPUT = 2
EXIT_RUNTIME = 3
INPUT_ERRORS = (CorpusError, ConfigError, RetrievalError, EmptyCorpusError, EmbedderMismatchError,
                FileNotFoundError, IsADirectoryError)


def _emit(obj) -> None:
    click.echo(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False))


def _fail(exc: Exception, code: int):
    click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}), err=True)
    sys.exit(code)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        from .eval import UnknownVariantError
        try:
            return fn(*args, **kwargs)
        except click.exceptions.Exit:
            raise
        except click.ClickException:
            raise
        except INPUT_ERRORS + (UnknownVariantError,) as exc:
            _fail(exc, EXIT_INPUT)
        except Exception as exc:
            _fail(exc, EXIT_RUNTIME)
    return wrapper


def common_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file."),
        click.option("--top-k", type=int, help="Number of selected skills."),
        click.option("--budget", type=int, help="Context budget in tokens."),
        click.option("--provider", type=click.Choice(["deterministic", "remote"]), help="Embedding provider."),
        click.option("--endpoint", help="Remote embedding endpoint URL."),
        click.option("--seed", type=int, help="KMeans seed."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _config(config_path, top_k, budget, provider, endpoint, seed) -> Config:
    return resolve(config_path, flags={
        "retrieval": {"top_k": top_k},
        "compile": {"budget": budget},
        "embedding": {"provider": provider, "endpoint_url": endpoint},
        "graph": {"kmeans_seed": seed},
    })


def _echo_config(cfg: Config, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.json").write_text(cfg.to_json(), encoding="utf-8")


def _engine(index: str, cfg: Config) -> Engine:
    return Engine(load_graph(index), cfg)


def _task_text(task: str | None, task_file: str | None) -> str:
    if task_file:
        task = Path(task_file).read_text(encoding="utf-8")
    if not task or not task.strip():
        raise RetrievalError("task text must be non-empty")
    return task


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging on stderr.")
def main(verbose: bool) -> None:
    """Index skill repositories, retrieve skills for a task and compile context packets."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s %(message)s")


@main.command("index")
@click.argument("root")
@click.option("--out", default=".", show_default=True, help="Directory for skillgraph.idx.")
@common_options
@guarded
def cmd_index(root, out, **opts):
    """Build the skill graph for ROOT and persist it."""
    cfg = _config(**opts)
    _, docs = load_repository(root)
    graph = build_graph(docs, make_embedder(cfg.embedding), cfg)
    out_dir = Path(out)
    _echo_config(cfg, out_dir)
    path = persist_graph(graph, out_dir / INDEX_FILENAME)
    _emit({"index": str(path), "skills": len(graph.skills), "communities": len(graph.communities),
           "subunits": len(graph.subunits), "edges": len(graph.edges), "fingerprint": graph.fingerprint()})


@main.command("query")
@click.option("--index", required=True, help="skillgraph.idx or its directory.")
@click.option("--task", help="Task text.")
@click.option("--task-file", type=click.Path(exists=True, dir_okay=False))
@click.option("--task-id", default="")
@common_options
@guarded
def cmd_query(index, task, task_file, task_id, **opts):
    """Retrieve skills for a task and print the retrieval result."""
    cfg = _config(**opts)
    req = TaskRequest(_task_text(task, task_file), task_id=task_id)
    _emit(_engine(index, cfg).retrieve(req).to_dict())


@main.command("compile")
@click.option("--index", required=True)
@click.option("--task")
@click.option("--task-file", type=click.Path(exists=True, dir_okay=False))
@click.option("--task-id", default="")
@click.option("--contract", "contract_file", type=click.Path(exists=True, dir_okay=False),
              help="JSON output-contract metadata that overrides text extraction.")
@click.option("--out", default="packets", show_default=True)
@common_options
@guarded
def cmd_compile(index, task, task_file, task_id, contract_file, out, **opts):
    """Retrieve and compile; writes <out>/<task_id>/READ_FIRST.md and COORDINATOR_PACKET.json."""
    cfg = _config(**opts)
    req = TaskRequest(_task_text(task, task_file), task_id=task_id)
    contract = json.loads(Path(contract_file).read_text(encoding="utf-8")) if contract_file else None
    result = _engine(index, cfg).run(req, contract=contract)
    _echo_config(cfg, Path(out))
    d = write_packet(result.context, out)
    ctx = result.context
    _emit({"task_id": ctx.task_id, "dir": str(d), "budget": ctx.budget, "total_tokens": ctx.total_tokens,
           "sections": {s.kind: s.token_count for s in ctx.sections},
           "dropped": [list(x) for x in ctx.dropped]})


@main.command("serve")
@click.option("--index", required=True)
@click.option("--bind", default="127.0.0.1:8765", show_default=True, help="host:port")
@common_options
@guarded
def cmd_serve(index, bind, **opts):
    """Serve /v1/retrieve, /v1/compile and /v1/health."""
    from .server import make_server

    cfg = _config(**opts)
    host, _, port = bind.rpartition(":")
    server = make_server(_engine(index, cfg), host or "127.0.0.1", int(port))
    click.echo(f"serving on http://{server.server_address[0]}:{server.server_address[1]}", err=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


@main.command("eval")
@click.option("--index", required=True)
@click.option("--taskset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--variants", default="full,no_bu,no_td,no_cc,vanilla,vanilla_lite", show_default=True)
@click.option("--out", default="eval_out", show_default=True)
@common_options
@guarded
def cmd_eval(index, taskset, variants, out, **opts):
    """Score variants on a planted-relevance task set; writes report.json and report.md."""
    from .eval import load_taskset, report_json, report_markdown, run_eval

    cfg = _config(**opts)
    report = run_eval(_engine(index, cfg), load_taskset(taskset), [v.strip() for v in variants.split(",") if v.strip()])
    out_dir = Path(out)
    _echo_config(cfg, out_dir)
    (out_dir / "report.json").write_text(report_json(report), encoding="utf-8")
    (out_dir / "report.md").write_text(report_markdown(report), encoding="utf-8")
    _emit(report)


@main.command("synth")
@click.option("--skills", "n_skills", default=64, show_default=True)
@click.option("--tasks", "n_tasks", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True)
@guarded
def cmd_synth(n_skills, n_tasks, seed, out):
    """Write a seeded synthetic corpus (<out>/corpus) and task set (<out>/taskset.json)."""
    from .eval import generate_corpus, generate_tasks, save_taskset, write_corpus

    skills = generate_corpus(n_skills, seed)
    out_dir = Path(out)
    write_corpus(skills, out_dir / "corpus")
    save_taskset(generate_tasks(skills, n_tasks, seed), out_dir / "taskset.json")
    _emit({"corpus": str(out_dir / "corpus"), "taskset": str(out_dir / "taskset.json"),
           "skills": n_skills, "tasks": n_tasks})


if __name__ == "__main__":
    main()
