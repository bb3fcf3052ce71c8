"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 missing/stale upstream
artifact, 4 chat backend exhaustion (partial degraded results written).
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import pipeline
from .config import ConfigError, PipelineConfig, apply_overrides, load_config
from .corpus import CorpusError
from .graph import GraphError
from .manifest import LockError, UpstreamError, output_lock
from .prompts import OneShotError, approve_oneshot, default_oneshot_root
from .sampling import SamplingError
from .toy import write_toy_corpus
from .vectors import VectorStoreError

_CONFIG_ERRORS = (
    ConfigError, CorpusError, GraphError, SamplingError, VectorStoreError,
    OneShotError, LockError, FileNotFoundError,
)


def _resolve_config(config_path: str | None, **overrides) -> PipelineConfig:
    cfg = load_config(config_path) if config_path else PipelineConfig()
    ablations = overrides.pop("ablation", ()) or ()
    for name in ablations:
        if name == "no-analyzer":
            overrides["no_analyzer"] = True
        elif name == "no-guider":
            overrides["no_guider"] = True
        else:
            raise ConfigError(f"unknown ablation {name!r}")
    return apply_overrides(cfg, **overrides).validate()


def _run_stage(stage_fn, cfg: PipelineConfig) -> None:
    try:
        with output_lock(cfg.out_path):
            outputs = stage_fn(cfg)
        for name, path in outputs.items():
            click.echo(f"{name}: {path}")
    except UpstreamError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    except pipeline.BackendExhausted as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(4)
    except _CONFIG_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


def _common_options(fn):
    decorators = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="Declarative config file; flags override it."),
        click.option("--outdir", default=None, help="Output directory."),
        click.option("--corpus", default=None, help="Corpus JSONL path."),
        click.option("--edges", default=None, help="Edge CSV path."),
        click.option("--seed", type=int, default=None),
        click.option("--tq", "t_q", type=int, default=None),
        click.option("--rq", "r_q", type=int, default=None),
        click.option("--rq-social", "r_q_social", type=int, default=None),
        click.option("--t1", type=int, default=None),
        click.option("--t2", type=int, default=None),
        click.option("--count", "query_count", type=int, default=None,
                     help="Number of queries to sample."),
        click.option("--backend", "chat_backend", default=None,
                     type=click.Choice(["mock-identity", "mock-oracle", "http"]),
                     help="Chat backend for reranking."),
        click.option("--embed-backend", default=None,
                     type=click.Choice(["mock", "http", "file"])),
        click.option("--vectors-in", default=None, help="Precomputed HLMV file."),
        click.option("--cache-dir", default=None),
        click.option("--oneshot-dir", default=None),
        click.option("--external-scores", default=None),
        click.option("--workers", type=int, default=None),
        click.option("--ablation", multiple=True,
                     type=click.Choice(["no-analyzer", "no-guider"])),
        click.option("--few-shot", is_flag=True, default=None),
    ]
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


@click.group()
def main() -> None:
    """Core-citation prediction pipeline: retrieval then agentic reranking."""


def _stage_command(name: str, stage_fn, help_text: str):
    @main.command(name=name, help=help_text)
    @_common_options
    def command(config_path, **overrides):
        try:
            cfg = _resolve_config(config_path, **overrides)
        except _CONFIG_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        _run_stage(stage_fn, cfg)

    return command


_stage_command("label", pipeline.run_label,
               "Build the citation graph and write core/superficial labels.")
_stage_command("sample", pipeline.run_sample,
               "Sample eligible queries and split them into train/test sets.")
_stage_command("embed", pipeline.run_embed,
               "Embed the corpus into a vector store file.")
_stage_command("retrieve", pipeline.run_retrieve,
               "Build candidate pools and run exact top-k retrieval.")
_stage_command("rerank", pipeline.run_rerank,
               "Run the agentic reranking stage over retrieval output.")
_stage_command("eval", pipeline.run_eval,
               "Score retrieval, rerank, and baseline rankings per query.")
_stage_command("report", pipeline.run_report,
               "Aggregate metrics with CIs and significance tests.")


@main.command(name="toy", help="Write the bundled synthetic corpus and edges.")
@click.option("--outdir", required=True)
@click.option("--seed", type=int, default=7)
@click.option("--queries", type=int, default=100)
def toy_command(outdir: str, seed: int, queries: int) -> None:
    paths = write_toy_corpus(outdir, seed=seed, n_queries=queries)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


@main.group(name="oneshot", help="Manage guided one-shot exemplar assets.")
def oneshot_group() -> None:
    pass


@oneshot_group.command(name="build")
@_common_options
@click.option("--name", default="default", help="Asset name to write the draft under.")
def oneshot_build(config_path, name, **overrides):
    try:
        cfg = _resolve_config(config_path, **overrides)
        draft = pipeline.run_oneshot_build(cfg, name=name)
        click.echo(f"draft: {draft} (review, then run oneshot approve)")
    except _CONFIG_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


@oneshot_group.command(name="approve")
@_common_options
@click.option("--name", default="default")
def oneshot_approve(config_path, name, **overrides):
    try:
        cfg = _resolve_config(config_path, **overrides)
        root = Path(cfg.oneshot_dir) if cfg.oneshot_dir else default_oneshot_root()
        directory = approve_oneshot(root, name)
        click.echo(f"approved: {directory}")
    except _CONFIG_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


@oneshot_group.command(name="list")
@_common_options
def oneshot_list(config_path, **overrides):
    try:
        cfg = _resolve_config(config_path, **overrides)
        rows = pipeline.run_oneshot_list(cfg)
    except _CONFIG_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    if not rows:
        click.echo("no one-shot assets found")
        return
    click.echo(f"{'name':<20} {'field':<18} {'status':<10} {'cands':>5}  digest")
    for row in rows:
        click.echo(f"{row['name']:<20} {row['field']:<18} {row['status']:<10} "
                   f"{row['candidates']:>5}  {row['digest']}")


if __name__ == "__main__":
    main()
