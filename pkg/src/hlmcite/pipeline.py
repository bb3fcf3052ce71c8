"""Stage implementations behind the CLI: each is independently resumable,
validates its upstream artifacts, and records a manifest."""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path
from typing import Mapping

from . import metrics as M
from .chat import (
    CachingChatBackend,
    ChatBackend,
    HttpChatBackend,
    IdentityChatMock,
    OracleChatMock,
    RateLimiter,
    ResponseCache,
)
from .config import ConfigError, PipelineConfig
from .corpus import Corpus, load_corpus
from .embedding import (
    EmbeddingBackend,
    HashEmbeddingBackend,
    HttpEmbeddingBackend,
    PrecomputedVectorBackend,
    embed_corpus,
)
from .graph import build_graph, label_citations, load_edges
from .manifest import UpstreamError, read_manifest, require_upstream, sha256_file, write_manifest
from .prompts import (
    OneShotExample,
    copy_bundled_assets,
    default_oneshot_root,
    list_oneshot_assets,
    select_oneshot,
)
from .rerank import FinalSelection, build_oneshot, rerank_many
from .sampling import EvalInstance, build_eval_instance, load_samples, sample_queries, save_samples, split_train_test
from .stats import aggregate, pairwise_pvalues
from .vectors import RetrievalResult, load_store, save_store, top_k


class BackendExhausted(Exception):
    """Some queries degraded to retrieval order; maps to exit code 4."""


def _load_inputs(cfg: PipelineConfig) -> tuple[Corpus, list[tuple[str, str]]]:
    if not cfg.corpus or not cfg.edges:
        raise ConfigError("config must set paths.corpus and paths.edges")
    corpus, _ = load_corpus(cfg.corpus)
    return corpus, load_edges(cfg.edges)


def _check_original_inputs(cfg: PipelineConfig, upstream: str) -> None:
    """Original input files must still match what the upstream stage saw."""
    manifest = read_manifest(cfg.out_path, upstream)
    if manifest is None:
        raise UpstreamError(f"no manifest for upstream stage {upstream!r}", rerun=upstream)
    for name, path in (("corpus", cfg.corpus), ("edges", cfg.edges)):
        recorded = manifest["inputs"].get(name)
        if recorded and sha256_file(path) != recorded["sha256"]:
            raise UpstreamError(f"input {path} changed since stage {upstream!r}", rerun=upstream)


def run_label(cfg: PipelineConfig) -> dict[str, Path]:
    start = time.perf_counter()
    corpus, edges = _load_inputs(cfg)
    graph, report = build_graph(corpus, edges)
    out = cfg.out_path
    out.mkdir(parents=True, exist_ok=True)
    labels_path = out / "labels.jsonl"
    with open(labels_path, "w", encoding="utf-8") as fh:
        for q in sorted(graph.nodes):
            result = label_citations(graph, q)
            if result.n_q == 0:
                continue
            fh.write(json.dumps({
                "query_id": q,
                "core_ids": list(result.core),
                "superficial_ids": list(result.superficial),
                "n_q": result.n_q, "k_q": result.k_q, "m_q": result.m_q,
            }) + "\n")
    report_path = out / "load_report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
    write_manifest(
        out, "label", cfg.snapshot(),
        inputs={"corpus": cfg.corpus, "edges": cfg.edges},
        outputs={"labels": labels_path, "load_report": report_path},
        extra=report.to_dict(),
        elapsed_seconds=time.perf_counter() - start,
    )
    return {"labels": labels_path, "load_report": report_path}


def run_sample(cfg: PipelineConfig) -> dict[str, Path]:
    start = time.perf_counter()
    out = cfg.out_path
    _check_original_inputs(cfg, "label")
    require_upstream(out, "label", {"labels": out / "labels.jsonl"})
    corpus, edges = _load_inputs(cfg)
    graph, _ = build_graph(corpus, edges)
    samples = sample_queries(graph, cfg.t1, cfg.t2, cfg.query_count, cfg.seed)
    train, test = split_train_test(samples, cfg.split_ratio, cfg.seed)
    train_path, test_path = out / "samples_train.jsonl", out / "samples_test.jsonl"
    save_samples(sorted(train, key=lambda s: s.query), train_path)
    save_samples(sorted(test, key=lambda s: s.query), test_path)
    write_manifest(
        out, "sample", cfg.snapshot(),
        inputs={"corpus": cfg.corpus, "edges": cfg.edges, "labels": out / "labels.jsonl"},
        outputs={"samples_train": train_path, "samples_test": test_path},
        extra={"sampled": len(samples), "train": len(train), "test": len(test)},
        elapsed_seconds=time.perf_counter() - start,
    )
    return {"samples_train": train_path, "samples_test": test_path}


def _embed_backend(cfg: PipelineConfig) -> EmbeddingBackend:
    if cfg.embed_backend == "mock":
        return HashEmbeddingBackend(dim=cfg.embed_dim)
    if cfg.embed_backend == "file":
        return PrecomputedVectorBackend(load_store(cfg.vectors_in))
    return HttpEmbeddingBackend(model=cfg.embed_model, dim=cfg.embed_dim)


def run_embed(cfg: PipelineConfig) -> dict[str, Path]:
    start = time.perf_counter()
    out = cfg.out_path
    out.mkdir(parents=True, exist_ok=True)
    corpus, _ = load_corpus(cfg.corpus)
    backend = _embed_backend(cfg)
    store = embed_corpus(backend, corpus)
    vectors_path = out / "vectors.hlmv"
    save_store(store, vectors_path)
    inputs: dict[str, str | Path] = {"corpus": cfg.corpus}
    if cfg.embed_backend == "file":
        inputs["vectors_in"] = cfg.vectors_in
    write_manifest(
        out, "embed", cfg.snapshot(),
        inputs=inputs,
        outputs={"vectors": vectors_path},
        extra={"backend": backend.name, "dim": store.dim, "count": len(store)},
        elapsed_seconds=time.perf_counter() - start,
    )
    return {"vectors": vectors_path}


def _instances_to_jsonl(instances: Mapping[str, EvalInstance], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(instances):
            inst = instances[qid]
            fh.write(json.dumps({
                "query_id": inst.query,
                "t_q": inst.t_q, "t1": inst.t1, "t2": inst.t2,
                "candidates": list(inst.candidates),
                "core_ids": [c for c in inst.candidates if inst.grades[c] == "core"],
                "superficial_ids": [c for c in inst.candidates if inst.grades[c] == "superficial"],
            }) + "\n")


def load_instances(path: str | Path) -> dict[str, EvalInstance]:
    instances: dict[str, EvalInstance] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        grades = {c: "none" for c in raw["candidates"]}
        grades.update({c: "core" for c in raw["core_ids"]})
        grades.update({c: "superficial" for c in raw["superficial_ids"]})
        instances[raw["query_id"]] = EvalInstance(
            query=raw["query_id"],
            candidates=tuple(raw["candidates"]),
            grades=grades,
            t_q=raw["t_q"], t1=raw["t1"], t2=raw["t2"],
        )
    return instances


def run_retrieve(cfg: PipelineConfig) -> dict[str, Path]:
    start = time.perf_counter()
    out = cfg.out_path
    _check_original_inputs(cfg, "sample")
    require_upstream(out, "sample", {"samples_test": out / "samples_test.jsonl"})
    require_upstream(out, "embed", {"vectors": out / "vectors.hlmv"})
    corpus, edges = _load_inputs(cfg)
    graph, _ = build_graph(corpus, edges)
    store = load_store(out / "vectors.hlmv")
    samples = load_samples(out / "samples_test.jsonl")

    instances: dict[str, EvalInstance] = {}
    retrievals: dict[str, RetrievalResult] = {}
    for sample in samples:
        inst = build_eval_instance(sample, graph, cfg.t_q, cfg.seed)
        instances[sample.query] = inst
        r_q = cfg.effective_rq(corpus[sample.query].field)
        retrievals[sample.query] = top_k(
            store, store.vector(sample.query), inst.candidates, r_q, query_id=sample.query
        )

    instances_path = out / "instances.jsonl"
    _instances_to_jsonl(instances, instances_path)
    retrieval_path = out / "retrieval.jsonl"
    with open(retrieval_path, "w", encoding="utf-8") as fh:
        for qid in sorted(retrievals):
            res = retrievals[qid]
            fh.write(json.dumps({
                "query_id": qid,
                "r_q": res.r_q,
                "ranked": [[cid, score] for cid, score in res.ranked],
            }) + "\n")
    write_manifest(
        out, "retrieve", cfg.snapshot(),
        inputs={
            "corpus": cfg.corpus, "edges": cfg.edges,
            "samples_test": out / "samples_test.jsonl", "vectors": out / "vectors.hlmv",
        },
        outputs={"instances": instances_path, "retrieval": retrieval_path},
        extra={"queries": len(retrievals)},
        elapsed_seconds=time.perf_counter() - start,
    )
    return {"instances": instances_path, "retrieval": retrieval_path}


def load_retrievals(path: str | Path) -> dict[str, RetrievalResult]:
    out: dict[str, RetrievalResult] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        out[raw["query_id"]] = RetrievalResult(
            query=raw["query_id"],
            ranked=tuple((cid, float(score)) for cid, score in raw["ranked"]),
            r_q=int(raw["r_q"]),
        )
    return out


def _chat_backend(cfg: PipelineConfig, instances: Mapping[str, EvalInstance], corpus: Corpus) -> ChatBackend:
    if cfg.chat_backend == "mock-identity":
        return IdentityChatMock()
    if cfg.chat_backend == "mock-oracle":
        cores_by_title = {
            corpus[qid].title: {corpus[c].title for c in inst.candidates if inst.grades[c] == "core"}
            for qid, inst in instances.items()
        }
        return OracleChatMock(cores_by_title)
    return HttpChatBackend(
        model=cfg.chat_model or None,
        temperature=cfg.temperature,
        rate_limiter=RateLimiter(cfg.rate_limit_interval),
    )


def run_rerank(cfg: PipelineConfig) -> dict[str, Path]:
    start = time.perf_counter()
    out = cfg.out_path
    require_upstream(out, "retrieve", {
        "instances": out / "instances.jsonl", "retrieval": out / "retrieval.jsonl",
    })
    corpus, _ = load_corpus(cfg.corpus)
    instances = load_instances(out / "instances.jsonl")
    retrievals = load_retrievals(out / "retrieval.jsonl")
    inner = _chat_backend(cfg, instances, corpus)
    chat = CachingChatBackend(inner=inner, cache=ResponseCache(cfg.cache_path))

    oneshot_root = Path(cfg.oneshot_dir) if cfg.oneshot_dir else default_oneshot_root()

    def oneshot_for(record) -> OneShotExample | None:
        if cfg.no_guider:
            return None
        return select_oneshot(oneshot_root, field=record.field, few_shot=cfg.few_shot)

    queries = [corpus[qid] for qid in sorted(retrievals)]
    results = rerank_many(
        chat, oneshot_for, queries, retrievals, cfg.t1, corpus,
        workers=cfg.workers, no_analyzer=cfg.no_analyzer, no_guider=cfg.no_guider,
    )

    selection_path = out / "selection.jsonl"
    transcripts_path = out / "transcripts.jsonl"
    degraded = 0
    prompt_tokens = completion_tokens = 0
    with open(selection_path, "w", encoding="utf-8") as sel_fh, \
            open(transcripts_path, "w", encoding="utf-8") as tr_fh:
        for qid in sorted(results):
            selection, transcript = results[qid]
            degraded += int(selection.degraded)
            prompt_tokens += transcript.prompt_tokens
            completion_tokens += transcript.completion_tokens
            sel_fh.write(json.dumps({
                "query_id": qid,
                "selected": list(selection.selected),
                "provenance": list(selection.provenance),
                "degraded": selection.degraded,
            }) + "\n")
            tr_fh.write(json.dumps({
                "query_id": qid,
                "parse_status": transcript.parse_status,
                "permutation": list(transcript.permutation),
                "analyzer_split_ok": transcript.analyzer_split_ok,
                "degraded": transcript.degraded,
                "failure": transcript.failure,
                "prompt_tokens": transcript.prompt_tokens,
                "completion_tokens": transcript.completion_tokens,
                "total_tokens": transcript.total_tokens,
                "calls": [{
                    "role": call.role,
                    "messages": list(call.messages),
                    "output": call.output,
                    "prompt_tokens": call.prompt_tokens,
                    "completion_tokens": call.completion_tokens,
                    "usage_estimated": call.usage_estimated,
                } for call in transcript.calls],
            }, ensure_ascii=False) + "\n")
    write_manifest(
        out, "rerank", cfg.snapshot(),
        inputs={
            "corpus": cfg.corpus,
            "instances": out / "instances.jsonl", "retrieval": out / "retrieval.jsonl",
        },
        outputs={"selection": selection_path, "transcripts": transcripts_path},
        extra={
            "model": chat.model_name,
            "backend_calls": chat.calls_issued,
            "cache_hits": chat.cache_hits,
            "degraded": degraded,
            "prompt_tokens": prompt_tokens,
            "completion_tokens": completion_tokens,
            "total_tokens": prompt_tokens + completion_tokens,
        },
        elapsed_seconds=time.perf_counter() - start,
    )
    if degraded:
        raise BackendExhausted(
            f"{degraded} quer{'y' if degraded == 1 else 'ies'} degraded to retrieval order; "
            f"partial results written to {selection_path}"
        )
    return {"selection": selection_path, "transcripts": transcripts_path}


def load_selections(path: str | Path) -> dict[str, FinalSelection]:
    out: dict[str, FinalSelection] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        out[raw["query_id"]] = FinalSelection(
            query=raw["query_id"],
            selected=tuple(raw["selected"]),
            provenance=tuple(raw["provenance"]),
            degraded=bool(raw.get("degraded", False)),
        )
    return out


def _load_external_scores(path: str | Path) -> dict[str, dict[str, float]]:
    scores: dict[str, dict[str, float]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        scores[raw["query_id"]] = {str(k): float(v) for k, v in raw["scores"].items()}
    return scores


def run_eval(cfg: PipelineConfig) -> dict[str, Path]:
    start = time.perf_counter()
    out = cfg.out_path
    require_upstream(out, "retrieve", {
        "instances": out / "instances.jsonl", "retrieval": out / "retrieval.jsonl",
    })
    require_upstream(out, "rerank", {"selection": out / "selection.jsonl"})
    corpus, _ = load_corpus(cfg.corpus)
    instances = load_instances(out / "instances.jsonl")
    retrievals = load_retrievals(out / "retrieval.jsonl")
    selections = load_selections(out / "selection.jsonl")
    external = _load_external_scores(cfg.external_scores) if cfg.external_scores else None
    gains = M.GRADED_GAINS if cfg.graded_gains else M.BINARY_GAINS

    ks = [k for k in (3, 5) if k <= cfg.t1]
    metrics_path = out / "metrics.jsonl"
    with open(metrics_path, "w", encoding="utf-8") as fh:
        for qid in sorted(instances):
            inst = instances[qid]
            systems = {
                "retrieval": M.retrieval_ranking(inst, retrievals[qid], gains),
                "reranked": M.selection_ranking(inst, selections[qid].selected, gains),
                "keyword-overlap": M.keyword_overlap_rank(corpus[qid], inst, corpus, gains),
            }
            if external is not None and qid in external:
                systems["external"] = M.ranking_from_scores(inst, external[qid], gains)
            for system, ranking in sorted(systems.items()):
                row = {"query_id": qid, "field": corpus[qid].field, "system": system}
                for k in ks:
                    row[f"prec@{k}"] = M.precision_at_k(ranking, k)
                    row[f"ndcg@{k}"] = M.ndcg_at_k(ranking, k)
                fh.write(json.dumps(row) + "\n")
    inputs = {
        "corpus": cfg.corpus,
        "instances": out / "instances.jsonl",
        "retrieval": out / "retrieval.jsonl",
        "selection": out / "selection.jsonl",
    }
    if cfg.external_scores:
        inputs["external_scores"] = cfg.external_scores
    write_manifest(
        out, "eval", cfg.snapshot(),
        inputs=inputs,
        outputs={"metrics": metrics_path},
        extra={"ks": ks, "gains": "graded" if cfg.graded_gains else "binary"},
        elapsed_seconds=time.perf_counter() - start,
    )
    return {"metrics": metrics_path}


def run_report(cfg: PipelineConfig) -> dict[str, Path]:
    start = time.perf_counter()
    out = cfg.out_path
    require_upstream(out, "eval", {"metrics": out / "metrics.jsonl"})
    rows = [
        json.loads(line)
        for line in (out / "metrics.jsonl").read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    systems = sorted({r["system"] for r in rows})
    metric_names = sorted(k for k in rows[0] if k not in ("query_id", "field", "system"))

    report: dict = {"systems": {}, "pairwise_pvalues": {}}
    for system in systems:
        sys_rows = [r for r in rows if r["system"] == system]
        fields = [r["field"] for r in sys_rows]
        block: dict = {"n": len(sys_rows), "overall": {}, "fields": {}}
        for name in metric_names:
            agg = aggregate(
                [r[name] for r in sys_rows], fields,
                resamples=cfg.bootstrap_resamples, seed=cfg.seed,
            )
            block["overall"][name] = {
                "mean": agg.overall.mean, "ci95": [agg.overall.ci_lo, agg.overall.ci_hi],
                "n": agg.overall.n, "degenerate": agg.overall.degenerate,
            }
            for fname, summary in agg.per_field.items():
                block["fields"].setdefault(fname, {})[name] = {
                    "mean": summary.mean, "ci95": [summary.ci_lo, summary.ci_hi],
                    "n": summary.n, "degenerate": summary.degenerate,
                }
        report["systems"][system] = block
    for name in metric_names:
        per_system = {
            system: [r[name] for r in rows if r["system"] == system] for system in systems
        }
        report["pairwise_pvalues"][name] = pairwise_pvalues(per_system)

    report_path = out / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
    csv_path = out / "report.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["system", "field", "metric", "mean", "ci_lo", "ci_hi", "n"])
        for system in systems:
            block = report["systems"][system]
            for name in metric_names:
                o = block["overall"][name]
                writer.writerow([system, "overall", name, f"{o['mean']:.6f}",
                                 f"{o['ci95'][0]:.6f}", f"{o['ci95'][1]:.6f}", o["n"]])
            for fname in sorted(block["fields"]):
                for name in metric_names:
                    s = block["fields"][fname][name]
                    writer.writerow([system, fname, name, f"{s['mean']:.6f}",
                                     f"{s['ci95'][0]:.6f}", f"{s['ci95'][1]:.6f}", s["n"]])
    write_manifest(
        out, "report", cfg.snapshot(),
        inputs={"metrics": out / "metrics.jsonl"},
        outputs={"report_json": report_path, "report_csv": csv_path},
        elapsed_seconds=time.perf_counter() - start,
    )
    return {"report_json": report_path, "report_csv": csv_path}


def run_oneshot_build(cfg: PipelineConfig, name: str = "default") -> Path:
    """Guider pass over the shipped exemplar; writes a draft for review."""
    root = Path(cfg.oneshot_dir) if cfg.oneshot_dir else None
    if root is None:
        raise ConfigError("oneshot build requires a writable paths.oneshot_dir")
    copy_bundled_assets(root)
    from .prompts import load_oneshot, save_oneshot_draft

    base = load_oneshot(default_oneshot_root() / "default")
    chat = _chat_backend(cfg, {}, Corpus([]))  # mocks need no ground truth here
    analysis, ranking = build_oneshot(chat, base.query, base.candidates, base.ground_truth_order)
    return save_oneshot_draft(
        root, name, base.query, base.candidates, analysis, ranking,
        ground_truth_order=base.ground_truth_order,
    )


def run_oneshot_list(cfg: PipelineConfig) -> list[dict]:
    root = Path(cfg.oneshot_dir) if cfg.oneshot_dir else default_oneshot_root()
    rows = []
    for asset in list_oneshot_assets(root):
        directory = root / asset.name
        rows.append({
            "name": asset.name,
            "field": asset.field or "-",
            "status": "approved" if asset.approved else "draft",
            "candidates": len(asset.candidates),
            "digest": sha256_file(directory / "example.json")[:12],
        })
    return rows
