"""Command line entry points.

Exit codes: 0 on success, 1 on usage errors, 2 on bad input data or files.
Every artifact gets the effective configuration echoed next to it, either
embedded (JSON outputs) or as a `<name>.meta.json` sidecar, so a result can
always be traced back to the settings that produced it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .bench import bench_search
from .config import load_config, resolve
from .core import (
    DataFormatError,
    IdfTable,
    SparseVector,
    Vocabulary,
    binarize_query,
    compute_idf,
    derive_vocabulary,
    iter_raw_vectors,
    read_idf,
    read_token_docs,
    write_idf,
    write_vectors,
)
from .distill.encoder import EncoderParams, encode_batch, load_encoder, save_encoder
from .distill.losses import LossConfig
from .distill.mining import consistency_filter, mine_hard_negatives, read_mined, write_mined
from .distill.training import (
    TokenCorpus,
    TrainSchedule,
    corpus_activation_summary,
    read_pairs,
    read_teacher_scores,
    train,
    write_pairs,
    write_training_log,
)
from .evaluation import (
    expansion_rate,
    mrr_at_k,
    ndcg_at_k,
    read_qrels,
    read_run,
    recall_at_k,
    write_run,
)
from .index import InvertedIndex, build_index, load_index, save_index
from .retrieval import SearchParams, SearchStats, TwoPhaseParams, search, search_two_phase
from .scoring import ScoreMode
from .toydata import generate_toy_fixture

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _write_json(path: str | Path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sidecar(out_path: str | Path, command: str, effective: Mapping[str, Any]) -> None:
    _write_json(f"{out_path}.meta.json", {"command": command, "config": dict(effective)})


def _config_from(args: argparse.Namespace) -> dict[str, Any]:
    if getattr(args, "config", None):
        return load_config(args.config)
    return {}


def _parse_mode(name: str) -> ScoreMode:
    try:
        return ScoreMode.parse(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_corpus_tokens(path: str) -> TokenCorpus:
    return TokenCorpus.from_token_docs(read_token_docs(path))


def _queries_from_file(path: str, vocabulary: Vocabulary) -> list[tuple[str, SparseVector]]:
    out = []
    total_dropped = 0
    for query_id, tokens in read_token_docs(path):
        vector, dropped = binarize_query(tokens, vocabulary)
        total_dropped += dropped
        out.append((query_id, vector))
    if total_dropped:
        logger.info("dropped %d out-of-vocabulary query tokens", total_dropped)
    return out


def _idf_for_index(args: argparse.Namespace, index: InvertedIndex) -> IdfTable:
    if getattr(args, "idf", None):
        return read_idf(args.idf, index.vocabulary)
    logger.info("no --idf given, deriving table from the index itself")
    return index.idf()


# --- subcommands -----------------------------------------------------------


def _cmd_idf(args: argparse.Namespace) -> int:
    if (args.docs is None) == (args.vectors is None):
        raise UsageError("exactly one of --docs or --vectors is required")
    if args.docs:
        docs = read_token_docs(args.docs)
        vocabulary = Vocabulary(tuple(sorted({t for _, tokens in docs for t in tokens})))
        corpus = [[vocabulary.id_of(t) for t in tokens] for _, tokens in docs]
        source_path = args.docs
    else:
        raw = list(iter_raw_vectors(args.vectors))
        vocabulary = derive_vocabulary(raw)
        corpus = [
            [vocabulary.id_of(t) for t, w in vec.items() if w > 0] for _, vec in raw
        ]
        source_path = args.vectors
    source = args.source if args.source is not None else Path(source_path).name
    table = compute_idf(corpus, source=source)
    write_idf(args.out, table, vocabulary)
    effective = {"input": source_path, "source": source, "out": args.out}
    _sidecar(args.out, "idf", effective)
    print(f"wrote idf table for {len(table.values)} tokens to {args.out}")
    return 0


def _cmd_index(args: argparse.Namespace) -> int:
    raw = list(iter_raw_vectors(args.vectors))
    vocabulary = derive_vocabulary(raw)
    index = build_index(raw, vocabulary)
    save_index(index, args.out)
    effective = {"vectors": args.vectors, "out": args.out}
    _sidecar(args.out, "index", effective)
    for line in index.diagnostics:
        print(line, file=sys.stderr)
    if args.stats:
        print(json.dumps(index.stats(), indent=2, sort_keys=True))
    else:
        print(f"indexed {index.corpus_size} documents into {args.out}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    index = load_index(args.index)
    print(json.dumps(index.stats(), indent=2, sort_keys=True))
    return 0


def _search_params(args: argparse.Namespace, cfg: dict, section: str) -> SearchParams:
    k = int(resolve(args.k, cfg, section, "k", 10))
    mode = _parse_mode(str(resolve(args.mode, cfg, section, "mode", "idf_weighted")))
    two_phase = bool(resolve(args.two_phase, cfg, section, "two_phase", False))
    params_kwargs: dict[str, Any] = {"k": k, "mode": mode}
    if two_phase:
        window = resolve(args.window, cfg, section, "window", None)
        if window is None:
            raise UsageError("two-phase search needs --window")
        threshold = resolve(args.idf_threshold, cfg, section, "idf_threshold", None)
        params_kwargs["two_phase"] = TwoPhaseParams(
            window=int(window),
            idf_threshold=None if threshold is None else float(threshold),
        )
    try:
        return SearchParams(**params_kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _cmd_search(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    index = load_index(args.index)
    params = _search_params(args, cfg, "search")
    idf = _idf_for_index(args, index)
    queries = _queries_from_file(args.queries, index.vocabulary)
    tag = str(resolve(args.tag, cfg, "search", "tag", "tinysparse"))

    stats = SearchStats()
    run: dict[str, list] = {}
    for query_id, vector in queries:
        if params.two_phase is not None:
            run[query_id] = search_two_phase(index, vector, params, idf, stats)
        else:
            run[query_id] = search(index, vector, params, idf)
    write_run(args.out, run, tag)

    effective = {
        "index": args.index,
        "queries": args.queries,
        "idf": args.idf,
        "k": params.k,
        "mode": params.mode.value,
        "two_phase": params.two_phase is not None,
        "window": params.two_phase.window if params.two_phase else None,
        "idf_threshold": params.two_phase.idf_threshold if params.two_phase else None,
        "tag": tag,
    }
    _sidecar(args.out, "search", effective)
    if stats.two_phase_fallbacks:
        print(
            f"warning: {stats.two_phase_fallbacks}/{stats.queries} queries fell back "
            f"to exact search",
            file=sys.stderr,
        )
    print(f"wrote run for {len(run)} queries to {args.out}")
    return 0


def _loss_config(args: argparse.Namespace, cfg: dict, section: str) -> LossConfig:
    preset = str(resolve(args.preset, cfg, section, "preset", "pretrain"))
    if preset == "pretrain":
        base = LossConfig.pretrain()
    elif preset == "finetune":
        base = LossConfig.finetune()
    else:
        raise UsageError(f"unknown preset {preset!r}; expected pretrain or finetune")
    lambda_d = float(resolve(args.lambda_d, cfg, section, "lambda_d", base.lambda_d))
    scale_s = float(resolve(args.scale_s, cfg, section, "scale_s", base.scale_s))
    idf_aware = bool(resolve(args.idf_aware, cfg, section, "idf_aware", base.idf_aware))
    ensemble = str(resolve(args.ensemble, cfg, section, "ensemble", "norm"))
    if ensemble not in ("norm", "add"):
        raise UsageError("--ensemble must be norm or add")
    try:
        return LossConfig(
            lambda_d=lambda_d,
            scale_s=scale_s,
            idf_aware=idf_aware,
            normalize_teachers=(ensemble == "norm"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _schedule(args: argparse.Namespace, cfg: dict, section: str) -> TrainSchedule:
    try:
        return TrainSchedule(
            steps=int(resolve(args.steps, cfg, section, "steps", 100)),
            batch_size=int(resolve(args.batch_size, cfg, section, "batch_size", 8)),
            negatives_per_query=int(
                resolve(args.negatives, cfg, section, "negatives_per_query", 7)
            ),
            learning_rate=float(
                resolve(args.learning_rate, cfg, section, "learning_rate", 0.1)
            ),
            seed=int(resolve(args.seed, cfg, section, "seed", 0)),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    corpus = _load_corpus_tokens(args.docs)
    pairs = read_pairs(args.pairs)
    loss_config = _loss_config(args, cfg, "train")
    schedule = _schedule(args, cfg, "train")
    idf = read_idf(args.idf, corpus.vocabulary) if args.idf else None
    teacher_table = read_teacher_scores(args.teacher_scores) if args.teacher_scores else None

    params, log_rows = train(corpus, pairs, loss_config, schedule, idf, teacher_table)
    save_encoder(params, corpus.vocabulary, args.out)
    log_path = args.log if args.log else f"{args.out}.log.csv"
    write_training_log(log_path, log_rows)

    effective = {
        "docs": args.docs,
        "pairs": args.pairs,
        "teacher_scores": args.teacher_scores,
        "idf": args.idf,
        "lambda_d": loss_config.lambda_d,
        "scale_s": loss_config.scale_s,
        "idf_aware": loss_config.idf_aware,
        "ensemble": "norm" if loss_config.normalize_teachers else "add",
        "steps": schedule.steps,
        "batch_size": schedule.batch_size,
        "negatives_per_query": schedule.negatives_per_query,
        "learning_rate": schedule.learning_rate,
        "seed": schedule.seed,
        "out": args.out,
        "log": log_path,
    }
    _sidecar(args.out, "train", effective)
    _sidecar(log_path, "train", effective)
    if args.figure:
        from .report import render_training_figure

        render_training_figure(log_rows, args.figure)
    mean_nnz, flops = corpus_activation_summary(params, corpus)
    if log_rows:
        print(
            f"trained {schedule.steps} steps: loss {log_rows[-1].loss_total:.6f}, "
            f"corpus mean nnz {mean_nnz:.2f}, density penalty {flops:.6f}"
        )
    else:
        print(f"no steps requested; wrote initial parameters (mean nnz {mean_nnz:.2f})")
    print(f"wrote encoder to {args.out}, log to {log_path}")
    return 0


def _cmd_encode(args: argparse.Namespace) -> int:
    corpus = _load_corpus_tokens(args.docs)
    params = load_encoder(args.encoder, corpus.vocabulary)
    w = encode_batch(params, corpus.counts)
    docs = []
    for i, doc_id in enumerate(corpus.doc_ids):
        nz = np.nonzero(w[i] > 0.0)[0]
        docs.append(
            (doc_id, SparseVector(tuple((int(j), float(w[i, j])) for j in nz)))
        )
    write_vectors(args.out, docs, corpus.vocabulary)
    _sidecar(args.out, "encode", {"docs": args.docs, "encoder": args.encoder, "out": args.out})
    print(f"encoded {len(docs)} documents to {args.out}")
    return 0


def _cmd_mine(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    index = load_index(args.index)
    pairs = read_pairs(args.pairs)
    m = int(resolve(args.m, cfg, "mine", "m", 8))
    mode = _parse_mode(str(resolve(args.mode, cfg, "mine", "mode", "idf_weighted")))
    idf = _idf_for_index(args, index) if mode is ScoreMode.IDF_WEIGHTED else None
    queries = []
    positives = {}
    for pair in pairs:
        vector, _ = binarize_query(pair.query_tokens, index.vocabulary)
        queries.append((pair.query_id, vector))
        positives[pair.query_id] = pair.positive_id
    mined = mine_hard_negatives(index, queries, positives, m, mode=mode, idf=idf)
    write_mined(args.out, mined)
    retrieved = sum(1 for row in mined if row.positive_rank is not None)
    _sidecar(
        args.out,
        "mine",
        {"index": args.index, "pairs": args.pairs, "m": m, "mode": mode.value,
         "idf": args.idf, "out": args.out},
    )
    print(f"mined {len(mined)} queries ({retrieved} positives retrieved) to {args.out}")
    return 0


def _cmd_filter(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    mined = read_mined(args.mined)
    k = int(resolve(args.k, cfg, "filter", "k", 10))
    kept = consistency_filter(mined, k)
    write_mined(args.out, kept)
    _sidecar(args.out, "filter", {"mined": args.mined, "k": k, "out": args.out})
    print(f"kept {len(kept)}/{len(mined)} queries with positive rank <= {k}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    run = read_run(args.run)
    qrels = read_qrels(args.qrels)
    k = int(resolve(args.k, cfg, "eval", "k", 10))
    metrics = {
        f"ndcg@{k}": ndcg_at_k(run, qrels, k),
        f"mrr@{k}": mrr_at_k(run, qrels, k),
        f"recall@{k}": recall_at_k(run, qrels, k),
    }
    if args.vectors:
        vectors = []
        raw = list(iter_raw_vectors(args.vectors))
        vocabulary = derive_vocabulary(raw)
        for _, vec in raw:
            vectors.append(
                SparseVector.from_dict({vocabulary.id_of(t): w for t, w in vec.items()})
            )
        metrics["expansion_rate"] = expansion_rate(vectors)
    effective = {"run": args.run, "qrels": args.qrels, "k": k, "vectors": args.vectors}
    from .report import format_table

    table = format_table(
        ["metric", "value"], [[name, value] for name, value in metrics.items()]
    )
    print(table, end="")
    if args.out:
        _write_json(args.out, {"command": "eval", "config": effective, "metrics": metrics})
        print(f"wrote metrics to {args.out}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    index = load_index(args.index)
    params = _search_params(args, cfg, "bench")
    idf = _idf_for_index(args, index)
    queries = _queries_from_file(args.queries, index.vocabulary)
    levels_raw = resolve(args.levels, cfg, "bench", "levels", "1,2,4")
    if isinstance(levels_raw, str):
        levels = tuple(int(x) for x in levels_raw.split(",") if x.strip())
    else:
        levels = tuple(int(x) for x in levels_raw)
    repetitions = int(resolve(args.repetitions, cfg, "bench", "repetitions", 200))
    seed = int(resolve(args.seed, cfg, "bench", "seed", 0))

    rows = bench_search(
        index, queries, params, idf,
        concurrency_levels=levels, repetitions=repetitions, seed=seed,
    )
    effective = {
        "index": args.index,
        "queries": args.queries,
        "idf": args.idf,
        "k": params.k,
        "mode": params.mode.value,
        "two_phase": params.two_phase is not None,
        "levels": list(levels),
        "repetitions": repetitions,
        "seed": seed,
    }
    from .report import format_table

    print(
        format_table(
            ["concurrency", "queries", "p50_ms", "p99_ms", "mean_ms", "qps"],
            [
                [r.concurrency, r.queries, r.p50_ms, r.p99_ms, r.mean_ms, r.throughput_qps]
                for r in rows
            ],
        ),
        end="",
    )
    if args.out:
        _write_json(
            args.out,
            {"command": "bench", "config": effective, "rows": [r.to_dict() for r in rows]},
        )
        print(f"wrote bench rows to {args.out}")
    if args.figure:
        from .report import render_bench_figure

        render_bench_figure(rows, args.figure)
        print(f"wrote figure to {args.figure}")
    return 0


def _sweep_rows(
    corpus: TokenCorpus,
    pairs,
    lambdas: Sequence[float],
    schedule: TrainSchedule,
    scale_s: float,
    k: int,
) -> list[dict[str, Any]]:
    """Train across the penalty grid for both trainer variants and score each run."""
    from .evaluation import ndcg_at_k as _ndcg

    qrels = {p.query_id: {p.positive_id: 1} for p in pairs}
    idf = corpus.idf()
    rows = []
    for idf_aware in (True, False):
        for lambda_d in lambdas:
            loss_config = LossConfig(
                lambda_d=lambda_d, scale_s=scale_s, idf_aware=idf_aware
            )
            params, log_rows = train(corpus, pairs, loss_config, schedule, idf)
            mean_nnz, flops = corpus_activation_summary(params, corpus)

            w = encode_batch(params, corpus.counts)
            docs = []
            for i, doc_id in enumerate(corpus.doc_ids):
                nz = np.nonzero(w[i] > 0.0)[0]
                docs.append((doc_id, SparseVector(tuple((int(j), float(w[i, j])) for j in nz))))
            index = build_index(docs, corpus.vocabulary)
            run = {}
            for pair in pairs:
                vector, _ = binarize_query(pair.query_tokens, corpus.vocabulary)
                run[pair.query_id] = search(
                    index, vector, SearchParams(k=k, mode=ScoreMode.IDF_WEIGHTED), idf
                )
            rows.append(
                {
                    "lambda_d": lambda_d,
                    "idf_aware": idf_aware,
                    "mean_nnz": mean_nnz,
                    "flops_value": flops,
                    "final_loss": log_rows[-1].loss_total if log_rows else None,
                    "ndcg": _ndcg(run, qrels, k),
                }
            )
    return rows


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    corpus = _load_corpus_tokens(args.docs)
    pairs = read_pairs(args.pairs)
    lambdas_raw = resolve(args.lambdas, cfg, "sweep", "lambdas", "0,1e-4,1e-2,1e-1")
    if isinstance(lambdas_raw, str):
        lambdas = tuple(float(x) for x in lambdas_raw.split(",") if x.strip())
    else:
        lambdas = tuple(float(x) for x in lambdas_raw)
    schedule = _schedule(args, cfg, "sweep")
    scale_s = float(resolve(args.scale_s, cfg, "sweep", "scale_s", 10.0))
    k = int(resolve(args.k, cfg, "sweep", "k", 10))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = _sweep_rows(corpus, pairs, lambdas, schedule, scale_s, k)

    csv_path = out_dir / "sweep.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("lambda_d,idf_aware,mean_nnz,flops_value,final_loss,ndcg\n")
        for r in rows:
            fh.write(
                f"{r['lambda_d']!r},{r['idf_aware']},{r['mean_nnz']!r},"
                f"{r['flops_value']!r},{r['final_loss']!r},{r['ndcg']!r}\n"
            )
    effective = {
        "docs": args.docs,
        "pairs": args.pairs,
        "lambdas": list(lambdas),
        "steps": schedule.steps,
        "batch_size": schedule.batch_size,
        "negatives_per_query": schedule.negatives_per_query,
        "learning_rate": schedule.learning_rate,
        "seed": schedule.seed,
        "scale_s": scale_s,
        "k": k,
    }
    _write_json(out_dir / "sweep.json", {"command": "sweep", "config": effective, "rows": rows})
    _sidecar(csv_path, "sweep", effective)

    from .report import format_table, render_sweep_figure

    render_sweep_figure(rows, out_dir / "sweep.png")
    print(
        format_table(
            ["lambda_d", "idf_aware", "mean_nnz", "flops", "ndcg"],
            [
                [r["lambda_d"], r["idf_aware"], r["mean_nnz"], r["flops_value"], r["ndcg"]]
                for r in rows
            ],
        ),
        end="",
    )
    print(f"wrote sweep outputs to {out_dir}")
    return 0


def _cmd_demo(args: argparse.Namespace) -> int:
    """End-to-end walkthrough on a generated toy corpus."""
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    fixture = generate_toy_fixture(seed=seed)

    docs_path = out_dir / "docs.jsonl"
    with open(docs_path, "w", encoding="utf-8") as fh:
        for doc_id, tokens in fixture.docs:
            fh.write(json.dumps({"id": doc_id, "tokens": list(tokens)}) + "\n")
    pairs_path = out_dir / "pairs.jsonl"
    write_pairs(pairs_path, fixture.pairs)
    queries_path = out_dir / "queries.jsonl"
    with open(queries_path, "w", encoding="utf-8") as fh:
        for pair in fixture.pairs:
            fh.write(
                json.dumps({"id": pair.query_id, "tokens": list(pair.query_tokens)}) + "\n"
            )
    qrels_path = out_dir / "qrels.txt"
    with open(qrels_path, "w", encoding="utf-8") as fh:
        for pair in fixture.pairs:
            fh.write(f"{pair.query_id} 0 {pair.positive_id} 1\n")

    corpus = TokenCorpus.from_token_docs(list(fixture.docs))
    idf = corpus.idf(source="demo-corpus")
    write_idf(out_dir / "idf.json", idf, corpus.vocabulary)
    flat = IdfTable(values={}, default=1.0, source="flat")
    write_idf(out_dir / "idf_flat.json", flat, corpus.vocabulary)

    schedule = TrainSchedule(steps=int(args.steps), seed=seed)
    qrels = fixture.qrels()
    variants = {
        "idf_aware": LossConfig(1e-2, 10.0, idf_aware=True),
        "uniform": LossConfig(1e-2, 10.0, idf_aware=False),
        "ensemble_add": LossConfig(1e-2, 10.0, idf_aware=True, normalize_teachers=False),
    }
    summary_rows = []
    for name, loss_config in variants.items():
        params, log_rows = train(corpus, fixture.pairs, loss_config, schedule, idf)
        save_encoder(params, corpus.vocabulary, out_dir / f"encoder_{name}.bin")
        write_training_log(out_dir / f"train_{name}.csv", log_rows)
        w = encode_batch(params, corpus.counts)
        docs = []
        for i, doc_id in enumerate(corpus.doc_ids):
            nz = np.nonzero(w[i] > 0.0)[0]
            docs.append((doc_id, SparseVector(tuple((int(j), float(w[i, j])) for j in nz))))
        index = build_index(docs, corpus.vocabulary)
        save_index(index, out_dir / f"index_{name}.bin")

        for idf_name, table in (("corpus-idf", idf), ("flat-idf", flat)):
            run = {}
            for pair in fixture.pairs:
                vector, _ = binarize_query(pair.query_tokens, corpus.vocabulary)
                run[pair.query_id] = search(
                    index, vector, SearchParams(k=10, mode=ScoreMode.IDF_WEIGHTED), table
                )
            write_run(out_dir / f"run_{name}_{idf_name}.txt", run, f"{name}-{idf_name}")
            mean_nnz, flops = corpus_activation_summary(params, corpus)
            summary_rows.append(
                [name, idf_name, ndcg_at_k(run, qrels, 10), mrr_at_k(run, qrels, 10),
                 mean_nnz]
            )

        # Two-phase versus exact, on the trained idf-aware index only.
        if name == "idf_aware":
            stats = SearchStats()
            two_phase = {}
            for pair in fixture.pairs:
                vector, _ = binarize_query(pair.query_tokens, corpus.vocabulary)
                two_phase[pair.query_id] = search_two_phase(
                    index,
                    vector,
                    SearchParams(
                        k=10, mode=ScoreMode.IDF_WEIGHTED, two_phase=TwoPhaseParams(window=20)
                    ),
                    idf,
                    stats,
                )
            write_run(out_dir / "run_two_phase.txt", two_phase, "two-phase")
            summary_rows.append(
                ["two_phase", "corpus-idf", ndcg_at_k(two_phase, qrels, 10),
                 mrr_at_k(two_phase, qrels, 10), float("nan")]
            )

    from .report import format_table, render_sweep_figure

    sweep_rows = _sweep_rows(
        corpus,
        fixture.pairs,
        (0.0, 1e-4, 1e-2, 1e-1),
        TrainSchedule(steps=int(args.steps), seed=seed),
        10.0,
        10,
    )
    render_sweep_figure(sweep_rows, out_dir / "sweep.png")
    _write_json(out_dir / "sweep.json", {"command": "demo", "rows": sweep_rows})

    table = format_table(
        ["trainer", "idf source", "ndcg@10", "mrr@10", "mean nnz"], summary_rows
    )
    print(table, end="")
    with open(out_dir / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write(table)
    print(f"demo artifacts in {out_dir}")
    return 0


# --- parser ----------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="tinysparse", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tinysparse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="TOML config file; flags override its values")
        return p

    p = add("idf", _cmd_idf, "Compute an IDF table from a corpus")
    p.add_argument(
        "--docs", "--corpus", dest="docs",
        help="token documents, JSON lines with id and tokens/text",
    )
    p.add_argument("--vectors", help="sparse vectors, JSON lines with id and vector")
    p.add_argument("--out", required=True)
    p.add_argument("--source", help="label recorded in the table (default: input name)")

    p = add("index", _cmd_index, "Build an inverted index from sparse vectors")
    p.add_argument("--vectors", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", action="store_true", help="print index statistics JSON")

    p = add("stats", _cmd_stats, "Print statistics for an existing index")
    p.add_argument("--index", required=True)

    def search_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--index", required=True)
        p.add_argument("--queries", required=True, help="JSON lines with id and tokens")
        p.add_argument("--idf", help="IDF table JSON (default: derived from the index)")
        p.add_argument("--k", type=int)
        p.add_argument("--mode", choices=[m.value for m in ScoreMode])
        p.add_argument("--two-phase", action=argparse.BooleanOptionalAction, dest="two_phase")
        p.add_argument("--window", type=int, help="phase-1 candidate count")
        p.add_argument("--idf-threshold", type=float, dest="idf_threshold")

    p = add("search", _cmd_search, "Run queries against an index, emit a TREC run file")
    search_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--tag", help="run tag for the TREC lines")

    p = add("train", _cmd_train, "Distill an encoder from query/positive pairs")
    p.add_argument("--docs", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--teacher-scores", dest="teacher_scores",
                   help="fixed per-query teacher scores JSON lines")
    p.add_argument("--idf", help="IDF table JSON (default: derived from --docs)")
    p.add_argument("--preset", choices=["pretrain", "finetune"])
    p.add_argument("--lambda-d", type=float, dest="lambda_d")
    p.add_argument("--scale-s", type=float, dest="scale_s")
    p.add_argument("--idf-aware", action=argparse.BooleanOptionalAction, dest="idf_aware")
    p.add_argument("--ensemble", choices=["norm", "add"],
                   help="normalize teacher ranges before adding, or just add")
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--negatives", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="training log CSV (default: <out>.log.csv)")
    p.add_argument("--figure", help="optional training curve PNG")

    p = add("encode", _cmd_encode, "Encode token documents with a trained encoder")
    p.add_argument("--docs", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--out", required=True)

    p = add("mine", _cmd_mine, "Mine hard negatives for training pairs")
    p.add_argument("--index", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--m", type=int, help="candidate list size (default 8)")
    p.add_argument("--mode", choices=[m.value for m in ScoreMode])
    p.add_argument("--idf")
    p.add_argument("--out", required=True)

    p = add("filter", _cmd_filter, "Keep pairs whose positive ranked in the top k")
    p.add_argument("--mined", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True)

    p = add("eval", _cmd_eval, "Score a run against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--vectors", help="also report mean active tokens of these vectors")
    p.add_argument("--out", help="metrics JSON")

    p = add("bench", _cmd_bench, "Measure search latency and throughput")
    search_flags(p)
    p.add_argument("--levels", help="comma separated concurrency levels (default 1,2,4)")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="bench rows JSON")
    p.add_argument("--figure", help="latency/throughput PNG")

    p = add("sweep", _cmd_sweep, "Train across a density-penalty grid and compare")
    p.add_argument("--docs", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--lambdas", help="comma separated penalty weights")
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--negatives", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale-s", type=float, dest="scale_s")
    p.add_argument("--k", type=int)
    p.add_argument("--out-dir", required=True, dest="out_dir")

    p = add("demo", _cmd_demo, "Generate a toy corpus and walk the whole pipeline")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, default=60)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
