"""Latency and throughput measurement for the search path."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .core import IdfTable, SparseVector
from .index import InvertedIndex
from .retrieval import SearchParams, search, search_two_phase


@dataclass(frozen=True)
class BenchRow:
    concurrency: int
    queries: int
    p50_ms: float
    p99_ms: float
    mean_ms: float
    throughput_qps: float

    def to_dict(self) -> dict:
        return asdict(self)


def bench_search(
    index: InvertedIndex,
    queries: Sequence[tuple[str, SparseVector]],
    params: SearchParams,
    idf: IdfTable | None = None,
    concurrency_levels: Sequence[int] = (1, 2, 4),
    repetitions: int = 200,
    seed: int = 0,
) -> list[BenchRow]:
    """Time the search path under several thread counts.

    The workload is `repetitions` queries drawn from `queries` in an order
    fixed by the seed, identical at every concurrency level. Latencies are
    per-query wall times inside the worker; throughput divides the whole
    batch by its elapsed wall time. One untimed warmup pass runs first.
    """
    if not queries:
        raise ValueError("no queries to bench")
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    if any(level < 1 for level in concurrency_levels):
        raise ValueError("concurrency levels must be positive")

    if params.two_phase is not None:
        if idf is None:
            raise ValueError("idf table required for two-phase search")
        run_one = lambda q: search_two_phase(index, q, params, idf)  # noqa: E731
    else:
        run_one = lambda q: search(index, q, params, idf)  # noqa: E731

    rng = np.random.default_rng(seed)
    plan = [queries[i][1] for i in rng.integers(0, len(queries), size=repetitions)]

    for _, query in queries:
        run_one(query)

    rows = []
    for level in concurrency_levels:

        def timed(query: SparseVector) -> float:
            t0 = time.perf_counter()
            run_one(query)
            return time.perf_counter() - t0

        t_start = time.perf_counter()
        with ThreadPoolExecutor(max_workers=level) as pool:
            latencies = list(pool.map(timed, plan))
        elapsed = time.perf_counter() - t_start

        lat_ms = np.asarray(latencies) * 1000.0
        rows.append(
            BenchRow(
                concurrency=level,
                queries=len(plan),
                p50_ms=float(np.percentile(lat_ms, 50)),
                p99_ms=float(np.percentile(lat_ms, 99)),
                mean_ms=float(lat_ms.mean()),
                throughput_qps=len(plan) / elapsed,
            )
        )
    return rows
