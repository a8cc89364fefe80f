"""Figure and table rendering for bench, training, and sweep outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .bench import BenchRow  # noqa: E402
from .distill.training import LogRow  # noqa: E402


def _save(fig: "plt.Figure", path: str | Path) -> None:
    # Pin PNG metadata so rerunning with the same inputs gives the same bytes.
    kwargs = {}
    if str(path).endswith(".png"):
        kwargs["metadata"] = {"Software": "tinysparse"}
    fig.savefig(path, dpi=120, **kwargs)
    plt.close(fig)


def format_table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    """Fixed-width text table; floats get six significant digits."""

    def cell(value: object) -> str:
        if isinstance(value, float):
            return f"{value:.6g}"
        return str(value)

    grid = [[cell(v) for v in row] for row in rows]
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in grid)) if grid else len(headers[i])
        for i in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in grid:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(row))).rstrip())
    return "\n".join(lines) + "\n"


def render_bench_figure(rows: Sequence[BenchRow], path: str | Path) -> None:
    """Latency percentiles and throughput against concurrency."""
    levels = [r.concurrency for r in rows]
    fig, (ax_lat, ax_tp) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax_lat.plot(levels, [r.p50_ms for r in rows], marker="o", label="p50")
    ax_lat.plot(levels, [r.p99_ms for r in rows], marker="s", label="p99")
    ax_lat.set_xlabel("concurrency")
    ax_lat.set_ylabel("latency (ms)")
    ax_lat.set_xticks(levels)
    ax_lat.legend()
    ax_lat.grid(True, alpha=0.3)
    ax_tp.plot(levels, [r.throughput_qps for r in rows], marker="o", color="tab:green")
    ax_tp.set_xlabel("concurrency")
    ax_tp.set_ylabel("throughput (queries/s)")
    ax_tp.set_xticks(levels)
    ax_tp.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def render_training_figure(rows: Sequence[LogRow], path: str | Path) -> None:
    """Loss components and activation density over training steps."""
    steps = [r.step for r in rows]
    fig, (ax_loss, ax_nnz) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax_loss.plot(steps, [r.loss_total for r in rows], label="total")
    ax_loss.plot(steps, [r.loss_rank for r in rows], label="rank", linestyle="--")
    ax_loss.set_xlabel("step")
    ax_loss.set_ylabel("loss")
    ax_loss.legend()
    ax_loss.grid(True, alpha=0.3)
    ax_nnz.plot(steps, [r.mean_nnz for r in rows], color="tab:red")
    ax_nnz.set_xlabel("step")
    ax_nnz.set_ylabel("mean active tokens")
    ax_nnz.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def render_sweep_figure(
    rows: Sequence[Mapping[str, object]], path: str | Path
) -> None:
    """Density-penalty sweep: sparsity and quality, one line per trainer variant.

    Expects dicts with lambda_d, idf_aware, mean_nnz, and ndcg keys, as the
    sweep command emits.
    """
    variants = sorted({bool(r["idf_aware"]) for r in rows})
    fig, (ax_nnz, ax_ndcg) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    for idf_aware in variants:
        sub = sorted(
            (r for r in rows if bool(r["idf_aware"]) == idf_aware),
            key=lambda r: float(r["lambda_d"]),
        )
        xs = [float(r["lambda_d"]) for r in sub]
        label = "idf-aware" if idf_aware else "uniform"
        ax_nnz.plot(xs, [float(r["mean_nnz"]) for r in sub], marker="o", label=label)
        ax_ndcg.plot(xs, [float(r["ndcg"]) for r in sub], marker="o", label=label)
    for ax, ylabel in ((ax_nnz, "mean active tokens"), (ax_ndcg, "ndcg@10")):
        ax.set_xlabel("density penalty weight")
        ax.set_ylabel(ylabel)
        ax.set_xscale("symlog", linthresh=1e-7)
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    _save(fig, path)
