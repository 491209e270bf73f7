"""Benchmark harness: label length, labeling time, view label size and query
time over the synthetic family, written as long-format CSV.

Timed sections run with the garbage collector paused (as ``timeit`` does)
after a warmup pass; every non-time column is a pure function of the seeds.
"""

from __future__ import annotations

import csv
import gc
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .analysis import analyze
from .decoder import decode
from .labeling import DataLabel, derive_labeled, encode_label
from .model import View, WorkflowGrammar
from .synthgen import GenParams, gen_grammar, gen_run, gen_safe_view
from .viewlabel import VARIANTS, ViewLabel, label_view

COLUMNS = ("n", "metric", "value", "variant", "seed", "rep", "factor", "level")
DEFAULT_SIZES = (1000, 2000, 4000, 8000, 16000, 32000)


@dataclass(frozen=True)
class BenchRecord:
    n: int
    metric: str
    value: float
    variant: str = ""
    seed: int = 0
    rep: int = 0
    factor: str = ""
    level: int | str = ""

    def row(self) -> list:
        return [getattr(self, c) for c in COLUMNS]


@dataclass(frozen=True)
class BenchConfig:
    sizes: tuple[int, ...] = DEFAULT_SIZES
    reps: int = 100
    variants: tuple[str, ...] = VARIANTS
    seed: int = 1
    params: GenParams = GenParams()
    query_samples: int = 100_000
    query_pairs: int = 1000
    query_runs: int = 10
    view: str = "medium"
    sweep_depths: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    sweep_degrees: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    sweep_n: int = 4000
    sweep_reps: int = 5
    threads: int = field(default_factory=lambda: threads_from_env())


def threads_from_env() -> int:
    raw = os.environ.get("PROVLABEL_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"PROVLABEL_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(n, os.cpu_count() or 1))


def run_seed(seed: int, n: int, rep: int) -> int:
    return (seed * 1_000_003 + n) * 1009 + rep


def view_size(g: WorkflowGrammar, name: str) -> int:
    """Composite count of the small / medium / large views (2, 8, 16 capped
    by the grammar; medium is at least half of it)."""
    total = len(g.composites)
    if name == "small":
        return min(2, total)
    if name == "medium":
        return 8 if total > 8 else total // 2 + 1
    if name == "large":
        return min(16, total)
    raise ValueError(f"unknown view size {name!r}")


# measurements -----------------------------------------------------------------


@dataclass
class RunMeasure:
    items: int
    max_bits: int
    avg_bits: float
    seconds: float
    labels: dict[int, DataLabel]
    run: object


def measure_run(g: WorkflowGrammar, cycles, n: int, seed: int) -> RunMeasure:
    steps = gen_run(g, cycles, n, seed).steps
    gc.collect()
    gc.disable()
    try:
        t0 = time.perf_counter()
        lr = derive_labeled(g, cycles, steps)
        seconds = time.perf_counter() - t0
    finally:
        gc.enable()
    labels = lr.labels()
    bits = [8 * len(encode_label(dl)) for dl in labels.values()]
    return RunMeasure(len(labels), max(bits), sum(bits) / len(bits), seconds, labels, lr.run)


def measure_view(g: WorkflowGrammar, cycles, view: View, variant: str) -> tuple[ViewLabel, float]:
    t0 = time.perf_counter()
    vl = label_view(g, cycles, view, variant)
    return vl, time.perf_counter() - t0


def sample_pairs(visible: Sequence[int], count: int, seed: int) -> list[tuple[int, int]]:
    rng = random.Random(seed)
    return [(rng.choice(visible), rng.choice(visible)) for _ in range(count)]


@dataclass(frozen=True)
class QueryTiming:
    mean_ns: float
    p99_ns: float
    mults_mean: float
    max_mults: int
    # mean of the fastest 99%, so a single scheduler stall cannot move it
    trimmed_ns: float


def time_queries(
    labels: dict[int, DataLabel],
    vl: ViewLabel,
    pairs: Sequence[tuple[int, int]],
    samples: int,
) -> QueryTiming:
    """Per-call wall time of ``decode`` cycling over ``pairs`` until
    ``samples`` calls were timed, after one untimed warmup pass."""
    work = [(labels[a], labels[b]) for a, b in pairs]
    mults = []
    for d1, d2 in work:
        mults.append(decode(d1, d2, vl).matrices_multiplied)
    clock = time.perf_counter_ns
    times = []
    gc.collect()
    gc.disable()
    try:
        done = 0
        while done < samples:
            for d1, d2 in work[: samples - done]:
                t0 = clock()
                decode(d1, d2, vl)
                times.append(clock() - t0)
            done = len(times)
    finally:
        gc.enable()
    times.sort()
    kept = times[: max(1, int(0.99 * len(times)))]
    return QueryTiming(
        sum(times) / len(times),
        times[min(len(times) - 1, int(0.99 * len(times)))],
        sum(mults) / len(mults),
        max(mults),
        sum(kept) / len(kept),
    )


# driver -------------------------------------------------------------------------


def _size_point(cfg: BenchConfig, n: int, rep: int) -> list[BenchRecord]:
    g, deps = gen_grammar(cfg.params)
    an = analyze(g, deps)
    seed = run_seed(cfg.seed, n, rep)
    m = measure_run(g, an.cycles, n, seed)
    out = [
        BenchRecord(m.items, "max_label_bits", m.max_bits, "", seed, rep),
        BenchRecord(m.items, "avg_label_bits", m.avg_bits, "", seed, rep),
        BenchRecord(m.items, "total_label_time", m.seconds, "", seed, rep),
    ]
    if rep < cfg.query_runs:
        # the samples of one size are spread over several runs so the mean
        # does not hinge on what a single run exposes to the view
        view = gen_safe_view(g, deps, view_size(g, cfg.view), True, cfg.seed)
        visible = sorted(m.run.project(view).items)
        pairs = sample_pairs(visible, cfg.query_pairs, seed)
        samples = -(-cfg.query_samples // min(cfg.query_runs, cfg.reps))
        for variant in cfg.variants:
            vl, _ = measure_view(g, an.cycles, view, variant)
            qt = time_queries(m.labels, vl, pairs, samples)
            out.append(BenchRecord(m.items, "query_ns_mean", qt.mean_ns, variant, seed, rep))
            out.append(BenchRecord(m.items, "query_ns_p99", qt.p99_ns, variant, seed, rep))
            out.append(BenchRecord(m.items, "query_ns_trimmed", qt.trimmed_ns, variant, seed, rep))
            out.append(BenchRecord(m.items, "matrices_multiplied_mean", qt.mults_mean, variant, seed, rep))
    return out


def _view_points(cfg: BenchConfig) -> list[BenchRecord]:
    g, deps = gen_grammar(cfg.params)
    an = analyze(g, deps)
    out = []
    for name in ("small", "medium", "large"):
        size = view_size(g, name)
        view = gen_safe_view(g, deps, size, True, cfg.seed)
        for variant in cfg.variants:
            vl, seconds = measure_view(g, an.cycles, view, variant)
            out.append(BenchRecord(size, "view_label_bytes", vl.byte_size(), variant, cfg.seed, 0, "view", name))
            out.append(BenchRecord(size, "view_label_time", seconds, variant, cfg.seed, 0, "view", name))
    return out


def _sweep_point(cfg: BenchConfig, factor: str, level: int) -> list[BenchRecord]:
    """Mean label length over ``sweep_reps`` runs of one factor setting."""
    params = replace(cfg.params, **{factor: level})
    g, deps = gen_grammar(params)
    an = analyze(g, deps)
    runs = [measure_run(g, an.cycles, cfg.sweep_n, run_seed(cfg.seed, cfg.sweep_n, rep)) for rep in range(cfg.sweep_reps)]
    items = sum(m.items for m in runs) // len(runs)
    return [
        BenchRecord(items, "avg_label_bits", sum(m.avg_bits for m in runs) / len(runs), "", cfg.seed, 0, factor, level),
        BenchRecord(items, "max_label_bits", max(m.max_bits for m in runs), "", cfg.seed, 0, factor, level),
    ]


def _call(job):
    fn, args = job
    return fn(*args)


def run_bench(cfg: BenchConfig) -> dict[str, list[BenchRecord]]:
    jobs = {
        "sizes": [(_size_point, (cfg, n, rep)) for n in cfg.sizes for rep in range(cfg.reps)],
        "views": [(_view_points, (cfg,))],
        "sweep": [(_sweep_point, (cfg, "nesting_depth", d)) for d in cfg.sweep_depths]
        + [(_sweep_point, (cfg, "module_degree", d)) for d in cfg.sweep_degrees],
    }
    results: dict[str, list[BenchRecord]] = {}
    for key, batch in jobs.items():
        if cfg.threads > 1:
            with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
                chunks = list(pool.map(_call, batch))
        else:
            chunks = [_call(job) for job in batch]
        results[key] = [r for chunk in chunks for r in chunk]
    return split_tables(results)


def split_tables(results: dict[str, list[BenchRecord]]) -> dict[str, list[BenchRecord]]:
    sizes = results.get("sizes", [])
    pick = lambda recs, names: [r for r in recs if r.metric in names]  # noqa: E731
    return {
        "label_length.csv": pick(sizes, {"max_label_bits", "avg_label_bits"}),
        "label_time.csv": pick(sizes, {"total_label_time"}),
        "view_label_size.csv": results.get("views", []),
        "query_time.csv": pick(sizes, {"query_ns_mean", "query_ns_p99", "query_ns_trimmed", "matrices_multiplied_mean"}),
        "factor_sweep.csv": results.get("sweep", []),
    }


def write_csv(path: str | Path, records: Iterable[BenchRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in records:
            w.writerow(r.row())


def write_tables(out_dir: str | Path, tables: dict[str, list[BenchRecord]]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, recs in tables.items():
        write_csv(out / name, recs)
        written.append(out / name)
    return written
