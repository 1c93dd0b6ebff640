"""Single-threaded timing of self-attention against STDA.

Each grid point is timed as the median of ``reps`` runs after ``warmup``
runs on a monotonic clock, with repetitions interleaved across the grid. The CSV carries the modeled FLOP count next to the
measurement, and a trailing comment block records the log-log slope of time
against H*W for each operator.
"""

from __future__ import annotations

import csv
import io
import logging
import statistics
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from threadpoolctl import threadpool_limits

from .attention import (SelfAttentionParams, StdaParams, flops_self_attention, flops_stda,
                        self_attention, stda)

log = logging.getLogger(__name__)

CSV_VERSION = "# strip-attention-lab bench v1"
COLUMNS = ("op", "H", "W", "C", "K", "ns_median", "flops_model", "flops_per_ns")
OPS = ("self_attention", "stda")


@dataclass(frozen=True)
class BenchConfig:
    grid: tuple = ((8, 8), (16, 16), (32, 32), (64, 64))
    channels: int = 32
    k: int = 7
    reps: int = 5
    warmup: int = 1
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        grid = tuple(tuple(int(n) for n in hw) for hw in self.grid)
        object.__setattr__(self, "grid", grid)
        if not grid or any(len(hw) != 2 or min(hw) < 1 for hw in grid):
            raise ValueError(f"grid must be non-empty (H, W) pairs of positive sizes: {grid}")
        if self.channels < 1 or self.k < 1:
            raise ValueError("channels and k must be positive")
        if self.k % 2 == 0:
            raise ValueError(f"k must be odd, got {self.k}")
        if self.reps < 3:
            raise ValueError(f"need at least 3 repetitions, got {self.reps}")
        if self.warmup < 1:
            raise ValueError(f"need at least 1 warmup run, got {self.warmup}")


@dataclass(frozen=True)
class BenchRecord:
    op: str
    h: int
    w: int
    c: int
    k: int
    ns_median: float
    flops_model: int

    @property
    def flops_per_ns(self) -> float:
        return self.flops_model / self.ns_median

    def row(self) -> list:
        return [self.op, self.h, self.w, self.c, self.k, f"{self.ns_median:.0f}",
                self.flops_model, f"{self.flops_per_ns:.6g}"]


def parse_grid(text: str) -> tuple:
    """``"8,16,32"`` (square sizes) or ``"8x16,32x32"``."""
    grid = []
    for part in text.split(","):
        part = part.strip().lower()
        if not part:
            continue
        h, _, w = part.partition("x")
        grid.append((int(h), int(w or h)))
    return tuple(grid)


def time_samples(fn: Callable[[], object], reps: int, warmup: int) -> list[int]:
    """Nanoseconds of each of ``reps`` calls after ``warmup`` untimed calls."""
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    return samples


def time_median(fn: Callable[[], object], reps: int, warmup: int) -> float:
    return float(statistics.median(time_samples(fn, reps, warmup)))


def modeled_flops(op: str, h: int, w: int, c: int, k: int) -> int:
    if op == "self_attention":
        return flops_self_attention(h, w, c).total
    return flops_stda(h, w, c, k).total


def loglog_slope(sizes, times) -> float:
    """Least-squares slope of log(time) against log(size)."""
    return float(np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(times, float)), 1)[0])


def run_bench(cfg: BenchConfig):
    """Time both operators over the grid; returns (records, skipped).

    Repetitions are interleaved: every round times each (point, op) once,
    right after an untimed call, so slow drift in machine load spreads evenly
    over the grid instead of tilting the fitted slope.
    """
    rng = np.random.default_rng(cfg.seed)
    sa_params = SelfAttentionParams.random(cfg.channels, rng)
    stda_params = StdaParams.random(cfg.k, cfg.channels, rng)
    jobs, skipped = [], []
    with threadpool_limits(limits=1):
        for h, w in cfg.grid:
            x = rng.normal(size=(cfg.channels, h, w))
            for op in OPS:
                if op == "self_attention":
                    fn = lambda x=x: self_attention(x, sa_params)  # noqa: E731
                else:
                    fn = lambda x=x: stda(x, stda_params)  # noqa: E731
                try:
                    time_samples(fn, 0, cfg.warmup)
                except MemoryError:
                    log.warning("%s at %dx%d: allocation failed, skipped", op, h, w)
                    skipped.append((op, h, w))
                    continue
                jobs.append((op, h, w, fn, []))
        for _ in range(cfg.reps):
            for op, h, w, fn, samples in jobs:
                # one untimed call first, so each sample sees warm caches
                samples.extend(time_samples(fn, 1, 1))
    records = [BenchRecord(op, h, w, cfg.channels, cfg.k, float(statistics.median(samples)),
                           modeled_flops(op, h, w, cfg.channels, cfg.k))
               for op, h, w, _, samples in jobs]
    return records, skipped


def slopes(records) -> dict:
    out = {}
    for op in OPS:
        rows = [r for r in records if r.op == op]
        if len(rows) >= 2:
            out[op] = loglog_slope([r.h * r.w for r in rows], [r.ns_median for r in rows])
    return out


def render_csv(records, skipped=()) -> str:
    buf = io.StringIO()
    buf.write(CSV_VERSION + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in records:
        writer.writerow(r.row())
    for op, h, w in skipped:
        buf.write(f"# skipped op={op} H={h} W={w} reason=allocation-failure\n")
    for op, s in slopes(records).items():
        buf.write(f"# slope op={op} loglog_time_vs_HW={s:.4f}\n")
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    return list(csv.DictReader(rows))
