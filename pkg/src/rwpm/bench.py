"""Wall-clock scaling of limited iteration against the closed-form solve."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .diffusion import diffuse_closed_form, diffuse_iterative
from .graph import build_affinity, softmax_transition

CSV_HEADER = ("mode", "N", "d", "T", "n", "wall_ms", "peak_matrix_elems")
ITERATIVE = "iterative"
CLOSED_FORM = "closed_form"


@dataclass(frozen=True)
class BenchRow:
    mode: str
    N: int
    d: int
    T: int | None
    n: int
    wall_ms: float
    peak_matrix_elems: int

    def as_csv(self) -> list:
        return [self.mode, self.N, self.d, "inf" if self.T is None else self.T,
                self.n, f"{self.wall_ms:.4f}", self.peak_matrix_elems]


def best_time(fn, min_time: float = 0.2, min_repeats: int = 3) -> float:
    """Best single-call wall time in seconds, repeating until ``min_time`` is spent."""
    best = float("inf")
    spent = 0.0
    runs = 0
    while runs < min_repeats or spent < min_time:
        start = time.perf_counter()
        fn()
        elapsed = time.perf_counter() - start
        best = min(best, elapsed)
        spent += elapsed
        runs += 1
    return best


def run_bench(sizes, d: int = 16, iters: int = 20, n: int = 1, alpha: float = 0.99,
              tau: float = 0.01, seed: int = 0, min_time: float = 0.2) -> list[BenchRow]:
    """Time both solvers on random graphs of each size.

    Graph construction is shared by both solvers and left out of the timing.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for size in sizes:
        m0 = rng.standard_normal((size, d))
        s = softmax_transition(build_affinity(m0), tau).matrix
        t_iter = best_time(lambda: diffuse_iterative(s, m0, alpha, iters), min_time)
        t_closed = best_time(lambda: diffuse_closed_form(s, m0, alpha), min_time)
        rows.append(BenchRow(ITERATIVE, size, d, iters, n, t_iter * 1e3, size * size))
        rows.append(BenchRow(CLOSED_FORM, size, d, None, n, t_closed * 1e3, size * size))
    return rows


def write_csv(rows: list[BenchRow], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_csv())


def loglog_slope(rows: list[BenchRow], mode: str) -> float:
    pts = sorted((r.N, r.wall_ms) for r in rows if r.mode == mode)
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def trend_summary(rows: list[BenchRow]) -> dict:
    largest = max(r.N for r in rows)
    at_largest = {r.mode: r.wall_ms for r in rows if r.N == largest}
    return {
        "largest_N": largest,
        "iterative_ms": at_largest[ITERATIVE],
        "closed_form_ms": at_largest[CLOSED_FORM],
        "iterative_faster": at_largest[ITERATIVE] < at_largest[CLOSED_FORM],
        "iterative_slope": loglog_slope(rows, ITERATIVE),
        "closed_form_slope": loglog_slope(rows, CLOSED_FORM),
    }
