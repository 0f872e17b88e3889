"""Timing of sparse x dense products in dense, COO and CSR formats.

A square ``n x n`` weight matrix with a uniformly random sparsity pattern
multiplies an ``n x batch`` dense matrix.  All kernels are single-threaded
numba loops from :mod:`sparsegrow.sparse_core`, so the comparison is between
storage formats, not libraries.  The dense baseline is a cache-blocked
triple loop.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from itertools import groupby

import numpy as np

from ..sparse_core import CsrMatrix, coo_spmm, csr_spmm, dense_matmul

FORMATS = ("coo", "csr", "dense")
CSV_COLUMNS = ("format", "n_units", "batch", "sparsity", "mean_s", "std_s")
DEFAULT_SIZES = (1024, 2048, 4096, 8192)
DEFAULT_SPARSITIES = (0.5, 0.8, 0.9, 0.95, 0.98, 0.99)


@dataclass(frozen=True)
class BenchCase:
    format: str
    n_units: int
    sparsity: float
    batch: int = 128
    repeats: int = 10

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}; expected one of {FORMATS}")
        if not 0.0 <= self.sparsity < 1.0:
            raise ValueError("sparsity must lie in [0, 1)")
        if self.repeats < 3:
            raise ValueError("need at least 3 repeats")
        if self.n_units < 1 or self.batch < 1:
            raise ValueError("n_units and batch must be positive")

    @property
    def key(self):
        return (self.format, self.n_units, self.sparsity)


@dataclass(frozen=True)
class BenchResult:
    case: BenchCase
    mean_seconds: float
    std_seconds: float
    flops_effective: float

    def row(self) -> dict:
        c = self.case
        return {"format": c.format, "n_units": c.n_units, "batch": c.batch, "sparsity": c.sparsity,
                "mean_s": f"{self.mean_seconds:.6e}", "std_s": f"{self.std_seconds:.6e}"}


def random_sparse_matrix(n, sparsity, rng, dtype=np.float32, chunk=512) -> CsrMatrix:
    """Bernoulli(1 - sparsity) pattern with standard normal values, built row block by row block."""
    rows, cols = [], []
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        r, c = np.nonzero(rng.random((stop - start, n), dtype=np.float32) >= sparsity)
        rows.append(r + start)
        cols.append(c)
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    values = rng.standard_normal(rows.size).astype(dtype)
    return CsrMatrix.from_coo(rows, cols, values, (n, n))


def _kernel(fmt, csr: CsrMatrix):
    if fmt == "csr":
        return lambda x: csr_spmm(csr, x)
    if fmt == "coo":
        rows, cols, vals = csr.to_coo()
        return lambda x: coo_spmm(rows, cols, vals, (csr.n_rows, csr.n_cols), x)
    dense = csr.to_dense()
    return lambda x: dense_matmul(dense, x)


def _oracle_rows(csr: CsrMatrix, x, rows):
    out = np.empty((rows.size, x.shape[1]))
    x64 = x.astype(np.float64)
    for i, r in enumerate(rows):
        lo, hi = csr.row_offsets[r], csr.row_offsets[r + 1]
        out[i] = csr.values[lo:hi].astype(np.float64) @ x64[csr.col_indices[lo:hi]]
    return out


def _check(name, got, oracle, tol):
    scale = max(float(np.abs(oracle).max()), 1e-30)
    err = float(np.abs(got - oracle).max()) / scale
    if err > tol:
        raise AssertionError(f"{name}: relative deviation {err:.2e} from the oracle exceeds {tol:.0e}")


def run_bench(cases, seed=0, warmup=1, dtype=np.float32, tol=None, check_rows=64) -> list[BenchResult]:
    """Time every case after checking all formats against a float64 row oracle.

    ``tol`` bounds the max deviation relative to the largest oracle entry;
    by default it grows with the rounding error of an ``n``-term sum.

    Cases sharing ``(n_units, batch, sparsity)`` use the same matrix and
    input.  Results are sorted by ``(format, n_units, sparsity)``.
    """
    cases = list(cases)
    results = []
    shape_key = lambda c: (c.n_units, c.batch, c.sparsity)
    for (n, batch, sparsity), group in groupby(sorted(cases, key=shape_key), key=shape_key):
        group = list(group)
        rng = np.random.default_rng([seed, n, batch, int(round(sparsity * 1e6))])
        csr = random_sparse_matrix(n, sparsity, rng, dtype)
        x = rng.standard_normal((n, batch)).astype(dtype)
        rows = np.sort(rng.choice(n, size=min(check_rows, n), replace=False))
        oracle = _oracle_rows(csr, x, rows)
        limit = tol if tol is not None else 10 * np.finfo(dtype).eps * math.sqrt(n)
        kernels = {c.format: _kernel(c.format, csr) for c in group}
        for fmt, fn in kernels.items():
            _check(f"{fmt} n={n} s={sparsity}", fn(x)[rows], oracle, limit)
        for case in group:
            fn = kernels[case.format]
            for _ in range(warmup):
                fn(x)
            times = []
            for _ in range(case.repeats):
                start = time.perf_counter()
                fn(x)
                times.append(time.perf_counter() - start)
            mean = float(np.mean(times))
            std = float(np.std(times, ddof=1))
            flops = 2.0 * batch * (n * n if case.format == "dense" else csr.nnz)
            results.append(BenchResult(case, mean, std, flops / mean if mean > 0 else math.inf))
    results.sort(key=lambda r: r.case.key)
    return results


def sweep_cases(sizes=DEFAULT_SIZES, sparsities=DEFAULT_SPARSITIES, formats=FORMATS, batch=128, repeats=10):
    return [BenchCase(f, n, s, batch, repeats) for f in formats for n in sizes for s in sparsities]


def write_csv(results, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in results:
            writer.writerow(r.row())


def _interpolate(points):
    """First sparsity where the csr/dense ratio reaches 1, or ``None``."""
    for i, (s, r) in enumerate(points):
        if r <= 1.0:
            if i == 0 or r == 1.0:
                return s
            s0, r0 = points[i - 1]
            return s0 + (r0 - 1.0) * (s - s0) / (r0 - r)
    return None


def crossover_report(results, sparse_format="csr") -> dict:
    """Per ``(n_units, batch)``: sparsity at which ``sparse_format`` starts beating dense.

    The csr/dense time ratio is interpolated linearly between measured
    sparsities; ``None`` means no crossing within the sweep.  A single dense
    measurement per size serves every sparsity, since dense work does not
    depend on the zero pattern.
    """
    times = {}
    for r in results:
        times.setdefault((r.case.n_units, r.case.batch), {}).setdefault(r.case.format, {})[r.case.sparsity] = r.mean_seconds
    report = {}
    for size, by_format in sorted(times.items()):
        dense, sparse = by_format.get("dense", {}), by_format.get(sparse_format, {})
        if not dense or not sparse:
            continue
        fallback = next(iter(dense.values())) if len(dense) == 1 else None
        points = []
        for s in sorted(sparse):
            d = dense.get(s, fallback)
            if d is not None:
                points.append((s, sparse[s] / d))
        report[size] = _interpolate(points)
    return report


def format_crossover(report) -> str:
    lines = ["n_units,batch,crossover_sparsity"]
    for (n, batch), s in report.items():
        lines.append(f"{n},{batch},{'none' if s is None else f'{s:.4f}'}")
    return "\n".join(lines) + "\n"
