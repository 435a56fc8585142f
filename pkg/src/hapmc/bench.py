"""Benchmark grids: simulated reconstruction rates and the SVT comparison.

Each replicate's instance seed is derived from ``(seed_base, cell, replicate)``
alone, so a cell run on its own reproduces the same numbers as the full grid.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .metrics import mec_score, reconstruction_rate
from .simread import DEFAULT_READ_LEN, SimulationSpec, generate_truth, observe_uniform, simulate
from .solver import SolverConfig, assemble
from .svtbase import SvtConfig, svt_complete, svt_normalized_mec
from .theory import TheoryParams, bound_verdict

CSV_FIELDS = (
    "error_rate", "coverage", "algorithm", "replicates", "mean_rate", "sd_rate",
    "mean_mec_norm", "mean_runtime_ms", "bound_pass_rate",
)

TABLE3_ERRORS = (0.0, 0.1, 0.2, 0.3)
TABLE3_COVERAGES = (3.0, 5.0, 8.0, 10.0)


def bench_solver_config(algorithm: str = "soft", seed: int = 0, **kw) -> SolverConfig:
    """Solver settings for benchmarks: tight tolerance and generous budgets.

    Long-read instances mix slowly, so the library defaults (tol 1e-6,
    T=100) can stop while the iterate is still moving.
    """
    opts = dict(tol=1e-12, max_iters=1000, power_iters=2000)
    opts.update(kw)
    return SolverConfig(algorithm=algorithm, seed=seed, **opts)


def instance_seed(seed_base: int, *cell: float, replicate: int) -> int:
    """Stable 32-bit seed for one replicate of one grid cell."""
    key = [int(seed_base)] + [int(round(c * 10_000)) for c in cell] + [int(replicate)]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


@dataclass
class Replicate:
    seed: int
    rate: float
    mec: int
    mec_norm: float
    mec_rate: float
    runtime_ms: float
    bound_ok: bool | None = None


@dataclass
class CellResult:
    error_rate: float
    coverage: float
    algorithm: str
    replicates: list[Replicate] = field(default_factory=list)

    def _vals(self, attr):
        return np.array([getattr(r, attr) for r in self.replicates], dtype=np.float64)

    @property
    def mean_rate(self) -> float:
        return float(self._vals("rate").mean())

    @property
    def sd_rate(self) -> float:
        v = self._vals("rate")
        return float(v.std(ddof=1)) if v.size > 1 else 0.0

    @property
    def mean_mec_norm(self) -> float:
        return float(self._vals("mec_norm").mean())

    @property
    def mean_mec_rate(self) -> float:
        return float(self._vals("mec_rate").mean())

    @property
    def mean_runtime_ms(self) -> float:
        return float(self._vals("runtime_ms").mean())

    @property
    def bound_pass_rate(self) -> float | None:
        flags = [r.bound_ok for r in self.replicates if r.bound_ok is not None]
        return float(np.mean(flags)) if flags else None

    def row(self, runtime: bool = True) -> list[str]:
        bpr = self.bound_pass_rate
        return [
            f"{self.error_rate:g}", f"{self.coverage:g}", self.algorithm,
            str(len(self.replicates)), f"{self.mean_rate:.6f}", f"{self.sd_rate:.6f}",
            f"{self.mean_mec_norm:.8f}",
            f"{self.mean_runtime_ms:.3f}" if runtime else "",
            "" if bpr is None else f"{bpr:.4f}",
        ]


def write_csv(cells: Sequence[CellResult], stream: TextIO, header_lines: Sequence[str] = (),
              runtime: bool = True) -> None:
    for line in header_lines:
        stream.write(f"# {line}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for c in cells:
        w.writerow(c.row(runtime))


def run_assembly_cell(m: int, error_rate: float, coverage: float, algorithm: str,
                      replicates: int, seed_base: int = 0,
                      read_len: tuple[int, int] = DEFAULT_READ_LEN,
                      solver_kw: dict | None = None) -> CellResult:
    """Contiguous-read replicates of one ``(error_rate, coverage)`` cell."""
    cell = CellResult(error_rate, coverage, algorithm)
    for r in range(replicates):
        seed = instance_seed(seed_base, error_rate, coverage, replicate=r)
        F, truth = simulate(SimulationSpec(m=m, model="contiguous", coverage=coverage,
                                           read_len=read_len, p_e=error_rate, seed=seed))
        cfg = bench_solver_config(algorithm, seed, **(solver_kw or {}))
        t0 = time.perf_counter()
        res = assemble(F, cfg)
        ms = (time.perf_counter() - t0) * 1e3
        mec = mec_score(F, res.haplotype)
        tp = TheoryParams.mid_range(F.m, F.n, p_e=error_rate)
        cell.replicates.append(Replicate(
            seed, reconstruction_rate(truth.u_hat, res.haplotype), mec,
            mec / (F.m * F.n), mec / F.nnz, ms, bound_verdict(F, truth, res, tp).ok))
    return cell


def run_table3(m: int = 700, errors=TABLE3_ERRORS, coverages=TABLE3_COVERAGES,
               algorithms=("soft",), replicates: int = 100, seed_base: int = 0,
               read_len: tuple[int, int] = DEFAULT_READ_LEN,
               solver_kw: dict | None = None) -> list[CellResult]:
    """Reconstruction-rate grid over sequencing error rate and coverage."""
    return [
        run_assembly_cell(m, e, c, a, replicates, seed_base, read_len, solver_kw)
        for e in errors for c in coverages for a in algorithms
    ]


def run_svt_cell(m: int, n: int, p: float, p_e: float, replicates: int,
                 seed_base: int = 0, svt_tol: float | None = None,
                 solver_kw: dict | None = None) -> tuple[CellResult, CellResult]:
    """Soft alternating solver and SVT on the same uniform instances.

    ``coverage`` in the returned cells is the expected reads per SNP,
    ``p * n``. SVT stops once its observed residual reaches ``svt_tol``,
    by default the level ``2 sqrt(p_e)`` that the noise alone leaves.
    """
    tol = svt_tol if svt_tol is not None else max(2.0 * np.sqrt(p_e), 1e-4)
    alt = CellResult(p_e, p * n, "soft")
    svt = CellResult(p_e, p * n, "svt")
    tp = TheoryParams.mid_range(m, n, p_e=p_e)
    for r in range(replicates):
        seed = instance_seed(seed_base, m, n, p, p_e, replicate=r)
        truth = generate_truth(m, n, seed)
        F = observe_uniform(truth, p, p_e, seed)
        cfg = SolverConfig(seed=seed, **(solver_kw or {}))
        t0 = time.perf_counter()
        res = assemble(F, cfg)
        ms = (time.perf_counter() - t0) * 1e3
        mec = mec_score(F, res.haplotype)
        alt.replicates.append(Replicate(
            seed, reconstruction_rate(truth.u_hat, res.haplotype), mec, mec / (m * n),
            mec / F.nnz, ms, bound_verdict(F, truth, res, tp).ok))
        t0 = time.perf_counter()
        sres = svt_complete(F, SvtConfig(seed=seed, tol=tol))
        ms = (time.perf_counter() - t0) * 1e3
        mec = mec_score(F, sres.haplotype)
        svt.replicates.append(Replicate(
            seed, reconstruction_rate(truth.u_hat, sres.haplotype), mec,
            svt_normalized_mec(F, sres), mec / F.nnz, ms))
    return alt, svt


def geometric_grid(lo: float, hi: float, points: int) -> list[float]:
    if points < 1 or lo <= 0 or hi < lo:
        raise ValueError("need points >= 1 and 0 < lo <= hi")
    if points == 1:
        return [lo]
    return [float(x) for x in np.geomspace(lo, hi, points)]


def run_svt_comparison(m: int, n: int, p_grid: Sequence[float], p_e: float = 0.05,
                       replicates: int = 100, seed_base: int = 0,
                       svt_tol: float | None = None) -> list[CellResult]:
    cells: list[CellResult] = []
    for p in p_grid:
        cells.extend(run_svt_cell(m, n, p, p_e, replicates, seed_base, svt_tol))
    return cells
