"""Rank-one alternating minimization for diploid haplotype assembly.

Three update rules share one initialization (power iteration on the
rescaled observed matrix followed by clipping):

``least_squares``
    closed-form coordinate least squares for both factors, rounded at the end;
``hard``
    sign updates, so both factors stay in {+1, -1} throughout;
``soft``
    logistic (``tanh(x/2)``) updates on normalized iterates, rounded at the end.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .fragmat import FragmentMatrix, sample_probability
from .metrics import mec_score, principal_angle_dist

log = logging.getLogger(__name__)

ALGORITHMS = ("least_squares", "hard", "soft")
_ALIASES = {"ls": "least_squares", "lsq": "least_squares"}


class SolverError(RuntimeError):
    """Numerical failure: degenerate initialization or non-finite iterates."""


@dataclass
class SolverConfig:
    algorithm: str = "soft"
    max_iters: int = 100
    tol: float = 1e-6
    power_iters: int = 200
    power_tol: float = 1e-10
    clip_factor: float = 2.0
    p_hat: float | None = None
    seed: int = 0

    def __post_init__(self):
        self.algorithm = _ALIASES.get(self.algorithm, self.algorithm)
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0 or self.power_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.power_iters < 1:
            raise ValueError("power_iters must be >= 1")
        if self.clip_factor <= 0:
            raise ValueError("clip_factor must be positive")
        if self.p_hat is not None and not 0 < self.p_hat <= 1:
            raise ValueError("p_hat must lie in (0, 1]")


@dataclass
class SolverTrace:
    """Per-iteration diagnostics. Index 0 of the per-iteration lists is the initial iterate."""

    dist_u: list[float] = field(default_factory=list)
    dist_v: list[float] = field(default_factory=list)
    mec: list[int] = field(default_factory=list)
    delta: list[float] = field(default_factory=list)
    power_iters: int = 0
    clipped: int = 0
    empty_columns: int = 0
    empty_rows: int = 0

    @property
    def iterations(self) -> int:
        return max(0, len(self.mec) - 1)

    def write_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["iteration", "dist", "dist_v", "mec", "delta"])
        for t, mec in enumerate(self.mec):
            w.writerow([
                t,
                _fmt(self.dist_u[t]) if self.dist_u else "",
                _fmt(self.dist_v[t]) if self.dist_v else "",
                mec,
                _fmt(self.delta[t]),
            ])


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else repr(float(x))


@dataclass
class AssemblyResult:
    haplotype: np.ndarray
    membership: np.ndarray
    iterations: int
    u: np.ndarray
    v: np.ndarray
    trace: SolverTrace
    converged: bool = False


def sign(x) -> np.ndarray:
    """Entrywise sign with ties sent to +1."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


def logistic(x):
    """``(e^x - 1) / (e^x + 1)``, evaluated stably as ``tanh(x / 2)``."""
    return np.tanh(np.asarray(x, dtype=np.float64) / 2.0)


# initialization ------------------------------------------------------------


def power_iteration(F: FragmentMatrix, scale: float = 1.0, max_iters: int = 200,
                    tol: float = 1e-10, seed: int = 0) -> tuple[np.ndarray, float, int]:
    """Top left singular vector of ``scale * P_Omega(R)``.

    Alternates ``x = A y`` and ``y = A^T x`` from a random ``y``; stops when
    the relative change of the squared singular-value estimate drops below
    ``tol``. Returns ``(u, sigma, iterations)``.
    """
    if F.nnz == 0:
        raise SolverError("power iteration on a matrix with no observations")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 17]))
    y = rng.standard_normal(F.n)
    y /= np.linalg.norm(y)
    lam_old = 0.0
    x = F.apply(y) * scale
    it = 0
    for it in range(1, max_iters + 1):
        nx = np.linalg.norm(x)
        if nx == 0:
            raise SolverError("power iteration collapsed to zero")
        x /= nx
        y = F.apply_transpose(x) * scale
        lam = float(y @ y)  # Rayleigh quotient of A A^T at x
        ny = np.sqrt(lam)
        if ny == 0:
            raise SolverError("power iteration collapsed to zero")
        y /= ny
        if abs(lam - lam_old) <= tol * lam:
            break
        lam_old = lam
        x = F.apply(y) * scale
    return x / np.linalg.norm(x), float(np.sqrt(lam)), it


def clip(u: np.ndarray, factor: float = 2.0) -> tuple[np.ndarray, int]:
    """Zero entries with ``|u_i| > factor / sqrt(m)`` and renormalize."""
    u = np.asarray(u, dtype=np.float64)
    thresh = factor / np.sqrt(u.size)
    big = np.abs(u) > thresh
    out = np.where(big, 0.0, u)
    nrm = np.linalg.norm(out)
    if nrm == 0:
        raise SolverError("every entry clipped; cannot normalize the initial vector")
    return out / nrm, int(big.sum())


def init_power_clip(F: FragmentMatrix, cfg: SolverConfig | None = None,
                    trace: SolverTrace | None = None) -> np.ndarray:
    """Clipped, normalized top singular vector of ``P_Omega(R) / p_hat``."""
    cfg = cfg or SolverConfig()
    if F.nnz == 0:
        raise SolverError("no observed entries")
    p_hat = cfg.p_hat if cfg.p_hat is not None else sample_probability(F)
    u, _, iters = power_iteration(F, 1.0 / p_hat, cfg.power_iters, cfg.power_tol, cfg.seed)
    u0, nclip = clip(u, cfg.clip_factor)
    if trace is not None:
        trace.power_iters = iters
        trace.clipped = nclip
    return u0


# coordinate updates ---------------------------------------------------------


def _support_sq(F: FragmentMatrix, w: np.ndarray, transpose: bool) -> np.ndarray:
    """Per-column (transpose) or per-row sums of ``w^2`` over the observed pattern."""
    w2 = np.asarray(w, dtype=np.float64) ** 2
    pattern = abs(F.csr)
    return pattern.T @ w2 if transpose else pattern @ w2


def update_v_least_squares(F: FragmentMatrix, u) -> tuple[np.ndarray, np.ndarray]:
    """``v_j = sum_i R_ij u_i / sum_i u_i^2`` over column j's support.

    Returns ``(v, empty)`` where ``empty`` flags columns with zero
    denominator; those entries are set to 0.
    """
    num = F.apply_transpose(u)
    den = _support_sq(F, u, transpose=True)
    empty = den == 0
    v = np.divide(num, den, out=np.zeros_like(num), where=~empty)
    return v, empty


def update_u_least_squares(F: FragmentMatrix, v) -> tuple[np.ndarray, np.ndarray]:
    num = F.apply(v)
    den = _support_sq(F, v, transpose=False)
    empty = den == 0
    u = np.divide(num, den, out=np.zeros_like(num), where=~empty)
    return u, empty


def update_v_hard(F: FragmentMatrix, u) -> np.ndarray:
    return sign(F.apply_transpose(u))


def update_u_hard(F: FragmentMatrix, v) -> np.ndarray:
    return sign(F.apply(v))


def update_v_soft(F: FragmentMatrix, u) -> np.ndarray:
    """``v_j = f(sum_i R_ij u_i / m)`` for a unit-norm ``u``."""
    return logistic(F.apply_transpose(u) / F.m)


def update_u_soft(F: FragmentMatrix, v) -> np.ndarray:
    """``u_i = f(sum_j R_ij v_j / n)`` for a unit-norm ``v``."""
    return logistic(F.apply(v) / F.n)


# outer loop -----------------------------------------------------------------


def _unit(x: np.ndarray, what: str) -> np.ndarray:
    nrm = np.linalg.norm(x)
    if not np.isfinite(nrm):
        raise SolverError(f"non-finite {what} iterate")
    if nrm == 0:
        raise SolverError(f"{what} iterate vanished")
    return x / nrm


def _change(a: np.ndarray, b: np.ndarray) -> float:
    """Distance between unit vectors up to a global sign."""
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def assemble(F: FragmentMatrix, cfg: SolverConfig | None = None, truth=None,
             u0: np.ndarray | None = None) -> AssemblyResult:
    """Run the configured alternating minimization on ``F``.

    ``truth`` (anything with ``u_hat``/``v_hat``) enables distance tracing;
    ``u0`` overrides the power-iteration initialization.
    """
    cfg = cfg or SolverConfig()
    trace = SolverTrace()
    if u0 is None:
        u = init_power_clip(F, cfg, trace)
    else:
        u = _unit(np.asarray(u0, dtype=np.float64), "initial")
    u_star = v_star = None
    if truth is not None:
        u_star = np.asarray(truth.u_hat, dtype=np.float64)
        if np.size(truth.v_hat) == F.n:
            v_star = np.asarray(truth.v_hat, dtype=np.float64)

    def record(u_real, v_real, delta):
        if u_star is not None:
            trace.dist_u.append(principal_angle_dist(u_real, u_star))
            if v_star is not None:
                trace.dist_v.append(
                    principal_angle_dist(v_real, v_star) if v_real is not None
                    and np.any(v_real) else float("nan"))
        trace.mec.append(mec_score(F, sign(u_real)))
        trace.delta.append(delta)

    record(u, None, float("nan"))
    algo = cfg.algorithm
    v = np.zeros(F.n)
    u_unit = u
    converged = False
    t = 0
    for t in range(1, cfg.max_iters + 1):
        if algo == "least_squares":
            # rescaling u only rescales v inversely; keeps magnitudes bounded
            v, empty_v = update_v_least_squares(F, u_unit)
            u, empty_u = update_u_least_squares(F, v)
            trace.empty_columns = int(empty_v.sum())
            trace.empty_rows = int(empty_u.sum())
        elif algo == "hard":
            v = update_v_hard(F, u).astype(np.float64)
            u = update_u_hard(F, v).astype(np.float64)
        else:
            v = _unit(update_v_soft(F, u_unit), "v")
            u = update_u_soft(F, v)
        if not np.all(np.isfinite(u)) or not np.all(np.isfinite(v)):
            raise SolverError(f"non-finite iterate at iteration {t}")
        new_unit = _unit(u, "u")
        delta = _change(new_unit, u_unit)
        u_unit = new_unit
        record(u, v, delta)
        if delta < cfg.tol:
            converged = True
            break

    h = sign(u)
    memb = sign(v)
    if h[0] < 0:
        h, memb = -h, -memb
        u, v, u_unit = -u, -v, -u_unit
    return AssemblyResult(
        haplotype=h,
        membership=memb,
        iterations=t,
        u=u_unit,
        v=_unit(v, "v") if np.any(v) else v,
        trace=trace,
        converged=converged,
    )
