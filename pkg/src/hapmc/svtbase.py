"""Singular value thresholding (trace-norm) baseline for matrix completion.

Standard SVT iteration on the dual variable ``Y``::

    X_k = D_tau(Y_{k-1})
    Y_k = Y_{k-1} + delta * P_Omega(R - X_k)

where ``D_tau`` soft-thresholds singular values. Only the singular triples
above ``tau`` are needed, so they come from block power iteration
warm-started with the previous iterate's vectors rather than a full SVD.
The dense estimate is reduced to a haplotype by rounding its top left
singular vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fragmat import FragmentMatrix, sample_probability
from .metrics import mec_score


@dataclass
class SvtConfig:
    """Defaults (``None``) resolve per instance: ``tau = 5 sqrt(mn)``, ``delta = 1.2 / p``."""

    tau: float | None = None
    delta: float | None = None
    max_iters: int = 500
    tol: float = 1e-4
    max_rank: int = 10
    power_iters: int = 30
    power_tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        for name in ("tau", "delta"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1 or self.max_rank < 1 or self.power_iters < 1:
            raise ValueError("iteration budgets and max_rank must be positive")
        if self.tol <= 0 or self.power_tol <= 0:
            raise ValueError("tolerances must be positive")

    def resolve(self, F: FragmentMatrix) -> tuple[float, float]:
        tau = self.tau if self.tau is not None else 5.0 * math.sqrt(F.m * F.n)
        delta = self.delta if self.delta is not None else 1.2 / sample_probability(F)
        return tau, delta


@dataclass
class SvtResult:
    """``estimate`` is the best iterate; ``haplotype`` is its rank-one rounding."""

    estimate: np.ndarray
    haplotype: np.ndarray
    iterations: int
    converged: bool
    rank: int
    residuals: list[float] = field(default_factory=list)
    diverged: bool = False


def top_singular_triples(Y: np.ndarray, threshold: float, max_rank: int,
                         warm: np.ndarray | None = None, max_iters: int = 50,
                         tol: float = 1e-6, rng: np.random.Generator | None = None):
    """Singular triples of ``Y`` with ``sigma > threshold``, largest first, at most ``max_rank``.

    Block power (subspace) iteration with a block one wider than the
    triples kept, so the first rejected value is visible. The block doubles
    while every Ritz value still exceeds ``threshold``. ``warm`` supplies
    starting right vectors as columns. Returns ``(U, s, V)``.
    """
    rng = rng or np.random.default_rng(0)
    m, n = Y.shape
    cap = min(max_rank, m, n)
    width = min(m, n)
    have = 0 if warm is None else warm.shape[1]
    b = min(max(have + 1, 2), cap + 1, width)
    while True:
        V = rng.standard_normal((n, b))
        if have:
            w = min(b, have)
            V[:, :w] = warm[:, :w]
        V, _ = np.linalg.qr(V)
        s_old = None
        for _ in range(max_iters):
            U, _ = np.linalg.qr(Y @ V)
            V, _ = np.linalg.qr(Y.T @ U)
            # Rayleigh-Ritz on the projected block; only values above the
            # threshold (and the first one below it) need to settle
            Us, s, Vts = np.linalg.svd(U.T @ (Y @ V))
            k = min(b, int(np.count_nonzero(s > threshold)) + 1)
            if s_old is not None and np.all(np.abs(s[:k] - s_old[:k]) <= tol * max(s[0], 1e-300)):
                break
            s_old = s
        U, V = U @ Us, V @ Vts.T
        above = int(np.count_nonzero(s > threshold))
        if above < b or b >= min(cap + 1, width):
            r = min(above, cap)
            return U[:, :r], s[:r], V[:, :r]
        warm, have = V, b
        b = min(2 * b, cap + 1, width)


def _haplotype_from(U: np.ndarray) -> np.ndarray:
    h = np.where(U[:, 0] >= 0, 1, -1).astype(np.int8)
    return -h if h[0] < 0 else h


def svt_complete(F: FragmentMatrix, cfg: SvtConfig | None = None) -> SvtResult:
    """Dense low-rank estimate of ``F`` by singular value thresholding.

    Returns the iterate with the smallest relative observed residual. The
    result is flagged ``converged=False`` when the budget ran out first and
    ``diverged=True`` when the residual blew up (large steps on very sparse
    data), in which case iteration stops early.
    """
    cfg = cfg or SvtConfig()
    if F.nnz == 0:
        raise ValueError("no observed entries")
    tau, delta = cfg.resolve(F)
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 23]))
    mask = F.mask()
    R = F.to_dense().astype(np.float64)
    norm_r = np.linalg.norm(R)
    # kick-start so the first shrinkage is not identically zero
    U1, s1, _ = top_singular_triples(R, 0.0, 1, max_iters=200, tol=1e-10, rng=rng)
    k0 = max(1, math.ceil(tau / (delta * s1[0])))
    Y = k0 * delta * R
    best, best_res, best_rank, best_u = np.zeros_like(R), np.inf, 0, U1
    residuals = []
    warm: np.ndarray | None = None
    converged = diverged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        U, s, V = top_singular_triples(Y, tau, cfg.max_rank, warm, cfg.power_iters,
                                       cfg.power_tol, rng)
        warm = V if V.shape[1] else None
        X = (U * (s - tau)) @ V.T
        diff = np.where(mask, R - X, 0.0)
        res = float(np.linalg.norm(diff) / norm_r)
        if not np.isfinite(res) or res > 1e3 * max(1.0, best_res):
            diverged = True
            break
        residuals.append(res)
        if res < best_res:
            best, best_res, best_rank = X, res, s.size
            if s.size:
                best_u = U
        if res < cfg.tol:
            converged = True
            break
        Y += delta * diff
    return SvtResult(best, _haplotype_from(best_u), it, converged, best_rank, residuals, diverged)


def round_to_sign(X) -> np.ndarray:
    """Entrywise sign with ties sent to +1."""
    return np.where(np.asarray(X) >= 0, 1, -1).astype(np.int8)


def entrywise_mismatch(F: FragmentMatrix, estimate: np.ndarray) -> float:
    """``||P_Omega(R - sign(X))||_0 / (m n)``: agreement of the rounded dense estimate."""
    rows, cols, vals = F.entries()
    S = round_to_sign(estimate)
    return float(np.count_nonzero(S[rows, cols] != vals)) / (F.m * F.n)


def svt_normalized_mec(F: FragmentMatrix, result: SvtResult) -> float:
    """MEC of the rank-one rounded haplotype, divided by ``m n``."""
    return mec_score(F, result.haplotype) / (F.m * F.n)
