"""Closed-form recovery bounds and empirical validators for them.

All calculators are pure functions of :class:`TheoryParams`. The unnamed
global constants ``C`` and ``C'`` are user parameters that default to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from .metrics import mec_score
from .simread import N_MAX, generate_truth, observe_uniform


@dataclass(frozen=True)
class TheoryParams:
    """Problem and analysis parameters.

    ``m <= n`` is required so that ``alpha = n / m >= 1``; use
    :meth:`from_shape` to orient an arbitrary instance. ``eps`` defaults to
    ``||M||_F / e`` so the ``log(||M||_F / eps)`` factor equals one, and
    ``delta2`` defaults to the top of its admissible interval.
    """

    m: int
    n: int
    p_e: float = 0.0
    n_max: float = N_MAX
    delta2: float | None = None
    eps: float | None = None
    mu: float = 1.0
    C: float = 1.0
    C_prime: float = 1.0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("dimensions must be positive")
        if self.n < self.m:
            raise ValueError("need n >= m (alpha >= 1); use TheoryParams.from_shape")
        if not 0 <= self.p_e < 1:
            raise ValueError("p_e must lie in [0, 1)")
        if self.C <= 0 or self.C_prime <= 0 or self.mu <= 0 or self.n_max <= 0:
            raise ValueError("constants must be positive")
        hi = self.delta2_max
        if hi <= 0:
            raise ValueError(f"empty delta2 interval: upper limit {hi:.4g} <= 0")
        if self.delta2 is None:
            object.__setattr__(self, "delta2", hi)
        elif not 0 <= self.delta2 <= hi:
            raise ValueError(f"delta2={self.delta2} outside [0, {hi:.6g}]")
        if self.eps is None:
            object.__setattr__(self, "eps", self.frob_M / math.e)
        elif self.eps <= 0:
            raise ValueError("eps must be positive")

    @classmethod
    def from_shape(cls, m: int, n: int, **kw) -> "TheoryParams":
        """Parameters for an ``m x n`` instance, transposed if needed so ``alpha >= 1``."""
        return cls(min(m, n), max(m, n), **kw)

    @classmethod
    def mid_range(cls, m: int, n: int, **kw) -> "TheoryParams":
        """Like :meth:`from_shape` with ``delta2`` at the midpoint of its interval."""
        top = cls.from_shape(m, n, **kw)
        return replace(top, delta2=top.delta2_max / 2)

    @property
    def alpha(self) -> float:
        return self.n / self.m

    @property
    def delta2_max(self) -> float:
        return (3.93 - self.C_prime * self.n_max * self.p_e) / 21.0

    @property
    def mu1(self) -> float:
        return 8.0 * self.mu

    @property
    def sigma_star(self) -> float:
        return math.sqrt(self.m * self.n)

    @property
    def frob_M(self) -> float:
        # every entry of M is +/-1
        return math.sqrt(self.m * self.n)

    def _need_delta2(self) -> float:
        if self.delta2 <= 0:
            raise ValueError("delta2 must be positive for this bound")
        return self.delta2


def _log_ratio(tp: TheoryParams) -> float:
    return math.log(tp.frob_M / tp.eps)


def sample_prob_threshold(tp: TheoryParams) -> float:
    """Sampling probability above which recovery is guaranteed (may exceed 1)."""
    d = tp._need_delta2()
    return (tp.C * math.sqrt(tp.alpha) / (tp.m * d * d) * math.log(tp.n)
            * _log_ratio(tp) * (tp.p_e + 64.0 * d / 3.0))


def coverage_requirement(tp: TheoryParams) -> float:
    """Reads per SNP implied by the threshold: ``p * n``."""
    return sample_prob_threshold(tp) * tp.n


def noise_spectral_bound(tp: TheoryParams) -> float:
    """High-probability bound on ``||P_Omega(N)||_2 / p``: ``2 N_max p_e sqrt(mn)``."""
    return 2.0 * tp.n_max * tp.p_e * math.sqrt(tp.m * tp.n)


def noise_spectral_bound_stated(tp: TheoryParams) -> float:
    """The alternative ``2 N_max p_e m sqrt(n)`` form, kept for reporting."""
    return 2.0 * tp.n_max * tp.p_e * tp.m * math.sqrt(tp.n)


def _noise_term(tp: TheoryParams) -> float:
    d = tp._need_delta2()
    return 16.0 * tp.p_e / (3.0 * d) * (2.0 + (2.0 + 3.0 * tp.n_max) * d)


def error_bound(tp: TheoryParams) -> float:
    """Frobenius bound on ``||M - M_hat||_F`` after enough iterations."""
    return tp.eps + _noise_term(tp) * tp.sigma_star


def mec_bound(tp: TheoryParams, noise_frob: float) -> float:
    """Bound on the normalized MEC given ``||P_Omega(N)||_F``."""
    root = math.sqrt(tp.m * tp.n)
    return tp.eps / root + _noise_term(tp) + noise_frob / root


def plateau_bound(tp: TheoryParams) -> float:
    """Limit of ``dist(u_t, u*)`` under noise: ``(4/3) mu1 p_e / delta2 + eps / (2 ||M||_F)``."""
    d = tp._need_delta2()
    return 4.0 / 3.0 * tp.mu1 * tp.p_e / d + tp.eps / (2.0 * tp.frob_M)


# contraction ----------------------------------------------------------------


@dataclass(frozen=True)
class ContractionStep:
    iteration: int
    half: str  # "v" (u_{t-1} -> v_t), "u" (v_t -> u_t) or "outer" (u_{t-1} -> u_t)
    previous: float
    current: float
    bound: float
    ok: bool


@dataclass
class ContractionVerdict:
    steps: list[ContractionStep] = field(default_factory=list)

    @property
    def compliant(self) -> bool:
        return all(s.ok for s in self.steps)

    @property
    def violations(self) -> list[ContractionStep]:
        return [s for s in self.steps if not s.ok]


def contraction_check(trace, tp: TheoryParams, slack: float = 1e-6,
                      floor: float = 1e-10, rate: float = 0.25) -> ContractionVerdict:
    """Check the affine contraction ``d_next <= rate * d_prev + mu1 p_e / delta2``.

    Uses the half-steps ``u_{t-1} -> v_t -> u_t`` when the trace carries
    membership distances, otherwise whole outer iterations. Checking stops
    once the preceding distance is below ``floor``.
    """
    offset = tp.mu1 * tp.p_e / tp._need_delta2() if tp.p_e > 0 else 0.0
    du = list(trace.dist_u)
    dv = list(getattr(trace, "dist_v", []) or [])
    halves = len(dv) == len(du) and all(np.isfinite(dv[1:]))
    verdict = ContractionVerdict()

    def step(t, half, prev, cur):
        bound = rate * prev + offset + slack
        verdict.steps.append(ContractionStep(t, half, prev, cur, bound, cur <= bound))

    for t in range(1, len(du)):
        if du[t - 1] < floor:
            break
        if halves:
            step(t, "v", du[t - 1], dv[t])
            if dv[t] < floor:
                break
            step(t, "u", dv[t], du[t])
        else:
            step(t, "outer", du[t - 1], du[t])
    return verdict


def plateau_check(trace, tp: TheoryParams) -> tuple[float, float, bool]:
    """``(final dist, plateau bound, final <= bound)`` for a traced noisy run."""
    if not trace.dist_u:
        raise ValueError("trace has no distances; rerun with truth")
    final = float(trace.dist_u[-1])
    b = plateau_bound(tp)
    return final, b, final <= b


# empirical validators --------------------------------------------------------


def noise_matrix(truth, F) -> sp.csr_matrix:
    """``P_Omega(N) = P_Omega(R - M)`` as a sparse matrix with entries in {0, +/-2}."""
    rows, cols, vals = F.entries()
    diff = vals.astype(np.float64) - truth.values_at(rows, cols)
    keep = diff != 0
    return sp.csr_matrix((diff[keep], (rows[keep], cols[keep])), shape=F.shape)


def spectral_norm(A) -> float:
    """Largest singular value of a sparse matrix (0 for an all-zero matrix)."""
    if A.nnz == 0:
        return 0.0
    if min(A.shape) < 3:
        return float(np.linalg.norm(A.toarray(), 2))
    s = svds(A.astype(np.float64), k=1, return_singular_vectors=False,
             random_state=0, tol=1e-10)
    return float(s[0])


@dataclass
class ValidationReport:
    name: str
    bound: float | list[float]
    measured: list[float]
    passed: list[bool]

    @property
    def pass_rate(self) -> float:
        return float(np.mean(self.passed)) if self.passed else float("nan")


def validate_noise_bound(m: int, n: int, p: float, p_e: float, seeds, **kw) -> ValidationReport:
    """Fraction of draws with ``||P_Omega(N)||_2 / p`` within :func:`noise_spectral_bound`."""
    tp = TheoryParams.from_shape(m, n, p_e=p_e, **kw)
    bound = noise_spectral_bound(tp)
    measured, passed = [], []
    for s in seeds:
        truth = generate_truth(m, n, s)
        F = observe_uniform(truth, p, p_e, s)
        val = spectral_norm(noise_matrix(truth, F)) / p
        measured.append(val)
        passed.append(val <= bound)
    return ValidationReport("noise_spectral", bound, measured, passed)


def rank_one_error(truth, haplotype, membership) -> float:
    """``||M - h w^T||_F`` for +/-1 vectors, via ``2mn - 2 <u,h><v,w>``."""
    u = np.asarray(truth.u_hat, dtype=np.float64)
    v = np.asarray(truth.v_hat, dtype=np.float64)
    h = np.asarray(haplotype, dtype=np.float64)
    w = np.asarray(membership, dtype=np.float64)
    sq = 2.0 * u.size * v.size - 2.0 * float(u @ h) * float(v @ w)
    return math.sqrt(max(0.0, sq))


@dataclass(frozen=True)
class BoundVerdict:
    error: float
    error_bound: float
    normalized_mec: float
    mec_bound: float

    @property
    def error_ok(self) -> bool:
        return self.error <= self.error_bound

    @property
    def mec_ok(self) -> bool:
        return self.normalized_mec <= self.mec_bound

    @property
    def ok(self) -> bool:
        return self.error_ok and self.mec_ok


def bound_verdict(F, truth, result, tp: TheoryParams) -> BoundVerdict:
    """Compare one assembly against the error and MEC bounds.

    The estimate is the rounded rank-one matrix ``h w^T`` built from the
    returned haplotype and membership.
    """
    noise_frob = math.sqrt(noise_matrix(truth, F).power(2).sum())
    return BoundVerdict(
        error=rank_one_error(truth, result.haplotype, result.membership),
        error_bound=error_bound(tp),
        normalized_mec=mec_score(F, result.haplotype) / (F.m * F.n),
        mec_bound=mec_bound(tp, noise_frob),
    )


def validate_recovery_bounds(m: int, n: int, p: float, p_e: float, seeds,
                             cfg=None, tp: TheoryParams | None = None
                             ) -> tuple[ValidationReport, ValidationReport]:
    """Run the solver on uniform instances and test the error and MEC bounds.

    Returns ``(error_report, mec_report)``.
    """
    from .solver import SolverConfig, assemble

    tp = tp or TheoryParams.mid_range(m, n, p_e=p_e)
    err = ValidationReport("error_bound", error_bound(tp), [], [])
    mec = ValidationReport("mec_bound", [], [], [])
    for s in seeds:
        truth = generate_truth(m, n, s)
        F = observe_uniform(truth, p, p_e, s)
        c = cfg or SolverConfig(seed=s)
        res = assemble(F, c)
        bv = bound_verdict(F, truth, res, tp)
        err.measured.append(bv.error)
        err.passed.append(bv.error_ok)
        mec.bound.append(bv.mec_bound)
        mec.measured.append(bv.normalized_mec)
        mec.passed.append(bv.mec_ok)
    return err, mec
