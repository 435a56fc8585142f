import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hapmc.simread import generate_truth, observe_uniform
from hapmc.solver import SolverConfig, assemble
from hapmc.theory import (
    TheoryParams, bound_verdict, contraction_check, coverage_requirement, error_bound, mec_bound,
    noise_matrix, noise_spectral_bound, noise_spectral_bound_stated, plateau_bound, plateau_check,
    rank_one_error, sample_prob_threshold, spectral_norm, validate_noise_bound,
    validate_recovery_bounds,
)


def threshold_oracle(m, n, p_e, d2, C=1.0, eps_ratio=math.e):
    # written out independently of the module
    return C * math.sqrt(n / m) / (m * d2 ** 2) * math.log(n) * math.log(eps_ratio) * (p_e + 64 * d2 / 3)


# parameters ------------------------------------------------------------------


def test_params_defaults():
    tp = TheoryParams(1000, 1000)
    assert tp.delta2 == pytest.approx(3.93 / 21)
    assert tp.eps == pytest.approx(1000 / math.e)
    assert tp.alpha == 1 and tp.mu1 == 8 and tp.sigma_star == 1000


def test_params_validation():
    with pytest.raises(ValueError):
        TheoryParams(100, 50)
    with pytest.raises(ValueError):
        TheoryParams(100, 100, delta2=0.5)
    with pytest.raises(ValueError):
        TheoryParams(100, 100, p_e=0.5, C_prime=5.0)  # empty interval
    tp = TheoryParams.from_shape(400, 200, p_e=0.02)
    assert (tp.m, tp.n) == (200, 400)
    mid = TheoryParams.mid_range(200, 400, p_e=0.02)
    assert mid.delta2 == pytest.approx((3.93 - 2 * 0.02) / 42)


def test_zero_delta2_rejected_by_bounds():
    tp = TheoryParams(50, 50, delta2=0.0)
    for f in (sample_prob_threshold, error_bound, plateau_bound):
        with pytest.raises(ValueError):
            f(tp)


# threshold -------------------------------------------------------------------


def test_threshold_formula():
    tp = TheoryParams(1000, 1000)
    assert sample_prob_threshold(tp) == pytest.approx(threshold_oracle(1000, 1000, 0, tp.delta2))


def test_threshold_decreases_in_m():
    vals = [sample_prob_threshold(TheoryParams(m, m)) for m in (100, 200, 400, 1000, 5000)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    fixed_n = [sample_prob_threshold(TheoryParams(m, 2000)) for m in (100, 500, 1000, 2000)]
    assert all(a > b for a, b in zip(fixed_n, fixed_n[1:]))


def test_threshold_linear_in_C():
    a = sample_prob_threshold(TheoryParams(300, 600, C=1.0))
    b = sample_prob_threshold(TheoryParams(300, 600, C=2.0))
    assert b == pytest.approx(2 * a)


def test_threshold_increases_with_error_rate():
    d2 = 0.1
    assert (sample_prob_threshold(TheoryParams(300, 300, p_e=0.05, delta2=d2))
            > sample_prob_threshold(TheoryParams(300, 300, p_e=0.0, delta2=d2)))


# noise bound -----------------------------------------------------------------


def test_noise_bound_zero_without_noise():
    tp = TheoryParams(50, 80, p_e=0.0)
    assert noise_spectral_bound(tp) == 0
    t = generate_truth(50, 80, 0)
    F = observe_uniform(t, 0.5, 0.0, 0)
    assert spectral_norm(noise_matrix(t, F)) == 0.0


def test_noise_bound_scaling():
    a = noise_spectral_bound(TheoryParams(100, 200, p_e=0.05))
    assert a == pytest.approx(2 * 2 * 0.05 * math.sqrt(100 * 200))
    assert noise_spectral_bound(TheoryParams(200, 400, p_e=0.05)) == pytest.approx(2 * a)
    assert noise_spectral_bound(TheoryParams(400, 800, p_e=0.05)) == pytest.approx(4 * a)
    assert noise_spectral_bound_stated(TheoryParams(100, 200, p_e=0.05)) == pytest.approx(
        2 * 2 * 0.05 * 100 * math.sqrt(200))


def test_noise_matrix_entries():
    t = generate_truth(40, 40, 1)
    F = observe_uniform(t, 0.8, 0.1, 1)
    N = noise_matrix(t, F)
    assert set(np.unique(N.data).tolist()) <= {-2.0, 2.0}
    assert np.allclose(N.toarray(), F.to_dense() - np.where(F.mask(), t.matrix(), 0))
    assert spectral_norm(N) == pytest.approx(np.linalg.norm(N.toarray(), 2), rel=1e-8)


def test_noise_validator_small():
    rep = validate_noise_bound(200, 200, 0.5, 0.05, range(10))
    assert rep.pass_rate >= 0.95
    assert rep.bound == pytest.approx(40.0)


# error and MEC bounds ---------------------------------------------------------


def test_error_bound_vanishes_without_noise():
    vals = [error_bound(TheoryParams(100, 100, p_e=0.0, eps=e)) for e in (1e-2, 1e-6, 1e-12)]
    assert vals[-1] < 1e-11 and vals == sorted(vals, reverse=True)


def test_error_and_mec_bound_formulas():
    tp = TheoryParams(200, 400, p_e=0.02, delta2=0.09)
    term = 16 * 0.02 / (3 * 0.09) * (2 + 8 * 0.09)
    assert error_bound(tp) == pytest.approx(tp.eps + term * math.sqrt(200 * 400))
    assert mec_bound(tp, 10.0) == pytest.approx(
        tp.eps / math.sqrt(80000) + term + 10 / math.sqrt(80000))


def test_rank_one_error_identity():
    t = generate_truth(12, 17, 3)
    rng = np.random.default_rng(0)
    h = np.where(rng.random(12) < 0.5, 1, -1)
    w = np.where(rng.random(17) < 0.5, 1, -1)
    assert rank_one_error(t, h, w) == pytest.approx(np.linalg.norm(t.matrix() - np.outer(h, w)))
    assert rank_one_error(t, -t.u_hat, -t.v_hat) == 0.0


def test_bound_verdict_on_run():
    t = generate_truth(60, 120, 2)
    F = observe_uniform(t, 0.5, 0.02, 2)
    res = assemble(F, SolverConfig(seed=2))
    tp = TheoryParams.mid_range(60, 120, p_e=0.02)
    v = bound_verdict(F, t, res, tp)
    assert v.ok and v.error <= 2 * math.sqrt(60 * 120)


def test_recovery_validator_small():
    err, mec = validate_recovery_bounds(60, 120, 0.5, 0.02, range(5))
    assert err.pass_rate == 1.0 and mec.pass_rate == 1.0
    assert len(mec.bound) == 5


# contraction -----------------------------------------------------------------


def test_contraction_constant_zero_trace():
    trace = SimpleNamespace(dist_u=[0.0] * 5, dist_v=[float("nan")] + [0.0] * 4)
    assert contraction_check(trace, TheoryParams(10, 10)).compliant


def test_contraction_flags_slow_decay():
    trace = SimpleNamespace(dist_u=[0.4, 0.2, 0.1, 0.05], dist_v=[])
    v = contraction_check(trace, TheoryParams(10, 10))
    assert not v.compliant and len(v.violations) == 3
    ok = SimpleNamespace(dist_u=[0.4, 0.1, 0.02, 0.0], dist_v=[])
    assert contraction_check(ok, TheoryParams(10, 10)).compliant


def test_contraction_offset_with_noise():
    tp = TheoryParams(100, 100, p_e=0.01)
    offset = tp.mu1 * 0.01 / tp.delta2
    trace = SimpleNamespace(dist_u=[0.4, 0.1 + 0.9 * offset], dist_v=[])
    assert contraction_check(trace, tp).compliant


@pytest.mark.parametrize("algo", ["hard", "least_squares"])
def test_contraction_noiseless_run(algo):
    t = generate_truth(300, 300, 1)
    F = observe_uniform(t, 0.9, 0.0, 1)
    res = assemble(F, SolverConfig(algorithm=algo, tol=1e-14, max_iters=30), truth=t)
    v = contraction_check(res.trace, TheoryParams(300, 300))
    assert v.compliant and min(res.trace.dist_u) < 1e-10


def test_plateau_noisy_run():
    t = generate_truth(200, 200, 3)
    F = observe_uniform(t, 0.5, 0.05, 3)
    res = assemble(F, SolverConfig(seed=3), truth=t)
    final, bound, ok = plateau_check(res.trace, TheoryParams(200, 200, p_e=0.05))
    assert ok and final <= bound


# coverage --------------------------------------------------------------------


def test_coverage_requirement():
    tp = TheoryParams(100, 400)
    assert coverage_requirement(tp) == pytest.approx(sample_prob_threshold(tp) * 400)
    assert coverage_requirement(TheoryParams(100, 100, p_e=0.0)) > 0
    a = coverage_requirement(TheoryParams(100, 200))
    b = coverage_requirement(TheoryParams(100, 400))
    # alpha^{3/2} log n: doubling n at fixed m
    assert b / a == pytest.approx(2 ** 1.5 * math.log(400) / math.log(200))
    assert min(coverage_requirement(TheoryParams(100, n)) for n in (100, 150, 300)) == a / a * \
        coverage_requirement(TheoryParams(100, 100))


@given(st.integers(2, 2000), st.integers(0, 3000), st.floats(0.0, 0.3), st.floats(0.05, 0.95))
def test_bounds_finite_and_monotone(m, extra, p_e, frac):
    n = m + extra
    base = TheoryParams(m, n, p_e=p_e)
    d2 = frac * base.delta2_max
    tp = TheoryParams(m, n, p_e=p_e, delta2=d2)
    vals = [sample_prob_threshold(tp), error_bound(tp), mec_bound(tp, 1.0), plateau_bound(tp),
            coverage_requirement(tp), noise_spectral_bound(tp)]
    assert all(math.isfinite(v) and v >= 0 for v in vals)
    # finite-difference probes in the directions the closed forms dictate
    hi_C = TheoryParams(m, n, p_e=p_e, delta2=d2, C=2.0)
    assert sample_prob_threshold(hi_C) > sample_prob_threshold(tp)
    smaller_d2 = TheoryParams(m, n, p_e=p_e, delta2=0.5 * d2)
    assert sample_prob_threshold(smaller_d2) > sample_prob_threshold(tp)
    assert noise_spectral_bound(TheoryParams(m, n, p_e=p_e + 0.01, delta2=0.5 * d2)) > \
        noise_spectral_bound(tp)
