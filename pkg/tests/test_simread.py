import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hapmc.simread import (
    DEFAULT_READ_LEN, GroundTruth, SimulationSpec, contiguous_reads, generate_truth,
    observe_contiguous, observe_uniform, read_truth, replicate_rng, simulate, write_truth,
)


def test_generate_truth_rejects_degenerate():
    with pytest.raises(ValueError):
        generate_truth(1, 5, 0)
    with pytest.raises(ValueError):
        generate_truth(5, 1, 0)


def test_generate_truth_deterministic():
    a, b = generate_truth(50, 80, 3), generate_truth(50, 80, 3)
    assert np.array_equal(a.u_hat, b.u_hat) and np.array_equal(a.v_hat, b.v_hat)
    c = generate_truth(50, 80, 4)
    assert not np.array_equal(a.u_hat, c.u_hat)


def test_truth_matrix_closure():
    t = generate_truth(500, 1000, 11)
    M = t.matrix()
    assert set(np.unique(M).tolist()) <= {-1, 1}
    assert np.linalg.matrix_rank(M[:40, :40].astype(float)) == 1
    assert t.sigma_star == pytest.approx(np.sqrt(500 * 1000))
    assert np.allclose(np.abs(t.u_star), 1 / np.sqrt(500))
    assert np.allclose(np.abs(t.v_star), 1 / np.sqrt(1000))


def test_observe_uniform_full_noiseless():
    t = generate_truth(30, 40, 0)
    F = observe_uniform(t, 1.0, 0.0, 0)
    assert np.array_equal(F.to_dense(), t.matrix())


def test_observe_uniform_sampling_rate():
    for s in range(20):
        t = generate_truth(200, 200, s)
        F = observe_uniform(t, 0.3, 0.0, s)
        assert abs(F.nnz / (200 * 200) - 0.3) <= 0.02
        rows, cols, vals = F.entries()
        assert np.array_equal(vals, t.values_at(rows, cols))


def test_observe_uniform_flip_rate():
    t = generate_truth(200, 200, 5)
    F = observe_uniform(t, 1.0, 0.05, 5)
    frac = np.mean(F.to_dense() != t.matrix())
    assert abs(frac - 0.05) <= 0.01


def test_observe_uniform_validates():
    t = generate_truth(10, 10, 0)
    for p, pe in [(0.0, 0.0), (1.2, 0.0), (0.5, 0.5), (0.5, -0.1)]:
        with pytest.raises(ValueError):
            observe_uniform(t, p, pe, 0)


def test_contiguous_fixed_length_coverage():
    for s in range(10):
        F, _ = observe_contiguous(np.ones(100, dtype=np.int8), 10, 3, 0.0, s)
        cov = F.column_counts().sum() / 100
        assert abs(cov - 10) <= 1


def test_contiguous_length_two_never_single():
    F, _ = observe_contiguous(np.ones(60, dtype=np.int8), 6, 2, 0.0, 1)
    assert F.column_counts().min() >= 2


def test_contiguous_reads_are_intervals_and_linked():
    rng = replicate_rng(9)
    reads = contiguous_reads(300, 4, (5, 20), rng)
    links = np.zeros(299, dtype=int)
    for s, L in reads:
        assert 0 <= s and s + L <= 300 and L >= 2
        links[s:s + L - 1] += 1
    assert links.min() >= 1


def test_contiguous_default_coverage_close_to_target():
    covs = []
    for s in range(10):
        F, _ = observe_contiguous(np.ones(700, dtype=np.int8), 5, DEFAULT_READ_LEN, 0.0, s)
        covs.append(F.nnz / 700)
    assert abs(np.mean(covs) - 5) < 0.5


def test_contiguous_noiseless_consistent():
    u = np.where(replicate_rng(3).random(150) < 0.5, 1, -1).astype(np.int8)
    F, truth = observe_contiguous(u, 5, (4, 9), 0.0, 3)
    rows, cols, vals = F.entries()
    assert np.array_equal(vals, truth.values_at(rows, cols))
    assert truth.n == F.n and np.array_equal(truth.u_hat, u)


def test_simulation_spec_validation():
    with pytest.raises(ValueError):
        SimulationSpec(m=10, model="uniform", n=10)
    with pytest.raises(ValueError):
        SimulationSpec(m=10, model="contiguous", coverage=0)
    with pytest.raises(ValueError):
        SimulationSpec(m=10, model="contiguous", coverage=3, read_len=(1, 4))
    with pytest.raises(ValueError):
        SimulationSpec(m=10, model="other")


def test_simulate_deterministic_and_noise_closure():
    spec = SimulationSpec(m=120, model="contiguous", coverage=4, read_len=(5, 15), p_e=0.2, seed=8)
    F1, t1 = simulate(spec)
    F2, t2 = simulate(spec)
    assert F1 == F2 and np.array_equal(t1.v_hat, t2.v_hat)
    _, _, vals = F1.entries()
    assert set(np.unique(vals).tolist()) <= {-1, 1}


def test_truth_sidecar_round_trip():
    spec = SimulationSpec(m=20, n=15, p=0.5, seed=2)
    _, truth = simulate(spec)
    buf = io.StringIO()
    write_truth(truth, buf, spec.echo())
    lines = buf.getvalue().splitlines()
    assert len(lines) == 3 and set(lines[0]) <= {"0", "1"}
    back, meta = read_truth(io.StringIO(buf.getvalue()))
    assert np.array_equal(back.u_hat, truth.u_hat) and np.array_equal(back.v_hat, truth.v_hat)
    assert meta["seed"] == "2" and meta["model"] == "uniform"


def test_ground_truth_rejects_zero():
    with pytest.raises(ValueError):
        GroundTruth(np.array([1, 0]), np.array([1, 1]))


@given(st.integers(2, 40), st.integers(2, 40), st.floats(0.05, 1.0), st.integers(0, 10**6))
def test_noiseless_uniform_matches_truth(m, n, p, seed):
    t = generate_truth(m, n, seed)
    F = observe_uniform(t, p, 0.0, seed)
    rows, cols, vals = F.entries()
    assert np.array_equal(vals, t.values_at(rows, cols))
