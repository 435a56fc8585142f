import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hapmc.fragmat import FragmentMatrix, parse_fragments
from hapmc.metrics import (
    EvalReport, evaluate, incoherence, mec_assigned, mec_bruteforce, mec_score,
    principal_angle_dist, read_distances, reconstruction_rate,
)
from hapmc.simread import generate_truth, observe_uniform

from conftest import random_fragments


def naive_mec(D: np.ndarray, h: np.ndarray) -> int:
    """Per-read Hamming distances counted cell by cell."""
    total = 0
    for j in range(D.shape[1]):
        d1 = sum(1 for i in range(D.shape[0]) if D[i, j] != 0 and D[i, j] != h[i])
        d2 = sum(1 for i in range(D.shape[0]) if D[i, j] != 0 and D[i, j] != -h[i])
        total += min(d1, d2)
    return total


def test_mec_example(example_text):
    F = parse_fragments(example_text)
    h = np.array([1, 1, 1])
    d_pos, d_neg = read_distances(F, h)
    assert d_pos.tolist() == [1, 2] and d_neg.tolist() == [2, 0]
    assert mec_score(F, h) == 1
    assert mec_score(F, h) == naive_mec(F.to_dense(), h)


def test_mec_noiseless_truth_is_zero():
    t = generate_truth(40, 60, 1)
    F = observe_uniform(t, 0.4, 0.0, 1)
    assert mec_score(F, t.u_hat) == 0
    assert mec_assigned(F, t.u_hat, t.v_hat) == 0


def test_mec_length_mismatch(example_text):
    with pytest.raises(ValueError):
        mec_score(parse_fragments(example_text), np.ones(4))


def test_bruteforce_examples(example_text):
    F = parse_fragments(example_text)
    best, h = mec_bruteforce(F)
    # (+,+,-) fits read 1 exactly and read 2 via the complement
    assert best == 0 and h.tolist() == [1, 1, -1]
    enum = min(naive_mec(F.to_dense(), np.array(g)) for g in itertools.product([1, -1], repeat=3))
    assert best == enum
    assert mec_score(F, np.array([1, 1, 1])) == 1 > best
    t = generate_truth(10, 30, 2)
    assert mec_bruteforce(observe_uniform(t, 0.6, 0.0, 2))[0] == 0


def test_bruteforce_single_row_minority():
    F = FragmentMatrix(1, 7, [0] * 7, range(7), [1, 1, -1, 1, -1, 1, 1])
    # every read covers one SNP, so each is matched by h or -h
    assert mec_bruteforce(F)[0] == 0


def test_bruteforce_matches_enumeration(rng):
    for _ in range(5):
        F = random_fragments(rng, 6, 9, 0.6)
        D = F.to_dense()
        best = min(naive_mec(D, np.array(h)) for h in itertools.product([1, -1], repeat=6))
        assert mec_bruteforce(F)[0] == best


def test_bruteforce_size_cap():
    with pytest.raises(ValueError):
        mec_bruteforce(FragmentMatrix(23, 1, [], [], []))


def test_reconstruction_rate_examples():
    t = np.array([1, 1, 1, 1])
    assert reconstruction_rate(t, t) == 1.0
    assert reconstruction_rate(t, -t) == 1.0
    assert reconstruction_rate(t, np.array([1, 1, 1, -1])) == pytest.approx(0.75)
    assert reconstruction_rate((t, -t), (np.array([1, 1, 1, -1]), np.array([-1, -1, -1, 1]))) == 0.75
    with pytest.raises(ValueError):
        reconstruction_rate(t, np.ones(3))


def test_distance_examples():
    u = np.array([0.6, 0.8])
    assert principal_angle_dist(u, u) == 0.0
    assert principal_angle_dist(u, -u) == 0.0
    assert principal_angle_dist([1, 0], [0, 1]) == 1.0
    with pytest.raises(ValueError):
        principal_angle_dist([0, 0], [1, 0])


def test_distance_precise_near_zero():
    u = np.ones(1000) / np.sqrt(1000)
    w = u.copy()
    w[0] += 1e-12
    # the cancelling form sqrt(1 - c^2) cannot resolve this
    assert principal_angle_dist(u, w) == pytest.approx(1e-12 * np.sqrt(1 - 1 / 1000), rel=1e-3)


def test_incoherence_examples():
    m = 64
    assert incoherence(np.ones(m) / np.sqrt(m)) == pytest.approx(1.0)
    e = np.zeros(m)
    e[0] = 1
    assert incoherence(e) == pytest.approx(np.sqrt(m))
    with pytest.raises(ValueError):
        incoherence(np.ones(m))


def test_evaluate_report(example_text):
    F = parse_fragments(example_text)
    t = generate_truth(3, 2, 0)
    rep = evaluate(F, np.array([1, 1, 1]), truth=t, v=np.array([1, -1]))
    assert rep.mec == 1
    assert rep.normalized_mec == pytest.approx(1 / 6)
    assert rep.mec_rate == pytest.approx(1 / 5)
    row = rep.row()
    assert list(row) == list(EvalReport.FIELDS)
    assert 0 <= rep.reconstruction_rate <= 1 and 0 <= rep.dist_u <= 1


def test_normalized_mec_of_truth_concentrates():
    # m n p p_e = 200*200*0.5*0.05 = 1000 >= 500
    t = generate_truth(200, 200, 4)
    F = observe_uniform(t, 0.5, 0.05, 4)
    rep = evaluate(F, t.u_hat)
    assert abs(rep.normalized_mec - 0.5 * 0.05) <= 0.2 * 0.5 * 0.05


@st.composite
def vec_pairs(draw):
    n = draw(st.integers(1, 30))
    elems = st.floats(-10, 10, allow_nan=False).filter(lambda x: abs(x) > 1e-3)
    u = np.array(draw(st.lists(elems, min_size=n, max_size=n)))
    w = np.array(draw(st.lists(elems, min_size=n, max_size=n)))
    return u, w


@given(vec_pairs())
def test_distance_identities(pair):
    u, w = pair
    d = principal_angle_dist(u, w)
    assert 0.0 <= d <= 1.0
    assert d == principal_angle_dist(w, u)
    assert d == principal_angle_dist(-u, w)
    c = np.dot(u, w) / np.linalg.norm(u) / np.linalg.norm(w)
    assert d == pytest.approx(np.sqrt(max(0.0, 1 - c * c)), abs=1e-7)


@given(st.integers(0, 10**6), st.integers(1, 10), st.integers(1, 15))
def test_mec_flip_symmetric_and_matches_naive(seed, m, n):
    r = np.random.default_rng(seed)
    F = random_fragments(r, m, n, 0.6)
    h = np.where(r.random(m) < 0.5, 1, -1)
    assert mec_score(F, h) == mec_score(F, -h) == naive_mec(F.to_dense(), h)
    assert mec_score(F, h) <= F.nnz


@given(st.integers(0, 10**6), st.integers(1, 40))
def test_reconstruction_rate_complement_invariant(seed, m):
    r = np.random.default_rng(seed)
    a = np.where(r.random(m) < 0.5, 1, -1)
    b = np.where(r.random(m) < 0.5, 1, -1)
    rate = reconstruction_rate(a, b)
    assert 0.0 <= rate <= 1.0
    assert rate == reconstruction_rate(-a, b) == reconstruction_rate(a, -b)
    assert rate == reconstruction_rate((a, -a), (-b, b))
