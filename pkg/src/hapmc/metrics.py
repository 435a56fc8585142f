"""Evaluation metrics: MEC, reconstruction rate, principal-angle distance, incoherence."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .fragmat import FragmentMatrix, Haplotype

BRUTEFORCE_MAX_M = 22


def _as_signs(h) -> np.ndarray:
    if isinstance(h, Haplotype):
        return h.values.astype(np.float64)
    return np.asarray(h, dtype=np.float64).ravel()


def read_distances(F: FragmentMatrix, h) -> tuple[np.ndarray, np.ndarray]:
    """Per-read generalized Hamming distances to ``h`` and to its complement."""
    h = _as_signs(h)
    if h.size != F.m:
        raise ValueError(f"haplotype length {h.size} does not match m={F.m}")
    agree = F.apply_transpose(h)
    counts = F.column_counts()
    d_pos = np.rint((counts - agree) / 2).astype(np.int64)
    return d_pos, counts - d_pos


def mec_score(F: FragmentMatrix, h) -> int:
    """Minimum error correction score of ``F`` against the pair ``{h, -h}``."""
    d_pos, d_neg = read_distances(F, h)
    return int(np.minimum(d_pos, d_neg).sum())


def mec_assigned(F: FragmentMatrix, h, v) -> int:
    """Observed mismatches ``||P_Omega(R - h v^T)||_0`` for a fixed membership ``v``."""
    rows, cols, vals = F.entries()
    h = _as_signs(h)
    v = _as_signs(v)
    return int(np.count_nonzero(vals != h[rows] * v[cols]))


def mec_bruteforce(F: FragmentMatrix) -> tuple[int, np.ndarray]:
    """Exact MEC optimum by enumerating all haplotypes with ``h[0] = +1``."""
    m = F.m
    if m > BRUTEFORCE_MAX_M:
        raise ValueError(f"brute force limited to m <= {BRUTEFORCE_MAX_M}, got {m}")
    if m == 0:
        return 0, np.zeros(0, dtype=np.int8)
    R = F.to_dense().astype(np.int32)
    counts = F.column_counts()
    shifts = np.arange(m - 1)
    best, best_h = None, None
    total = 1 << (m - 1)
    block = 1 << 12
    for start in range(0, total, block):
        idx = np.arange(start, min(total, start + block))
        H = np.ones((idx.size, m), dtype=np.int32)
        H[:, 1:] = 1 - 2 * ((idx[:, None] >> shifts) & 1)
        agree = H @ R
        d_pos = (counts[None, :] - agree) // 2
        scores = np.minimum(d_pos, counts[None, :] - d_pos).sum(axis=1)
        k = int(np.argmin(scores))
        if best is None or scores[k] < best:
            best, best_h = int(scores[k]), H[k].astype(np.int8)
    return best, best_h


def reconstruction_rate(truth, estimate) -> float:
    """One minus the best-pairing normalized Hamming distance of two haplotype pairs.

    Each argument is either a single +/-1 haplotype (its complement is
    implied) or a pair ``(h1, h_minus1)``.
    """
    def pair(x):
        if isinstance(x, tuple):
            a, b = x
            return _as_signs(a), _as_signs(b)
        a = _as_signs(x)
        return a, -a

    t1, t2 = pair(truth)
    e1, e2 = pair(estimate)
    m = t1.size
    if not (t2.size == e1.size == e2.size == m):
        raise ValueError("haplotype lengths differ")
    if m == 0:
        raise ValueError("empty haplotypes")

    def D(a, b):
        return int(np.count_nonzero(a != b))

    best = min(D(t1, e1) + D(t2, e2), D(t1, e2) + D(t2, e1))
    return 1.0 - best / (2 * m)


def principal_angle_dist(u, w) -> float:
    """``sqrt(1 - <u, w>^2)`` between the normalized forms of ``u`` and ``w``.

    Evaluated as the symmetrized norm of the orthogonal residual, which keeps
    full precision near zero where ``1 - c^2`` would cancel.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    w = np.asarray(w, dtype=np.float64).ravel()
    if u.size != w.size:
        raise ValueError("vectors differ in length")
    nu, nw = np.linalg.norm(u), np.linalg.norm(w)
    if nu == 0 or nw == 0:
        raise ValueError("distance undefined for a zero vector")
    u, w = u / nu, w / nw
    c = float(np.dot(u, w))
    d1 = np.linalg.norm(w - c * u)
    d2 = np.linalg.norm(u - c * w)
    return float(min(1.0, 0.5 * (d1 + d2)))


def incoherence(u, atol: float = 1e-9) -> float:
    """``sqrt(len(u)) * max|u_i|`` for a unit vector."""
    u = np.asarray(u, dtype=np.float64).ravel()
    if abs(np.linalg.norm(u) - 1.0) > atol:
        raise ValueError("incoherence expects a unit-norm vector")
    return float(np.sqrt(u.size) * np.max(np.abs(u)))


@dataclass
class EvalReport:
    mec: int
    normalized_mec: float
    mec_rate: float
    reconstruction_rate: float | None = None
    dist_u: float | None = None
    dist_v: float | None = None
    incoherence_u: float | None = None
    incoherence_v: float | None = None

    FIELDS = (
        "mec", "normalized_mec", "mec_rate", "reconstruction_rate",
        "dist_u", "dist_v", "incoherence_u", "incoherence_v",
    )

    def row(self) -> dict:
        d = asdict(self)
        return {k: ("" if d[k] is None else d[k]) for k in self.FIELDS}


def evaluate(F: FragmentMatrix, h, truth=None, v=None) -> EvalReport:
    """Score haplotype ``h`` (and optional membership ``v``) on ``F``.

    ``truth`` is an object with ``u_hat``/``v_hat`` attributes, as produced
    by the simulator; ``mec_rate`` is MEC per observed entry.
    """
    h = _as_signs(h)
    mec = mec_score(F, h)
    rep = EvalReport(
        mec=mec,
        normalized_mec=mec / (F.m * F.n),
        mec_rate=mec / F.nnz if F.nnz else 0.0,
        incoherence_u=incoherence(h / np.linalg.norm(h)),
    )
    if v is not None:
        v = _as_signs(v)
        rep.incoherence_v = incoherence(v / np.linalg.norm(v))
    if truth is not None:
        rep.reconstruction_rate = reconstruction_rate(truth.u_hat, h)
        rep.dist_u = principal_angle_dist(h, truth.u_hat)
        if v is not None and np.size(truth.v_hat) == v.size:
            rep.dist_v = principal_angle_dist(v, truth.v_hat)
    return rep
