"""Synthetic haplotypes, read memberships and noisy fragment matrices.

Every generator takes an integer ``seed``; replicate streams are derived
with :func:`replicate_rng` so parallel replicates never share state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .fragmat import FragmentFormatError, FragmentMatrix, Haplotype

N_MAX = 2
# SNPs per read; spans of this size suit long-insert (Fosmid-like) fragments
DEFAULT_READ_LEN = (40, 120)


def replicate_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for ``(seed, *stream)``, e.g. ``(base, replicate)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


@dataclass(frozen=True)
class GroundTruth:
    """Haplotype ``u_hat`` (+/-1, length m) and read membership ``v_hat`` (+/-1, length n)."""

    u_hat: np.ndarray
    v_hat: np.ndarray

    def __post_init__(self):
        for name in ("u_hat", "v_hat"):
            a = np.asarray(getattr(self, name), dtype=np.int8).ravel()
            if not np.all(np.abs(a) == 1):
                raise ValueError(f"{name} entries must be +1 or -1")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def m(self) -> int:
        return int(self.u_hat.size)

    @property
    def n(self) -> int:
        return int(self.v_hat.size)

    @property
    def u_star(self) -> np.ndarray:
        return self.u_hat / np.sqrt(self.m)

    @property
    def v_star(self) -> np.ndarray:
        return self.v_hat / np.sqrt(self.n)

    @property
    def sigma_star(self) -> float:
        return float(np.sqrt(self.m * self.n))

    @property
    def haplotype(self) -> Haplotype:
        return Haplotype(self.u_hat)

    def matrix(self) -> np.ndarray:
        """Dense rank-one truth ``u_hat v_hat^T``."""
        return np.outer(self.u_hat, self.v_hat).astype(np.int8)

    def values_at(self, rows, cols) -> np.ndarray:
        return (self.u_hat[rows] * self.v_hat[cols]).astype(np.int8)


@dataclass(frozen=True)
class SimulationSpec:
    """Parameters of one synthetic instance.

    ``model`` is ``"uniform"`` (uses ``p`` and ``n``) or ``"contiguous"``
    (uses ``coverage`` and ``read_len``; n is produced by the generator).
    """

    m: int
    n: int | None = None
    model: str = "uniform"
    p: float | None = None
    coverage: float | None = None
    read_len: tuple[int, int] = DEFAULT_READ_LEN
    p_e: float = 0.0
    seed: int = 0
    n_max: int = N_MAX

    def __post_init__(self):
        if self.model not in ("uniform", "contiguous"):
            raise ValueError(f"unknown observation model {self.model!r}")
        if not 0 <= self.p_e < 1:
            raise ValueError("p_e must lie in [0, 1)")
        if self.model == "uniform":
            if self.n is None or self.p is None:
                raise ValueError("uniform model needs n and p")
            if not 0 < self.p <= 1:
                raise ValueError("p must lie in (0, 1]")
        else:
            if self.coverage is None or self.coverage <= 0:
                raise ValueError("contiguous model needs coverage > 0")
            lo, hi = self.read_len
            if lo < 2 or hi < lo:
                raise ValueError("read lengths must satisfy 2 <= lo <= hi")

    def echo(self) -> str:
        items = {
            "m": self.m, "n": self.n, "model": self.model, "p": self.p,
            "coverage": self.coverage, "read_len": f"{self.read_len[0]}-{self.read_len[1]}",
            "p_e": self.p_e, "seed": self.seed,
        }
        return " ".join(f"{k}={v}" for k, v in items.items() if v is not None)


def _signs(rng: np.random.Generator, size: int) -> np.ndarray:
    return np.where(rng.random(size) < 0.5, 1, -1).astype(np.int8)


def generate_truth(m: int, n: int, seed: int) -> GroundTruth:
    """Uniform random +/-1 haplotype and read memberships."""
    if m < 2 or n < 2:
        raise ValueError(f"need m >= 2 and n >= 2, got m={m}, n={n}")
    rng = replicate_rng(seed, 0)
    return GroundTruth(_signs(rng, m), _signs(rng, n))


def _flip(vals: np.ndarray, p_e: float, rng: np.random.Generator) -> np.ndarray:
    if p_e <= 0:
        return vals
    flips = rng.random(vals.size) < p_e
    return np.where(flips, -vals, vals).astype(np.int8)


def observe_uniform(truth: GroundTruth, p: float, p_e: float, seed: int) -> FragmentMatrix:
    """Observe each cell independently w.p. ``p`` and flip each observation w.p. ``p_e``."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if not 0 <= p_e < 0.5:
        raise ValueError("p_e must lie in [0, 1/2)")
    rng = replicate_rng(seed, 1)
    m, n = truth.m, truth.n
    mask = rng.random((m, n)) < p
    rows, cols = np.nonzero(mask)
    vals = _flip(truth.values_at(rows, cols), p_e, rng)
    return FragmentMatrix(m, n, rows, cols, vals)


def _draw_len(rng: np.random.Generator, read_len: tuple[int, int], m: int) -> int:
    lo, hi = read_len
    return int(min(m, rng.integers(lo, hi + 1)))


def contiguous_reads(
    m: int,
    coverage: float,
    read_len: tuple[int, int] | int = DEFAULT_READ_LEN,
    rng: np.random.Generator | None = None,
    ensure_linked: bool = True,
) -> list[tuple[int, int]]:
    """Place reads as ``(start, length)`` SNP intervals with uniform random starts.

    A read of drawn length L starts uniformly in ``[2 - L, m - 2]`` and is
    truncated to the SNP range, so every position is equally likely to be
    covered. Reads are added until the total covered cells reach ``coverage * m``.
    With ``ensure_linked`` every adjacent SNP pair is spanned by some read:
    unspanned links get a bridging read, then surplus reads that are not
    needed for linkage are dropped while that moves total coverage closer
    to the target.
    """
    if isinstance(read_len, (int, np.integer)):
        read_len = (int(read_len), int(read_len))
    if coverage <= 0:
        raise ValueError("coverage must be positive")
    if read_len[0] < 2 or read_len[1] < read_len[0]:
        raise ValueError("read lengths must satisfy 2 <= lo <= hi")
    if m < 2:
        raise ValueError("need at least two SNPs")
    rng = rng or np.random.default_rng()
    target = coverage * m
    reads: list[tuple[int, int]] = []
    total = 0
    while total < target:
        # starts may overhang either end so interior coverage is uniform;
        # the truncated read still spans at least two SNPs
        L = _draw_len(rng, read_len, m)
        s = int(rng.integers(2 - L, m - 1))
        lo, hi = max(0, s), min(m, s + L)
        reads.append((lo, hi - lo))
        total += hi - lo
    if not ensure_linked:
        return reads

    # link k joins SNPs k and k+1; a read (s, L) spans links s .. s+L-2
    links = np.zeros(m - 1, dtype=np.int64)
    for s, L in reads:
        links[s:s + L - 1] += 1
    n_orig = len(reads)
    for k in np.flatnonzero(links == 0):
        if links[k]:
            continue
        L = _draw_len(rng, read_len, m)
        s = int(rng.integers(max(0, k - L + 2), min(k, m - L) + 1))
        reads.append((s, L))
        links[s:s + L - 1] += 1
        total += L
    if len(reads) > n_orig:
        for idx in rng.permutation(n_orig):
            s, L = reads[idx]
            if abs(total - L - target) >= abs(total - target):
                continue
            if L > 1 and links[s:s + L - 1].min() < 2:
                continue
            links[s:s + L - 1] -= 1
            total -= L
            reads[idx] = (s, 0)
        reads = [r for r in reads if r[1] > 0]
    return reads


def observe_contiguous(
    u_hat,
    coverage: float,
    read_len: tuple[int, int] | int = DEFAULT_READ_LEN,
    p_e: float = 0.0,
    seed: int = 0,
    ensure_linked: bool = True,
) -> tuple[FragmentMatrix, GroundTruth]:
    """Simulate contiguous reads from the complementary haplotype pair.

    Returns the fragment matrix and a :class:`GroundTruth` whose membership
    vector has one entry per generated read.
    """
    u_hat = np.asarray(u_hat, dtype=np.int8)
    m = u_hat.size
    if not 0 <= p_e < 1:
        raise ValueError("p_e must lie in [0, 1)")
    rng = replicate_rng(seed, 2)
    reads = contiguous_reads(m, coverage, read_len, rng, ensure_linked)
    order = np.argsort([s for s, _ in reads], kind="stable")
    reads = [reads[k] for k in order]
    n = len(reads)
    v_hat = _signs(rng, n)
    lengths = np.array([L for _, L in reads])
    cols = np.repeat(np.arange(n), lengths)
    rows = np.concatenate([np.arange(s, s + L) for s, L in reads])
    truth = GroundTruth(u_hat, v_hat)
    vals = _flip(truth.values_at(rows, cols), p_e, rng)
    return FragmentMatrix(m, n, rows, cols, vals), truth


def simulate(spec: SimulationSpec) -> tuple[FragmentMatrix, GroundTruth]:
    """Generate ``(F, truth)`` for a :class:`SimulationSpec`."""
    if spec.model == "uniform":
        truth = generate_truth(spec.m, spec.n, spec.seed)
        return observe_uniform(truth, spec.p, spec.p_e, spec.seed), truth
    if spec.m < 2:
        raise ValueError("need m >= 2")
    u_hat = _signs(replicate_rng(spec.seed, 0), spec.m)
    return observe_contiguous(u_hat, spec.coverage, spec.read_len, spec.p_e, spec.seed)


# truth sidecar -------------------------------------------------------------


def write_truth(truth: GroundTruth, stream: TextIO, echo: str = "") -> None:
    """Three lines: haplotype as 0/1, memberships as +/-1, ``key=value`` echo."""
    stream.write(truth.haplotype.to_string() + "\n")
    stream.write(" ".join(str(int(x)) for x in truth.v_hat) + "\n")
    stream.write(echo + "\n")


def read_truth(stream: TextIO) -> tuple[GroundTruth, dict[str, str]]:
    lines = stream.read().splitlines()
    if len(lines) < 2:
        raise FragmentFormatError("truth file needs haplotype and membership lines")
    hap = Haplotype.from_string(lines[0])
    try:
        v = np.array([int(t) for t in lines[1].split()], dtype=np.int8)
    except ValueError:
        raise FragmentFormatError("membership line must hold integers", 2) from None
    meta = {}
    if len(lines) > 2:
        for tok in lines[2].split():
            k, _, val = tok.partition("=")
            meta[k] = val
    try:
        return GroundTruth(hap.values, v), meta
    except ValueError as exc:
        raise FragmentFormatError(str(exc), 2) from None
