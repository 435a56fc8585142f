"""Sparse SNP-fragment matrix: storage, validation, and the text fragment format.

Rows are SNP positions, columns are reads. Observed entries carry +1/-1;
unobserved cells are implicit zeros and never stored.

Fragment format (1-based on disk, 0-based in memory)::

    # comment
    m n
    j i1 a1 i2 a2 ...

where ``j`` is the read index, ``i_k`` strictly increasing SNP indices and
``a_k`` alleles in {0, 1}. Allele 0 maps to +1 and allele 1 to -1.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

#: allele -> sign convention used by the parser and the haplotype writer
ALLELE_TO_SIGN = {0: 1, 1: -1}
SIGN_TO_ALLELE = {1: 0, -1: 1}
CONVENTION = "0->+1,1->-1"


class FragmentFormatError(ValueError):
    """Raised for malformed fragment or haplotype text, with the offending line."""

    def __init__(self, msg: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            msg = f"line {lineno}: {msg}"
        super().__init__(msg)


class FragmentMatrix:
    """Immutable, dual-indexed sparse +/-1 matrix over an observed set.

    Parameters
    ----------
    m, n : int
        Number of SNPs (rows) and reads (columns).
    rows, cols, vals : array_like
        Coordinates and values of the observed entries. Values must be +/-1
        and every ``(row, col)`` pair must be unique.
    """

    __slots__ = ("m", "n", "_csr", "_csc", "_rows", "_cols", "_vals")

    def __init__(self, m: int, n: int, rows, cols, vals):
        m, n = int(m), int(n)
        if m < 0 or n < 0:
            raise ValueError(f"negative dimensions ({m}, {n})")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals).ravel()
        if not (rows.size == cols.size == vals.size):
            raise ValueError("rows, cols and vals must have equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n:
                raise ValueError("index out of bounds")
            if not np.all(np.abs(vals) == 1):
                raise ValueError("observed values must be +1 or -1")
        # sort column-major; duplicates become adjacent
        order = np.lexsort((rows, cols))
        rows, cols, vals = rows[order], cols[order], vals[order].astype(np.int8)
        if rows.size > 1:
            dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate entry ({rows[k]}, {cols[k]})")
        for a in (rows, cols, vals):
            a.setflags(write=False)
        self.m, self.n = m, n
        self._rows, self._cols, self._vals = rows, cols, vals
        data = vals.astype(np.float64)
        self._csc = sp.csc_matrix((data, (rows, cols)), shape=(m, n))
        self._csr = self._csc.tocsr()
        self._csc.sort_indices()
        self._csr.sort_indices()

    # construction helpers -------------------------------------------------

    @classmethod
    def from_dense(cls, R) -> "FragmentMatrix":
        """Build from a dense array whose zeros mark unobserved cells."""
        R = np.asarray(R)
        if R.ndim != 2:
            raise ValueError("expected a 2-d array")
        rows, cols = np.nonzero(R)
        return cls(R.shape[0], R.shape[1], rows, cols, R[rows, cols])

    @classmethod
    def from_columns(cls, m: int, columns: Iterable[dict[int, int]]) -> "FragmentMatrix":
        """Build from a sequence of ``{row: value}`` mappings, one per read."""
        rows, cols, vals = [], [], []
        n = 0
        for j, col in enumerate(columns):
            n = j + 1
            for i, a in col.items():
                rows.append(i)
                cols.append(j)
                vals.append(a)
        return cls(m, n, rows, cols, vals)

    # basic views -----------------------------------------------------------

    @property
    def nnz(self) -> int:
        """Size of the observed set."""
        return int(self._vals.size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    def entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Read-only ``(rows, cols, vals)`` arrays, sorted by column then row."""
        return self._rows, self._cols, self._vals

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    @property
    def csc(self) -> sp.csc_matrix:
        return self._csc

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Sorted covered rows of read ``j`` and their values."""
        lo, hi = self._csc.indptr[j], self._csc.indptr[j + 1]
        return self._csc.indices[lo:hi], self._csc.data[lo:hi]

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Sorted covering reads of SNP ``i`` and their values."""
        lo, hi = self._csr.indptr[i], self._csr.indptr[i + 1]
        return self._csr.indices[lo:hi], self._csr.data[lo:hi]

    def column_index(self) -> list[np.ndarray]:
        return [self.column(j)[0] for j in range(self.n)]

    def row_index(self) -> list[np.ndarray]:
        return [self.row(i)[0] for i in range(self.m)]

    def column_counts(self) -> np.ndarray:
        return np.diff(self._csc.indptr)

    def row_counts(self) -> np.ndarray:
        return np.diff(self._csr.indptr)

    def mask(self) -> np.ndarray:
        """Dense boolean observation mask."""
        out = np.zeros((self.m, self.n), dtype=bool)
        out[self._rows, self._cols] = True
        return out

    def to_dense(self) -> np.ndarray:
        """Dense P_Omega(R) with zeros at unobserved cells."""
        out = np.zeros((self.m, self.n), dtype=np.int8)
        out[self._rows, self._cols] = self._vals
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, FragmentMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self._rows, other._rows)
            and np.array_equal(self._cols, other._cols)
            and np.array_equal(self._vals, other._vals)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"FragmentMatrix(m={self.m}, n={self.n}, nnz={self.nnz})"

    # linear algebra --------------------------------------------------------

    def apply(self, y) -> np.ndarray:
        """``P_Omega(R) @ y`` for a length-n vector."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got shape {y.shape}")
        return self._csr @ y

    def apply_transpose(self, x) -> np.ndarray:
        """``P_Omega(R).T @ x`` for a length-m vector."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.m,):
            raise ValueError(f"expected vector of length {self.m}, got shape {x.shape}")
        return self._csc.T @ x

    def column_dot(self, j: int, u) -> float:
        """Sum of ``R_ij * u_i`` over the observed rows of column ``j``."""
        idx, val = self.column(j)
        return float(np.dot(val, np.asarray(u, dtype=np.float64)[idx]))

    def row_dot(self, i: int, v) -> float:
        """Sum of ``R_ij * v_j`` over the observed columns of row ``i``."""
        idx, val = self.row(i)
        return float(np.dot(val, np.asarray(v, dtype=np.float64)[idx]))


def sample_probability(F: FragmentMatrix) -> float:
    """Fraction ``|Omega| / (m n)`` of observed cells."""
    if F.m * F.n == 0:
        raise ValueError("empty matrix has no sample probability")
    return F.nnz / (F.m * F.n)


@dataclass(frozen=True)
class Haplotype:
    """A length-m +/-1 haplotype with the allele convention it was encoded under."""

    values: np.ndarray
    convention: str = field(default=CONVENTION)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int8).ravel()
        if not np.all(np.abs(v) == 1):
            raise ValueError("haplotype entries must be +1 or -1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.values.size)

    def complement(self) -> "Haplotype":
        return Haplotype(-self.values, self.convention)

    def to_string(self) -> str:
        return "".join("1" if x < 0 else "0" for x in self.values)

    @classmethod
    def from_string(cls, s: str) -> "Haplotype":
        s = s.strip()
        if not s or set(s) - {"0", "1"}:
            raise FragmentFormatError("haplotype must be a non-empty string over {0,1}")
        return cls(np.array([ALLELE_TO_SIGN[int(c)] for c in s], dtype=np.int8))


# text format -------------------------------------------------------------


def _ints(tokens: list[str], lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise FragmentFormatError(f"non-integer token in {' '.join(tokens)!r}", lineno) from None


def parse_fragments(stream: TextIO | str, warn_short: bool = True) -> FragmentMatrix:
    """Parse fragment-format text into a validated :class:`FragmentMatrix`.

    ``stream`` may be a file object or the text itself. Reads covering at
    most one SNP are accepted but logged as warnings.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = None
    rows: list[int] = []
    cols: list[int] = []
    vals: list[int] = []
    seen: set[tuple[int, int]] = set()
    short = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if header is None:
            if len(tokens) != 2:
                raise FragmentFormatError("header must be 'm n'", lineno)
            m, n = _ints(tokens, lineno)
            if m < 0 or n < 0:
                raise FragmentFormatError("negative dimensions in header", lineno)
            header = (m, n)
            continue
        m, n = header
        nums = _ints(tokens, lineno)
        if len(nums) < 1 or len(nums) % 2 != 1:
            raise FragmentFormatError("expected 'j i1 a1 i2 a2 ...'", lineno)
        j = nums[0]
        if not 1 <= j <= n:
            raise FragmentFormatError(f"read index {j} out of bounds (n={n})", lineno)
        pairs = nums[1:]
        prev = 0
        for i, a in zip(pairs[0::2], pairs[1::2]):
            if not 1 <= i <= m:
                raise FragmentFormatError(f"SNP index {i} out of bounds (m={m})", lineno)
            if i <= prev:
                raise FragmentFormatError("SNP indices must be strictly increasing", lineno)
            prev = i
            if a not in ALLELE_TO_SIGN:
                raise FragmentFormatError(f"allele {a} not in {{0,1}}", lineno)
            key = (i - 1, j - 1)
            if key in seen:
                raise FragmentFormatError(f"duplicate entry (SNP {i}, read {j})", lineno)
            seen.add(key)
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(ALLELE_TO_SIGN[a])
        if len(pairs) // 2 <= 1:
            short += 1
    if header is None:
        raise FragmentFormatError("missing 'm n' header")
    if short and warn_short:
        log.warning("%d read line(s) cover at most one SNP", short)
    F = FragmentMatrix(header[0], header[1], rows, cols, vals)
    if F.nnz == 0:
        log.warning("fragment matrix has no observed entries")
    return F


def format_fragments(F: FragmentMatrix, comments: Iterable[str] = ()) -> str:
    """Serialize to fragment-format text; reads with no entries are omitted."""
    out = [f"# {c}" for c in comments]
    out.append(f"{F.m} {F.n}")
    for j in range(F.n):
        idx, val = F.column(j)
        if idx.size == 0:
            continue
        parts = [str(j + 1)]
        for i, a in zip(idx, val):
            parts.append(str(int(i) + 1))
            parts.append(str(SIGN_TO_ALLELE[int(a)]))
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"


def write_fragments(F: FragmentMatrix, stream: TextIO, comments: Iterable[str] = ()) -> None:
    stream.write(format_fragments(F, comments))
