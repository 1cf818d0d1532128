"""Dense linear algebra over GF(2).

Vectors and matrix rows are packed into Python integers, bit ``k`` holding
coordinate ``k``.  All external text formats spell bits out as ``'0'``/``'1'``
characters, coordinate 0 first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import BudgetError


def _parse_bits(text: str) -> int:
    text = text.strip()
    if any(ch not in "01" for ch in text):
        raise ValueError(f"not a 0/1 string: {text!r}")
    value = 0
    for k, ch in enumerate(text):
        if ch == "1":
            value |= 1 << k
    return value


def _format_bits(value: int, length: int) -> str:
    return "".join("1" if (value >> k) & 1 else "0" for k in range(length))


def int_to_bits(value: int, length: int) -> np.ndarray:
    raw = np.frombuffer(value.to_bytes((length + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:length]


def bits_to_int(bits) -> int:
    packed = np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


@dataclass(frozen=True)
class BitVector:
    """Immutable vector over GF(2)."""

    length: int
    bits: int = 0

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if self.bits < 0 or self.bits >> self.length:
            raise ValueError("bits set beyond length")

    @classmethod
    def zeros(cls, length: int) -> BitVector:
        return cls(length, 0)

    @classmethod
    def from_str(cls, text: str) -> BitVector:
        text = text.strip()
        return cls(len(text), _parse_bits(text))

    @classmethod
    def from_array(cls, arr) -> BitVector:
        arr = np.asarray(arr, dtype=np.int64).ravel()
        if np.any((arr != 0) & (arr != 1)):
            raise ValueError("entries must be 0 or 1")
        return cls(len(arr), bits_to_int(arr))

    def to_array(self) -> np.ndarray:
        return int_to_bits(self.bits, self.length)

    def __str__(self) -> str:
        return _format_bits(self.bits, self.length)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, k: int) -> int:
        if not 0 <= k < self.length:
            raise IndexError(k)
        return (self.bits >> k) & 1

    def __xor__(self, other: BitVector) -> BitVector:
        if other.length != self.length:
            raise ValueError("length mismatch")
        return BitVector(self.length, self.bits ^ other.bits)

    def weight(self) -> int:
        return bin(self.bits).count("1")

    def dot(self, other: BitVector) -> int:
        if other.length != self.length:
            raise ValueError("length mismatch")
        return bin(self.bits & other.bits).count("1") & 1


@dataclass(frozen=True)
class Gf2Matrix:
    """Immutable dense matrix over GF(2); ``rows`` holds packed row integers."""

    n_rows: int
    n_cols: int
    rows: tuple[int, ...]

    def __post_init__(self):
        if len(self.rows) != self.n_rows:
            raise ValueError("row count mismatch")
        for row in self.rows:
            if row < 0 or row >> self.n_cols:
                raise ValueError("row has bits beyond column count")

    @classmethod
    def from_ints(cls, rows: Iterable[int], n_cols: int) -> Gf2Matrix:
        rows = tuple(int(r) for r in rows)
        return cls(len(rows), n_cols, rows)

    @classmethod
    def from_strings(cls, rows: Sequence[str], n_cols: int | None = None) -> Gf2Matrix:
        rows = [r.strip() for r in rows]
        if n_cols is None:
            if not rows:
                raise ValueError("cannot infer column count of an empty matrix")
            n_cols = len(rows[0])
        if any(len(r) != n_cols for r in rows):
            raise ValueError("ragged rows")
        return cls(len(rows), n_cols, tuple(_parse_bits(r) for r in rows))

    @classmethod
    def from_text(cls, text: str) -> Gf2Matrix:
        """Parse the one-row-per-line ``0``/``1`` text format."""
        return cls.from_strings([line for line in text.splitlines() if line.strip()])

    @classmethod
    def from_array(cls, arr) -> Gf2Matrix:
        arr = np.asarray(arr, dtype=np.int64)
        if arr.ndim != 2:
            raise ValueError("expected a 2-d array")
        return cls.from_ints((BitVector.from_array(row).bits for row in arr), arr.shape[1])

    @classmethod
    def identity(cls, n: int) -> Gf2Matrix:
        return cls(n, n, tuple(1 << k for k in range(n)))

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int) -> Gf2Matrix:
        return cls(n_rows, n_cols, (0,) * n_rows)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    def to_array(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.uint8)
        for r, row in enumerate(self.rows):
            out[r] = int_to_bits(row, self.n_cols)
        return out

    def to_strings(self) -> list[str]:
        return [_format_bits(row, self.n_cols) for row in self.rows]

    def to_text(self) -> str:
        return "".join(line + "\n" for line in self.to_strings())

    def row(self, r: int) -> BitVector:
        return BitVector(self.n_cols, self.rows[r])

    def column_bits(self, c: int) -> int:
        """Column ``c`` packed as an integer over the row index."""
        return sum(((row >> c) & 1) << r for r, row in enumerate(self.rows))

    def select_columns(self, cols: Sequence[int]) -> Gf2Matrix:
        cols = np.asarray(cols, dtype=np.int64)
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_cols):
            raise IndexError("column index out of range")
        dense = self.to_array()[:, cols]
        return Gf2Matrix(self.n_rows, len(cols), tuple(bits_to_int(row) for row in dense))

    def apply(self, v: BitVector) -> BitVector:
        """Matrix-vector product ``M @ v`` (``v`` as a column)."""
        if v.length != self.n_cols:
            raise ValueError("dimension mismatch")
        out = 0
        for r, row in enumerate(self.rows):
            if bin(row & v.bits).count("1") & 1:
                out |= 1 << r
        return BitVector(self.n_rows, out)

    def combine(self, message: BitVector) -> BitVector:
        """Row combination ``message @ M``."""
        if message.length != self.n_rows:
            raise ValueError("dimension mismatch")
        out = 0
        for r, row in enumerate(self.rows):
            if (message.bits >> r) & 1:
                out ^= row
        return BitVector(self.n_cols, out)

    def rref(self) -> Gf2Matrix:
        """Reduced row-echelon form with zero rows dropped."""
        reduced, _ = _rref_rows(self.rows, self.n_cols)
        return Gf2Matrix(len(reduced), self.n_cols, tuple(reduced))

    def rank(self) -> int:
        return rank(self)

    def kernel(self) -> Gf2Matrix:
        """Basis (as rows) of ``{x : M x = 0}``."""
        reduced, pivots = _rref_rows(self.rows, self.n_cols)
        free = [c for c in range(self.n_cols) if c not in set(pivots)]
        basis = []
        for f in free:
            x = 1 << f
            for row, p in zip(reduced, pivots):
                if (row >> f) & 1:
                    x |= 1 << p
            basis.append(x)
        return Gf2Matrix(len(basis), self.n_cols, tuple(basis))

    def row_space(self) -> Iterator[BitVector]:
        """Every vector of the row space, once each."""
        basis = self.rref().rows
        for mask in range(1 << len(basis)):
            value = 0
            for k, row in enumerate(basis):
                if (mask >> k) & 1:
                    value ^= row
            yield BitVector(self.n_cols, value)


def _rref_rows(rows: Iterable[int], n_cols: int) -> tuple[list[int], list[int]]:
    reduced: list[int] = []
    pivots: list[int] = []
    work = [r for r in rows if r]
    for c in range(n_cols):
        bit = 1 << c
        for k, row in enumerate(work):
            if row & bit:
                pivot_row = work.pop(k)
                break
        else:
            continue
        work = [r ^ pivot_row if r & bit else r for r in work]
        reduced = [r ^ pivot_row if r & bit else r for r in reduced]
        reduced.append(pivot_row)
        pivots.append(c)
        work = [r for r in work if r]
        if not work:
            break
    return reduced, pivots


def _xor_basis_insert(basis: dict[int, int], v: int) -> bool:
    # basis maps leading bit -> vector; returns False if v is dependent
    while v:
        top = v.bit_length() - 1
        if top not in basis:
            basis[top] = v
            return True
        v ^= basis[top]
    return False


def is_independent(vectors: Iterable[int]) -> bool:
    basis: dict[int, int] = {}
    return all(_xor_basis_insert(basis, int(v)) for v in vectors)


def rank(M: Gf2Matrix) -> int:
    """Dimension of the row space of ``M``."""
    basis: dict[int, int] = {}
    return sum(_xor_basis_insert(basis, row) for row in M.rows)


def solve_membership(M: Gf2Matrix, v: BitVector) -> bool:
    """True iff ``v`` lies in the row space of ``M``."""
    if v.length != M.n_cols:
        raise ValueError(f"vector length {v.length} != matrix columns {M.n_cols}")
    basis: dict[int, int] = {}
    for row in M.rows:
        _xor_basis_insert(basis, row)
    return not _xor_basis_insert(basis, v.bits)


def gaussian_binomial(m: int, d: int) -> int:
    """Number of ``d``-dimensional subspaces of ``F2^m`` (exact)."""
    if not 0 <= d <= m:
        raise ValueError(f"need 0 <= d <= m, got d={d}, m={m}")
    num = 1
    den = 1
    for i in range(d):
        num *= (1 << (m - i)) - 1
        den *= (1 << (d - i)) - 1
    return num // den


def random_basis_ints(m: int, d: int, rng: np.random.Generator) -> list[int]:
    """A uniformly random full-rank ``d x m`` matrix as packed rows.

    Rejection sampling over all ``d x m`` matrices; every subspace has the
    same number of ordered bases, so the spanned subspace is uniform.
    """
    if not 0 < d <= m:
        raise ValueError(f"need 0 < d <= m, got d={d}, m={m}")
    while True:
        if m <= 62:
            rows = [int(r) for r in rng.integers(0, 1 << m, size=d, dtype=np.int64)]
        else:
            bits = rng.integers(0, 2, size=(d, m), dtype=np.uint8)
            rows = [BitVector.from_array(b).bits for b in bits]
        if is_independent(rows):
            return rows


def random_subspace(m: int, d: int, rng: np.random.Generator) -> Gf2Matrix:
    """Basis of a uniformly drawn ``d``-dimensional subspace of ``F2^m``."""
    return Gf2Matrix(d, m, tuple(random_basis_ints(m, d, rng)))


def enumerate_subspaces(m: int, d: int) -> Iterator[Gf2Matrix]:
    """Every ``d``-dimensional subspace of ``F2^m``, as its RREF basis."""
    if not 0 <= d <= m:
        raise ValueError(f"need 0 <= d <= m, got d={d}, m={m}")
    if gaussian_binomial(m, d) > 1 << 24:
        raise BudgetError(f"too many subspaces for m={m}, d={d}")
    # RREF bases: choose pivot columns, fill non-pivot positions to the
    # right of each pivot freely (pivot = lowest set bit here).
    from itertools import combinations

    for pivots in combinations(range(m), d):
        slots = []
        for r, p in enumerate(pivots):
            for c in range(p + 1, m):
                if c not in pivots:
                    slots.append((r, c))
        for fill in range(1 << len(slots)):
            rows = [1 << p for p in pivots]
            for k, (r, c) in enumerate(slots):
                if (fill >> k) & 1:
                    rows[r] |= 1 << c
            yield Gf2Matrix(d, m, tuple(rows))


def span_ints(basis: Sequence[int]) -> list[int]:
    """Span of ``basis`` listed in little-endian coefficient order."""
    out = [0]
    for b in basis:
        out = out + [x ^ b for x in out]
    return out
