"""Reed-Muller codes RM(m, r).

Coordinate ``k`` of a codeword is the polynomial evaluated at the point of
``F2^m`` whose little-endian binary expansion is ``k``; variable ``x_{j+1}``
is bit ``j`` of the point.  Generator rows are monomial evaluations ordered
by degree, then lexicographically on the variable index set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import TYPE_CHECKING, Iterator, Sequence

import numpy as np

from .errors import BudgetError
from .gf2 import BitVector, Gf2Matrix, bits_to_int, rank

if TYPE_CHECKING:
    from .camellia import AffineCoset

MAX_M = 20
ENUMERATION_BUDGET_ROWS = 24


def monomials(m: int, r: int) -> list[tuple[int, ...]]:
    return [s for deg in range(r + 1) for s in combinations(range(m), deg)]


def monomial_row(m: int, variables: Sequence[int]) -> int:
    mask = sum(1 << j for j in variables)
    points = np.arange(1 << m)
    return bits_to_int((points & mask) == mask)


def code_dimension(m: int, r: int) -> int:
    return sum(comb(m, i) for i in range(r + 1))


@dataclass(frozen=True)
class RmCode:
    m: int
    r: int
    generator: Gf2Matrix = field(repr=False)

    @property
    def n(self) -> int:
        return 1 << self.m

    @property
    def k(self) -> int:
        return self.generator.n_rows

    def descriptor(self) -> dict:
        return {"family": "rm", "m": self.m, "r": self.r}


@lru_cache(maxsize=None)
def build_rm(m: int, r: int) -> RmCode:
    if not 0 <= m <= MAX_M:
        raise ValueError(f"m={m} outside supported range 0..{MAX_M}")
    if not 0 <= r <= m:
        raise ValueError(f"need 0 <= r <= m, got r={r}, m={m}")
    rows = tuple(monomial_row(m, s) for s in monomials(m, r))
    return RmCode(m, r, Gf2Matrix(len(rows), 1 << m, rows))


def rate_exact(code: RmCode) -> Fraction:
    return Fraction(code_dimension(code.m, code.r), 1 << code.m)


def rate(code: RmCode) -> float:
    return float(rate_exact(code))


def encode(code: RmCode, message: BitVector) -> BitVector:
    return code.generator.combine(message)


def restrict_code(code: RmCode, coset: AffineCoset) -> Gf2Matrix:
    """Row-reduced generator of the code restricted to ``coset``.

    Columns follow the coset's parameter order, so for ``r <= d`` the
    result spans exactly the RM(d, r) code.
    """
    if coset.m != code.m:
        raise ValueError(f"coset lives in F2^{coset.m}, code in F2^{code.m}")
    return code.generator.select_columns(coset.members).rref()


def enumerate_codewords(generator: Gf2Matrix) -> Iterator[BitVector]:
    """All codewords spanned by ``generator``, in Gray-code order."""
    basis = generator.rref().rows
    if len(basis) > ENUMERATION_BUDGET_ROWS:
        raise BudgetError(f"{len(basis)} generator rows exceed the 2^{ENUMERATION_BUDGET_ROWS} budget")
    word = 0
    yield BitVector(generator.n_cols, 0)
    for step in range(1, 1 << len(basis)):
        word ^= basis[(step & -step).bit_length() - 1]
        yield BitVector(generator.n_cols, word)


@lru_cache(maxsize=64)
def codebook(generator: Gf2Matrix) -> np.ndarray:
    """All codewords as rows of a float64 array (used by the MAP decoders)."""
    basis = generator.rref()
    if basis.n_rows > ENUMERATION_BUDGET_ROWS:
        raise BudgetError(f"{basis.n_rows} generator rows exceed the 2^{ENUMERATION_BUDGET_ROWS} budget")
    g = basis.to_array().astype(np.int64)
    k = basis.n_rows
    messages = (np.arange(1 << k)[:, None] >> np.arange(k)[None, :]) & 1
    book = (messages @ g) & 1
    book = book.astype(np.float64)
    book.flags.writeable = False
    return book


def apply_affine(code: RmCode, A: Gf2Matrix, b: BitVector) -> list[int]:
    """Coordinate permutation ``k -> index(A point(k) + b)``."""
    m = code.m
    if A.shape != (m, m) or b.length != m:
        raise ValueError("affine map dimensions do not match the code")
    if rank(A) != m:
        raise ValueError("A is singular")
    return [A.apply(BitVector(m, k)).bits ^ b.bits for k in range(code.n)]


def permute_word(word: BitVector, perm: Sequence[int]) -> BitVector:
    """Move coordinate ``k`` of ``word`` to position ``perm[k]``."""
    out = 0
    for k, target in enumerate(perm):
        if (word.bits >> k) & 1:
            out |= 1 << target
    return BitVector(word.length, out)
