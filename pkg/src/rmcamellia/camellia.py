"""Coset camellias for Reed-Muller codes.

A petal is an affine coset ``shift + V`` of a ``d``-dimensional subspace
``V`` of ``F2^m``; the petal collection is every such coset.  Because the
collection is invariant under the affine group, a uniformly drawn petal
containing ``i`` is ``point(i) + V`` with ``V`` uniform.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .errors import BudgetError
from .gf2 import (
    BitVector,
    Gf2Matrix,
    enumerate_subspaces,
    gaussian_binomial,
    random_basis_ints,
    random_subspace,
    rank,
    solve_membership,
    span_ints,
)
from .rm import RmCode, apply_affine, rate_exact, restrict_code


@dataclass(frozen=True)
class AffineCoset:
    basis: Gf2Matrix
    shift: BitVector
    members: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.shift.length != self.basis.n_cols:
            raise ValueError("shift length differs from basis width")
        if rank(self.basis) != self.basis.n_rows:
            raise ValueError("coset basis is not full rank")
        members = tuple(self.shift.bits ^ v for v in span_ints(self.basis.rows))
        object.__setattr__(self, "members", members)

    @property
    def m(self) -> int:
        return self.basis.n_cols

    @property
    def d(self) -> int:
        return self.basis.n_rows

    def __contains__(self, k: int) -> bool:
        return k in self.member_set

    @property
    def member_set(self) -> frozenset[int]:
        return frozenset(self.members)

    def parameter_of(self, k: int) -> int:
        """Position of coordinate ``k`` in the member ordering."""
        try:
            return self.members.index(k)
        except ValueError:
            raise ValueError(f"coordinate {k} is not in the petal") from None

    def to_descriptor(self) -> dict:
        return {"basis": self.basis.to_strings(), "shift": str(self.shift)}

    @classmethod
    def from_descriptor(cls, desc: dict) -> AffineCoset:
        shift = BitVector.from_str(desc["shift"])
        basis = Gf2Matrix.from_strings(desc["basis"], n_cols=shift.length)
        return cls(basis, shift)


@dataclass(frozen=True)
class CamelliaSpec:
    m: int
    d: int
    rho: Fraction

    @classmethod
    def for_code(cls, m: int, d: int | None = None) -> CamelliaSpec:
        if d is None:
            d = petal_dimension(m)
        return cls(m, d, correlation_rho(m, d))

    @property
    def petal_count(self) -> int:
        return gaussian_binomial(self.m, self.d) << (self.m - self.d)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "d": self.d,
            "rho": str(self.rho),
            "rho_float": float(self.rho),
            "petal_count": self.petal_count,
            "petals_per_coordinate": gaussian_binomial(self.m, self.d),
        }


def petal_dimension(m: int) -> int:
    """``m - ceil(2 sqrt(m) / log2(m))``, clamped to ``[1, m-1]``."""
    if m < 5:
        raise ValueError(f"petal dimension formula needs m >= 5, got {m}")
    d = m - math.ceil(2 * math.sqrt(m) / math.log2(m))
    return min(max(d, 1), m - 1)


def _check_dims(m: int, d: int) -> None:
    if not 1 <= d <= m:
        raise ValueError(f"need 1 <= d <= m, got d={d}, m={m}")


def sample_petal_containing(m: int, d: int, i: int, rng: np.random.Generator) -> AffineCoset:
    _check_dims(m, d)
    if not 0 <= i < 1 << m:
        raise ValueError(f"coordinate {i} out of range for m={m}")
    return AffineCoset(random_subspace(m, d, rng), BitVector(m, i))


def sample_petal_members(m: int, d: int, i: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Members of ``count`` independent uniform petals containing ``i``.

    Same law as :func:`sample_petal_containing`; returns an int array of
    shape ``(count, 2**d)`` whose column 0 is ``i``.
    """
    _check_dims(m, d)
    out = np.empty((count, 1 << d), dtype=np.int64)
    for row in range(count):
        out[row] = np.bitwise_xor(span_ints(random_basis_ints(m, d, rng)), i)
    return out


def correlation_rho(m: int, d: int) -> Fraction:
    """Exact ``P(j in P | i in P)`` for ``i != j`` under uniform coset petals."""
    _check_dims(m, d)
    return Fraction((1 << d) - 1, (1 << m) - 1)


def rho_asymptotic_bound(m: int) -> float:
    if m < 5:
        raise ValueError(f"need m >= 5, got {m}")
    return 2.0 ** -(m - petal_dimension(m))


def enumerate_petals(m: int, d: int) -> Iterator[AffineCoset]:
    """Every ``d``-dimensional coset of ``F2^m`` exactly once."""
    _check_dims(m, d)
    if gaussian_binomial(m, d) << (m - d) > 1 << 20:
        raise BudgetError(f"too many petals for m={m}, d={d}")
    for basis in enumerate_subspaces(m, d):
        seen: set[int] = set()
        span = span_ints(basis.rows)
        for s in range(1 << m):
            if s in seen:
                continue
            seen.update(s ^ v for v in span)
            yield AffineCoset(basis, BitVector(m, s))


def brute_force_rho(m: int, d: int, i: int, j: int) -> Fraction:
    """``P(j in P | i in P)`` by counting over all petals."""
    containing_i = 0
    containing_both = 0
    for petal in enumerate_petals(m, d):
        members = petal.member_set
        if i in members:
            containing_i += 1
            containing_both += j in members
    return Fraction(containing_both, containing_i)


def _random_invertible(m: int, rng: np.random.Generator) -> Gf2Matrix:
    return Gf2Matrix(m, m, tuple(random_basis_ints(m, m, rng)))


@dataclass
class CamelliaReport:
    invariant: bool
    max_restricted_rate: float
    delta: float
    rho_exact: Fraction
    rho_bound: Fraction
    rho_unconditional: Fraction
    passed: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        for key in ("rho_exact", "rho_bound", "rho_unconditional"):
            out[key] = float(out[key])
        return out


def verify_camellia(
    code: RmCode,
    d: int,
    rate_margin: float,
    *,
    rho_threshold: float | None = None,
    n_maps: int = 8,
    rng: np.random.Generator | None = None,
) -> CamelliaReport:
    """Check the camellia-code conditions for the dimension-``d`` coset petals.

    Exhaustive over all petals, so limited to ``m <= 5``.  Invariance is
    checked on ``n_maps`` random affine maps, each of which must preserve the
    code and map the petal collection onto itself.
    """
    m = code.m
    _check_dims(m, d)
    if m > 5:
        raise BudgetError(f"exhaustive camellia check limited to m <= 5, got {m}")
    rng = rng if rng is not None else np.random.default_rng(0)
    petals = list(enumerate_petals(m, d))
    collection = {p.member_set for p in petals}

    invariant = True
    for _ in range(n_maps):
        A = _random_invertible(m, rng)
        b = BitVector(m, int(rng.integers(0, 1 << m)))
        perm = apply_affine(code, A, b)
        for row in code.generator.rows:
            moved = sum(1 << perm[k] for k in range(code.n) if (row >> k) & 1)
            if not solve_membership(code.generator, BitVector(code.n, moved)):
                invariant = False
        if any(frozenset(perm[k] for k in p.members) not in collection for p in petals):
            invariant = False

    code_rate = rate_exact(code)
    max_rate = max(Fraction(restrict_code(code, p).n_rows, 1 << d) for p in petals)
    delta = max_rate - code_rate

    n = code.n
    counts = np.zeros((n, n), dtype=np.int64)
    for p in petals:
        idx = np.array(p.members)
        counts[np.ix_(idx, idx)] += 1
    per_point = np.diag(counts).copy()
    rho_exact = Fraction(0)
    for i in range(n):
        for j in range(n):
            if i != j:
                rho_exact = max(rho_exact, Fraction(int(counts[i, j]), int(per_point[i])))
    rho_uncond = max(Fraction(int(c), len(petals)) for c in per_point)
    rho_bound = correlation_rho(m, d)

    passed = invariant and delta <= rate_margin and rho_exact <= rho_bound
    if rho_threshold is not None:
        passed = passed and rho_exact <= rho_threshold
    return CamelliaReport(invariant, float(max_rate), float(delta), rho_exact, rho_bound, rho_uncond, passed)
