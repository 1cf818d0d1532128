"""Exact small-instance oracles for the boosting argument.

Functions of the noise are tabulated over finite product measures, so every
quantity here (contributions, covariances, entropies, local error
probabilities) is computed by exhaustive summation rather than sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from itertools import combinations
from typing import Sequence

import numpy as np

from .camellia import AffineCoset, correlation_rho
from .channel import SymmetricChannel, capacity, noise_alphabet, noise_table
from .decoder import TIE, Code, generator_of, map_decide, petal_codebook
from .errors import BudgetError
from .gf2 import BitVector, enumerate_subspaces
from .rm import codebook

MAX_TABLE = 1 << 16
MAX_AXES = 12


@dataclass
class TabulatedFunction:
    """Real function of independent discrete noise coordinates.

    ``values`` has one axis per coordinate; ``probs[a]`` is the law of the
    coordinate on axis ``a``.
    """

    values: np.ndarray
    probs: list[np.ndarray]
    coords: tuple[int, ...] = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.probs = [np.asarray(p, dtype=np.float64) for p in self.probs]
        if self.values.ndim != len(self.probs):
            raise ValueError("need one probability vector per axis")
        if self.values.shape != tuple(len(p) for p in self.probs):
            raise ValueError("probability vectors do not match table shape")
        if not self.coords:
            self.coords = tuple(range(self.values.ndim))

    @property
    def n_axes(self) -> int:
        return self.values.ndim

    def weights(self) -> np.ndarray:
        """Joint probability table of the product measure."""
        if not self.probs:
            return np.ones(())
        return reduce(np.multiply.outer, self.probs)

    def expect(self, arr: np.ndarray | None = None) -> float:
        arr = self.values if arr is None else arr
        return float(np.sum(arr * self.weights()))

    def conditional(self, keep: Sequence[int]) -> np.ndarray:
        """``E[Q | Z_keep]`` broadcast back to the full table shape."""
        out = self.values
        for axis in range(self.n_axes):
            if axis in keep:
                continue
            shape = [1] * self.n_axes
            shape[axis] = -1
            out = np.sum(out * self.probs[axis].reshape(shape), axis=axis, keepdims=True)
        return np.broadcast_to(out, self.values.shape)

    def marginal(self, keep: Sequence[int]) -> np.ndarray:
        """``E[Q | Z_keep]`` as a table over the ``keep`` axes, in that order."""
        cond = self.conditional(keep)
        index = tuple(slice(None) if a in keep else 0 for a in range(self.n_axes))
        reduced = cond[index]
        order = sorted(keep)
        return np.transpose(reduced, [order.index(a) for a in keep]) if keep else reduced


def _check_budget(f: TabulatedFunction) -> None:
    if f.n_axes > MAX_AXES or f.values.size > MAX_TABLE:
        raise BudgetError(f"table with {f.n_axes} axes / {f.values.size} entries exceeds the budget")


def _subsets(n: int):
    for size in range(n + 1):
        yield from combinations(range(n), size)


def contribution(f: TabulatedFunction, S: Sequence[int]) -> np.ndarray:
    """Efron-Stein contribution of the axis set ``S``, tabulated on the full grid.

    Alternating sum over ``S' <= S`` of ``(-1)^{|S|-|S'|} E[Q | Z_{S'}]``.
    """
    _check_budget(f)
    S = tuple(sorted(set(S)))
    total = np.zeros(f.values.shape)
    for size in range(len(S) + 1):
        sign = -1.0 if (len(S) - size) % 2 else 1.0
        for sub in combinations(S, size):
            total = total + sign * f.conditional(sub)
    return total


@dataclass
class ContributionTable:
    function: TabulatedFunction
    contributions: dict[frozenset, np.ndarray]
    energies: dict[frozenset, float]


def decompose(f: TabulatedFunction) -> ContributionTable:
    """All ``2^k`` contributions, by Moebius inversion of the conditionals."""
    _check_budget(f)
    conds = {frozenset(s): f.conditional(s) for s in _subsets(f.n_axes)}
    contributions = {}
    for S in conds:
        total = np.zeros(f.values.shape)
        for size in range(len(S) + 1):
            sign = -1.0 if (len(S) - size) % 2 else 1.0
            for sub in combinations(sorted(S), size):
                total = total + sign * conds[frozenset(sub)]
        contributions[S] = total
    energies = {S: f.expect(c * c) for S, c in contributions.items()}
    return ContributionTable(f, contributions, energies)


@dataclass
class ParsevalReport:
    parseval_gap: float
    max_cross_term: float
    reconstruction_error: float
    energies: dict[frozenset, float] = field(repr=False)

    @property
    def max_violation(self) -> float:
        return max(self.parseval_gap, self.max_cross_term, self.reconstruction_error)

    def to_dict(self) -> dict:
        return {
            "parseval_gap": self.parseval_gap,
            "max_cross_term": self.max_cross_term,
            "reconstruction_error": self.reconstruction_error,
            "max_violation": self.max_violation,
            "energies": {",".join(map(str, sorted(S))) or "{}": e for S, e in sorted(
                self.energies.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))},
        }


def parseval_check(f: TabulatedFunction) -> ParsevalReport:
    table = decompose(f)
    keys = list(table.contributions)
    total_energy = f.expect(f.values**2)
    parseval_gap = abs(sum(table.energies.values()) - total_energy)
    cross = 0.0
    for a in range(len(keys)):
        for b in range(a + 1, len(keys)):
            term = f.expect(table.contributions[keys[a]] * table.contributions[keys[b]])
            cross = max(cross, abs(term))
    recon = sum(table.contributions.values())
    recon_err = float(np.max(np.abs(recon - f.values)))
    return ParsevalReport(parseval_gap, cross, recon_err, table.energies)


def petal_function(code: Code, channel: SymmetricChannel, petal: AffineCoset, i: int) -> TabulatedFunction:
    """E_{P,i} tabulated over the noise states of the petal minus ``i``."""
    t = petal.parameter_of(i)
    others = [k for pos, k in enumerate(petal.members) if pos != t]
    alphabet = noise_alphabet(channel)
    n_states = len(alphabet) ** len(others)
    if n_states > MAX_TABLE:
        raise BudgetError(f"{n_states} noise states on the petal exceed the budget")
    _, comps, flips = noise_table(channel, len(others))
    size = len(petal.members)
    eps = np.full((len(comps), size), 0.5)
    out = np.zeros((len(comps), size))
    cols = [pos for pos in range(size) if pos != t]
    eps[:, cols] = channel.epsilons[comps]
    out[:, cols] = flips
    guess, _ = map_decide(petal_codebook(code, petal), t, eps, out, exclude_target=True)
    evals = np.where(guess == TIE, 0, np.where(guess == 0, 1, -1)).astype(np.float64)
    probs = np.array([p for p, _ in alphabet])
    shape = (len(alphabet),) * len(others)
    return TabulatedFunction(evals.reshape(shape), [probs] * len(others), tuple(others))


def petals_containing(m: int, d: int, i: int) -> list[AffineCoset]:
    return [AffineCoset(V, BitVector(m, i)) for V in enumerate_subspaces(m, d)]


def pair_covariance(f: TabulatedFunction, g: TabulatedFunction) -> float:
    """``Cov(f(Z), g(Z))`` for functions sharing the coordinates in common."""
    shared = sorted(set(f.coords) & set(g.coords))
    mean_f, mean_g = f.expect(), g.expect()
    if not shared:
        return 0.0
    fa = [f.coords.index(c) for c in shared]
    ga = [g.coords.index(c) for c in shared]
    mf = f.marginal(fa)
    mg = g.marginal(ga)
    w = reduce(np.multiply.outer, [f.probs[a] for a in fa])
    return float(np.sum(w * mf * mg) - mean_f * mean_g)


def exact_expected_covariance(code: Code, channel: SymmetricChannel, i: int, d: int) -> float:
    """Average over independent uniform petals ``P, P'`` containing ``i`` of
    ``Cov(E_{P,i}, E_{P',i})``, computed exactly."""
    gen = generator_of(code)
    m = gen.n_cols.bit_length() - 1
    petals = petals_containing(m, d, i)
    if len(petals) ** 2 > 1 << 22:
        raise BudgetError(f"{len(petals)} petals give too many pairs")
    funcs = [petal_function(code, channel, p, i) for p in petals]
    total = math.fsum(pair_covariance(f, g) for f in funcs for g in funcs)
    return total / len(funcs) ** 2


def covariance_bound(m: int, d: int) -> float:
    return math.sqrt(correlation_rho(m, d))


def chebyshev_majority_bound(mean: float, avg_cov: float) -> float:
    """Chebyshev bound on ``P(sum E_i <= 0)`` from the mean and averaged covariance."""
    if mean <= 0:
        raise ValueError("mean must be positive")
    return min(1.0, max(0.0, avg_cov) / mean**2)


@dataclass(frozen=True)
class SyntheticEnsemble:
    """Exchangeable variables in {-1, 0, 1} with closed-form moments.

    With probability ``shared`` every variable equals one common sign
    (``+1`` w.p. ``p_common``); otherwise they are i.i.d. with law
    ``(p_minus, p_zero, p_plus)``.
    """

    k: int
    shared: float
    p_common: float
    p_minus: float
    p_zero: float
    p_plus: float

    @property
    def mean(self) -> float:
        return self.shared * (2 * self.p_common - 1) + (1 - self.shared) * (self.p_plus - self.p_minus)

    @property
    def avg_cov(self) -> float:
        mu = self.mean
        second = self.shared + (1 - self.shared) * (self.p_plus + self.p_minus)
        cross = self.shared + (1 - self.shared) * (self.p_plus - self.p_minus) ** 2
        var = second - mu**2
        cov = cross - mu**2
        return (self.k * var + self.k * (self.k - 1) * cov) / self.k**2

    def sample_sums(self, runs: int, rng: np.random.Generator) -> np.ndarray:
        is_shared = rng.random(runs) < self.shared
        common = np.where(rng.random(runs) < self.p_common, 1, -1)
        indep = rng.choice([-1, 0, 1], size=(runs, self.k), p=[self.p_minus, self.p_zero, self.p_plus])
        return np.where(is_shared, common * self.k, indep.sum(axis=1))


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


@dataclass
class EntropyAudit:
    n: int
    rate: float
    capacity: float
    joint_entropy: float
    chain_entropies: list[float]
    single_coordinate: int | None
    single_entropy: float | None
    entropy_bound: float | None
    p_loc: list[float]
    tie_mass: list[float]

    @property
    def chain_rule_gap(self) -> float:
        return abs(math.fsum(self.chain_entropies) - self.joint_entropy)

    @property
    def bound_holds(self) -> bool | None:
        if self.entropy_bound is None:
            return None
        return self.joint_entropy <= self.entropy_bound + 1e-9

    def predictable(self, margin: float) -> list[int]:
        """Coordinates with ``P_loc,j <= 1/2 - margin``."""
        return [j for j, p in enumerate(self.p_loc) if p <= 0.5 - margin]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "rate": self.rate,
            "capacity": self.capacity,
            "joint_entropy": self.joint_entropy,
            "chain_entropies": self.chain_entropies,
            "chain_rule_gap": self.chain_rule_gap,
            "single_coordinate": self.single_coordinate,
            "single_entropy": self.single_entropy,
            "entropy_bound": self.entropy_bound,
            "bound_holds": self.bound_holds,
            "p_loc": self.p_loc,
            "tie_mass": self.tie_mass,
        }


def output_law(code: Code, channel: SymmetricChannel) -> np.ndarray:
    """Joint law of ``Y`` under a uniform codeword.

    Axis ``j`` indexes ``2 * component + output_bit`` of coordinate ``j``.
    """
    gen = generator_of(code)
    n = gen.n_cols
    book = codebook(gen).astype(np.int64)
    a = 2 * len(channel.components)
    if a**n > 1 << 22 or len(book) > 1 << 12:
        raise BudgetError("output law too large to tabulate")
    q = np.zeros((2, a))
    for k, (w, eps) in enumerate(channel.components):
        for c in (0, 1):
            q[c, 2 * k + c] = w * (1 - eps)
            q[c, 2 * k + (1 - c)] = w * eps
    joint = np.zeros((a,) * n)
    for word in book:
        joint += reduce(np.multiply.outer, [q[bit] for bit in word])
    return joint / len(book)


def entropy_audit(code: Code, channel: SymmetricChannel) -> EntropyAudit:
    gen = generator_of(code)
    n = gen.n_cols
    k = len(codebook(gen))
    rate = math.log2(k) / n
    cap = capacity(channel)
    joint = output_law(code, channel)
    joint_entropy = _entropy_bits(joint.ravel())

    chain = []
    a = joint.shape[0] if n else 1
    for j in range(n):
        upto = joint.sum(axis=tuple(range(j + 1, n))).reshape(-1, a)
        prefix = upto.sum(axis=1, keepdims=True)
        mask = upto > 0
        ratio = np.where(mask, prefix / np.where(mask, upto, 1.0), 1.0)
        chain.append(float(np.sum(upto[mask] * np.log2(ratio[mask]))))

    book = codebook(gen)
    informative = [j for j in range(n) if book[:, j].any()]
    single = informative[0] if informative else None
    single_entropy = bound = None
    if single is not None:
        marg = joint.sum(axis=tuple(x for x in range(n) if x != single))
        single_entropy = _entropy_bits(marg)
        bound = n * (single_entropy - (cap - rate))

    prob, comps, flips = noise_table(channel, n)
    eps = channel.epsilons[comps]
    p_loc, ties = [], []
    for j in range(n):
        guess, _ = map_decide(book, j, eps, flips, exclude_target=True)
        p_loc.append(float(prob[guess != 0].sum()))
        ties.append(float(prob[guess == TIE].sum()))
    return EntropyAudit(n, rate, cap, joint_entropy, chain, single, single_entropy, bound, p_loc, ties)
