"""Bit-MAP decoding: per petal, over the whole code, and boosted by majority.

Every decoder reduces to one kernel: given a codebook and per-coordinate
observations (eps, output bit), sum the likelihoods of the codewords with
target bit 0 and with target bit 1.  Sums are taken in the log domain.
Excluding a coordinate from the likelihood product is the same as treating
it as erased (eps = 1/2), which is how the local and petal decoders drop
the target coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .camellia import AffineCoset, petal_dimension, sample_petal_members
from .channel import ChannelOutput, NoiseState, SymmetricChannel, noise_table
from .errors import ContradictoryEvidenceError
from .gf2 import BitVector, Gf2Matrix
from .rm import RmCode, build_rm, codebook

TIE_TOLERANCE = 1e-9
TIE = -1

Code = Union[RmCode, Gf2Matrix]


def generator_of(code: Code) -> Gf2Matrix:
    return code.generator if isinstance(code, RmCode) else code


def _logsumexp_cols(scores: np.ndarray) -> np.ndarray:
    if scores.shape[0] == 0:
        return np.full(scores.shape[1], -np.inf)
    peak = scores.max(axis=0)
    finite = np.isfinite(peak)
    safe = np.where(finite, peak, 0.0)
    with np.errstate(under="ignore", divide="ignore"):
        total = np.exp(scores - safe).sum(axis=0)
        return np.where(finite, safe + np.log(total), -np.inf)


def _codeword_scores(book: np.ndarray, eps: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Log-likelihood of every codeword (up to a per-column constant).

    ``eps``/``out`` have shape ``(batch, n)``; the result is ``(codewords, batch)``.
    Noiseless coordinates act as hard constraints.
    """
    eps = np.asarray(eps, dtype=np.float64)
    out = np.asarray(out, dtype=np.float64)
    soft = (eps > 0) & (eps < 0.5)
    with np.errstate(divide="ignore"):
        gain = np.where(soft, np.log1p(-eps) - np.log(np.where(soft, eps, 1.0)), 0.0)
    llr = np.where(soft, (2 * out - 1) * gain, 0.0)
    scores = book @ llr.T
    hard = eps == 0
    if hard.any():
        sign = np.where(hard, 1 - 2 * out, 0.0)
        violations = book @ sign.T + (hard * out).sum(axis=1)
        scores[violations > 0.5] = -np.inf
    return scores


def map_decide(book: np.ndarray, target: int, eps, out, *, exclude_target: bool) -> tuple[np.ndarray, np.ndarray]:
    """Batched bit-MAP of column ``target``.

    Returns ``(guess, log_ratio)`` where ``guess`` is 0, 1 or ``TIE`` and
    ``log_ratio = log(S_1 / S_0)``.
    """
    eps = np.array(eps, dtype=np.float64, ndmin=2)
    out = np.array(out, dtype=np.float64, ndmin=2)
    if exclude_target:
        eps[:, target] = 0.5
    scores = _codeword_scores(book, eps, out)
    ones = book[:, target] == 1
    s1 = _logsumexp_cols(scores[ones])
    s0 = _logsumexp_cols(scores[~ones])
    if np.any(np.isneginf(s0) & np.isneginf(s1)):
        raise ContradictoryEvidenceError("no codeword is consistent with the noiseless observations")
    with np.errstate(invalid="ignore"):
        log_ratio = s1 - s0
    finite = np.isfinite(log_ratio)
    tie = finite & (np.abs(np.expm1(np.where(finite, log_ratio, 0.0))) <= TIE_TOLERANCE)
    guess = np.where(tie, TIE, (log_ratio > 0).astype(np.int64))
    return guess, log_ratio


def petal_codebook(code: Code, petal: AffineCoset) -> np.ndarray:
    """Codebook of the code restricted to ``petal``, columns in parameter order."""
    if isinstance(code, RmCode):
        # restriction of RM(m, r) to a d-dim coset is RM(d, min(r, d))
        return codebook(build_rm(petal.d, min(code.r, petal.d)).generator)
    return codebook(code.select_columns(petal.members))


def _as_guess(g: int) -> int | None:
    return None if g == TIE else int(g)


@dataclass(frozen=True)
class PetalDecision:
    petal: AffineCoset
    target: int
    guess: int | None  # None on a tie
    posterior_ratio: float

    @property
    def is_tie(self) -> bool:
        return self.guess is None


def petal_bit_map(code: Code, petal: AffineCoset, i: int, y: ChannelOutput) -> PetalDecision:
    """Bit-MAP of coordinate ``i`` from the outputs on ``petal`` minus ``i``.

    ``y`` is the full block output; only petal coordinates are read.
    """
    t = petal.parameter_of(i)
    members = np.array(petal.members)
    guess, log_ratio = map_decide(
        petal_codebook(code, petal), t, y.epsilon[members], y.output[members], exclude_target=True
    )
    return PetalDecision(petal, i, _as_guess(guess[0]), float(np.exp(log_ratio[0])))


def e_value(guess: int | None, sent_bit: int = 0) -> int:
    if guess is None or guess == TIE:
        return 0
    return 1 if guess == sent_bit else -1


def e_variable(
    code: Code, channel: SymmetricChannel, petal: AffineCoset, i: int, z: Mapping[int, NoiseState]
) -> int:
    """E_{P,i} for noise ``z`` (a map coordinate -> noise state on petal minus i).

    The zero codeword is sent; the value does not depend on that choice.
    """
    t = petal.parameter_of(i)
    size = len(petal.members)
    eps = np.full(size, 0.5)
    out = np.zeros(size)
    for pos, k in enumerate(petal.members):
        if pos == t:
            continue
        state = z[k]
        eps[pos] = channel.components[state.component][1]
        out[pos] = state.flip
    guess, _ = map_decide(petal_codebook(code, petal), t, eps, out, exclude_target=True)
    return e_value(int(guess[0]))


@dataclass(frozen=True)
class BoostResult:
    bit: int
    tally: int  # (#petals guessing 1) - (#petals guessing 0)
    ties: int

    @property
    def is_tie(self) -> bool:
        return self.tally == 0


def resolve_petal_dimension(code: RmCode, d: int | None) -> int:
    if d is not None:
        return d
    if code.m < 5:
        raise ValueError("petal dimension must be given explicitly for m < 5")
    return petal_dimension(code.m)


def boost_vote(
    code: RmCode, i: int, y: ChannelOutput, K: int, d: int | None, rng: np.random.Generator
) -> BoostResult:
    """Majority vote of ``K`` independent uniform petals containing ``i``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    d = resolve_petal_dimension(code, d)
    members = sample_petal_members(code.m, d, i, K, rng)
    book = codebook(build_rm(d, min(code.r, d)).generator)
    guess, _ = map_decide(book, 0, y.epsilon[members], y.output[members], exclude_target=True)
    ones = int(np.sum(guess == 1))
    zeros = int(np.sum(guess == 0))
    tally = ones - zeros
    return BoostResult(1 if tally > 0 else 0, tally, K - ones - zeros)


def boost_decode_bit(
    code: RmCode, i: int, y: ChannelOutput, K: int = 64, d: int | None = None, rng: np.random.Generator | None = None
) -> int:
    """Camellia-boosted estimate of bit ``i``; an even vote resolves to 0."""
    rng = rng if rng is not None else np.random.default_rng()
    return boost_vote(code, i, y, K, d, rng).bit


def exact_bit_map(code: Code, i: int, y: ChannelOutput) -> int | None:
    """Bit-MAP of ``X_i`` from the whole output; ``None`` on a tie."""
    book = codebook(generator_of(code))
    guess, _ = map_decide(book, i, y.epsilon, y.output, exclude_target=False)
    return _as_guess(guess[0])


def exact_local_map(code: Code, i: int, y: ChannelOutput) -> int | None:
    """Bit-MAP of ``X_i`` from every output except ``Y_i``."""
    book = codebook(generator_of(code))
    guess, _ = map_decide(book, i, y.epsilon, y.output, exclude_target=True)
    return _as_guess(guess[0])


def block_map_batch(book: np.ndarray, eps, out) -> np.ndarray:
    """Index of the MAP codeword per batch row, ``TIE`` when not unique."""
    scores = _codeword_scores(book, np.array(eps, ndmin=2), np.array(out, ndmin=2))
    best = scores.max(axis=0)
    if np.any(np.isneginf(best)):
        raise ContradictoryEvidenceError("no codeword is consistent with the noiseless observations")
    near = scores >= best - TIE_TOLERANCE * np.maximum(1.0, np.abs(best))
    winner = np.argmax(scores, axis=0)
    return np.where(near.sum(axis=0) > 1, TIE, winner)


def exact_block_map(code: Code, y: ChannelOutput) -> BitVector | None:
    """Whole-codeword MAP; ``None`` when the maximizer is not unique."""
    book = codebook(generator_of(code))
    idx = int(block_map_batch(book, y.epsilon, y.output)[0])
    if idx == TIE:
        return None
    return BitVector.from_array(book[idx].astype(np.uint8))


def exact_error_probability(
    code: Code, channel: SymmetricChannel, i: int = 0, rule: str = "bit"
) -> float:
    """Exact error probability of a MAP rule, ties counted as errors.

    ``rule`` is ``"bit"`` (P_bit,i), ``"local"`` (P_loc,i) or ``"block"``
    (P_glo).  Sums over every joint noise realization with the zero
    codeword sent.
    """
    gen = generator_of(code)
    book = codebook(gen)
    prob, comps, flips = noise_table(channel, gen.n_cols)
    eps = channel.epsilons[comps]
    if rule == "block":
        winner = block_map_batch(book, eps, flips)
        wrong = (winner == TIE) | book[np.maximum(winner, 0)].any(axis=1)
        return float(prob[wrong].sum())
    if rule not in ("bit", "local"):
        raise ValueError(f"unknown rule {rule!r}")
    guess, _ = map_decide(book, i, eps, flips, exclude_target=rule == "local")
    return float(prob[guess != 0].sum())
