"""Symmetric memoryless channels as finite mixtures of BSCs.

Each use draws a component (weight, eps), then flips the input bit with
probability eps.  The receiver sees both eps and the noisy bit, so an
erasure is simply a component with eps = 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import BudgetError, ConfigError
from .gf2 import BitVector

NOISE_BUDGET = 1 << 26


def h2(p: float) -> float:
    """Binary entropy in bits."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


@dataclass(frozen=True)
class SymmetricChannel:
    components: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("channel needs at least one component")
        total = 0.0
        for w, eps in self.components:
            if w < 0:
                raise ValueError(f"negative weight {w}")
            if not 0.0 <= eps <= 0.5:
                raise ValueError(f"crossover {eps} outside [0, 1/2]")
            total += w
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, not 1")

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([e for _, e in self.components])

    def descriptor(self) -> dict:
        return {"kind": "mixture", "components": [list(c) for c in self.components]}


def make_bsc(eps: float) -> SymmetricChannel:
    if not 0.0 <= eps <= 0.5:
        raise ValueError(f"BSC crossover {eps} outside [0, 1/2]")
    return SymmetricChannel(((1.0, float(eps)),))


def make_bec(p: float) -> SymmetricChannel:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"erasure probability {p} outside [0, 1]")
    return SymmetricChannel(((1.0 - p, 0.0), (float(p), 0.5)))


def make_mixture(components: Sequence[Sequence[float]]) -> SymmetricChannel:
    return SymmetricChannel(tuple((float(w), float(e)) for w, e in components))


def channel_from_descriptor(desc: dict) -> SymmetricChannel:
    """Build a channel from ``{"kind": "bsc"|"bec"|"mixture", ...}``."""
    try:
        kind = desc["kind"]
        if kind == "bsc":
            return make_bsc(float(desc["eps"]))
        if kind == "bec":
            return make_bec(float(desc["p"]))
        if kind == "mixture":
            return make_mixture(desc["components"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad channel descriptor {desc!r}: {exc}") from exc
    raise ConfigError(f"unknown channel kind {kind!r}")


def capacity(ch: SymmetricChannel) -> float:
    return 1.0 - sum(w * h2(eps) for w, eps in ch.components)


class ChannelUse(NamedTuple):
    epsilon: float
    flip: int
    output: int


class NoiseState(NamedTuple):
    """Noise on one coordinate: mixture component index and flip bit."""

    component: int
    flip: int


@dataclass(frozen=True)
class ChannelOutput:
    """Outputs of a block of channel uses, stored column-wise.

    Indexing yields :class:`ChannelUse` records, so it also behaves as the
    list of per-coordinate uses.
    """

    component: np.ndarray
    epsilon: np.ndarray
    flip: np.ndarray
    output: np.ndarray

    def __len__(self) -> int:
        return len(self.output)

    def __getitem__(self, k: int) -> ChannelUse:
        return ChannelUse(float(self.epsilon[k]), int(self.flip[k]), int(self.output[k]))

    def __iter__(self) -> Iterator[ChannelUse]:
        return (self[k] for k in range(len(self)))

    @classmethod
    def from_noise(cls, ch: SymmetricChannel, x, noise: Sequence[NoiseState]) -> ChannelOutput:
        comp = np.array([z.component for z in noise], dtype=np.int64)
        flip = np.array([z.flip for z in noise], dtype=np.uint8)
        x = np.asarray(x, dtype=np.uint8)
        return cls(comp, ch.epsilons[comp], flip, x ^ flip)


def sample_noise(ch: SymmetricChannel, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Component indices and flip bits for ``n`` independent uses."""
    comp = rng.choice(len(ch.components), size=n, p=ch.weights)
    flip = (rng.random(n) < ch.epsilons[comp]).astype(np.uint8)
    return comp, flip


def transmit(ch: SymmetricChannel, x, rng: np.random.Generator) -> ChannelOutput:
    x = x.to_array() if isinstance(x, BitVector) else np.asarray(x, dtype=np.uint8)
    comp, flip = sample_noise(ch, len(x), rng)
    return ChannelOutput(comp, ch.epsilons[comp], flip, x ^ flip)


def likelihood(use: ChannelUse, hypothesis_bit: int) -> float:
    return 1.0 - use.epsilon if use.output == hypothesis_bit else use.epsilon


def noise_alphabet(ch: SymmetricChannel) -> list[tuple[float, NoiseState]]:
    """Per-coordinate noise states with their masses.

    Zero-mass states are dropped and an erasure component keeps a single
    flip-0 state carrying its whole weight (its flip bit is invisible to any
    likelihood).
    """
    states = []
    for k, (w, eps) in enumerate(ch.components):
        if w == 0:
            continue
        if eps == 0.5:
            states.append((w, NoiseState(k, 0)))
            continue
        states.append((w * (1 - eps), NoiseState(k, 0)))
        if eps > 0:
            states.append((w * eps, NoiseState(k, 1)))
    return states


def noise_table(ch: SymmetricChannel, n_coords: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Every joint noise realization as arrays ``(prob, component, flip)``.

    ``component`` and ``flip`` have shape ``(states, n_coords)``.
    """
    alphabet = noise_alphabet(ch)
    if len(alphabet) ** n_coords > NOISE_BUDGET:
        raise BudgetError(f"{len(alphabet)}^{n_coords} noise states exceed 2^26")
    a = len(alphabet)
    probs = np.array([p for p, _ in alphabet])
    comps = np.array([z.component for _, z in alphabet], dtype=np.int64)
    flips = np.array([z.flip for _, z in alphabet], dtype=np.uint8)
    if n_coords == 0:
        return np.ones(1), np.zeros((1, 0), dtype=np.int64), np.zeros((1, 0), dtype=np.uint8)
    idx = np.indices((a,) * n_coords).reshape(n_coords, -1).T
    return np.prod(probs[idx], axis=1), comps[idx], flips[idx]


def enumerate_noise(ch: SymmetricChannel, n_coords: int) -> Iterator[tuple[float, tuple[NoiseState, ...]]]:
    """Yield each joint noise realization with its exact probability."""
    alphabet = noise_alphabet(ch)
    if len(alphabet) ** n_coords > NOISE_BUDGET:
        raise BudgetError(f"{len(alphabet)}^{n_coords} noise states exceed 2^26")
    for combo in product(alphabet, repeat=n_coords):
        yield math.prod(p for p, _ in combo), tuple(z for _, z in combo)
