import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rmcamellia.channel import (
    ChannelUse,
    capacity,
    channel_from_descriptor,
    enumerate_noise,
    h2,
    likelihood,
    make_bec,
    make_bsc,
    make_mixture,
    noise_alphabet,
    noise_table,
    transmit,
)
from rmcamellia.errors import BudgetError, ConfigError


def mutual_information_uniform_input(ch):
    """I(X; (E, Y)) for uniform X, computed from the joint table directly."""
    joint = {}
    for w, eps in ch.components:
        for x in (0, 1):
            for y in (0, 1):
                p = 0.5 * w * ((1 - eps) if x == y else eps)
                joint[(x, eps, y)] = joint.get((x, eps, y), 0.0) + p
    p_out = {}
    for (x, eps, y), p in joint.items():
        p_out[(eps, y)] = p_out.get((eps, y), 0.0) + p
    total = 0.0
    for (x, eps, y), p in joint.items():
        if p > 0:
            total += p * math.log2(p / (0.5 * p_out[(eps, y)]))
    return total


class TestCapacity:
    def test_clean_bsc(self):
        assert capacity(make_bsc(0.0)) == 1.0

    def test_useless_bsc(self):
        assert capacity(make_bsc(0.5)) == 0.0

    def test_bsc_011(self):
        assert capacity(make_bsc(0.11)) == pytest.approx(0.5, abs=1e-3)
        assert capacity(make_bsc(0.11)) == pytest.approx(1 - h2(0.11), abs=1e-15)

    def test_bec(self):
        assert capacity(make_bec(0.3)) == pytest.approx(0.7, abs=1e-15)

    def test_bsc_bec_mixture(self):
        ch = make_mixture([(0.5, 0.0), (0.5, 0.5)])
        assert capacity(ch) == capacity(make_bec(0.5))

    @given(st.lists(st.tuples(st.floats(0.01, 1.0), st.floats(0.0, 0.5)), min_size=1, max_size=4))
    def test_matches_mutual_information(self, raw):
        total = sum(w for w, _ in raw)
        ch = make_mixture([(w / total, e) for w, e in raw[:-1]] + [(1 - sum(w / total for w, _ in raw[:-1]), raw[-1][1])])
        assert capacity(ch) == pytest.approx(mutual_information_uniform_input(ch), abs=1e-12)
        assert 0.0 <= capacity(ch) <= 1.0

    def test_monotone_in_crossover(self):
        eps = np.linspace(0, 0.5, 51)
        caps = [capacity(make_bsc(e)) for e in eps]
        assert all(a > b for a, b in zip(caps, caps[1:]))
        ps = np.linspace(0, 1, 51)
        caps = [capacity(make_bec(p)) for p in ps]
        assert all(a > b for a, b in zip(caps, caps[1:]))


class TestValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            make_mixture([(0.5, 0.1), (0.4, 0.2)])

    @pytest.mark.parametrize("eps", [-0.1, 0.6])
    def test_crossover_range(self, eps):
        with pytest.raises(ValueError):
            make_mixture([(1.0, eps)])

    def test_descriptor_roundtrip(self):
        for ch in (make_bsc(0.1), make_bec(0.4), make_mixture([(0.3, 0.0), (0.7, 0.2)])):
            assert channel_from_descriptor(ch.descriptor()) == ch

    def test_descriptor_kinds(self):
        assert channel_from_descriptor({"kind": "bsc", "eps": 0.1}) == make_bsc(0.1)
        assert channel_from_descriptor({"kind": "bec", "p": 0.4}) == make_bec(0.4)

    @pytest.mark.parametrize("desc", [{"kind": "awgn"}, {"kind": "bsc"}, {"kind": "bsc", "eps": 0.7}])
    def test_bad_descriptor(self, desc):
        with pytest.raises(ConfigError):
            channel_from_descriptor(desc)


class TestTransmit:
    def test_clean_channel_is_identity(self):
        x = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
        out = transmit(make_bsc(0.0), x, np.random.default_rng(0))
        assert out.output.tolist() == x.tolist()
        assert all(u.epsilon == 0.0 for u in out)

    def test_bsc_flip_count(self):
        n = 100_000
        out = transmit(make_bsc(0.1), np.zeros(n, dtype=np.uint8), np.random.default_rng(1))
        sigma = math.sqrt(n * 0.1 * 0.9)
        assert abs(int(out.output.sum()) - n * 0.1) <= 3 * sigma

    def test_bec_erasure_count(self):
        n = 100_000
        out = transmit(make_bec(0.3), np.zeros(n, dtype=np.uint8), np.random.default_rng(2))
        erased = int((out.epsilon == 0.5).sum())
        assert abs(erased - n * 0.3) <= 3 * math.sqrt(n * 0.3 * 0.7)
        # unerased positions are exact
        assert not out.output[out.epsilon == 0.0].any()

    def test_seed_reproducible(self):
        x = np.zeros(64, dtype=np.uint8)
        a = transmit(make_bsc(0.2), x, np.random.default_rng(7))
        b = transmit(make_bsc(0.2), x, np.random.default_rng(7))
        assert a.output.tolist() == b.output.tolist()

    def test_likelihood(self):
        use = ChannelUse(0.1, 0, 1)
        assert likelihood(use, 1) == 0.9
        assert likelihood(use, 0) == pytest.approx(0.1)


class TestNoiseEnumeration:
    def test_bec_pairs(self):
        masses = sorted(p for p, _ in enumerate_noise(make_bec(0.3), 2))
        assert masses == pytest.approx([0.09, 0.21, 0.21, 0.49])

    def test_bsc_alphabet(self):
        assert [p for p, _ in noise_alphabet(make_bsc(0.1))] == pytest.approx([0.9, 0.1])

    def test_clean_bsc_single_state(self):
        assert len(noise_alphabet(make_bsc(0.0))) == 1

    @pytest.mark.parametrize(
        "ch", [make_bsc(0.2), make_bec(0.4), make_mixture([(0.2, 0.0), (0.5, 0.1), (0.3, 0.5)])]
    )
    @pytest.mark.parametrize("n", [0, 1, 3, 5])
    def test_normalized(self, ch, n):
        assert sum(p for p, _ in enumerate_noise(ch, n)) == pytest.approx(1.0, abs=1e-12)
        probs, comps, flips = noise_table(ch, n)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert comps.shape == flips.shape == (len(probs), n)

    def test_table_matches_iterator(self):
        ch = make_mixture([(0.2, 0.0), (0.5, 0.1), (0.3, 0.5)])
        probs, comps, flips = noise_table(ch, 3)
        for row, (p, states) in enumerate(enumerate_noise(ch, 3)):
            assert probs[row] == pytest.approx(p)
            assert comps[row].tolist() == [z.component for z in states]
            assert flips[row].tolist() == [z.flip for z in states]

    def test_marginal_matches_channel(self):
        ch = make_bsc(0.2)
        flip_mass = sum(p for p, states in enumerate_noise(ch, 3) if states[1].flip)
        assert flip_mass == pytest.approx(0.2)

    def test_budget(self):
        with pytest.raises(BudgetError):
            noise_table(make_bsc(0.1), 27)
        with pytest.raises(BudgetError):
            next(enumerate_noise(make_bsc(0.1), 27))
