import json
import math
from collections import defaultdict
from functools import reduce
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

from rmcamellia.analysis import (
    SyntheticEnsemble,
    TabulatedFunction,
    chebyshev_majority_bound,
    contribution,
    covariance_bound,
    decompose,
    entropy_audit,
    exact_expected_covariance,
    output_law,
    pair_covariance,
    parseval_check,
    petal_function,
    petals_containing,
)
from rmcamellia.channel import ChannelOutput, enumerate_noise, make_bec, make_bsc, make_mixture, noise_table
from rmcamellia.decoder import TIE, e_variable, exact_error_probability, map_decide, petal_codebook
from rmcamellia.errors import BudgetError
from rmcamellia.gf2 import Gf2Matrix
from rmcamellia.rm import build_rm, enumerate_codewords

GOLDEN = json.loads((Path(__file__).parent / "golden" / "exact_values.json").read_text())


def random_function(rng, max_axes=4, max_states=4):
    n_axes = int(rng.integers(1, max_axes + 1))
    sizes = [int(rng.integers(2, max_states + 1)) for _ in range(n_axes)]
    probs = [rng.dirichlet(np.ones(s)) + 1e-3 for s in sizes]
    probs = [p / p.sum() for p in probs]
    return TabulatedFunction(rng.normal(size=sizes), probs)


def orthonormal_basis(p):
    """Columns orthonormal in L2(p); column 0 is the constant function."""
    q = len(p)
    raw = np.eye(q)
    raw[:, 0] = 1.0
    Q, R = np.linalg.qr(np.sqrt(p)[:, None] * raw)
    Q = Q * np.sign(np.diag(R))
    return Q / np.sqrt(p)[:, None]


def basis_contributions(f):
    """Contributions from coefficients in a product orthonormal basis."""
    bases = [orthonormal_basis(p) for p in f.probs]
    coeff = f.values * f.weights()
    for axis, B in enumerate(bases):
        coeff = np.moveaxis(np.tensordot(coeff, B, axes=([axis], [0])), -1, axis)
    out = {}
    n = f.n_axes
    for size in range(n + 1):
        for S in combinations(range(n), size):
            c = coeff.copy()
            for axis in range(n):
                idx = [slice(None)] * n
                idx[axis] = slice(1, None) if axis not in S else 0
                c[tuple(idx)] = 0.0
            table = c
            for axis, B in enumerate(bases):
                table = np.moveaxis(np.tensordot(table, B, axes=([axis], [1])), -1, axis)
            out[frozenset(S)] = table
    return out


class TestContributions:
    def test_parity_of_two_biased_bits(self):
        mu = 0.5
        values = np.array([[1.0, -1.0], [-1.0, 1.0]])
        f = TabulatedFunction(values, [np.array([0.75, 0.25])] * 2)
        energies = decompose(f).energies
        assert energies[frozenset()] == pytest.approx(mu**4)
        assert energies[frozenset({0})] == pytest.approx(mu**2 * (1 - mu**2))
        assert energies[frozenset({1})] == pytest.approx(mu**2 * (1 - mu**2))
        assert energies[frozenset({0, 1})] == pytest.approx((1 - mu**2) ** 2)
        assert sum(energies.values()) == pytest.approx(1.0)

    def test_parity_of_two_fair_bits(self):
        values = np.array([[1.0, -1.0], [-1.0, 1.0]])
        f = TabulatedFunction(values, [np.array([0.5, 0.5])] * 2)
        energies = decompose(f).energies
        for S in (frozenset(), frozenset({0}), frozenset({1})):
            assert energies[S] == pytest.approx(0.0, abs=1e-15)
            assert np.abs(contribution(f, S)).max() < 1e-15
        assert energies[frozenset({0, 1})] == pytest.approx(1.0)

    def test_constant_function(self):
        f = TabulatedFunction(np.full((3, 2), 2.5), [np.array([0.2, 0.3, 0.5]), np.array([0.6, 0.4])])
        table = decompose(f)
        assert np.allclose(table.contributions[frozenset()], 2.5)
        assert all(np.abs(c).max() < 1e-12 for S, c in table.contributions.items() if S)

    def test_matches_basis_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            f = random_function(rng)
            oracle = basis_contributions(f)
            table = decompose(f)
            for S, c in oracle.items():
                assert np.allclose(table.contributions[S], c, atol=1e-9)
                assert np.allclose(contribution(f, sorted(S)), c, atol=1e-9)

    def test_parseval_reconstruction_orthogonality(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            report = parseval_check(random_function(rng))
            assert report.parseval_gap < 1e-9
            assert report.max_cross_term < 1e-9
            assert report.reconstruction_error < 1e-9

    def test_orthogonal_to_functions_ignoring_an_axis(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            f = random_function(rng, max_axes=3)
            if f.n_axes < 2:
                continue
            j = int(rng.integers(f.n_axes))
            shape = list(f.values.shape)
            shape[j] = 1
            g = np.broadcast_to(rng.normal(size=shape), f.values.shape)
            for S, c in decompose(f).contributions.items():
                if j in S:
                    assert abs(f.expect(c * g)) < 1e-12

    def test_budget(self):
        f = TabulatedFunction(np.zeros((2,) * 13), [np.array([0.5, 0.5])] * 13)
        with pytest.raises(BudgetError):
            decompose(f)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            TabulatedFunction(np.zeros((2, 3)), [np.array([0.5, 0.5])] * 2)


def brute_pair_covariance(code, channel, petal_a, petal_b, i):
    others_a = [k for k in petal_a.members if k != i]
    others_b = [k for k in petal_b.members if k != i]
    union = sorted(set(others_a) | set(others_b))
    ea = eb = eab = 0.0
    for p, states in enumerate_noise(channel, len(union)):
        z = dict(zip(union, states))
        a = e_variable(code, channel, petal_a, i, z)
        b = e_variable(code, channel, petal_b, i, z)
        ea += p * a
        eb += p * b
        eab += p * a * b
    return eab - ea * eb


def joint_covariance(code, channel, petal_a, petal_b, i):
    """Same quantity, tabulating both petal decisions over the joint noise of the union."""
    union = sorted((set(petal_a.members) | set(petal_b.members)) - {i})
    prob, comps, flips = noise_table(channel, len(union))
    col = {k: c for c, k in enumerate(union)}

    def values(petal):
        eps = np.full((len(prob), len(petal.members)), 0.5)
        out = np.zeros_like(eps)
        t = petal.parameter_of(i)
        for pos, k in enumerate(petal.members):
            if pos != t:
                eps[:, pos] = channel.epsilons[comps[:, col[k]]]
                out[:, pos] = flips[:, col[k]]
        guess, _ = map_decide(petal_codebook(code, petal), t, eps, out, exclude_target=True)
        return np.where(guess == TIE, 0.0, np.where(guess == 0, 1.0, -1.0))

    a, b = values(petal_a), values(petal_b)
    return float(prob @ (a * b) - (prob @ a) * (prob @ b))


class TestCovariance:
    @pytest.mark.parametrize("channel", [make_bsc(0.2), make_bec(0.4)])
    def test_pairs_against_enumeration(self, channel):
        code = build_rm(3, 1)
        petals = petals_containing(3, 2, 0)
        funcs = [petal_function(code, channel, p, 0) for p in petals]
        for a in range(len(petals)):
            for b in range(a, len(petals)):
                expected = brute_pair_covariance(code, channel, petals[a], petals[b], 0)
                assert pair_covariance(funcs[a], funcs[b]) == pytest.approx(expected, abs=1e-12)

    def test_rm31_golden(self):
        code, channel = build_rm(3, 1), make_bsc(0.2)
        petals = petals_containing(3, 2, 0)
        brute = np.mean([[brute_pair_covariance(code, channel, a, b, 0) for b in petals] for a in petals])
        assert brute == pytest.approx(GOLDEN["cov_rm31_bsc02_i0_d2"], abs=1e-12)
        assert exact_expected_covariance(code, channel, 0, 2) == pytest.approx(brute, abs=1e-12)

    def test_rm41_golden(self):
        code, channel = build_rm(4, 1), make_bec(0.4)
        petals = petals_containing(4, 3, 0)
        brute = np.mean([[joint_covariance(code, channel, a, b, 0) for b in petals] for a in petals])
        assert brute == pytest.approx(GOLDEN["cov_rm41_bec04_i0_d3"], abs=1e-12)
        assert exact_expected_covariance(code, channel, 0, 3) == pytest.approx(brute, abs=1e-12)

    def test_disjoint_support_is_uncorrelated(self):
        f = TabulatedFunction(np.array([1.0, -1.0]), [np.array([0.7, 0.3])], (1,))
        g = TabulatedFunction(np.array([1.0, 0.0]), [np.array([0.7, 0.3])], (2,))
        assert pair_covariance(f, g) == 0.0
        assert pair_covariance(f, f) == pytest.approx(1 - 0.4**2)

    @pytest.mark.parametrize("m,r,d", [(3, 1, 2), (3, 2, 2), (4, 2, 3), (4, 1, 2)])
    @pytest.mark.parametrize("channel", [make_bsc(0.2), make_bec(0.4)])
    def test_within_sqrt_rho(self, m, r, d, channel):
        assert exact_expected_covariance(build_rm(m, r), channel, 0, d) <= covariance_bound(m, d)

    def test_coordinate_invariance(self):
        code, channel = build_rm(3, 1), make_bsc(0.2)
        values = [exact_expected_covariance(code, channel, i, 2) for i in range(8)]
        assert max(values) - min(values) < 1e-12


class TestChebyshev:
    def test_bound_values(self):
        assert chebyshev_majority_bound(0.5, 0.05) == pytest.approx(0.2)
        assert chebyshev_majority_bound(0.1, 1.0) == 1.0
        assert chebyshev_majority_bound(0.5, -0.1) == 0.0
        with pytest.raises(ValueError):
            chebyshev_majority_bound(0.0, 0.1)

    def test_closed_form_moments(self):
        ens = SyntheticEnsemble(k=5, shared=0.3, p_common=0.8, p_minus=0.2, p_zero=0.1, p_plus=0.7)
        # exact moments by enumerating the shared flag and all 3^5 independent outcomes
        mean = 0.0
        law = {-1: 0.2, 0: 0.1, 1: 0.7}
        outcomes = [((), 1.0)]
        for _ in range(5):
            outcomes = [(o + (v,), p * law[v]) for o, p in outcomes for v in law]
        second = 0.0
        for sign, ps in ((1, 0.8), (-1, 0.2)):
            second += 0.3 * ps * (5 * sign) ** 2
            mean += 0.3 * ps * sign
        for o, p in outcomes:
            second += 0.7 * p * sum(o) ** 2
            mean += 0.7 * p * sum(o) / 5
        cov_sum = second / 25 - mean**2
        assert ens.mean == pytest.approx(mean, abs=1e-12)
        assert ens.avg_cov == pytest.approx(cov_sum, abs=1e-12)

    def test_empirical_tail_below_bound(self):
        rng = np.random.default_rng(3)
        runs = 100_000
        for ens in (
            SyntheticEnsemble(15, 0.05, 0.5, 0.25, 0.15, 0.6),
            SyntheticEnsemble(31, 0.1, 0.9, 0.3, 0.0, 0.7),
        ):
            sums = ens.sample_sums(runs, rng)
            tail = float(np.mean(sums <= 0))
            bound = chebyshev_majority_bound(ens.mean, ens.avg_cov)
            assert tail <= bound + 3 * math.sqrt(bound * (1 - bound) / runs)
            assert np.mean(sums) / ens.k == pytest.approx(ens.mean, abs=0.01)


def brute_output_law(code, channel):
    """Joint law of (component, output) per coordinate, as a dict."""
    words = [w.to_array() for w in enumerate_codewords(code.generator)]
    law = defaultdict(float)
    for p, states in enumerate_noise(channel, code.n):
        comp = tuple(z.component for z in states)
        flip = np.array([z.flip for z in states], dtype=np.uint8)
        for w in words:
            y = w ^ flip
            if any(channel.components[c][1] == 0.5 for c in comp):
                # an erased coordinate's flip state was merged; split it back evenly
                erased = [k for k, c in enumerate(comp) if channel.components[c][1] == 0.5]
                for mask in range(1 << len(erased)):
                    y2 = y.copy()
                    for b, k in enumerate(erased):
                        y2[k] = (mask >> b) & 1
                    law[(comp, tuple(y2))] += p / len(words) / (1 << len(erased))
            else:
                law[(comp, tuple(y))] += p / len(words)
    return law


def dict_entropy(law):
    return -sum(p * math.log2(p) for p in law.values() if p > 0)


def prefix_entropy(law, j):
    marg = defaultdict(float)
    for (comp, y), p in law.items():
        marg[(comp[:j], y[:j])] += p
    return dict_entropy(marg)


class TestEntropy:
    @pytest.mark.parametrize(
        "m,r,channel", [(2, 1, make_bsc(0.1)), (2, 1, make_bec(0.3)), (2, 1, make_mixture([(0.5, 0.05), (0.5, 0.2)]))]
    )
    def test_output_law_matches_brute_force(self, m, r, channel):
        code = build_rm(m, r)
        law = output_law(code, channel)
        brute = brute_output_law(code, channel)
        assert law.sum() == pytest.approx(1.0)
        for (comp, y), p in brute.items():
            idx = tuple(2 * c + b for c, b in zip(comp, y))
            assert law[idx] == pytest.approx(p, abs=1e-14)
        audit = entropy_audit(code, channel)
        assert audit.joint_entropy == pytest.approx(dict_entropy(brute), abs=1e-12)

    def test_rm31_bsc005(self):
        code, channel = build_rm(3, 1), make_bsc(0.05)
        brute = brute_output_law(code, channel)
        audit = entropy_audit(code, channel)
        golden = GOLDEN["entropy_rm31_bsc005"]
        assert dict_entropy(brute) == pytest.approx(golden["joint_entropy"], abs=1e-12)
        assert audit.joint_entropy == pytest.approx(golden["joint_entropy"], abs=1e-12)
        chain = [prefix_entropy(brute, j + 1) - prefix_entropy(brute, j) for j in range(8)]
        assert chain == pytest.approx(golden["chain_entropies"], abs=1e-12)
        assert audit.chain_entropies == pytest.approx(chain, abs=1e-12)
        assert audit.chain_rule_gap < 1e-9
        assert audit.bound_holds
        loc = [exact_error_probability(code, channel, j, "local") for j in range(8)]
        assert audit.p_loc == pytest.approx(golden["p_loc"], abs=1e-12)
        assert audit.p_loc == pytest.approx(loc, abs=1e-12)
        assert audit.predictable(0.01) == list(range(8))

    def test_zero_code(self):
        audit = entropy_audit(Gf2Matrix.zeros(0, 4), make_bsc(0.1))
        assert audit.p_loc == [0.0] * 4
        assert audit.single_coordinate is None and audit.bound_holds is None

    def test_noiseless(self):
        audit = entropy_audit(build_rm(2, 1), make_bsc(0.0))
        assert audit.joint_entropy == pytest.approx(3.0)
        assert audit.p_loc == [0.0] * 4

    def test_budget(self):
        with pytest.raises(BudgetError):
            output_law(build_rm(5, 1), make_bsc(0.1))


def test_weights_are_product_measure():
    f = TabulatedFunction(np.zeros((2, 3)), [np.array([0.4, 0.6]), np.array([0.2, 0.3, 0.5])])
    assert np.allclose(f.weights(), reduce(np.multiply.outer, f.probs))
    assert f.weights().sum() == pytest.approx(1.0)
