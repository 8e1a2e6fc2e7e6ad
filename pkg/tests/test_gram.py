import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catanova.anova import assemble, component_norms
from catanova.basis import EMPTY_KEY, IndexKey, design_columns, enumerate_indices, keys_for_subset
from catanova.datasets import analytical_case, boolean_cube
from catanova.distribution import from_dataset
from catanova.exceptions import DataError, NumericalError
from catanova.gram import (GramSystem, build_system, gram_entry, mean_coefficient,
                           solve_coefficients)
from catanova.oracle import parity
from catanova.selection import SelectionConfig, greedy_select

from conftest import distributions, product_distributions, targets

K1 = IndexKey((0,), (0,))


class TestEntries:
    def test_empty_pair(self, bernoulli_pair):
        assert gram_entry(bernoulli_pair, EMPTY_KEY, EMPTY_KEY) == pytest.approx(1.0, abs=1e-15)

    def test_uniform_bernoulli_self(self):
        assert gram_entry(boolean_cube(1), K1, K1) == 4.0

    def test_nested_pair_vanishes(self):
        dist = boolean_cube(2)
        assert gram_entry(dist, IndexKey((0, 1), (0, 0)), K1) == 0.0

    def test_mean_of_empty_key(self, bernoulli_pair):
        f = np.array([1.0, 4.0, -2.0])
        assert mean_coefficient(bernoulli_pair, f, EMPTY_KEY) == pytest.approx(np.dot(bernoulli_pair.weights, f))

    def test_mean_of_constant(self):
        dist = from_dataset([[0, 0], [0, 1], [1, 2], [1, 1], [0, 2]])
        for key in enumerate_indices(dist.grid, 1):
            if key.A:
                assert abs(mean_coefficient(dist, np.ones(dist.r), key)) < 1e-12

    def test_mean_of_parity(self):
        dist = boolean_cube(1)
        assert mean_coefficient(dist, parity(dist.support, (0,)), K1) == 2.0

    def test_mean_length_mismatch(self, bernoulli_pair):
        with pytest.raises(DataError):
            mean_coefficient(bernoulli_pair, np.ones(2), EMPTY_KEY)

    def test_hierarchical_option_on_sparse_support(self, bernoulli_pair):
        u12 = IndexKey((0, 1), (0, 0))
        assert mean_coefficient(bernoulli_pair, np.ones(3), u12) == pytest.approx(-1.0, abs=1e-12)
        assert abs(mean_coefficient(bernoulli_pair, np.ones(3), u12, hierarchical=True)) < 1e-12


class TestBuildSystem:
    def test_single_empty_key(self, bernoulli_pair):
        f = np.array([1.0, 2.0, 3.0])
        system = build_system(bernoulli_pair, f, [EMPTY_KEY])
        np.testing.assert_allclose(system.gram, [[1.0]])
        np.testing.assert_allclose(system.mean, [np.dot(bernoulli_pair.weights, f)])

    def test_duplicate_keys(self, bernoulli_pair):
        with pytest.raises(DataError):
            build_system(bernoulli_pair, np.ones(3), [K1, K1])

    def test_length_mismatch(self, bernoulli_pair):
        with pytest.raises(DataError):
            build_system(bernoulli_pair, np.ones(4), [K1])

    @given(product_distributions(max_d=3))
    def test_block_diagonal_under_independence(self, dist):
        keys = list(enumerate_indices(dist.grid))
        G = build_system(dist, np.zeros(dist.r), keys).gram
        for a, b in itertools.product(range(len(keys)), repeat=2):
            if keys[a].A != keys[b].A:
                assert abs(G[a, b]) <= 1e-10 * np.sqrt(G[a, a] * G[b, b])

    def test_entries_match_pairwise_definition(self):
        dist = from_dataset([[0, 0], [0, 1], [1, 2], [1, 1], [0, 2], [0, 2]])
        keys = list(enumerate_indices(dist.grid))
        f = np.arange(dist.r, dtype=float)
        system = build_system(dist, f, keys, hierarchical=False)
        for a, b in itertools.product(range(len(keys)), repeat=2):
            assert system.gram[a, b] == pytest.approx(gram_entry(dist, keys[a], keys[b]), rel=1e-12, abs=1e-12)
        for a in range(len(keys)):
            assert system.mean[a] == pytest.approx(mean_coefficient(dist, f, keys[a]), rel=1e-12, abs=1e-12)

    def test_two_feature_analytical_norms(self):
        # restricted to (X1, X2): all nine keys on the uniform 3x3 grid
        dist, f = analytical_case()
        sub = from_dataset(dist.support[::3, :2])
        g = np.sign(sub.support[:, 0] - 0.5 * sub.support[:, 1])
        keys = list(enumerate_indices(sub.grid))
        assert len(keys) == 9
        c = solve_coefficients(build_system(sub, g, keys)).c
        norms = component_norms(assemble(sub, keys, c))
        expect = {(): 1 / 9, (0,): 14 / 27, (1,): 2 / 27, (0, 1): 2 / 27}
        for A, v in expect.items():
            assert norms[A] == pytest.approx(v, abs=1e-12)

    @given(distributions(max_d=3), st.booleans())
    def test_symmetric_psd(self, dist, hier):
        keys = list(enumerate_indices(dist.grid))
        G = build_system(dist, np.zeros(dist.r), keys, hierarchical=hier).gram
        np.testing.assert_allclose(G, G.T, rtol=0, atol=1e-12 * max(1.0, np.abs(G).max()))
        assert np.linalg.eigvalsh(G).min() >= -1e-8 * np.linalg.norm(G, 2)


class TestSolve:
    def test_scalar(self):
        system = GramSystem((EMPTY_KEY,), [[1.0]], [0.5])
        np.testing.assert_allclose(solve_coefficients(system).c, [0.5])

    def test_boolean_pair_interaction(self):
        dist = boolean_cube(2)
        keys = list(enumerate_indices(dist.grid))
        f = parity(dist.support, (0, 1))
        for method in ("qr", "cholesky"):
            c = solve_coefficients(build_system(dist, f, keys), method=method).c
            np.testing.assert_allclose(c, [0, 0, 0, 0.25], atol=1e-15)

    def test_singular_gives_minimum_norm(self):
        # duplicated column: the mass splits evenly between the two copies
        system = GramSystem((EMPTY_KEY, K1), [[1.0, 1.0], [1.0, 1.0]], [2.0, 2.0])
        res = solve_coefficients(system, method="cholesky")
        np.testing.assert_allclose(res.c, [1.0, 1.0], atol=1e-12)
        assert res.method == "lstsq"

    def test_singular_design_gives_minimum_norm(self):
        D = np.array([[1.0, 1.0], [1.0, 1.0]]) / np.sqrt(2)
        t = np.array([2.0, 2.0]) / np.sqrt(2)
        system = GramSystem((EMPTY_KEY, K1), D.T @ D, D.T @ t, D, t)
        np.testing.assert_allclose(solve_coefficients(system).c, [1.0, 1.0], atol=1e-12)

    def test_inconsistent_system_raises(self):
        system = GramSystem((EMPTY_KEY, K1), [[1.0, 1.0], [1.0, 1.0]], [1.0, -1.0])
        with pytest.raises(NumericalError):
            solve_coefficients(system)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            solve_coefficients(GramSystem((EMPTY_KEY,), [[1.0]], [1.0]), method="lu")

    def test_empty_system(self):
        assert solve_coefficients(GramSystem((), np.zeros((0, 0)), np.zeros(0))).c.shape == (0,)

    @given(distributions(max_d=3, min_coverage=0.3), st.data())
    def test_exact_reconstruction_and_galerkin(self, dist, data):
        f = data.draw(targets(dist))
        keys = greedy_select(dist, SelectionConfig()).keys
        for method in ("qr", "cholesky"):
            system = build_system(dist, f, keys)
            res = solve_coefficients(system, method=method)
            assert np.linalg.norm(system.gram @ res.c - system.mean) <= 1e-6 * max(1.0, np.linalg.norm(system.mean))
            fit = design_columns(dist, keys) @ res.c
            assert np.max(np.abs(fit - f)) <= 1e-8 * (1 + np.max(np.abs(f)))
            resid = (f - fit) * dist.weights
            cols = design_columns(dist, keys)
            assert np.max(np.abs(cols.T @ resid)) <= 1e-8 * max(1.0, np.abs(cols).max())

    @given(distributions(max_d=3, min_coverage=0.3), st.randoms(use_true_random=False), st.data())
    def test_permuting_keys_permutes_coefficients(self, dist, random, data):
        f = data.draw(targets(dist))
        keys = list(greedy_select(dist, SelectionConfig()).keys)
        perm = list(range(len(keys)))
        random.shuffle(perm)
        c = solve_coefficients(build_system(dist, f, keys)).c
        cp = solve_coefficients(build_system(dist, f, [keys[j] for j in perm])).c
        np.testing.assert_allclose(cp, c[perm], rtol=1e-6, atol=1e-8 * (1 + np.abs(c).max()))

    @given(distributions(max_d=3, min_coverage=0.3), st.data())
    def test_intercept_is_mean(self, dist, data):
        f = data.draw(targets(dist))
        keys = greedy_select(dist, SelectionConfig()).keys
        assert keys[0] == EMPTY_KEY
        c = solve_coefficients(build_system(dist, f, keys)).c
        assert c[0] == pytest.approx(np.dot(dist.weights, f), abs=1e-9 * (1 + np.abs(f).max()))

    @given(distributions(max_d=3, full=True), st.data())
    def test_irrelevant_feature_coefficients_vanish(self, dist, data):
        # f ignores the last feature
        if dist.d < 2:
            return
        table = data.draw(st.lists(st.floats(-5, 5), min_size=64, max_size=64))
        codes = np.ravel_multi_index(dist.support[:, :-1].T, dist.grid.cardinalities[:-1])
        f = np.asarray(table)[codes % 64]
        keys = greedy_select(dist, SelectionConfig()).keys
        c = solve_coefficients(build_system(dist, f, keys)).c
        for key, v in zip(keys, c):
            if dist.d - 1 in key.A:
                assert abs(v) <= 1e-8 * (1 + np.abs(f).max())

    def test_pivot_tolerance_detects_rank_deficiency(self):
        dist = boolean_cube(2)
        keys = list(keys_for_subset(dist.grid, (0,)))
        system = build_system(dist, parity(dist.support, (0,)), [EMPTY_KEY] + keys)
        assert solve_coefficients(system, method="cholesky").method == "cholesky"
