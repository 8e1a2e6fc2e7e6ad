import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catanova.anova import (assemble, component_norms, decompose, global_importance, global_importances,
                            metrics, orthogonality_metric, shapley, shapley_matrix)
from catanova.basis import EMPTY_KEY, IndexKey
from catanova.datasets import analytical_case, boolean_cube, random_product
from catanova.distribution import from_dataset, inner_product
from catanova.exceptions import DataError, OutOfSupportError
from catanova.oracle import mobius_anova, parity
from catanova.selection import SelectionConfig

from conftest import distributions, product_distributions, targets


def strict_pairs(subsets):
    for A, B in itertools.product(subsets, repeat=2):
        if len(B) < len(A) and set(B) <= set(A):
            yield A, B


class TestDecompose:
    def test_constant(self, bernoulli_pair):
        dec = decompose(bernoulli_pair, np.full(3, 2.5))
        assert dec.intercept == pytest.approx(2.5, abs=1e-12)
        for A, comp in dec.components.items():
            if A:
                np.testing.assert_allclose(comp, 0.0, atol=1e-12)

    def test_analytical_norm_table(self):
        dist, f = analytical_case()
        dec = decompose(dist, f)
        norms = component_norms(dec, [(), (0,), (1,), (0, 1), (3,), (0, 3), (1, 3), (0, 1, 3)])
        expect = [1 / 9, 14 / 27, 2 / 27, 2 / 27, 0, 0, 0, 0]
        np.testing.assert_allclose(list(norms.values()), expect, rtol=0, atol=1e-10)
        assert all(2 not in k.A and 4 not in k.A for k in dec.keys)

    def test_boolean_parity(self):
        dist = boolean_cube(2)
        dec = decompose(dist, parity(dist.support, (0, 1)))
        np.testing.assert_allclose(dec.coefficients.c, [0, 0, 0, 0.25], atol=1e-15)
        np.testing.assert_allclose(dec.component((0, 1)), parity(dist.support, (0, 1)), atol=1e-15)

    def test_rejects_bad_target(self, bernoulli_pair):
        with pytest.raises(DataError):
            decompose(bernoulli_pair, np.ones(2))
        with pytest.raises(DataError):
            decompose(bernoulli_pair, [1.0, np.nan, 0.0])

    def test_missing_component_is_zero(self, bernoulli_pair):
        dec = decompose(bernoulli_pair, np.arange(3.0))
        np.testing.assert_array_equal(dec.component((0, 1)), np.zeros(3))

    def test_components_read_only(self, bernoulli_pair):
        dec = decompose(bernoulli_pair, np.arange(3.0))
        with pytest.raises(ValueError):
            dec.components[(0,)][0] = 1.0

    def test_assemble_length_check(self, bernoulli_pair):
        with pytest.raises(DataError):
            assemble(bernoulli_pair, [EMPTY_KEY], [1.0, 2.0])

    def test_main_effects_only_misses_pure_interaction(self):
        dist = boolean_cube(2)
        f = parity(dist.support, (0, 1))
        report = metrics(decompose(dist, f, SelectionConfig(max_order=1)), f)
        assert report.r_squared == pytest.approx(0.0, abs=1e-12)

    @given(distributions(max_d=4, min_coverage=0.3), st.data())
    def test_full_rank_reconstruction(self, dist, data):
        f = data.draw(targets(dist))
        dec = decompose(dist, f)
        assert np.max(np.abs(dec.fitted - f)) <= 1e-8 * (1 + np.max(np.abs(f)))

    @given(distributions(max_d=4, min_coverage=0.3), st.data())
    def test_hierarchical_orthogonality(self, dist, data):
        f = data.draw(targets(dist))
        dec = decompose(dist, f)
        scale = np.sqrt(inner_product(dist, f, f)) + 1
        for A, B in strict_pairs(dec.subsets):
            na = np.sqrt(inner_product(dist, dec.components[A], dec.components[A]))
            nb = np.sqrt(inner_product(dist, dec.components[B], dec.components[B]))
            # roundoff floor scales with the component sizes
            bound = 1e-10 * max(scale ** 2, na * nb)
            assert abs(inner_product(dist, dec.components[A], dec.components[B])) <= bound

    @given(distributions(max_d=3, min_coverage=0.3), st.data(), st.floats(-4, 4), st.floats(-4, 4))
    def test_affine_equivariance(self, dist, data, a, b):
        f = data.draw(targets(dist))
        base = decompose(dist, f)
        moved = decompose(dist, a * f + b)
        tol = 1e-7 * (1 + abs(a)) * (1 + np.max(np.abs(f)) + abs(b))
        assert moved.intercept == pytest.approx(a * base.intercept + b, abs=tol)
        for A in set(base.subsets) | set(moved.subsets):
            if A:
                np.testing.assert_allclose(moved.component(A), a * base.component(A), atol=tol)

    @given(product_distributions(max_d=3), st.data())
    def test_variance_splits_under_independence(self, dist, data):
        f = data.draw(targets(dist))
        dec = decompose(dist, f)
        centered = f - np.dot(dist.weights, f)
        var = inner_product(dist, centered, centered)
        total = sum(v for A, v in component_norms(dec).items() if A)
        assert total == pytest.approx(var, abs=1e-8 * (1 + var))

    @given(product_distributions(max_d=3), st.data())
    def test_matches_mobius_oracle(self, dist, data):
        f = data.draw(targets(dist))
        dec = decompose(dist, f)
        for A, comp in mobius_anova(dist, f).items():
            np.testing.assert_allclose(dec.component(A), comp, atol=1e-8 * (1 + np.abs(f).max()))

    def test_qr_and_cholesky_agree(self, rng):
        dist = random_product(rng, 4)
        f = rng.normal(size=dist.r)
        a = decompose(dist, f, method="qr")
        b = decompose(dist, f, method="cholesky")
        for A in a.subsets:
            np.testing.assert_allclose(a.component(A), b.component(A), atol=1e-9)


class TestShapley:
    def test_additive_function(self):
        dist = boolean_cube(2)
        f = 3.0 * dist.support[:, 0] - dist.support[:, 1]
        dec = decompose(dist, f)
        att = shapley(dec, (1, 0))
        np.testing.assert_allclose(att.shap, [1.5, 0.5], atol=1e-12)
        assert att.baseline == pytest.approx(1.0)
        assert att.fitted == pytest.approx(3.0)

    def test_interaction_is_split_evenly(self):
        dist = boolean_cube(2)
        dec = decompose(dist, parity(dist.support, (0, 1)))
        np.testing.assert_allclose(shapley(dec, (0, 0)).shap, [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(shapley(dec, (0, 1)).shap, [-0.5, -0.5], atol=1e-12)

    def test_out_of_support(self, bernoulli_pair):
        dec = decompose(bernoulli_pair, np.arange(3.0))
        with pytest.raises(OutOfSupportError):
            shapley(dec, (1, 1))

    def test_matrix_matches_rows(self, bernoulli_pair):
        dec = decompose(bernoulli_pair, np.array([1.0, -2.0, 4.0]))
        S = shapley_matrix(dec)
        for k, x in enumerate(bernoulli_pair.support):
            np.testing.assert_allclose(S[k], shapley(dec, x).shap, atol=1e-14)

    @given(distributions(max_d=4, min_coverage=0.3), st.data())
    def test_efficiency(self, dist, data):
        f = data.draw(targets(dist))
        dec = decompose(dist, f, SelectionConfig(rank_budget=data.draw(st.integers(1, dist.r))))
        gaps = dec.intercept + shapley_matrix(dec).sum(axis=1) - dec.fitted
        assert np.max(np.abs(gaps)) <= 1e-10 * (1 + np.abs(f).max())

    @given(distributions(max_d=3, full=True), st.data())
    def test_dummy_feature_gets_nothing(self, dist, data):
        if dist.d < 2:
            return
        g = data.draw(st.lists(st.floats(-5, 5), min_size=64, max_size=64))
        f = np.asarray(g)[np.ravel_multi_index(dist.support[:, :-1].T, dist.grid.cardinalities[:-1]) % 64]
        S = shapley_matrix(decompose(dist, f))
        assert np.max(np.abs(S[:, -1])) <= 1e-8 * (1 + np.abs(f).max())


class TestGlobalImportance:
    def test_uniform_binary_main_effect(self):
        # f = x1 on the binary cube: f_1 = x1 - 1/2, mean |f_1| = 1/2
        dist = boolean_cube(2)
        dec = decompose(dist, dist.support[:, 0].astype(float))
        np.testing.assert_allclose(global_importances(dec), [0.5, 0.0], atol=1e-12)

    def test_ternary_sign(self):
        dist, f = analytical_case()
        dec = decompose(dist, f)
        # f_1 takes the values -1, 1/3, 2/3 on the uniform ternary feature
        assert global_importance(dec, 0) == pytest.approx(2 / 3, abs=1e-10)
        assert global_importance(dec, 3) <= 1e-10
        assert global_importance(dec, 2) == 0.0

    def test_unselected_feature(self, bernoulli_pair):
        dec = decompose(bernoulli_pair, np.ones(3), SelectionConfig(rank_budget=1))
        assert global_importance(dec, 0) == 0.0


class TestMetrics:
    def test_exact_fit(self, bernoulli_pair):
        f = np.array([1.0, 2.0, 4.0])
        report = metrics(decompose(bernoulli_pair, f), f)
        assert report.r_squared == pytest.approx(1.0, abs=1e-12)
        assert report.mse <= 1e-24
        assert report.achieved_rank == 3

    def test_constant_target(self, bernoulli_pair):
        report = metrics(decompose(bernoulli_pair, np.full(3, 7.0)), np.full(3, 7.0))
        assert report.r_squared_defined and report.r_squared == 1.0

    def test_constant_target_truncated_fit_undefined(self):
        dist = boolean_cube(2)
        f = np.full(4, 1.0)
        dec = assemble(dist, [EMPTY_KEY], [0.0])
        report = metrics(dec, f)
        assert not report.r_squared_defined
        assert report.relative_mse == pytest.approx(1.0)

    def test_zero_target(self, bernoulli_pair):
        report = metrics(decompose(bernoulli_pair, np.zeros(3)), np.zeros(3))
        assert report.relative_mse == 0.0

    def test_length_check(self, bernoulli_pair):
        dec = decompose(bernoulli_pair, np.zeros(3))
        with pytest.raises(DataError):
            metrics(dec, np.zeros(4))

    def test_orthogonality_metric_detects_corruption(self):
        dist = from_dataset([[0, 0], [0, 1], [1, 0], [1, 1], [0, 0]])
        f = np.array([1.0, -1.0, 2.0, 0.5])
        dec = decompose(dist, f)
        assert orthogonality_metric(dec) <= 1e-14
        bad = dict(dec.components)
        bad[(0, 1)] = bad[(0, 1)] + 1e-3
        dec_bad = type(dec)(dist, dec.coefficients, bad)
        assert orthogonality_metric(dec_bad) > 1e-4

    def test_keys_listing(self, bernoulli_pair):
        dec = decompose(bernoulli_pair, np.arange(3.0))
        assert dec.keys == (EMPTY_KEY, IndexKey((0,), (0,)), IndexKey((1,), (0,)))
        assert dec.subsets == ((), (0,), (1,))
