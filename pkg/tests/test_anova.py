"""Tests for Hoeffding decompositions and the variance drop inequality."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pitmanlab.anova import (
    SubsetFunction,
    decomposability_test,
    equality_predicted,
    hoeffding_decompose,
    loewner_ge,
    variance_drop_check,
)
from pitmanlab.bench.experiments import random_drop_instance
from pitmanlab.dist import DiscreteLattice
from pitmanlab.errors import ShapeError, SizeError

PM1 = DiscreteLattice((-1.0, 1.0), (0.5, 0.5))
THREE = DiscreteLattice((-1.0, 0.0, 1.0), (0.25, 0.5, 0.25))
POINT = DiscreteLattice((2.0,), (1.0,))


def joint_probs(dists, subset):
    out = np.ones(())
    for i in subset:
        out = np.multiply.outer(out, np.asarray(dists[i].probs))
    return out


def grid(dists, subset):
    """Coordinate values broadcast over the product of supports."""
    axes = []
    for axis, i in enumerate(subset):
        shape = [1] * len(subset)
        shape[axis] = -1
        axes.append(np.asarray(dists[i].points).reshape(shape))
    return axes


def random_lattices(rng, count, max_support=4):
    out = []
    for _ in range(count):
        size = int(rng.integers(2, max_support + 1))
        p = rng.dirichlet(np.ones(size)) * 0.9 + 0.1 / size
        out.append(DiscreteLattice(tuple(float(i) for i in range(size)), tuple(p / p.sum())))
    return out


class TestDecomposition:
    def test_additive_has_only_singletons(self):
        x1, x2 = grid([PM1, THREE], (0, 1))
        dec = hoeffding_decompose(SubsetFunction((0, 1), x1 + x2), [PM1, THREE])
        assert dec.component_variance[(0, 1)] < 1e-15
        assert dec.component_variance[(0,)] == pytest.approx(1.0)
        assert dec.component_variance[(1,)] == pytest.approx(0.5)

    def test_product_is_pure_interaction(self):
        x1, x2 = grid([PM1, PM1], (0, 1))
        dec = hoeffding_decompose(SubsetFunction((0, 1), x1 * x2), [PM1, PM1])
        assert dec.component_variance[(0, 1)] == pytest.approx(1.0)
        assert dec.component_variance[(0,)] == pytest.approx(0.0, abs=1e-15)
        assert dec.component_variance[(1,)] == pytest.approx(0.0, abs=1e-15)

    def test_constant(self):
        dec = hoeffding_decompose(SubsetFunction((0, 1), np.full((2, 3), 4.0)), [PM1, THREE])
        assert np.allclose(dec.components[()], 4.0)
        assert all(v < 1e-15 for t, v in dec.component_variance.items() if t)

    def test_shape_checked(self):
        with pytest.raises(ShapeError):
            hoeffding_decompose(SubsetFunction((0, 1), np.zeros((2, 2))), [PM1, THREE])
        with pytest.raises(ShapeError):
            SubsetFunction((0, 0), np.zeros((2, 2)))

    def test_size_guard(self):
        big = DiscreteLattice(tuple(float(i) for i in range(1001)), tuple([1 / 1001] * 1001))
        with pytest.raises(SizeError):
            hoeffding_decompose(SubsetFunction((0, 1), np.zeros((1001, 1001))), [big, big])

    def test_random_tables(self):
        rng = np.random.default_rng(20240101)
        for _ in range(50):
            k = int(rng.integers(1, 5))
            dists = random_lattices(rng, k)
            subset = tuple(range(k))
            table = rng.normal(size=tuple(len(d.points) for d in dists)) * 3
            dec = hoeffding_decompose(SubsetFunction(subset, table), dists)
            p = joint_probs(dists, subset)
            comps = {t: np.broadcast_to(g, table.shape) for t, g in dec.components.items()}
            # reconstruction
            assert np.abs(sum(comps.values()) - table).max() < 1e-10
            # orthogonality
            for (t, a), (u, b) in itertools.combinations(comps.items(), 2):
                assert abs(float((p * a * b).sum())) < 1e-10, (t, u)
            # variance additivity
            total = float((p * table**2).sum() - (p * table).sum() ** 2)
            assert abs(total - sum(v for t, v in dec.component_variance.items())) < 1e-10

    def test_vector_valued(self):
        rng = np.random.default_rng(3)
        dists = random_lattices(rng, 2)
        table = rng.normal(size=(len(dists[0].points), len(dists[1].points), 2))
        dec = hoeffding_decompose(SubsetFunction((0, 1), table), dists)
        assert dec.total_variance.shape == (2, 2)
        assert np.allclose(sum(dec.component_variance.values()), dec.total_variance, atol=1e-10)


class TestDecomposability:
    def test_linear(self):
        x1, x2 = grid([PM1, THREE], (0, 1))
        assert decomposability_test(SubsetFunction((0, 1), x1 + 2 * x2), [PM1, THREE])

    def test_product(self):
        x1, x2 = grid([PM1, PM1], (0, 1))
        assert not decomposability_test(SubsetFunction((0, 1), x1 * x2), [PM1, PM1])

    def test_degenerate_coordinate(self):
        x1, x2 = grid([PM1, POINT], (0, 1))
        assert decomposability_test(SubsetFunction((0, 1), x1 * x2), [PM1, POINT])


class TestVarianceDrop:
    def test_independent_singletons_equality(self):
        fs = [SubsetFunction((0,), [-1.0, 1.0]), SubsetFunction((1,), [0.0, 2.0, 5.0])]
        v = variance_drop_check(fs, [0.3, 0.7], [PM1, THREE])
        assert abs(v.slack) < 1e-12
        assert v.status == "pass"

    def test_symmetric_additive_equality(self):
        dists = [PM1, PM1, PM1]
        fs = []
        for s in itertools.combinations(range(3), 2):
            a, b = grid(dists, s)
            fs.append(SubsetFunction(s, a + b))
        w = [1 / 3] * 3
        v = variance_drop_check(fs, w, dists)
        assert v.lhs == pytest.approx(4 / 3) and v.rhs == pytest.approx(4 / 3)
        assert abs(v.detail["equality_gap"]) < 1e-12
        assert equality_predicted(fs, w, dists)

    def test_additive_without_matching_parts_is_strict(self):
        # each phi_s is additive, but x1 enters with opposite signs in two subsets
        dists = [PM1, PM1, PM1]
        x = [np.asarray(PM1.points)] * 3
        f01 = SubsetFunction((0, 1), x[0][:, None] + x[1][None, :])
        f02 = SubsetFunction((0, 2), -x[0][:, None] + x[2][None, :])
        f12 = SubsetFunction((1, 2), x[1][:, None] + x[2][None, :])
        w = [1 / 3] * 3
        v = variance_drop_check([f01, f02, f12], w, dists)
        assert all(decomposability_test(f, dists) for f in (f01, f02, f12))
        assert v.slack > 0.1
        assert not equality_predicted([f01, f02, f12], w, dists)

    def test_products_strict(self):
        dists = [PM1, PM1, PM1]
        fs = []
        for s in itertools.combinations(range(3), 2):
            a, b = grid(dists, s)
            fs.append(SubsetFunction(s, a * b))
        v = variance_drop_check(fs, [1 / 3] * 3, dists)
        # pairwise products are uncorrelated: lhs = 3/9, rhs = 2 * 3/9
        assert v.lhs == pytest.approx(1 / 3) and v.rhs == pytest.approx(2 / 3)
        assert v.slack > 0.1

    def test_single_function_identity(self):
        rng = np.random.default_rng(1)
        dists = random_lattices(rng, 3)
        f = SubsetFunction((0, 1, 2), rng.normal(size=tuple(len(d.points) for d in dists)))
        v = variance_drop_check([f], [1.0], dists)
        assert abs(v.slack) < 1e-12
        assert equality_predicted([f], [1.0], dists)

    def test_validation(self):
        with pytest.raises(ShapeError):
            variance_drop_check([SubsetFunction((0,), [1.0, 2.0])], [1.0], [PM1, PM1])
        with pytest.raises(ValueError):
            variance_drop_check(
                [SubsetFunction((0,), [1.0, 2.0]), SubsetFunction((1,), [1.0, 2.0])], [0.5, 0.6], [PM1, PM1]
            )

    def test_two_hundred_random_instances(self):
        rng = np.random.default_rng(555)
        styles = ("random", "additive", "product")
        seen = {s: 0 for s in styles}
        for i in range(200):
            style = styles[i % 3]
            fs, w, dists = random_drop_instance(rng, 4, 4, style)
            v = variance_drop_check(fs, w, dists)
            assert v.status == "pass"
            observed = abs(v.slack) < 1e-9
            assert equality_predicted(fs, w, dists, tol=1e-9) == observed
            if style == "additive":
                assert abs(v.slack) < 1e-10
            if style == "product":
                assert v.slack > 0.1
            seen[style] += 1
        assert min(seen.values()) > 60

    @given(st.integers(0, 2**32), st.integers(2, 4))
    @settings(max_examples=25, deadline=None)
    def test_matrix_form_loewner(self, seed, big_n):
        rng = np.random.default_rng(seed)
        dists = random_lattices(rng, big_n, 3)
        m = int(rng.integers(1, big_n + 1))
        subsets = list(itertools.combinations(range(big_n), m))
        fs = [SubsetFunction(s, rng.normal(size=tuple(len(dists[i].points) for i in s) + (2,))) for s in subsets]
        w = rng.dirichlet(np.ones(len(subsets))) * 0.9 + 0.1 / len(subsets)
        w = w / w.sum()
        v = variance_drop_check(fs, list(w), dists)
        assert v.lhs.shape == (2, 2)
        assert loewner_ge(v.rhs, v.lhs, tol=1e-9)
        # every one-dimensional projection satisfies the scalar inequality
        for c in rng.normal(size=(5, 2)):
            proj = [SubsetFunction(f.subset, f.table @ c) for f in fs]
            assert variance_drop_check(proj, list(w), dists).status == "pass"


class TestLoewner:
    def test_examples(self):
        assert loewner_ge(np.eye(2), np.zeros((2, 2)))
        assert not loewner_ge(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
        assert loewner_ge(2 * np.eye(3), np.eye(3))

    def test_shape(self):
        with pytest.raises(ShapeError):
            loewner_ge(np.eye(2), np.eye(3))
        with pytest.raises(ShapeError):
            loewner_ge(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros((2, 2)))

    @given(st.integers(0, 2**32))
    def test_gram_matrices_dominate_zero(self, seed):
        a = np.random.default_rng(seed).normal(size=(3, 3))
        assert loewner_ge(a @ a.T, np.zeros((3, 3)))
        assert loewner_ge(a @ a.T + np.eye(3), a @ a.T)
