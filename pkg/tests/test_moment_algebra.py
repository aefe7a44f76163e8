"""Tests for symbolic expectations of polynomials in i.i.d. coordinates."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pitmanlab.dist import DiscreteLattice, Exponential, Gaussian, MomentTable, Uniform, moment_table
from pitmanlab.errors import OrderError, ShapeError
from pitmanlab.moment_algebra import (
    SymPoly,
    build_gram,
    central_sample_moment,
    exponents,
    expect_iid,
    moment_basis,
    residual,
    residual_basis,
    sample_mean,
    solve_gram,
)
from pitmanlab.rng import SeededStream


def x(i, n):
    return SymPoly.variable(i, n)


def centred(spec, order):
    return moment_table(spec, order).central()


def brute_expect(p, lattice):
    """Expectation by summing over every point of the product lattice."""
    pts = np.asarray(lattice.points)
    probs = np.asarray(lattice.probs)
    total = 0.0
    for idx in itertools.product(range(len(pts)), repeat=p.n_vars):
        total += math.prod(probs[list(idx)]) * float(p.evaluate(pts[list(idx)]))
    return total


@st.composite
def polys(draw, n_vars=None, max_deg=4):
    n = draw(st.integers(1, 4)) if n_vars is None else n_vars
    count = draw(st.integers(1, 5))
    terms = {}
    for _ in range(count):
        mono = draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))
        if sum(mono) > max_deg:
            continue
        terms[tuple(mono)] = Fraction(draw(st.integers(-9, 9)), draw(st.integers(1, 5)))
    return SymPoly(terms, n)


EXACT_MOMENTS = moment_table(DiscreteLattice((-1.0, 0.0, 2.0), (0.25, 0.5, 0.25)), 8)


class TestSymPoly:
    def test_zero_terms_dropped(self):
        p = x(0, 2) - x(0, 2)
        assert p.terms == {}
        assert p.canonical_str() == "0"

    def test_arity_checked(self):
        with pytest.raises(ShapeError):
            SymPoly({(1,): 1}, 2)
        with pytest.raises(ShapeError):
            x(0, 2) + x(0, 3)

    def test_canonical_string_is_deterministic(self):
        p = (x(1, 2) + x(0, 2)) ** 2
        q = x(0, 2) ** 2 + 2 * x(0, 2) * x(1, 2) + x(1, 2) ** 2
        assert p == q
        assert p.canonical_str() == q.canonical_str()

    def test_evaluate(self):
        p = x(0, 2) ** 2 - 3 * x(1, 2) + 1
        assert p.evaluate([2.0, 1.0]) == pytest.approx(2.0)

    @given(polys(n_vars=3), polys(n_vars=3), polys(n_vars=3))
    @settings(max_examples=40, deadline=None)
    def test_ring_laws(self, p, q, r):
        assert p + q == q + p
        assert p * q == q * p
        assert (p + q) + r == p + (q + r)
        assert (p * q) * r == p * (q * r)
        assert p * (q + r) == p * q + p * r


class TestExpectIid:
    def test_product_of_independent(self):
        mt = MomentTable((Fraction(1), Fraction(3), Fraction(11)))
        assert expect_iid(x(0, 2) * x(1, 2), mt) == 9

    def test_squared_residual(self):
        mt = centred(Uniform(-1, 1), 2)
        # (1 - 1/n) sigma^2 with sigma^2 = 1/3, n = 3
        assert expect_iid(residual(0, 3) ** 2, mt) == Fraction(2, 9)

    def test_mean_times_second_central_moment(self):
        # brute-force oracle: expand xbar * m_2 by hand for n = 3 and collect mu_3 terms
        mt = centred(Exponential(1.0), 3)
        mu3 = mt[3]
        got = expect_iid(sample_mean(3) * central_sample_moment(2, 3), mt)
        assert got == Fraction(2, 9) * mu3
        assert got == Fraction(3 - 1, 3**2) * mu3

    def test_order_limit(self):
        with pytest.raises(OrderError):
            expect_iid(x(0, 1) ** 3, MomentTable((1, 0, 1)))

    @given(polys(n_vars=3), polys(n_vars=3), st.integers(-5, 5), st.integers(-5, 5))
    @settings(max_examples=60, deadline=None)
    def test_linearity(self, p, q, a, b):
        lhs = expect_iid(a * p + b * q, EXACT_MOMENTS)
        assert lhs == a * expect_iid(p, EXACT_MOMENTS) + b * expect_iid(q, EXACT_MOMENTS)

    @given(polys(n_vars=4), st.permutations(range(4)))
    @settings(max_examples=60, deadline=None)
    def test_permutation_symmetry(self, p, perm):
        assert expect_iid(p.relabel(perm), EXACT_MOMENTS) == expect_iid(p, EXACT_MOMENTS)

    @given(polys(n_vars=2), polys(n_vars=2))
    @settings(max_examples=60, deadline=None)
    def test_factorization(self, p, q):
        # p on x1, x2 and q moved to x3, x4
        p4 = SymPoly({m + (0, 0): c for m, c in p.terms.items()}, 4)
        q4 = SymPoly({(0, 0) + m: c for m, c in q.terms.items()}, 4)
        assert expect_iid(p4 * q4, EXACT_MOMENTS) == expect_iid(p, EXACT_MOMENTS) * expect_iid(q, EXACT_MOMENTS)

    @given(polys(n_vars=3))
    @settings(max_examples=30, deadline=None)
    def test_matches_enumeration(self, p):
        lat = DiscreteLattice((-1.0, 0.0, 2.0), (0.25, 0.5, 0.25))
        assert float(expect_iid(p, EXACT_MOMENTS)) == pytest.approx(brute_expect(p, lat), rel=1e-12, abs=1e-12)

    def test_against_sampling(self):
        rng = np.random.default_rng(SeededStream(99).substream(1).generator().integers(2**32))
        spec = Exponential(1.0)
        mt = moment_table(spec, 8)
        gen = SeededStream(99).substream(2).generator()
        for trial in range(20):
            n = int(rng.integers(1, 5))
            terms = {}
            for _ in range(int(rng.integers(1, 5))):
                mono = tuple(int(a) for a in rng.integers(0, 3, size=n))
                if sum(mono) <= 4:
                    terms[mono] = Fraction(int(rng.integers(-5, 6)))
            p = SymPoly(terms, n)
            draws = p.evaluate(spec.draw(gen, (200_000, n)))
            se = draws.std(ddof=1) / math.sqrt(len(draws))
            assert abs(draws.mean() - float(expect_iid(p, mt))) <= 4 * se + 1e-12, trial


class TestBases:
    def test_residual_basis_n2_k1(self):
        basis = residual_basis(2, 1)
        assert basis == [SymPoly.constant(Fraction(1), 2), x(0, 2) - sample_mean(2)]

    def test_residual_basis_counts(self):
        assert len(residual_basis(3, 1)) == 3
        assert len(residual_basis(3, 2)) == math.comb(4, 2)
        for n in range(2, 6):
            for k in range(0, 4):
                assert len(residual_basis(n, k)) == math.comb(n - 1 + k, k)

    def test_residual_basis_full_rank_under_gaussian(self):
        basis = residual_basis(3, 2)
        system = build_gram(basis, sample_mean(3), moment_table(Gaussian(), 4))
        assert system.min_eigenvalue() > 1e-6
        assert solve_gram(system)[1] == 6

    @given(st.integers(2, 5), st.integers(0, 3), st.floats(-5, 5))
    @settings(max_examples=30, deadline=None)
    def test_residuals_shift_invariant(self, n, k, c):
        pts = np.linspace(-1.0, 2.0, n)
        for q in residual_basis(n, k):
            assert q.evaluate(pts + c) == pytest.approx(q.evaluate(pts), abs=1e-9)

    def test_moment_basis(self):
        basis = moment_basis(3, 3)
        assert len(basis) == 3
        assert basis[1] == central_sample_moment(2, 3)

    def test_exponents_cover_degrees(self):
        assert exponents(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]

    def test_invalid(self):
        with pytest.raises(ShapeError):
            residual_basis(1, 1)
        with pytest.raises(ValueError):
            residual_basis(3, -1)


class TestGram:
    def test_constant_basis(self):
        system = build_gram([SymPoly.constant(Fraction(1), 2)], sample_mean(2), centred(Uniform(-1, 1), 2))
        assert system.gram.tolist() == [[1]]
        assert system.rhs.tolist() == [0]

    def test_residual_orthogonal_to_mean(self):
        for spec in (Exponential(1.0), Uniform(-1, 1), DiscreteLattice((0.0, 3.0), (0.75, 0.25))):
            system = build_gram(residual_basis(2, 1), sample_mean(2), centred(spec, 2))
            assert system.rhs[1] == 0

    def test_exponential_quadratic_rhs(self):
        mt = centred(Exponential(1.0), 4)
        system = build_gram(residual_basis(2, 2), sample_mean(2), mt)
        # basis order 1, r1, r1^2; E[xbar r1^2] = mu3 / 4 at n = 2
        assert system.rhs[2] == mt[3] / 4
        assert system.rhs[2] == Fraction(1, 2)

    def test_exact_and_symmetric(self):
        system = build_gram(residual_basis(3, 2), sample_mean(3), centred(Exponential(1.0), 4))
        assert system.exact
        assert np.array_equal(system.gram, system.gram.T)
        assert system.min_eigenvalue() >= -1e-10

    def test_float_moments(self):
        mt = MomentTable((1.0, 0.0, 1.0, 0.5, 3.2))
        system = build_gram(residual_basis(2, 2), sample_mean(2), mt)
        assert not system.exact
        assert system.rhs_float()[2] == pytest.approx(0.125)

    def test_order_limit(self):
        with pytest.raises(OrderError):
            build_gram(residual_basis(2, 2), sample_mean(2), centred(Exponential(1.0), 3))

    def test_degenerate_lattice_reports_rank(self):
        # two-point support at n = 2: r1 takes values -1, 0, 1, so r1^3 = r1 and the cubic space collapses
        lat = DiscreteLattice((-1.0, 1.0), (0.5, 0.5))
        system = build_gram(residual_basis(2, 3), sample_mean(2), centred(lat, 6))
        coef, rank = solve_gram(system)
        assert len(system.basis) == 4
        assert rank == 3
        assert np.all(np.isfinite(coef))

    @given(st.sampled_from([Exponential(1.0), Uniform(-1, 1), DiscreteLattice((0, 1, 3), (0.5, 0.3, 0.2))]),
           st.integers(2, 4), st.integers(0, 3))
    @settings(max_examples=25, deadline=None)
    def test_psd(self, spec, n, k):
        system = build_gram(residual_basis(n, k), sample_mean(n), centred(spec, 2 * max(k, 1)))
        assert system.min_eigenvalue() >= -1e-10
