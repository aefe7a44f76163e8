"""Exact expectations of polynomials in i.i.d. coordinates.

A :class:`SymPoly` is a sparse polynomial in ``x_1..x_n``. Because the
coordinates are i.i.d., the expectation of a monomial ``prod x_i^{a_i}`` is
``prod m[a_i]`` where ``m`` are raw moments, so every expectation reduces to
table lookups. With rational moments all arithmetic stays in
:class:`fractions.Fraction`; floats appear only when a Gram system is solved.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .dist import MomentTable
from .errors import OrderError, ShapeError

Monomial = tuple  # exponent per variable


class SymPoly:
    """Sparse multivariate polynomial; immutable by convention."""

    __slots__ = ("terms", "n_vars")

    def __init__(self, terms: dict, n_vars: int):
        self.n_vars = int(n_vars)
        clean = {}
        for mono, c in terms.items():
            if len(mono) != self.n_vars:
                raise ShapeError(f"monomial {mono} has wrong arity for {n_vars} variables")
            if c != 0:
                clean[tuple(mono)] = c
        self.terms = clean

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, c, n_vars: int) -> "SymPoly":
        return cls({(0,) * n_vars: c}, n_vars)

    @classmethod
    def variable(cls, i: int, n_vars: int) -> "SymPoly":
        """``x_{i+1}`` (zero-based index ``i``)."""
        mono = [0] * n_vars
        mono[i] = 1
        return cls({tuple(mono): Fraction(1)}, n_vars)

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "SymPoly":
        if isinstance(other, SymPoly):
            if other.n_vars != self.n_vars:
                raise ShapeError("polynomials over different variable sets")
            return other
        return SymPoly.constant(other, self.n_vars)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return SymPoly(out, self.n_vars)

    __radd__ = __add__

    def __neg__(self):
        return SymPoly({m: -c for m, c in self.terms.items()}, self.n_vars)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, SymPoly):
            return SymPoly({m: c * other for m, c in self.terms.items()}, self.n_vars)
        other = self._coerce(other)
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0) + c1 * c2
        return SymPoly(out, self.n_vars)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = SymPoly.constant(Fraction(1), self.n_vars)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, SymPoly):
            return NotImplemented
        return self.n_vars == other.n_vars and self.terms == other.terms

    def __hash__(self):
        return hash((self.n_vars, frozenset(self.terms.items())))

    # inspection ---------------------------------------------------------
    @property
    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)

    @property
    def max_var_degree(self) -> int:
        return max((max(m) for m in self.terms if m), default=0)

    def relabel(self, perm: Sequence[int]) -> "SymPoly":
        """Polynomial with variable ``i`` renamed to ``perm[i]``."""
        out = {}
        for m, c in self.terms.items():
            new = [0] * self.n_vars
            for i, a in enumerate(m):
                new[perm[i]] = a
            out[tuple(new)] = c
        return SymPoly(out, self.n_vars)

    def evaluate(self, x) -> np.ndarray:
        """Values at the rows of ``x`` (shape ``(..., n_vars)``)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_vars:
            raise ShapeError(f"expected {self.n_vars} coordinates, got {x.shape[-1]}")
        out = np.zeros(x.shape[:-1])
        for m, c in self.terms.items():
            term = np.full(x.shape[:-1], float(c))
            for i, a in enumerate(m):
                if a:
                    term = term * x[..., i] ** a
            out = out + term
        return out

    def canonical_str(self) -> str:
        """Deterministic text form, terms sorted by degree then exponents."""
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=lambda m: (sum(m), tuple(-a for a in m))):
            c = self.terms[m]
            factors = [f"x{i + 1}" + (f"^{a}" if a > 1 else "") for i, a in enumerate(m) if a]
            parts.append(f"({c})" + ("*" + "*".join(factors) if factors else ""))
        return " + ".join(parts)

    def __repr__(self):
        return f"SymPoly[{self.n_vars}]({self.canonical_str()})"


def sample_mean(n: int) -> SymPoly:
    return SymPoly({tuple(int(i == j) for i in range(n)): Fraction(1, n) for j in range(n)}, n)


def residual(i: int, n: int) -> SymPoly:
    """``x_{i+1} - xbar``."""
    return SymPoly.variable(i, n) - sample_mean(n)


def central_sample_moment(j: int, n: int) -> SymPoly:
    """``m_j = (1/n) sum_i (x_i - xbar)^j``."""
    total = SymPoly.constant(Fraction(0), n)
    for i in range(n):
        total = total + residual(i, n) ** j
    return total * Fraction(1, n)


def expect_iid(p: SymPoly, moments: MomentTable):
    """``E p(X_1..X_n)`` for i.i.d. ``X_i`` with the given raw moments."""
    if p.max_var_degree > moments.order_limit:
        raise OrderError(
            f"needs moments up to order {p.max_var_degree}, table stops at {moments.order_limit}"
        )
    m = moments.raw_moments
    total = 0
    for mono, c in p.terms.items():
        term = c
        for a in mono:
            if a:
                term = term * m[a]
        total = total + term
    return total


def exponents(n_vars: int, max_total: int) -> list[tuple]:
    out = []
    for deg in range(max_total + 1):
        for combo in itertools.combinations_with_replacement(range(n_vars), deg):
            e = [0] * n_vars
            for v in combo:
                e[v] += 1
            out.append(tuple(e))
    return out


def residual_basis(n: int, k: int) -> list[SymPoly]:
    """Monomials of total degree <= k in the free residuals ``r_1..r_{n-1}``.

    ``r_n = -(r_1 + ... + r_{n-1})`` is dropped, which removes the only linear
    relation among residuals; the constant 1 comes first.
    """
    if n < 2:
        raise ShapeError("residual space needs n >= 2")
    if k < 0:
        raise ValueError("degree must be nonnegative")
    res = [residual(i, n) for i in range(n - 1)]
    cache: dict = {}

    def power(i, a):
        if (i, a) not in cache:
            cache[(i, a)] = res[i] ** a
        return cache[(i, a)]

    basis = []
    for e in exponents(n - 1, k):
        poly = SymPoly.constant(Fraction(1), n)
        for i, a in enumerate(e):
            if a:
                poly = poly * power(i, a)
        basis.append(poly)
    return basis


def moment_basis(n: int, k: int) -> list[SymPoly]:
    """``{1, m_2, ..., m_k}`` as polynomials in ``x_1..x_n``."""
    return [SymPoly.constant(Fraction(1), n)] + [central_sample_moment(j, n) for j in range(2, k + 1)]


@dataclass
class GramSystem:
    """Normal equations ``gram @ c = rhs`` for projecting ``target`` on ``basis``."""

    basis: list
    gram: np.ndarray  # object dtype (exact) or float
    rhs: np.ndarray
    exact: bool

    def gram_float(self) -> np.ndarray:
        return np.array(self.gram, dtype=float)

    def rhs_float(self) -> np.ndarray:
        return np.array(self.rhs, dtype=float)

    @property
    def effective_rank(self) -> int:
        return solve_gram(self)[1]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.gram_float()).min())


def _lcm(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def build_gram(basis: Sequence[SymPoly], target: SymPoly, moments: MomentTable) -> GramSystem:
    """Gram matrix ``E[q_a q_b]`` and right-hand side ``E[target q_a]``.

    Products are never expanded symbolically: every polynomial is written in
    the common monomial basis, and ``E[x^alpha x^beta] = prod m[alpha_i + beta_i]``
    fills a moment matrix ``M`` so that ``gram = C M C^T``.
    """
    if not basis:
        raise ShapeError("empty basis")
    n = target.n_vars
    polys = list(basis) + [target]
    need = 2 * max(p.max_var_degree for p in polys)
    if need > moments.order_limit:
        raise OrderError(f"needs moments up to order {need}, table stops at {moments.order_limit}")
    monos = sorted({m for p in polys for m in p.terms})
    col = {m: i for i, m in enumerate(monos)}
    exact = moments.is_exact and all(
        isinstance(c, (Fraction, int)) for p in polys for c in p.terms.values()
    )
    mom = moments.raw_moments
    if exact:
        coef = [[Fraction(0)] * len(monos) for _ in polys]
        for r, p in enumerate(polys):
            for m, c in p.terms.items():
                coef[r][col[m]] = Fraction(c)
        d_c = _lcm(c.denominator for row in coef for c in row)
        c_int = np.array([[int(c * d_c) for c in row] for row in coef], dtype=object)
        mmat = [[_mono_expect(a, b, mom) for b in monos] for a in monos]
        d_m = _lcm(v.denominator for row in mmat for v in row)
        m_int = np.array([[int(v * d_m) for v in row] for row in mmat], dtype=object)
        full = c_int.dot(m_int).dot(c_int.T)
        scale = d_c * d_c * d_m
        full = np.vectorize(lambda v: Fraction(int(v), scale), otypes=[object])(full)
    else:
        coef = np.zeros((len(polys), len(monos)))
        for r, p in enumerate(polys):
            for m, c in p.terms.items():
                coef[r, col[m]] = float(c)
        momf = [float(v) for v in mom]
        mmat = np.array([[_mono_expect(a, b, momf) for b in monos] for a in monos], dtype=float)
        full = coef @ mmat @ coef.T
    k = len(basis)
    return GramSystem(list(basis), full[:k, :k], full[:k, k], exact)


def _mono_expect(a, b, mom):
    out = Fraction(1) if isinstance(mom[0], (Fraction, int)) else 1.0
    for x, y in zip(a, b):
        s = x + y
        if s:
            out = out * mom[s]
    return out


def solve_gram(system: GramSystem, rcond: float = 1e-12) -> tuple[np.ndarray, int]:
    """Minimum-norm solution via a symmetric eigendecomposition pseudo-inverse.

    The matrix is equilibrated by its diagonal first; eigenvalues below
    ``rcond`` times the largest are discarded. Returns ``(coefficients, rank)``.
    """
    g = system.gram_float()
    rhs = system.rhs_float()
    d = np.sqrt(np.clip(np.diag(g), 0.0, None))
    live = d > 0
    s = np.where(live, 1.0 / np.where(live, d, 1.0), 0.0)
    gs = g * np.outer(s, s)
    w, v = np.linalg.eigh(gs)
    keep = w > rcond * max(w.max(), 0.0) if w.size else w > 0
    inv = (v[:, keep] / w[keep]) @ v[:, keep].T
    coef = s * (inv @ (s * rhs))
    return coef, int(keep.sum())
