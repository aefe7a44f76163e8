"""Hoeffding (ANOVA) decompositions on products of finite spaces.

For ``f`` of independent coordinates ``X_s`` the components are

    g_T = sum_{U subset T} (-1)^{|T|-|U|} E[f | X_U],

which are mutually orthogonal, sum back to ``f``, and split its variance.
Everything is computed exactly by weighted averaging over probability tables.
Coordinates are identified by 0-based integers and ``dists[i]`` is the law of
coordinate ``i``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dist import DiscreteLattice
from .errors import ShapeError, SizeError
from .verdict import InequalityVerdict

PRODUCT_LIMIT = 10**6
EQUALITY_TOL = 1e-10


@dataclass(frozen=True)
class SubsetFunction:
    """``phi(X_s)`` tabulated on the product of the supports of ``subset``.

    ``table`` has one axis per coordinate in ``subset`` (in that order),
    optionally followed by a single axis for vector values.
    """

    subset: tuple
    table: np.ndarray

    def __post_init__(self):
        sub = tuple(int(i) for i in self.subset)
        if len(set(sub)) != len(sub):
            raise ShapeError("subset indices must be distinct")
        object.__setattr__(self, "subset", sub)
        table = np.asarray(self.table, dtype=float)
        if table.ndim not in (len(sub), len(sub) + 1):
            raise ShapeError("table needs one axis per coordinate plus an optional value axis")
        object.__setattr__(self, "table", table)

    @property
    def is_vector(self) -> bool:
        return self.table.ndim == len(self.subset) + 1

    def check(self, dists: Sequence[DiscreteLattice]):
        for axis, i in enumerate(self.subset):
            if i >= len(dists):
                raise ShapeError(f"coordinate {i} has no distribution")
            if self.table.shape[axis] != len(dists[i].points):
                raise ShapeError(f"axis {axis} does not match the support of coordinate {i}")


@dataclass
class AnovaDecomposition:
    subset: tuple
    components: dict
    component_variance: dict
    total_variance: float | np.ndarray


def _weights(dists, coords):
    return [np.asarray(dists[i].probs, dtype=float) for i in coords]


def _expect(table, probs, axes, keepdims=True):
    """Average ``table`` over ``axes`` with the matching probability vectors."""
    out = table
    for ax in sorted(axes, reverse=True):
        shape = [1] * out.ndim
        shape[ax] = -1
        out = (out * probs[ax].reshape(shape)).sum(axis=ax, keepdims=keepdims)
    return out


def _second_moment(table, probs, k, vector):
    """``E[g g^T]`` (or ``E g^2``) of a table over its first ``k`` axes."""
    if vector:
        outer = table[..., :, None] * table[..., None, :]
        return _expect(outer, probs + [None, None], range(k), keepdims=False)
    return float(_expect(table**2, probs, range(k), keepdims=False))


def _variance(table, probs, k, vector):
    mean = _expect(table, probs, range(k), keepdims=False)
    second = _second_moment(table, probs, k, vector)
    if vector:
        return second - np.outer(mean, mean)
    return second - float(mean) ** 2


def hoeffding_decompose(f: SubsetFunction, dists: Sequence[DiscreteLattice]) -> AnovaDecomposition:
    """Components for every ``T`` subset of ``f.subset`` (keys are coordinate tuples)."""
    f.check(dists)
    k = len(f.subset)
    size = math.prod(f.table.shape[:k])
    if size > PRODUCT_LIMIT:
        raise SizeError(f"product space of size {size} exceeds {PRODUCT_LIMIT}")
    probs = _weights(dists, f.subset)
    cond = {}
    for r in range(k + 1):
        for keep in itertools.combinations(range(k), r):
            drop = [a for a in range(k) if a not in keep]
            cond[keep] = np.broadcast_to(_expect(f.table, probs, drop), f.table.shape)
    comps = {}
    variances = {}
    for keep in cond:
        g = np.zeros(f.table.shape)
        for r in range(len(keep) + 1):
            for sub in itertools.combinations(keep, r):
                g = g + (-1) ** (len(keep) - r) * cond[sub]
        key = tuple(f.subset[a] for a in keep)
        comps[key] = g
        # nonempty components have mean zero; the constant one carries no variance
        variances[key] = _variance(g, probs, k, f.is_vector)
    return AnovaDecomposition(f.subset, comps, variances, _variance(f.table, probs, k, f.is_vector))


def _size(v) -> float:
    return float(np.trace(v)) if np.ndim(v) else float(v)


def decomposability_test(f: SubsetFunction, dists: Sequence[DiscreteLattice], tol: float = EQUALITY_TOL) -> bool:
    """True when every component of order two or more has (trace) variance below ``tol``."""
    dec = hoeffding_decompose(f, dists)
    return all(_size(v) < tol for t, v in dec.component_variance.items() if len(t) >= 2)


def _embed(f: SubsetFunction, n_coords: int) -> np.ndarray:
    """Broadcastable view of ``f`` over all ``n_coords`` coordinate axes."""
    k = len(f.subset)
    order = np.argsort(f.subset)
    value_axes = [k] if f.is_vector else []
    t = np.transpose(f.table, list(order) + value_axes)
    shape = [1] * n_coords + ([f.table.shape[-1]] if f.is_vector else [])
    for ax, i in enumerate(sorted(f.subset)):
        shape[i] = t.shape[ax]
    return t.reshape(shape)


def variance_drop_check(
    functions: Sequence[SubsetFunction],
    weights: Sequence[float],
    dists: Sequence[DiscreteLattice],
    tol: float = EQUALITY_TOL,
) -> InequalityVerdict:
    """``var(sum w_s phi_s) <= C(N-1, m-1) sum w_s^2 var(phi_s)`` by exact enumeration.

    ``functions`` must contain exactly one function per m-subset of the ``N``
    coordinates in ``dists``. Vector-valued tables are compared in Loewner order.
    """
    n_coords = len(dists)
    if not functions:
        raise ShapeError("no functions given")
    m = len(functions[0].subset)
    subsets = sorted(tuple(sorted(f.subset)) for f in functions)
    if subsets != list(itertools.combinations(range(n_coords), m)):
        raise ShapeError(f"need exactly one function per {m}-subset of {n_coords} coordinates")
    w = np.asarray(weights, dtype=float)
    if len(w) != len(functions) or np.any(w <= 0) or abs(math.fsum(w) - 1.0) > 1e-12:
        raise ValueError("weights must be positive, one per function, and sum to 1")
    vector = functions[0].is_vector
    if any(f.is_vector != vector for f in functions):
        raise ShapeError("mixing scalar and vector tables")
    for f in functions:
        f.check(dists)
    shape = tuple(len(d.points) for d in dists)
    if math.prod(shape) > PRODUCT_LIMIT:
        raise SizeError("joint product space exceeds the enumeration limit")
    probs = _weights(dists, range(n_coords))
    total = sum(wi * _embed(f, n_coords) for wi, f in zip(w, functions))
    full_shape = shape + ((functions[0].table.shape[-1],) if vector else ())
    total = np.broadcast_to(total, full_shape)
    lhs = _variance(total, probs, n_coords, vector)
    each = [_variance(f.table, _weights(dists, f.subset), m, vector) for f in functions]
    rhs = math.comb(n_coords - 1, m - 1) * sum(wi**2 * v for wi, v in zip(w, each))
    verdict = InequalityVerdict.build(
        "variance_drop",
        {"N": n_coords, "m": m, "weights": list(w), "vector": vector},
        lhs,
        rhs,
        relation="<=",
        tol=tol,
    )
    verdict.detail["equality_gap"] = verdict.slack
    return verdict


def loewner_ge(a, b, tol: float = 1e-9) -> bool:
    """``A >= B`` in Loewner order: the smallest eigenvalue of ``A - B`` is at least ``-tol``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ShapeError("Loewner comparison needs square matrices of equal shape")
    d = a - b
    scale = max(1.0, float(np.abs(d).max()))
    if np.abs(d - d.T).max() > 1e-9 * scale:
        raise ShapeError("Loewner comparison needs symmetric matrices")
    return bool(np.linalg.eigvalsh(0.5 * (d + d.T)).min() >= -tol)


def _first_order(f: SubsetFunction, dists, coord: int) -> np.ndarray:
    """First-order Hoeffding component of ``f`` as a function of ``X_coord`` alone."""
    g = hoeffding_decompose(f, dists).components[(coord,)]
    # the component is constant along every other coordinate axis
    idx = [0] * g.ndim
    idx[f.subset.index(coord)] = slice(None)
    return np.asarray(g[tuple(idx)])


def equality_predicted(
    functions: Sequence[SubsetFunction],
    weights: Sequence[float],
    dists: Sequence[DiscreteLattice],
    tol: float = EQUALITY_TOL,
) -> bool:
    """Whether the variance-drop bound is attained.

    With ``m = N`` there is a single function and the bound is an identity.
    Otherwise equality needs every function additively decomposable and, for
    each coordinate ``i``, the weighted first-order parts ``w_s g_{s,i}`` to
    coincide across all subsets ``s`` containing ``i``.
    """
    n_coords = len(dists)
    m = len(functions[0].subset)
    if m == n_coords:
        return True
    if not all(decomposability_test(f, dists, tol) for f in functions):
        return False
    for i in range(n_coords):
        parts = [w * _first_order(f, dists, i) for w, f in zip(weights, functions) if i in f.subset]
        p = np.asarray(dists[i].probs, dtype=float)
        for a in parts[1:]:
            if float(np.dot(p, (a - parts[0]) ** 2)) > tol:
                return False
    return True
