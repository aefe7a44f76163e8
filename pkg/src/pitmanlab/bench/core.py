"""Shared machinery for experiments: exact variances and paired Monte Carlo designs.

A :class:`Design` collects the estimators an experiment needs. Each column maps
one shared batch of draws to a batch of estimates. Columns with a known exact
variance use it; the rest are simulated together on the same draws, so
comparisons between columns are paired. Verdict quantities are arbitrary
functions of the column variances, and their standard errors come from the
delete-one-block jackknife of the whole expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Sequence

import numpy as np

from .. import montecarlo as mc
from ..dist import (
    DiscreteLattice,
    DistributionSpec,
    Gaussian,
    ProductMultivariate,
    VectorLattice,
    canonical,
)
from ..errors import CapabilityError, ConfigError, SizeError
from ..pitman import (
    batch_estimator,
    closed_form_variance,
    covariance_exact,
    pitman_variance_exact,
    pooled_quadrature_batch,
)
from ..rng import SeededStream
from ..verdict import InequalityVerdict, oriented_slack

MIN_MC_REPS = 100


def exact_variance(spec: DistributionSpec, n: int):
    """Exact variance (or covariance matrix) of the Pitman estimator, else ``None``."""
    c = canonical(spec)
    if isinstance(c, (ProductMultivariate, VectorLattice)):
        try:
            return covariance_exact(c, n).value
        except (CapabilityError, SizeError):
            return None
    v = closed_form_variance(c, n)
    if v is not None:
        return v
    if isinstance(c, DiscreteLattice):
        try:
            return pitman_variance_exact(c, n).value
        except SizeError:
            return None
    return None


def is_gaussian(spec: DistributionSpec) -> bool:
    c = canonical(spec)
    if isinstance(c, ProductMultivariate):
        return all(is_gaussian(p) for p in c.components)
    return isinstance(c, Gaussian)


def _same(specs: Sequence[DistributionSpec]) -> bool:
    first = canonical(specs[0])
    return all(canonical(s) == first for s in specs[1:])


def pooled_estimator(specs: Sequence[DistributionSpec]) -> Callable[[np.ndarray], np.ndarray]:
    """Batch Pitman estimator for a sample whose column ``i`` comes from ``specs[i]``."""
    specs = [canonical(s) for s in specs]
    if _same(specs):
        return batch_estimator(specs[0])
    if all(isinstance(s, Gaussian) for s in specs):
        mu = np.array([s.mean for s in specs])
        w = np.array([1.0 / s.sigma**2 for s in specs])
        return lambda x: ((x - mu) * w).sum(axis=-1) / w.sum()
    return lambda x: pooled_quadrature_batch(specs, x)


def pooled_exact_variance(specs: Sequence[DistributionSpec]):
    """Exact variance of the pooled estimator when one is available."""
    specs = [canonical(s) for s in specs]
    if _same(specs):
        return exact_variance(specs[0], len(specs))
    if all(isinstance(s, Gaussian) for s in specs):
        return 1.0 / math.fsum(1.0 / s.sigma**2 for s in specs)
    return None


@dataclass
class Column:
    key: Hashable
    build: Callable[[dict], np.ndarray]
    estimator: Callable[[np.ndarray], np.ndarray]
    exact: object = None
    width: int = 1


class Design:
    """Columns evaluated on shared draws; see the module docstring.

    ``draw(rng, count)`` returns a dict of arrays that every column's ``build``
    reads from. ``mode`` is ``auto`` (exact where known), ``exact`` (every
    column must be exact) or ``mc`` (simulate everything).
    """

    def __init__(self, draw: Callable, reps: int, stream: SeededStream, mode: str = "auto"):
        if mode not in ("auto", "exact", "mc"):
            raise ConfigError(f"unknown mode {mode!r}", "/mode")
        self.draw = draw
        self.reps = int(reps)
        self.stream = stream
        self.mode = mode
        self.columns: list[Column] = []
        self._exact: dict = {}
        self._mc: list[Column] = []
        self._sums = None

    def add(self, key, build, estimator, exact=None, width: int = 1):
        if any(c.key == key for c in self.columns):
            return
        self.columns.append(Column(key, build, estimator, exact, width))

    def run(self) -> "Design":
        for col in self.columns:
            if self.mode != "mc" and col.exact is not None:
                self._exact[col.key] = col.exact
            elif self.mode == "exact":
                raise CapabilityError(f"no exact variance for {col.key!r}")
            else:
                self._mc.append(col)
        if self._mc:
            if self.reps < MIN_MC_REPS:
                raise ConfigError(f"Monte Carlo needs reps >= {MIN_MC_REPS}", "/reps")
            cols = self._mc

            def fn(rng, count):
                draws = self.draw(rng, count)
                out = []
                for c in cols:
                    est = np.asarray(c.estimator(c.build(draws)), dtype=float)
                    out.append(est.reshape(count, -1))
                return np.concatenate(out, axis=1)

            self._sums = mc.collect(fn, self.reps, self.stream)
        return self

    @property
    def uses_mc(self) -> bool:
        return bool(self._mc)

    def _values(self, cov: np.ndarray | None) -> dict:
        out = dict(self._exact)
        i = 0
        for c in self._mc:
            block = cov[i : i + c.width, i : i + c.width]
            out[c.key] = float(block[0, 0]) if c.width == 1 else block.copy()
            i += c.width
        return out

    def values(self) -> dict:
        if self._sums is None:
            return self._values(None)
        n, s1, s2 = self._sums.totals()
        return self._values(mc.covariance_from(n, s1, s2))

    def evaluate(self, fn: Callable[[dict], object]):
        """Point value and jackknife standard error of ``fn(variances)``."""
        if self._sums is None:
            v = np.asarray(fn(self._values(None)), dtype=float)
            return v, np.zeros_like(v)

        def stat(n, s1, s2):
            return np.asarray(fn(self._values(mc.covariance_from(n, s1, s2))), dtype=float)

        return mc.jackknife(self._sums, stat)

    def verdict(
        self,
        name: str,
        instance: dict,
        lhs: Callable[[dict], object],
        rhs: Callable[[dict], object],
        *,
        relation: str = ">=",
        kind: str = "inequality",
        tol: float = 1e-10,
        **detail,
    ) -> InequalityVerdict:
        """Verdict on ``lhs(v) relation rhs(v)`` with a jackknifed slack error."""
        v = self.values()
        lv, rv = lhs(v), rhs(v)
        shape_l, shape_r = np.shape(lv), np.shape(rv)

        def packed(vals):
            a, b = lhs(vals), rhs(vals)
            s = oriented_slack(a, b, relation)
            return np.concatenate([np.ravel(a), np.ravel(b), [s]])

        value, se = self.evaluate(packed)
        nl = int(np.prod(shape_l)) if shape_l else 1
        nr = int(np.prod(shape_r)) if shape_r else 1
        slack, u = float(value[-1]), float(se[-1])
        if u > 0:
            detail["lhs_stderr"] = se[:nl].reshape(shape_l) if shape_l else float(se[0])
            detail["rhs_stderr"] = se[nl : nl + nr].reshape(shape_r) if shape_r else float(se[nl])
        detail["method"] = "monte_carlo" if u > 0 else "exact"
        if self.uses_mc:
            detail["reps"] = self.reps
        return InequalityVerdict.build(
            name, instance, lv, rv, relation=relation, kind=kind, uncertainty=u, tol=tol, slack=slack, **detail
        )


def draw_columns(specs: Sequence[DistributionSpec], n: int | Sequence[int]):
    """``draw`` function giving each spec its own ``(count, n)`` matrix under key ``j``."""
    specs = [canonical(s) for s in specs]
    sizes = [n] * len(specs) if np.isscalar(n) else list(n)

    def draw(rng, count):
        return {j: np.asarray(s.draw(rng, (count, sizes[j])), dtype=float) for j, s in enumerate(specs)}

    return draw


def chain_kind(gaussian: bool, strict: bool = False) -> str:
    if gaussian:
        return "equality"
    return "strict" if strict else "inequality"
