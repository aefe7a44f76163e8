"""Pitman estimators of location and their variances.

For a location family ``x_i = theta + e_i`` with ``e_i ~ F`` the Pitman
estimator is the posterior mean of ``theta`` under the flat prior,

    t(x) = int u prod f(x_i - u) du / int prod f(x_i - u) du,

equivalently ``xbar - E_0(xbar | residuals)``. Several evaluation paths are
provided: closed forms, adaptive quadrature (one sample), fixed-node
quadrature (batches of samples), and exact lattice-shift sums for lattice
populations. Variances come from closed forms, exact enumeration over residual
classes, or block Monte Carlo at ``theta = 0``.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import montecarlo as mc
from .dist import (
    Cauchy,
    DiscreteLattice,
    DistributionSpec,
    Exponential,
    Gaussian,
    ProductMultivariate,
    Shifted,
    Uniform,
    VectorLattice,
    canonical,
    fisher_information,
    moment_table,
    score,
)
from .errors import CapabilityError, DegenerateError, DomainError, ShapeError, SizeError
from .rng import SeededStream, as_stream

ENUMERATION_LIMIT = 10**7
VECTOR_ENUMERATION_LIMIT = 10**6


@dataclass(frozen=True)
class Sample:
    """Observations as an ``(n,)`` or ``(n, s)`` array."""

    observations: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.observations, dtype=float)
        if x.ndim == 0 or x.shape[0] == 0:
            raise ShapeError("a sample needs at least one observation")
        if x.ndim > 2:
            raise ShapeError("observations must be scalars or vectors")
        object.__setattr__(self, "observations", x)

    @property
    def size(self) -> int:
        return self.observations.shape[0]

    @property
    def dimension(self) -> int:
        return 1 if self.observations.ndim == 1 else self.observations.shape[1]


def as_sample(x) -> Sample:
    return x if isinstance(x, Sample) else Sample(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class VarianceEstimate:
    value: float | np.ndarray
    stderr: float | np.ndarray
    ci_low: float | np.ndarray
    ci_high: float | np.ndarray
    method: str
    replications: int = 0
    detail: dict = field(default_factory=dict, compare=False)

    @classmethod
    def exact(cls, value, method="exact_enumeration", **detail):
        value = np.asarray(value, dtype=float) if np.ndim(value) else float(value)
        zero = np.zeros_like(value) if np.ndim(value) else 0.0
        return cls(value, zero, value, value, method, 0, detail)

    @classmethod
    def monte_carlo(cls, value, stderr, reps, **detail):
        value = np.asarray(value, dtype=float) if np.ndim(value) else float(value)
        stderr = np.asarray(stderr, dtype=float) if np.ndim(stderr) else float(stderr)
        return cls(value, stderr, value - mc.Z95 * stderr, value + mc.Z95 * stderr, "monte_carlo", int(reps), detail)

    def covers(self, target: float) -> bool:
        return bool(np.all(self.ci_low <= target) and np.all(target <= self.ci_high))

    def to_json(self) -> dict:
        def conv(v):
            return np.asarray(v).tolist() if np.ndim(v) else float(v)

        return {
            "value": conv(self.value),
            "stderr": conv(self.stderr),
            "ci": [conv(self.ci_low), conv(self.ci_high)],
            "method": self.method,
            "reps": self.replications,
        }


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def _closed_family(spec: DistributionSpec):
    """``(kind, params, offset)`` for families with a registered closed form."""
    c = canonical(spec)
    offset = 0.0
    if isinstance(c, Shifted):
        offset, c = c.offset, c.base
    if isinstance(c, Gaussian):
        return "gaussian", c, offset
    if isinstance(c, Uniform):
        return "uniform", c, offset
    if isinstance(c, Exponential):
        return "exponential", c, offset
    if isinstance(c, DiscreteLattice) and len(c.points) == 1:
        return "point", c, offset
    return None


def _closed_batch(spec: DistributionSpec) -> Callable | None:
    found = _closed_family(spec)
    if found is None:
        return None
    kind, c, off = found
    if kind == "gaussian":
        return lambda x: x.mean(axis=-1) - c.mean - off
    if kind == "uniform":
        return lambda x: 0.5 * (x.min(axis=-1) + x.max(axis=-1)) - 0.5 * (c.a + c.b) - off
    if kind == "exponential":
        return lambda x: x.min(axis=-1) - c.scale / x.shape[-1] - off
    return lambda x: x[..., 0] - c.points[0] - off


def pitman_closed(spec: DistributionSpec, sample) -> float | None:
    """Closed-form estimate, or ``None`` when the family has none registered."""
    fn = _closed_batch(spec)
    if fn is None:
        return None
    x = as_sample(sample).observations
    if x.ndim != 1:
        raise ShapeError("closed forms are univariate")
    return float(fn(x))


def closed_form_variance(spec: DistributionSpec, n: int) -> float | None:
    """Order-statistics variance of the closed-form estimator.

    Gaussian ``sigma^2/n``; uniform midrange ``(b-a)^2 / (2(n+1)(n+2))``;
    exponential minimum ``scale^2/n^2``.
    """
    found = _closed_family(spec)
    if found is None:
        return None
    kind, c, _ = found
    if kind == "gaussian":
        return c.sigma**2 / n
    if kind == "uniform":
        return (c.b - c.a) ** 2 / (2.0 * (n + 1) * (n + 2))
    if kind == "exponential":
        return c.scale**2 / n**2
    return 0.0


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

_LOG_WINDOW = 50.0  # posterior mass beyond exp(-50) of the peak is ignored


def _continuous(spec: DistributionSpec) -> DistributionSpec:
    c = canonical(spec)
    if isinstance(c, (DiscreteLattice, VectorLattice, ProductMultivariate)) or not c.has_density:
        raise CapabilityError(f"{spec.family} has no univariate density")
    return c


def _window(specs: Sequence[DistributionSpec], x: np.ndarray):
    """Exact and effective posterior-support intervals for ``u``."""
    s = [c.support() for c in specs]
    e = [c.bounds() for c in specs]
    u_lo = max(xi - hi for xi, (_, hi) in zip(x, s))
    u_hi = min(xi - lo for xi, (lo, _) in zip(x, s))
    w_lo = max(xi - hi for xi, (_, hi) in zip(x, e))
    w_hi = min(xi - lo for xi, (lo, _) in zip(x, e))
    if not (math.isfinite(w_lo) and math.isfinite(w_hi)):
        spread = max(float(np.ptp(x)), 1.0)
        w_lo, w_hi = float(x.min()) - 100.0 * spread, float(x.max()) + 100.0 * spread
    w_lo, w_hi = min(w_lo, w_hi), max(w_lo, w_hi)
    w_lo, w_hi = max(w_lo, u_lo), min(w_hi, u_hi)
    return u_lo, u_hi, w_lo, w_hi


def _pooled_quadrature(specs: Sequence[DistributionSpec], x: np.ndarray, tol: float = 1e-10) -> float:
    specs = [_continuous(c) for c in specs]
    u_lo, u_hi, w_lo, w_hi = _window(specs, x)
    if not u_lo < u_hi or not w_lo < w_hi:
        raise DegenerateError("posterior support is empty for this sample")

    def loglik(u):
        u = np.asarray(u, dtype=float)
        return sum(c.logpdf(xi - u) for c, xi in zip(specs, x))

    grid = np.linspace(w_lo, w_hi, 4001)
    ll = loglik(grid)
    top = int(np.argmax(ll))
    peak = ll[top]
    if not np.isfinite(peak):
        raise DegenerateError("likelihood vanishes on the posterior support")
    live = np.nonzero(ll > peak - _LOG_WINDOW)[0]
    a = grid[max(live[0] - 1, 0)]
    b = grid[min(live[-1] + 1, grid.size - 1)]
    centre = grid[top]
    cuts = {a, b, centre}
    for c, xi in zip(specs, x):
        cuts.update(xi - k for k in c.kinks() if a < xi - k < b)
    cuts = sorted(cuts)

    def weight(u):
        return math.exp(float(loglik(u)) - peak)

    def piece(lo, hi, fn, epsabs):
        if not lo < hi:
            return 0.0
        with warnings.catch_warnings():
            # interpolated densities are only piecewise smooth; quad flags roundoff there
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(fn, lo, hi, epsabs=epsabs, epsrel=tol, limit=400)
        return val

    def total(fn, floor):
        core = math.fsum(piece(lo, hi, fn, floor) for lo, hi in zip(cuts, cuts[1:]))
        small = 1e-14 * max(abs(core), floor, 1e-300)
        return core + piece(u_lo, a, fn, small) + piece(b, u_hi, fn, small)

    den = total(weight, 1e-15 * (b - a))
    # the first moment about the mode can be ~0, so its absolute floor follows den
    num = total(lambda u: (u - centre) * weight(u), 1e-14 * den * (b - a))
    return centre + num / den


def pitman_quadrature(spec: DistributionSpec, sample, tol: float = 1e-10) -> float:
    """Flat-prior posterior mean of the location by adaptive quadrature."""
    x = as_sample(sample).observations
    if x.ndim != 1:
        raise ShapeError("quadrature path is univariate")
    return _pooled_quadrature([spec] * len(x), x, tol)


def pitman_pooled(specs: Sequence[DistributionSpec], sample, tol: float = 1e-10) -> float:
    """Pitman estimate when observation ``i`` comes from ``specs[i]`` shifted by a common theta."""
    x = as_sample(sample).observations
    if x.ndim != 1 or len(specs) != len(x):
        raise ShapeError("need one population per observation")
    return _pooled_quadrature(list(specs), x, tol)


@functools.lru_cache(maxsize=8)
def _legendre(q: int):
    nodes, weights = np.polynomial.legendre.leggauss(q)
    return (nodes + 1.0) / 2.0, weights / 2.0


def pooled_quadrature_batch(
    specs: Sequence[DistributionSpec],
    x: np.ndarray,
    grid: int = 401,
    panels: int = 8,
    order: int = 16,
    chunk: int = 2048,
) -> np.ndarray:
    """Vectorised Pitman estimates for the rows of ``x`` (shape ``(R, n)``).

    A coarse grid brackets the region where the log-posterior is within 50 of
    its maximum; that bracket is then split at every kink of every factor and
    integrated by composite Gauss-Legendre rules. Rows whose effective support
    is unbounded fall back to adaptive quadrature.
    """
    specs = [_continuous(c) for c in specs]
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != len(specs):
        raise ShapeError("need one population per column")
    eff = [c.bounds() for c in specs]
    if not all(math.isfinite(lo) and math.isfinite(hi) for lo, hi in eff):
        return np.array([_pooled_quadrature(specs, row) for row in x])
    out = np.empty(x.shape[0])
    for start in range(0, x.shape[0], chunk):
        out[start : start + chunk] = _batch_chunk(specs, x[start : start + chunk], grid, panels, order)
    return out


def _batch_chunk(specs, x, grid, panels, order):
    sup = [c.support() for c in specs]
    eff = [c.bounds() for c in specs]
    cols = range(len(specs))
    u_lo = np.max([x[:, i] - sup[i][1] for i in cols], axis=0)
    u_hi = np.min([x[:, i] - sup[i][0] for i in cols], axis=0)
    w_lo = np.maximum(np.max([x[:, i] - eff[i][1] for i in cols], axis=0), u_lo)
    w_hi = np.minimum(np.min([x[:, i] - eff[i][0] for i in cols], axis=0), u_hi)
    if np.any(w_lo >= w_hi):
        raise DegenerateError("posterior support is empty for some sample")

    def loglik(u):
        with np.errstate(divide="ignore", invalid="ignore"):
            return sum(specs[i].logpdf(x[:, i, None] - u) for i in cols)

    frac = np.linspace(0.0, 1.0, grid)
    u = w_lo[:, None] + (w_hi - w_lo)[:, None] * frac
    ll = loglik(u)
    peak = ll.max(axis=1)
    live = ll > (peak - _LOG_WINDOW)[:, None]
    first = np.clip(live.argmax(axis=1) - 1, 0, grid - 1)
    last = np.clip(grid - live[:, ::-1].argmax(axis=1), 0, grid - 1)
    rows = np.arange(x.shape[0])
    a, b = u[rows, first], u[rows, last]
    kinks = [x[:, i] - k for i in cols for k in specs[i].kinks()]
    cuts = np.column_stack([a] + [np.clip(k, a, b) for k in kinks] + [b])
    cuts.sort(axis=1)
    nodes, weights = _legendre(order)
    sub = (np.arange(panels)[:, None] + nodes[None, :]).ravel() / panels
    wsub = np.tile(weights, panels) / panels
    lo, hi = cuts[:, :-1], cuts[:, 1:]
    width = hi - lo
    pts = (lo[:, :, None] + width[:, :, None] * sub).reshape(len(x), -1)
    wts = (width[:, :, None] * wsub).reshape(len(x), -1)
    lp = loglik(pts)
    top = lp.max(axis=1)
    w = np.exp(lp - top[:, None]) * wts
    centre = 0.5 * (a + b)
    den = w.sum(axis=1)
    if np.any(den <= 0):
        raise DegenerateError("likelihood vanishes on the posterior support")
    return centre + (w * (pts - centre[:, None])).sum(axis=1) / den


# ---------------------------------------------------------------------------
# Lattice populations
# ---------------------------------------------------------------------------


def _lattice(spec: DistributionSpec) -> DiscreteLattice:
    c = canonical(spec)
    if not isinstance(c, DiscreteLattice):
        raise CapabilityError(f"{spec.family} is not a univariate lattice")
    return c


def _offsets(lat: DiscreteLattice, x: np.ndarray) -> np.ndarray:
    """Integer lattice offsets of ``x`` relative to its first coordinate."""
    k = (x - x[..., :1]) / lat.step
    kr = np.rint(k)
    if np.any(np.abs(k - kr) > 1e-9 * np.maximum(1.0, np.abs(k))):
        raise DomainError("sample is not on a translate of the lattice")
    return kr.astype(np.int64)


def pitman_discrete_batch(spec: DistributionSpec, x: np.ndarray) -> np.ndarray:
    """Exact lattice-shift Pitman estimates for the rows of ``x``.

    The parameter values compatible with a row are ``u_j = x_1 - s_j`` over the
    support points ``s_j``; each has weight ``prod p(x_i - u_j)``.
    """
    lat = _lattice(spec)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    k = _offsets(lat, x)
    dense = lat.dense_pmf()
    size = dense.size
    num = np.zeros(x.shape[0])
    den = np.zeros(x.shape[0])
    for idx, point, p in zip(lat.indices, lat.points, lat.probs):
        j = idx + k
        ok = np.all((j >= 0) & (j < size), axis=1)
        w = np.where(ok, np.prod(dense[np.clip(j, 0, size - 1)], axis=1), 0.0)
        num += w * (x[:, 0] - point)
        den += w
    if np.any(den <= 0):
        raise DegenerateError("sample has probability zero under every shift")
    return num / den


def pitman_discrete(spec: DistributionSpec, sample) -> float:
    x = as_sample(sample).observations
    if x.ndim != 1:
        raise ShapeError("use pitman_multivariate for vector samples")
    return float(pitman_discrete_batch(spec, x[None, :])[0])


def _sorted_classes(size: int, n: int) -> np.ndarray:
    """All nondecreasing index tuples of length ``n`` starting at 0."""
    if n == 1:
        return np.zeros((1, 1), dtype=np.int64)
    rest = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations_with_replacement(range(size), n - 1)),
        dtype=np.int64,
    ).reshape(-1, n - 1)
    return np.column_stack([np.zeros(len(rest), dtype=np.int64), rest])


def residual_class_count(spec: DistributionSpec, n: int) -> int:
    lat = _lattice(spec)
    return math.comb(lat.dense_pmf().size + n - 2, n - 1) if n > 1 else 1


def pitman_variance_exact(spec: DistributionSpec, n: int) -> VarianceEstimate:
    """Exact ``var(t_n)`` for a lattice population.

    Samples are grouped into residual classes (translates of one another).
    Each class is represented by its sorted index tuple with minimum 0 and
    weighted by the number of orderings, so the sum runs over
    ``C(K+n-2, n-1)`` classes instead of ``K^n`` samples. Within a class the
    estimator is ``step * (c - E[c | class])`` for shift ``c``.
    """
    lat = _lattice(spec)
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    count = residual_class_count(lat, n)
    if count > ENUMERATION_LIMIT:
        raise SizeError(f"{count} residual classes exceed the enumeration limit {ENUMERATION_LIMIT}")
    dense = lat.dense_pmf()
    size = dense.size
    rows = _sorted_classes(size, n)
    rows = rows[rows[:, -1] < size]
    # orderings of a multiset: n! / prod(run lengths!)
    run = np.ones(len(rows))
    denom = np.ones(len(rows))
    for i in range(1, n):
        run = np.where(rows[:, i] == rows[:, i - 1], run + 1, 1.0)
        denom *= run
    mult = math.factorial(n) / denom
    w0 = np.zeros(len(rows))
    w1 = np.zeros(len(rows))
    w2 = np.zeros(len(rows))
    for c in range(size):
        j = rows + c
        ok = j[:, -1] < size
        w = np.where(ok, np.prod(dense[np.minimum(j, size - 1)], axis=1), 0.0)
        w0 += w
        w1 += c * w
        w2 += c * c * w
    live = w0 > 0
    mult, w0, w1, w2, rows = mult[live], w0[live], w1[live], w2[live], rows[live]
    chat = w1 / w0
    h = lat.step
    var_t = h * h * math.fsum(mult * (w2 - w1 * chat))
    # E(xbar | R) on each class, and its variance
    cond = lat.origin + h * (rows.mean(axis=1) + chat)
    prob = mult * w0
    mu = math.fsum(prob * cond)
    var_cond = math.fsum(prob * (cond - mu) ** 2)
    moments = moment_table(lat, 2)
    sigma2 = float(moments.variance)
    return VarianceEstimate.exact(
        var_t,
        cond_mean_variance=var_cond,
        identity_gap=abs(sigma2 / n - var_cond - var_t),
        classes=int(len(rows)),
        total_probability=math.fsum(prob),
    )


def pitman_variance_bruteforce(spec: DistributionSpec, n: int) -> float:
    """``var(t_n)`` by enumerating every sample of the product space."""
    lat = _lattice(spec)
    if len(lat.points) ** n > ENUMERATION_LIMIT:
        raise SizeError("support^n exceeds the enumeration limit")
    idx = np.array(list(itertools.product(range(len(lat.points)), repeat=n)), dtype=np.int64)
    pts = np.asarray(lat.points)[idx]
    probs = np.prod(np.asarray(lat.probs)[idx], axis=1)
    t = pitman_discrete_batch(lat, pts)
    mean = math.fsum(probs * t)
    return math.fsum(probs * (t - mean) ** 2)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def evaluation_path(spec: DistributionSpec) -> str:
    c = canonical(spec)
    if isinstance(c, (ProductMultivariate, VectorLattice)):
        return "multivariate"
    if _closed_family(c) is not None:
        return "closed"
    if isinstance(c, DiscreteLattice):
        return "discrete"
    if c.has_density:
        return "quadrature"
    raise CapabilityError(f"no evaluation path for {spec.family}")


def batch_estimator(spec: DistributionSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Function mapping samples ``(R, n)`` (or ``(R, n, s)``) to estimates."""
    c = canonical(spec)
    path = evaluation_path(c)
    if path == "closed":
        return _closed_batch(c)
    if path == "discrete":
        return functools.partial(pitman_discrete_batch, c)
    if path == "quadrature":
        return lambda x: pooled_quadrature_batch([c] * x.shape[1], x)
    if isinstance(c, ProductMultivariate):
        parts = [batch_estimator(comp) for comp in c.components]
        return lambda x: np.stack([f(x[..., d]) for d, f in enumerate(parts)], axis=-1)
    return lambda x: np.stack([_vector_lattice_estimate(c, row) for row in x])


def estimate(spec: DistributionSpec, sample) -> float | np.ndarray:
    """Pitman estimate through the most exact available path."""
    s = as_sample(sample)
    if s.dimension > 1 or evaluation_path(spec) == "multivariate":
        return pitman_multivariate(spec, s)
    path = evaluation_path(spec)
    if path == "closed":
        return pitman_closed(spec, s)
    if path == "discrete":
        return pitman_discrete(spec, s)
    return pitman_quadrature(spec, s)


# ---------------------------------------------------------------------------
# Multivariate
# ---------------------------------------------------------------------------


def _vector_lattice_estimate(lat: VectorLattice, x: np.ndarray) -> np.ndarray:
    pts = np.asarray(lat.points)
    steps = np.array([float(s) for s in lat.steps])
    base = pts.min(axis=0)
    key = np.rint((pts - base) / steps).astype(np.int64)
    table = {tuple(k): p for k, p in zip(key, lat.probs)}
    rel = (x - x[0]) / steps
    off = np.rint(rel)
    if np.any(np.abs(rel - off) > 1e-9 * np.maximum(1.0, np.abs(rel))):
        raise DomainError("sample is not on a translate of the lattice")
    off = off.astype(np.int64)
    num = np.zeros(x.shape[1])
    den = 0.0
    for kj, pj, sj in zip(key, lat.probs, pts):
        w = pj
        for o in off[1:]:
            w *= table.get(tuple(kj + o), 0.0)
            if w == 0.0:
                break
        num += w * (x[0] - sj)
        den += w
    if den <= 0:
        raise DegenerateError("sample has probability zero under every shift")
    return num / den


def pitman_multivariate(spec: DistributionSpec, sample) -> np.ndarray:
    """Componentwise estimates for products; lattice-shift sums for s-variate lattices."""
    x = as_sample(sample).observations
    c = canonical(spec)
    if x.ndim != 2:
        raise ShapeError("multivariate samples have shape (n, s)")
    if isinstance(c, ProductMultivariate):
        if x.shape[1] != c.dimension:
            raise ShapeError("sample dimension does not match the population")
        return np.array([float(estimate(comp, x[:, d])) for d, comp in enumerate(c.components)])
    if isinstance(c, VectorLattice):
        if x.shape[1] != c.dimension:
            raise ShapeError("sample dimension does not match the population")
        return _vector_lattice_estimate(c, x)
    raise CapabilityError(f"{spec.family} has no multivariate evaluation path")


def covariance_exact(spec: DistributionSpec, n: int) -> VarianceEstimate:
    """Exact covariance of the multivariate estimator.

    Products of closed-form or lattice coordinates give a diagonal matrix;
    s-variate lattices are enumerated over ``support^n``.
    """
    c = canonical(spec)
    if isinstance(c, ProductMultivariate):
        diag = []
        method = "closed_form"
        for comp in c.components:
            v = pitman_variance(comp, n)
            if v.method == "monte_carlo":
                raise CapabilityError("component has no exact variance")
            method = "exact_enumeration" if v.method == "exact_enumeration" else method
            diag.append(float(v.value))
        return VarianceEstimate.exact(np.diag(diag), method=method)
    if not isinstance(c, VectorLattice):
        raise CapabilityError(f"{spec.family} has no exact covariance path")
    m = len(c.points)
    if m**n > VECTOR_ENUMERATION_LIMIT:
        raise SizeError("support^n exceeds the enumeration limit")
    pts = np.asarray(c.points)
    probs = np.asarray(c.probs)
    total = []
    weights = []
    for idx in itertools.product(range(m), repeat=n):
        total.append(_vector_lattice_estimate(c, pts[list(idx)]))
        weights.append(math.prod(probs[list(idx)]))
    t = np.array(total)
    w = np.array(weights)
    mean = np.array([math.fsum(w * t[:, d]) for d in range(t.shape[1])])
    dev = t - mean
    cov = np.array(
        [[math.fsum(w * dev[:, i] * dev[:, j]) for j in range(t.shape[1])] for i in range(t.shape[1])]
    )
    return VarianceEstimate.exact(cov)


# ---------------------------------------------------------------------------
# Variances
# ---------------------------------------------------------------------------


CAUCHY_MIN_REPS = 100_000


def pitman_variance_mc(
    spec: DistributionSpec,
    n: int,
    reps: int,
    stream: SeededStream | int | None = None,
    workers: int | None = None,
) -> VarianceEstimate:
    """Block Monte Carlo variance at theta = 0 with a jackknife standard error."""
    if reps < 100:
        raise ValueError("Monte Carlo needs at least 100 replications")
    c = canonical(spec)
    if isinstance(c, Cauchy) and n < 3:
        raise CapabilityError("Cauchy variances are only estimated for n >= 3")
    if isinstance(c, Cauchy) and reps < CAUCHY_MIN_REPS:
        raise CapabilityError(f"Cauchy variances need at least {CAUCHY_MIN_REPS} replications")
    est = batch_estimator(c)
    stream = as_stream(stream)

    def run(rng, count):
        return est(c.draw(rng, (count, n)))

    sums = mc.collect(run, reps, stream, workers=workers)
    d = sums.dim
    if d == 1:
        value, se = mc.jackknife(sums, mc.variance_stat(0))
        mean, mean_se = mc.jackknife(sums, mc.mean_stat(0))
        return VarianceEstimate.monte_carlo(value, se, reps, mean=float(mean), mean_stderr=float(mean_se))
    value, se = mc.jackknife(sums, lambda k, s1, s2: mc.covariance_from(k, s1, s2))
    return VarianceEstimate.monte_carlo(value, se, reps)


def pitman_variance(
    spec: DistributionSpec,
    n: int,
    reps: int = 100_000,
    stream: SeededStream | int | None = None,
) -> VarianceEstimate:
    """Closed form if registered, else exact enumeration on lattices, else Monte Carlo."""
    c = canonical(spec)
    if isinstance(c, (ProductMultivariate, VectorLattice)):
        try:
            return covariance_exact(c, n)
        except (CapabilityError, SizeError):
            return pitman_variance_mc(c, n, reps, stream)
    v = closed_form_variance(c, n)
    if v is not None:
        return VarianceEstimate.exact(v, method="closed_form")
    if isinstance(c, DiscreteLattice):
        try:
            return pitman_variance_exact(c, n)
        except SizeError:
            pass
    return pitman_variance_mc(c, n, reps, stream)


# ---------------------------------------------------------------------------
# Score-based estimator
# ---------------------------------------------------------------------------


def score_estimator(spec: DistributionSpec, sample) -> float:
    """``xbar - sum J(x_i - xbar) / (n I)`` with Fisher score ``J`` and information ``I``."""
    x = as_sample(sample).observations
    if x.ndim != 1:
        raise ShapeError("score estimator is univariate")
    info = fisher_information(spec)
    if not (math.isfinite(info) and info > 0):
        raise CapabilityError("Fisher information is not finite and positive")
    xbar = float(x.mean())
    return xbar - math.fsum(score(spec, xi - xbar) for xi in x) / (len(x) * info)


def score_estimator_batch(spec: DistributionSpec, x: np.ndarray) -> np.ndarray:
    """Batch form; at kinks of the density the score is replaced by its subgradient midpoint."""
    c = canonical(spec)
    info = fisher_information(c)
    xbar = x.mean(axis=-1, keepdims=True)
    j = -np.asarray(c.dlogpdf(x - xbar))
    return xbar[..., 0] - j.sum(axis=-1) / (x.shape[-1] * info)
