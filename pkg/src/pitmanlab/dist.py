"""Population registry: densities, samplers, exact moments and Fisher information.

Every population is an immutable :class:`DistributionSpec`. Analytic families
(Gaussian, Uniform, Exponential, Laplace, Cauchy) and finite lattices are
leaves; :class:`Convolution`, :class:`Scaled` and :class:`Shifted` are
symbolic nodes, and :class:`ProductMultivariate` / :class:`VectorLattice`
describe s-variate populations.

Conventions
-----------
``Exponential(scale=lam)`` has density ``exp(-x/lam)/lam`` on ``x > 0``, so its
mean is ``lam``. ``Laplace(scale=b)`` and ``Cauchy(gamma)`` are centred at 0;
wrap them in :class:`Shifted` to move them.

Moments are returned exactly (as :class:`fractions.Fraction`) by
:func:`moment_table`; :func:`raw_moment` returns the same value as a float.
Floats are converted with the smallest denominator (up to 1e9) that reproduces
them, so ``0.25`` becomes ``1/4`` and ``1/3`` becomes ``1/3``.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np
from scipy import integrate, special

from .errors import CapabilityError, DomainError, OrderError, ShapeError
from .rng import SeededStream

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# Effective-support half widths, in units of the family scale.
_GAUSS_TAIL = 12.0
_EXP_TAIL = 40.0


def to_exact(x) -> Fraction:
    """Exact rational for ``x``; prefers a small denominator that round-trips."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r}")
    small = Fraction(x).limit_denominator(10**9)
    return small if float(small) == x else Fraction(x)


def _binom_shift(moments: Sequence[Fraction], offset: Fraction, j: int) -> Fraction:
    return sum(
        (math.comb(j, i) * offset ** (j - i) * moments[i] for i in range(j + 1)),
        Fraction(0),
    )


def _as_floats(obj, *names):
    """Store numeric dataclass fields as floats so equality and JSON are type-stable."""
    for name in names:
        object.__setattr__(obj, name, float(getattr(obj, name)))


def _check_order(j: int) -> int:
    if int(j) != j or j < 0:
        raise OrderError(f"moment order must be a nonnegative integer, got {j!r}")
    return int(j)


@dataclass(frozen=True)
class MomentTable:
    """Raw moments ``E X^j`` for ``j = 0..order_limit``."""

    raw_moments: tuple
    order_limit: int = field(init=False)

    def __post_init__(self):
        moments = tuple(self.raw_moments)
        if not moments:
            raise ValueError("a moment table needs at least the order-0 moment")
        if moments[0] != 1:
            raise ValueError("raw_moments[0] must equal 1")
        object.__setattr__(self, "raw_moments", moments)
        object.__setattr__(self, "order_limit", len(moments) - 1)

    def __getitem__(self, j: int):
        if j < 0 or j > self.order_limit:
            raise OrderError(f"moment of order {j} unavailable (limit {self.order_limit})")
        return self.raw_moments[j]

    @property
    def is_exact(self) -> bool:
        return all(isinstance(m, (Fraction, int)) for m in self.raw_moments)

    @property
    def mean(self):
        return self[1]

    @property
    def variance(self):
        return self[2] - self[1] ** 2

    def central(self) -> "MomentTable":
        """Moments of ``X - E X``; exact if this table is exact."""
        mu = -self[1] if self.order_limit >= 1 else 0
        return MomentTable(
            tuple(_binom_shift(self.raw_moments, mu, j) for j in range(self.order_limit + 1))
        )

    def truncated(self, order: int) -> "MomentTable":
        if order > self.order_limit:
            raise OrderError(f"moment of order {order} unavailable (limit {self.order_limit})")
        return MomentTable(self.raw_moments[: order + 1])

    def as_float(self) -> np.ndarray:
        return np.array([float(m) for m in self.raw_moments])


class DistributionSpec:
    """Base class of all population descriptions."""

    family: str = "abstract"
    dimension: int = 1

    # --- capabilities -------------------------------------------------
    @property
    def has_density(self) -> bool:
        return False

    @property
    def moment_limit(self) -> float:
        """Largest moment order that is finite (``inf`` if all are)."""
        return math.inf

    @property
    def capabilities(self) -> dict:
        return {
            "density": self.has_density,
            "moment_limit": self.moment_limit,
            "second_moment": self.moment_limit >= 2,
            "lattice": isinstance(canonical(self), DiscreteLattice),
        }

    # --- interface implemented by subclasses --------------------------
    def logpdf(self, x):
        raise CapabilityError(f"{self.family} has no density")

    def _raw_moment(self, j: int) -> Fraction:
        raise CapabilityError(f"{self.family} has no moments")

    def draw(self, rng: np.random.Generator, size):
        raise CapabilityError(f"{self.family} cannot be sampled")

    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def bounds(self) -> tuple[float, float]:
        """Interval outside of which the density is negligible (< e^-40 relative)."""
        return self.support()

    def kinks(self) -> tuple[float, ...]:
        """Points where the log-density is not smooth."""
        return ()

    def is_symmetric(self) -> bool:
        return False

    def ppf(self, u):
        raise CapabilityError(f"{self.family} has no quantile function")

    def dlogpdf(self, x):
        """Derivative of the log-density; finite differences unless overridden."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.bounds()
        h = 1e-5 * max(1.0, (hi - lo) / 10.0) if math.isfinite(hi - lo) else 1e-5
        return (self.logpdf(x + h) - self.logpdf(x - h)) / (2.0 * h)

    def params(self) -> dict:
        return {}

    def children(self) -> tuple["DistributionSpec", ...]:
        return ()

    # --- conveniences -------------------------------------------------
    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def to_json(self) -> dict:
        out: dict[str, Any] = {"family": self.family, "params": self.params()}
        kids = self.children()
        if kids:
            out["children"] = [k.to_json() for k in kids]
        return out


# ---------------------------------------------------------------------------
# Analytic families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gaussian(DistributionSpec):
    mean: float = 0.0
    sigma: float = 1.0
    family = "gaussian"

    def __post_init__(self):
        _as_floats(self, 'mean', 'sigma')
        if not self.sigma > 0:
            raise ValueError("Gaussian sigma must be positive")

    @property
    def has_density(self):
        return True

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sigma
        return -0.5 * z * z - _LOG_SQRT_2PI - math.log(self.sigma)

    def dlogpdf(self, x):
        return -(np.asarray(x, dtype=float) - self.mean) / self.sigma**2

    def _raw_moment(self, j):
        mu, s = to_exact(self.mean), to_exact(self.sigma)
        total = Fraction(0)
        for i in range(0, j + 1, 2):
            double_fact = math.prod(range(i - 1, 0, -2)) if i else 1
            total += math.comb(j, i) * mu ** (j - i) * s**i * double_fact
        return total

    def draw(self, rng, size):
        return rng.normal(self.mean, self.sigma, size)

    def bounds(self):
        w = _GAUSS_TAIL * self.sigma
        return (self.mean - w, self.mean + w)

    def is_symmetric(self):
        return self.mean == 0

    def ppf(self, u):
        return self.mean + self.sigma * special.ndtri(u)

    def params(self):
        return {"mean": self.mean, "sigma": self.sigma}


@dataclass(frozen=True)
class Uniform(DistributionSpec):
    a: float = -1.0
    b: float = 1.0
    family = "uniform"

    def __post_init__(self):
        _as_floats(self, 'a', 'b')
        if not self.a < self.b:
            raise ValueError("Uniform requires a < b")

    @property
    def has_density(self):
        return True

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.a) & (x <= self.b)
        return np.where(inside, -math.log(self.b - self.a), -np.inf)

    def dlogpdf(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def _raw_moment(self, j):
        a, b = to_exact(self.a), to_exact(self.b)
        return (b ** (j + 1) - a ** (j + 1)) / ((j + 1) * (b - a))

    def draw(self, rng, size):
        return rng.uniform(self.a, self.b, size)

    def support(self):
        return (self.a, self.b)

    def kinks(self):
        return (self.a, self.b)

    def is_symmetric(self):
        return self.a == -self.b

    def ppf(self, u):
        return self.a + (self.b - self.a) * np.asarray(u, dtype=float)

    def params(self):
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class Exponential(DistributionSpec):
    scale: float = 1.0
    family = "exponential"

    def __post_init__(self):
        _as_floats(self, 'scale')
        if not self.scale > 0:
            raise ValueError("Exponential scale must be positive")

    @property
    def has_density(self):
        return True

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, -x / self.scale - math.log(self.scale), -np.inf)

    def dlogpdf(self, x):
        return np.full_like(np.asarray(x, dtype=float), -1.0 / self.scale)

    def _raw_moment(self, j):
        return math.factorial(j) * to_exact(self.scale) ** j

    def draw(self, rng, size):
        return rng.exponential(self.scale, size)

    def support(self):
        return (0.0, math.inf)

    def bounds(self):
        return (0.0, _EXP_TAIL * self.scale)

    def kinks(self):
        return (0.0,)

    def ppf(self, u):
        return -self.scale * np.log1p(-np.asarray(u, dtype=float))

    def params(self):
        return {"scale": self.scale}


@dataclass(frozen=True)
class Laplace(DistributionSpec):
    scale: float = 1.0
    family = "laplace"

    def __post_init__(self):
        _as_floats(self, 'scale')
        if not self.scale > 0:
            raise ValueError("Laplace scale must be positive")

    @property
    def has_density(self):
        return True

    def logpdf(self, x):
        return -np.abs(np.asarray(x, dtype=float)) / self.scale - math.log(2.0 * self.scale)

    def dlogpdf(self, x):
        return -np.sign(np.asarray(x, dtype=float)) / self.scale

    def _raw_moment(self, j):
        if j % 2:
            return Fraction(0)
        return math.factorial(j) * to_exact(self.scale) ** j

    def draw(self, rng, size):
        return rng.laplace(0.0, self.scale, size)

    def bounds(self):
        w = _EXP_TAIL * self.scale
        return (-w, w)

    def kinks(self):
        return (0.0,)

    def is_symmetric(self):
        return True

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return -self.scale * np.sign(u - 0.5) * np.log1p(-2.0 * np.abs(u - 0.5))

    def params(self):
        return {"scale": self.scale}


@dataclass(frozen=True)
class Cauchy(DistributionSpec):
    gamma: float = 1.0
    family = "cauchy"

    def __post_init__(self):
        _as_floats(self, 'gamma')
        if not self.gamma > 0:
            raise ValueError("Cauchy gamma must be positive")

    @property
    def has_density(self):
        return True

    @property
    def moment_limit(self):
        return 0

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return math.log(self.gamma / math.pi) - np.log(self.gamma**2 + x * x)

    def dlogpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -2.0 * x / (self.gamma**2 + x * x)

    def _raw_moment(self, j):
        if j == 0:
            return Fraction(1)
        raise CapabilityError("Cauchy: moments of order >= 1 are unavailable")

    def draw(self, rng, size):
        return self.gamma * rng.standard_cauchy(size)

    def is_symmetric(self):
        return True

    def ppf(self, u):
        return self.gamma * np.tan(np.pi * (np.asarray(u, dtype=float) - 0.5))

    def params(self):
        return {"gamma": self.gamma}


# ---------------------------------------------------------------------------
# Lattices
# ---------------------------------------------------------------------------


LATTICE_MAX_INDEX = 10**6  # finer common grids are treated as incommensurable


def _rational_step(values: Sequence[float]) -> Fraction:
    """gcd of positive spacings, computed on a common rational grid."""
    step = None
    for v in values:
        if v <= 0:
            continue
        f = Fraction(float(v)).limit_denominator(10**6)
        if abs(float(f) - v) > 1e-9 * max(1.0, abs(v)):
            raise DomainError(f"spacing {v!r} is not representable on a rational grid")
        step = f if step is None else _frac_gcd(step, f)
    return step if step is not None else Fraction(1)


def _frac_gcd(a: Fraction, b: Fraction) -> Fraction:
    den = a.denominator * b.denominator // math.gcd(a.denominator, b.denominator)
    return Fraction(math.gcd(int(a * den), int(b * den)), den)


@dataclass(frozen=True)
class DiscreteLattice(DistributionSpec):
    """Finite pmf on ``origin + step * k``; ``points`` strictly increasing."""

    points: tuple
    probs: tuple
    family = "lattice"

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        prs = tuple(float(p) for p in self.probs)
        if len(pts) == 0 or len(pts) != len(prs):
            raise ShapeError("lattice needs equally many points and probabilities")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("lattice points must be strictly increasing")
        if any(p < 0 for p in prs):
            raise ValueError("lattice probabilities must be nonnegative")
        if abs(math.fsum(prs) - 1.0) > 1e-12:
            raise ValueError("lattice probabilities must sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", prs)
        diffs = [b - a for a, b in zip(pts, pts[1:])]
        step = _rational_step(diffs)
        idx = []
        for p in pts:
            k = (p - pts[0]) / float(step)
            if abs(k - round(k)) > 1e-6:
                raise DomainError(f"point {p!r} is not on the lattice of step {step}")
            idx.append(int(round(k)))
        if idx[-1] > LATTICE_MAX_INDEX:
            raise DomainError(f"points span {idx[-1]} cells of step {step}; not a usable common lattice")
        object.__setattr__(self, "_step", step)
        object.__setattr__(self, "_index", tuple(idx))

    @classmethod
    def from_pmf(cls, pmf: dict) -> "DiscreteLattice":
        items = sorted((float(k), float(v)) for k, v in pmf.items())
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    @property
    def origin(self) -> float:
        return self.points[0]

    @property
    def step(self) -> float:
        return float(self._step)

    @property
    def exact_step(self) -> Fraction:
        return self._step

    @property
    def indices(self) -> tuple[int, ...]:
        return self._index

    def dense_pmf(self) -> np.ndarray:
        """Probabilities on the contiguous index range ``0..max index``."""
        out = np.zeros(self._index[-1] + 1)
        out[list(self._index)] = self.probs
        return out

    def pmf(self, x):
        """Probability of each value in ``x`` (0 off the support)."""
        x = np.asarray(x, dtype=float)
        k = (x - self.origin) / self.step
        kr = np.rint(k)
        dense = self.dense_pmf()
        ok = (np.abs(k - kr) < 1e-9) & (kr >= 0) & (kr < dense.size)
        out = np.zeros(x.shape)
        out[ok] = dense[kr[ok].astype(int)]
        return out

    def _raw_moment(self, j):
        if j == 0:
            return Fraction(1)
        return sum((to_exact(p) * to_exact(x) ** j for x, p in zip(self.points, self.probs)), Fraction(0))

    def draw(self, rng, size):
        u = rng.random(size)
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        return np.asarray(self.points)[np.searchsorted(cdf, u, side="right").clip(0, len(self.points) - 1)]

    def ppf(self, u):
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        k = np.searchsorted(cdf, np.asarray(u, dtype=float), side="left").clip(0, len(self.points) - 1)
        return np.asarray(self.points)[k]

    def support(self):
        return (self.points[0], self.points[-1])

    def is_symmetric(self):
        n = len(self.points)
        return all(
            self.points[i] == -self.points[n - 1 - i] and self.probs[i] == self.probs[n - 1 - i]
            for i in range(n)
        )

    def params(self):
        return {"points": list(self.points), "probs": list(self.probs)}


def point_mass(x: float = 0.0) -> DiscreteLattice:
    return DiscreteLattice((float(x),), (1.0,))


def convolve_lattices(a: DiscreteLattice, b: DiscreteLattice) -> DiscreteLattice:
    """Exact pmf of the sum; the step is the rational gcd of the two steps."""
    if len(a.points) == 1 or len(b.points) == 1:
        one, other = (a, b) if len(a.points) == 1 else (b, a)
        return DiscreteLattice(tuple(p + one.points[0] for p in other.points), other.probs)
    step = _frac_gcd(a.exact_step, b.exact_step)
    ra, rb = a.exact_step / step, b.exact_step / step
    if ra.denominator != 1 or rb.denominator != 1:
        raise DomainError("lattice steps are incommensurable")
    if a.indices[-1] * int(ra) + b.indices[-1] * int(rb) > LATTICE_MAX_INDEX:
        raise DomainError("lattice steps are incommensurable (common grid too fine)")
    pa = np.zeros(a.indices[-1] * int(ra) + 1)
    pa[[i * int(ra) for i in a.indices]] = a.probs
    pb = np.zeros(b.indices[-1] * int(rb) + 1)
    pb[[i * int(rb) for i in b.indices]] = b.probs
    pc = np.convolve(pa, pb)
    origin = a.origin + b.origin
    keep = np.nonzero(pc > 0)[0]
    pts = tuple(origin + int(k) * float(step) for k in keep)
    prs = pc[keep] / math.fsum(pc[keep])
    return DiscreteLattice(pts, tuple(prs))


def discretize(spec: DistributionSpec, count: int) -> DiscreteLattice:
    """Dense lattice approximation of a continuous family.

    Uniform(a, b) becomes the discrete uniform on ``count`` cell midpoints;
    other densities are sampled on ``count`` equally spaced points across their
    effective support and renormalised.
    """
    spec = canonical(spec)
    if isinstance(spec, Uniform):
        h = (spec.b - spec.a) / count
        pts = spec.a + h / 2 + h * np.arange(count)
        return DiscreteLattice(tuple(_snap(pts, h, spec.a + h / 2)), tuple(np.full(count, 1.0 / count)))
    if not spec.has_density:
        raise CapabilityError(f"cannot discretize {spec.family}")
    lo, hi = spec.bounds()
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise CapabilityError(f"{spec.family} has unbounded effective support")
    pts = np.linspace(lo, hi, count)
    w = spec.pdf(pts)
    keep = w > 0
    h = (hi - lo) / (count - 1)
    return DiscreteLattice(tuple(_snap(pts[keep], h, lo)), tuple(w[keep] / w[keep].sum()))


def _snap(pts, h, origin):
    h_exact = to_exact(h)
    o = to_exact(origin)
    return [float(o + int(round((p - origin) / h)) * h_exact) for p in pts]


# ---------------------------------------------------------------------------
# Symbolic nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scaled(DistributionSpec):
    """Law of ``lam * X`` for ``X ~ base``; ``lam = 0`` is a point mass at 0."""

    base: DistributionSpec
    lam: float
    family = "scaled"

    def __post_init__(self):
        _as_floats(self, "lam")

    @property
    def has_density(self):
        return self.lam != 0 and self.base.has_density

    @property
    def moment_limit(self):
        return math.inf if self.lam == 0 else self.base.moment_limit

    def logpdf(self, x):
        if self.lam == 0:
            raise CapabilityError("a point mass has no density")
        return self.base.logpdf(np.asarray(x, dtype=float) / self.lam) - math.log(abs(self.lam))

    def dlogpdf(self, x):
        return self.base.dlogpdf(np.asarray(x, dtype=float) / self.lam) / self.lam

    def _raw_moment(self, j):
        if self.lam == 0:
            return Fraction(1 if j == 0 else 0)
        return to_exact(self.lam) ** j * raw_moment_exact(self.base, j)

    def draw(self, rng, size):
        if self.lam == 0:
            return np.zeros(size)
        return self.lam * self.base.draw(rng, size)

    def _scale_interval(self, lo, hi):
        if self.lam == 0:
            return (0.0, 0.0)
        a, b = self.lam * lo, self.lam * hi
        return (min(a, b), max(a, b))

    def support(self):
        return self._scale_interval(*self.base.support())

    def bounds(self):
        return self._scale_interval(*self.base.bounds())

    def kinks(self):
        return tuple(sorted(self.lam * k for k in self.base.kinks()))

    def is_symmetric(self):
        return self.lam == 0 or self.base.is_symmetric()

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.lam == 0:
            return np.zeros_like(u)
        return self.lam * self.base.ppf(u if self.lam > 0 else 1.0 - u)

    def params(self):
        return {"lambda": self.lam}

    def children(self):
        return (self.base,)


@dataclass(frozen=True)
class Shifted(DistributionSpec):
    """Law of ``X + offset`` for ``X ~ base``."""

    base: DistributionSpec
    offset: float
    family = "shifted"

    def __post_init__(self):
        _as_floats(self, "offset")

    @property
    def has_density(self):
        return self.base.has_density

    @property
    def moment_limit(self):
        return self.base.moment_limit

    def logpdf(self, x):
        return self.base.logpdf(np.asarray(x, dtype=float) - self.offset)

    def dlogpdf(self, x):
        return self.base.dlogpdf(np.asarray(x, dtype=float) - self.offset)

    def _raw_moment(self, j):
        base = [raw_moment_exact(self.base, i) for i in range(j + 1)]
        return _binom_shift(base, to_exact(self.offset), j)

    def draw(self, rng, size):
        return self.base.draw(rng, size) + self.offset

    def support(self):
        lo, hi = self.base.support()
        return (lo + self.offset, hi + self.offset)

    def bounds(self):
        lo, hi = self.base.bounds()
        return (lo + self.offset, hi + self.offset)

    def kinks(self):
        return tuple(k + self.offset for k in self.base.kinks())

    def is_symmetric(self):
        return self.offset == 0 and self.base.is_symmetric()

    def ppf(self, u):
        return self.base.ppf(u) + self.offset

    def params(self):
        return {"offset": self.offset}

    def children(self):
        return (self.base,)


@dataclass(frozen=True)
class Convolution(DistributionSpec):
    """Law of the sum of independent draws from each child."""

    parts: tuple
    family = "convolution"

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ShapeError("a convolution needs at least one child")
        object.__setattr__(self, "parts", parts)

    @property
    def has_density(self):
        return any(c.has_density for c in self.parts)

    @property
    def moment_limit(self):
        return min(c.moment_limit for c in self.parts)

    def logpdf(self, x):
        return _conv_logpdf(canonical(self), np.asarray(x, dtype=float))

    def _raw_moment(self, j):
        moments = [Fraction(1)] + [Fraction(0)] * j
        for child in self.parts:
            cm = [raw_moment_exact(child, i) for i in range(j + 1)]
            moments = [
                sum((math.comb(k, i) * moments[i] * cm[k - i] for i in range(k + 1)), Fraction(0))
                for k in range(j + 1)
            ]
        return moments[j]

    def draw(self, rng, size):
        total = np.zeros(size)
        for child in self.parts:
            total = total + child.draw(rng, size)
        return total

    def support(self):
        los, his = zip(*(c.support() for c in self.parts))
        return (sum(los), sum(his))

    def bounds(self):
        los, his = zip(*(c.bounds() for c in self.parts))
        return (sum(los), sum(his))

    def kinks(self):
        cont = [c for c in self.parts if not isinstance(canonical(c), DiscreteLattice)]
        latt = [canonical(c) for c in self.parts if isinstance(canonical(c), DiscreteLattice)]
        if len(cont) != 1 and not all(c.kinks() for c in cont):
            base = ()
        else:
            base = (0.0,)
            for c in cont:
                base = tuple(sorted({a + b for a in base for b in c.kinks()}))
        for lat in latt:
            base = tuple(sorted({a + b for a in base for b in lat.points}))
        return base

    def is_symmetric(self):
        return all(c.is_symmetric() for c in self.parts)

    def children(self):
        return self.parts


@dataclass(frozen=True)
class ProductMultivariate(DistributionSpec):
    """s-variate population with independent univariate coordinates."""

    components: tuple
    family = "product"

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 1:
            raise ShapeError("a product needs at least one component")
        object.__setattr__(self, "components", comps)

    @property
    def dimension(self):
        return len(self.components)

    @property
    def moment_limit(self):
        return min(c.moment_limit for c in self.components)

    def draw(self, rng, size):
        size = (size,) if np.isscalar(size) else tuple(size)
        return np.stack([c.draw(rng, size) for c in self.components], axis=-1)

    def children(self):
        return self.components


@dataclass(frozen=True)
class VectorLattice(DistributionSpec):
    """Finite pmf on an s-dimensional lattice; ``points`` are s-tuples."""

    points: tuple
    probs: tuple
    family = "vector_lattice"

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in p) for p in self.points)
        prs = tuple(float(p) for p in self.probs)
        if not pts or len(pts) != len(prs) or len({len(p) for p in pts}) != 1:
            raise ShapeError("vector lattice points must share one dimension")
        if any(p < 0 for p in prs) or abs(math.fsum(prs) - 1.0) > 1e-12:
            raise ValueError("vector lattice probabilities must be nonnegative and sum to 1")
        if len(set(pts)) != len(pts):
            raise ValueError("vector lattice points must be distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", prs)
        arr = np.asarray(pts)
        steps = []
        for d in range(arr.shape[1]):
            col = np.unique(arr[:, d])
            steps.append(_rational_step(np.diff(col)))
        object.__setattr__(self, "_steps", tuple(steps))

    @property
    def dimension(self):
        return len(self.points[0])

    @property
    def steps(self) -> tuple[Fraction, ...]:
        return self._steps

    def draw(self, rng, size):
        size = (size,) if np.isscalar(size) else tuple(size)
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        k = np.searchsorted(cdf, rng.random(size), side="right").clip(0, len(self.points) - 1)
        return np.asarray(self.points)[k]

    def params(self):
        return {"points": [list(p) for p in self.points], "probs": list(self.probs)}


def product_lattice(components: Sequence[DiscreteLattice]) -> VectorLattice:
    """Joint pmf of independent lattice coordinates as a single s-variate lattice."""
    grids = np.meshgrid(*[np.arange(len(c.points)) for c in components], indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    pts = tuple(tuple(components[d].points[k[d]] for d in range(len(components))) for k in idx)
    prs = tuple(math.prod(components[d].probs[k[d]] for d in range(len(components))) for k in idx)
    total = math.fsum(prs)
    return VectorLattice(pts, tuple(p / total for p in prs))


# ---------------------------------------------------------------------------
# Canonical forms
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=512)
def canonical(spec: DistributionSpec) -> DistributionSpec:
    """Equivalent spec with closed forms folded in.

    Scaling and shifting are pushed into leaf parameters where the family is
    closed under them, ``lam = 0`` becomes a point mass, and convolutions are
    flattened with Gaussians, Cauchys and lattices merged.
    """
    if isinstance(spec, Shifted):
        base = canonical(spec.base)
        o = spec.offset
        if o == 0:
            return base
        if isinstance(base, Gaussian):
            return Gaussian(base.mean + o, base.sigma)
        if isinstance(base, Uniform):
            return Uniform(base.a + o, base.b + o)
        if isinstance(base, DiscreteLattice):
            return DiscreteLattice(tuple(p + o for p in base.points), base.probs)
        if isinstance(base, Shifted):
            return canonical(Shifted(base.base, base.offset + o))
        return Shifted(base, o)
    if isinstance(spec, Scaled):
        lam = spec.lam
        base = canonical(spec.base)
        if lam == 0:
            return point_mass(0.0)
        if lam == 1:
            return base
        if isinstance(base, Shifted):
            return canonical(Shifted(Scaled(base.base, lam), lam * base.offset))
        if isinstance(base, Convolution):
            return canonical(Convolution(tuple(Scaled(p, lam) for p in base.parts)))
        if isinstance(base, Gaussian):
            return Gaussian(lam * base.mean, abs(lam) * base.sigma)
        if isinstance(base, Uniform):
            return Uniform(*sorted((lam * base.a, lam * base.b)))
        if isinstance(base, Cauchy):
            return Cauchy(abs(lam) * base.gamma)
        if isinstance(base, Laplace):
            return Laplace(abs(lam) * base.scale)
        if isinstance(base, Exponential) and lam > 0:
            return Exponential(lam * base.scale)
        if isinstance(base, DiscreteLattice):
            pairs = sorted(zip((lam * p for p in base.points), base.probs))
            return DiscreteLattice(tuple(p for p, _ in pairs), tuple(q for _, q in pairs))
        if isinstance(base, Scaled):
            return canonical(Scaled(base.base, lam * base.lam))
        return Scaled(base, lam)
    if isinstance(spec, Convolution):
        return _canonical_convolution(spec)
    if isinstance(spec, ProductMultivariate):
        return ProductMultivariate(tuple(canonical(c) for c in spec.components))
    return spec


def _canonical_convolution(spec: Convolution) -> DistributionSpec:
    flat: list[DistributionSpec] = []
    stack = list(spec.parts)
    while stack:
        c = canonical(stack.pop(0))
        if isinstance(c, Convolution):
            stack = list(c.parts) + stack
        else:
            flat.append(c)
    offset = 0.0
    lattice = None
    gauss = None
    cauchy = None
    rest = []
    for c in flat:
        if isinstance(c, Shifted):
            offset += c.offset
            c = c.base
        if isinstance(c, DiscreteLattice):
            lattice = c if lattice is None else convolve_lattices(lattice, c)
        elif isinstance(c, Gaussian):
            gauss = c if gauss is None else Gaussian(gauss.mean + c.mean, math.hypot(gauss.sigma, c.sigma))
        elif isinstance(c, Cauchy):
            cauchy = c if cauchy is None else Cauchy(cauchy.gamma + c.gamma)
        else:
            rest.append(c)
    if lattice is not None and len(lattice.points) == 1:
        offset += lattice.points[0]
        lattice = None
    if gauss is not None and gauss.mean != 0:
        offset += gauss.mean
        gauss = Gaussian(0.0, gauss.sigma)
    parts = [p for p in (lattice, gauss, cauchy) if p is not None] + rest
    if not parts:
        return point_mass(offset)
    core = parts[0] if len(parts) == 1 else Convolution(tuple(parts))
    return canonical(Shifted(core, offset)) if offset else core


# ---------------------------------------------------------------------------
# Convolution densities
# ---------------------------------------------------------------------------


def _log_diff_ndtr(hi, lo):
    """log(Phi(hi) - Phi(lo)) for hi >= lo, accurate in both tails."""
    hi, lo = np.broadcast_arrays(np.asarray(hi, float), np.asarray(lo, float))
    flip = lo > 0
    a = np.where(flip, -lo, hi)
    b = np.where(flip, -hi, lo)
    la, lb = special.log_ndtr(a), special.log_ndtr(b)
    with np.errstate(divide="ignore"):
        return la + np.log(-np.expm1(np.minimum(lb - la, 0.0)))


def _uniform_sum_logpdf(unis: Sequence[Uniform], x):
    widths = [u.b - u.a for u in unis]
    total = sum(widths)
    y = x - sum(u.a for u in unis)
    y = np.where(y > total / 2, total - y, y)  # the density is symmetric about total/2
    m = len(unis)
    acc = np.zeros_like(y)
    for mask in range(1 << m):
        shift = sum(w for i, w in enumerate(widths) if mask >> i & 1)
        sign = -1.0 if bin(mask).count("1") % 2 else 1.0
        acc += sign * np.maximum(y - shift, 0.0) ** (m - 1)
    dens = acc / (math.factorial(m - 1) * math.prod(widths))
    inside = (y >= 0)
    with np.errstate(divide="ignore"):
        return np.where(inside & (dens > 0), np.log(np.maximum(dens, 1e-300)), -np.inf)


@functools.lru_cache(maxsize=64)
def _tabulate(spec: Convolution, points: int = 1 << 15):
    parts = spec.parts
    lo, hi = spec.bounds()
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise CapabilityError("numeric convolution needs bounded effective support")
    h = (hi - lo) / points
    dens = None
    start = 0.0
    for c in parts:
        clo, chi = c.bounds()
        grid = clo + h * np.arange(int(math.ceil((chi - clo) / h)) + 1)
        vals = c.pdf(grid)
        dens = vals if dens is None else np.convolve(dens, vals) * h
        start += clo
    xs = start + h * np.arange(dens.size)
    dens = dens / (dens.sum() * h)
    return xs, dens


def _conv_logpdf(spec: DistributionSpec, x):
    if not isinstance(spec, Convolution):
        return spec.logpdf(x)
    lattice = next((c for c in spec.parts if isinstance(c, DiscreteLattice)), None)
    cont = [c for c in spec.parts if not isinstance(c, DiscreteLattice)]
    if not cont:
        raise CapabilityError("a lattice convolution has no density")
    if len(cont) == 1:
        core = cont[0].logpdf
    elif all(isinstance(c, Uniform) for c in cont):
        core = functools.partial(_uniform_sum_logpdf, cont)
    elif len(cont) == 2 and {type(c) for c in cont} == {Uniform, Gaussian}:
        u = next(c for c in cont if isinstance(c, Uniform))
        g = next(c for c in cont if isinstance(c, Gaussian))

        def core(z):
            hi = (z - u.a - g.mean) / g.sigma
            lo = (z - u.b - g.mean) / g.sigma
            return _log_diff_ndtr(hi, lo) - math.log(u.b - u.a)
    else:
        xs, dens = _tabulate(Convolution(tuple(cont)))

        def core(z):
            vals = np.interp(z, xs, dens, left=0.0, right=0.0)
            with np.errstate(divide="ignore"):
                return np.log(vals)
    if lattice is None:
        return core(x)
    terms = np.stack([core(x - p) + math.log(q) for p, q in zip(lattice.points, lattice.probs) if q > 0])
    return special.logsumexp(terms, axis=0)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def density(spec: DistributionSpec, x):
    """Density at ``x``; scalar in, scalar out."""
    if isinstance(canonical(spec), (DiscreteLattice, VectorLattice, ProductMultivariate)):
        raise CapabilityError(f"{spec.family} has no univariate density")
    out = np.exp(spec.logpdf(x))
    return float(out) if np.ndim(out) == 0 else out


def raw_moment_exact(spec: DistributionSpec, j: int) -> Fraction:
    j = _check_order(j)
    if j > spec.moment_limit:
        raise CapabilityError(f"{spec.family}: moment of order {j} unavailable")
    return spec._raw_moment(j)


def raw_moment(spec: DistributionSpec, j: int) -> float:
    """``E X^j`` computed exactly and returned as a float."""
    return float(raw_moment_exact(spec, j))


def moment_table(spec: DistributionSpec, order: int) -> MomentTable:
    """Exact raw moments of orders ``0..order``."""
    order = _check_order(order)
    table = [Fraction(1)] + [raw_moment_exact(spec, j) for j in range(1, order + 1)]
    return MomentTable(tuple(table))


def sample(spec: DistributionSpec, stream: SeededStream, count: int) -> np.ndarray:
    """``count`` draws, fully determined by ``stream``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    return spec.draw(stream.generator(), count)


def fisher_information(spec: DistributionSpec) -> float:
    """Fisher information of the location family generated by ``spec``.

    Gaussian and Cauchy use their closed forms; everything else with a smooth
    density is integrated numerically as the mean squared score, splitting the
    range at the points where the density has kinks.
    """
    c = canonical(spec)
    if isinstance(c, Gaussian):
        return 1.0 / c.sigma**2
    if isinstance(c, Cauchy):
        return 1.0 / (2.0 * c.gamma**2)
    if isinstance(c, Shifted):
        return fisher_information(c.base)
    if isinstance(c, Scaled):
        return fisher_information(c.base) / c.lam**2
    _require_smooth(c)
    lo, hi = c.bounds()
    cuts = [lo] + [k for k in c.kinks() if lo < k < hi] + [hi]

    def integrand(x):
        return float(np.exp(c.logpdf(x)) * c.dlogpdf(x) ** 2)

    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=1e-13, epsrel=1e-12, limit=400)
        total += val
    return total


def _require_smooth(c: DistributionSpec):
    if isinstance(c, (DiscreteLattice, VectorLattice, ProductMultivariate)) or not c.has_density:
        raise CapabilityError(f"{c.family}: no absolutely continuous density")
    if isinstance(c, (Uniform, Exponential)):
        raise CapabilityError(f"{c.family}: density jumps, Fisher information is infinite")
    if isinstance(c, Convolution):
        cont = [p for p in c.parts if not isinstance(p, DiscreteLattice)]
        if len(cont) == 1:
            _require_smooth(cont[0])


def score(spec: DistributionSpec, x: float) -> float:
    """Fisher score ``-f'(x)/f(x)``."""
    c = canonical(spec)
    _require_score(c)
    if any(abs(x - k) < 1e-15 for k in c.kinks()):
        raise DomainError(f"density of {spec.family} is not differentiable at {x}")
    lo, hi = c.support()
    if not lo < x < hi:
        raise DomainError(f"{x} lies outside the support of {spec.family}")
    return float(-c.dlogpdf(x))


def _require_score(c: DistributionSpec):
    if isinstance(c, (DiscreteLattice, VectorLattice, ProductMultivariate)) or not c.has_density:
        raise CapabilityError(f"{c.family}: no differentiable density")
    if isinstance(c, Uniform):
        raise CapabilityError("uniform: score is degenerate (infinite information)")


# ---------------------------------------------------------------------------
# JSON serialisation
# ---------------------------------------------------------------------------

_LEAVES = {
    "gaussian": lambda p: Gaussian(float(p.get("mean", 0.0)), float(p.get("sigma", 1.0))),
    "uniform": lambda p: Uniform(float(p.get("a", -1.0)), float(p.get("b", 1.0))),
    "exponential": lambda p: Exponential(float(p.get("scale", 1.0))),
    "laplace": lambda p: Laplace(float(p.get("scale", 1.0))),
    "cauchy": lambda p: Cauchy(float(p.get("gamma", 1.0))),
}

FAMILIES = tuple(_LEAVES) + ("lattice", "vector_lattice", "convolution", "scaled", "shifted", "product")


def from_json(obj: dict | str) -> DistributionSpec:
    """Inverse of :meth:`DistributionSpec.to_json`; accepts a dict or JSON text."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    fam = obj.get("family")
    params = obj.get("params", {}) or {}
    kids = [from_json(c) for c in obj.get("children", [])]
    if fam in _LEAVES:
        return _LEAVES[fam](params)
    if fam == "lattice":
        if "pmf" in params:
            return DiscreteLattice.from_pmf(params["pmf"])
        return DiscreteLattice(tuple(params["points"]), tuple(params["probs"]))
    if fam == "vector_lattice":
        return VectorLattice(tuple(tuple(p) for p in params["points"]), tuple(params["probs"]))
    if fam == "convolution":
        return Convolution(tuple(kids))
    if fam == "scaled":
        return Scaled(_single(kids, fam), float(params["lambda"]))
    if fam == "shifted":
        return Shifted(_single(kids, fam), float(params["offset"]))
    if fam == "product":
        return ProductMultivariate(tuple(kids))
    raise ValueError(f"unknown family {fam!r}")


def _single(kids, fam):
    if len(kids) != 1:
        raise ShapeError(f"{fam} takes exactly one child")
    return kids[0]


def dumps(spec: DistributionSpec) -> str:
    return json.dumps(spec.to_json(), sort_keys=True, separators=(",", ":"))
