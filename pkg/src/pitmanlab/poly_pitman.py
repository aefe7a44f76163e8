"""Polynomial Pitman estimators.

``t_hat = xbar - P_k(xbar)`` where ``P_k`` is the L2 projection onto
polynomials of degree <= k in the residuals ``x_i - xbar`` (affine: the
constant is included). Only the first ``2k`` moments of the population enter.
The moment-space analog replaces the residual polynomials by
``{1, m_2, ..., m_k}`` with ``m_j`` the sample central moments.

All Gram entries are computed from centered moments; the population mean is
added back to the constant coefficient, which keeps the estimator
shift-equivariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import qmc

from .dist import DistributionSpec, MomentTable, canonical, moment_table
from .errors import CapabilityError, OrderError, ShapeError
from .moment_algebra import build_gram, exponents, moment_basis, residual_basis, sample_mean, solve_gram
from .pitman import as_sample
from .rng import SeededStream, as_stream

KINDS = ("residual_space", "central_moment_space")


@dataclass
class PolyPitmanModel:
    n: int
    k: int
    basis: list
    coefficients: np.ndarray
    variance: float
    effective_rank: int
    kind: str
    mean: float = 0.0
    normal_residual: float = 0.0
    sigma2: float = field(default=float("nan"))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "kind": self.kind,
            "basis": [q.canonical_str() for q in self.basis],
            "coefficients": [float(c) for c in self.coefficients],
            "variance": float(self.variance),
            "effective_rank": self.effective_rank,
        }


def _fit(moments: MomentTable, n: int, k: int, kind: str) -> PolyPitmanModel:
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    n, k = int(n), int(k)
    if n < 2:
        raise ShapeError("polynomial Pitman estimators need n >= 2")
    if k < 0:
        raise ValueError("degree must be nonnegative")
    if moments.order_limit < max(2 * k, 2):
        raise OrderError(f"degree {k} needs moments up to order {max(2 * k, 2)}")
    central = moments.truncated(max(2 * k, 2)).central()
    basis = residual_basis(n, k) if kind == "residual_space" else moment_basis(n, max(k, 1))
    target = sample_mean(n)
    system = build_gram(basis, target, central)
    coef, rank = solve_gram(system)
    g = system.gram_float()
    rhs = system.rhs_float()
    scale = max(np.linalg.norm(rhs), np.linalg.norm(g) * np.linalg.norm(coef), 1e-300)
    resid = float(np.linalg.norm(g @ coef - rhs) / scale)
    sigma2 = float(central[2])
    explained = math.fsum(float(r) * float(c) for r, c in zip(rhs, coef))
    coef = coef.copy()
    mu = float(moments[1])
    coef[0] += mu
    return PolyPitmanModel(n, k, basis, coef, sigma2 / n - explained, rank, kind, mu, resid, sigma2)


def fit_poly_pitman(moments: MomentTable, n: int, k: int) -> PolyPitmanModel:
    """Projection of ``xbar`` onto degree-``k`` polynomials in the residuals."""
    return _fit(moments, n, k, "residual_space")


def fit_tau(moments: MomentTable, n: int, k: int) -> PolyPitmanModel:
    """Projection of ``xbar`` onto ``{1, m_2, ..., m_k}``."""
    return _fit(moments, n, k, "central_moment_space")


def evaluate_model(model: PolyPitmanModel, sample) -> float:
    x = as_sample(sample).observations
    if x.ndim != 1 or x.shape[0] != model.n:
        raise ShapeError(f"model expects a univariate sample of size {model.n}")
    return float(evaluate_batch(model, x[None, :])[0])


def evaluate_batch(model: PolyPitmanModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    # basis polynomials are shift invariant, so evaluate on centred rows for accuracy
    xc = x - x.mean(axis=1, keepdims=True)
    feats = np.stack([q.evaluate(xc) for q in model.basis], axis=1)
    return x.mean(axis=1) - feats @ model.coefficients


@dataclass
class SweepResult:
    k: int
    kind: str
    points: list  # (n, variance)

    @property
    def scaled(self) -> list:
        return [(n, n * v) for n, v in self.points]

    def steps(self) -> list:
        """``n var_n - (n+1) var_{n+1}`` for consecutive sizes (nonnegative when decreasing)."""
        s = self.scaled
        return [(a[0], a[1] - b[1]) for a, b in zip(s, s[1:])]

    def nonincreasing(self, tol: float = 1e-10) -> bool:
        return all(d >= -tol for _, d in self.steps())


def variance_sweep(moments: MomentTable, k: int, n_range: Iterable[int], kind: str = "residual_space") -> SweepResult:
    fit = fit_poly_pitman if kind == "residual_space" else fit_tau
    return SweepResult(k, kind, [(n, fit(moments, n, k).variance) for n in n_range])


def tau_counterexample_search(
    populations: dict,
    k_values: Sequence[int] = (2, 3),
    n_range: Sequence[int] = range(2, 7),
    tol: float = 1e-10,
) -> list[dict]:
    """Look for increases of ``n var(tau_n)`` over a panel of populations.

    Returns one record per (population, k) with the scaled variances and the
    sizes where the sequence goes up; nothing is asserted.
    """
    out = []
    for name, spec in populations.items():
        for k in k_values:
            try:
                mt = moment_table(spec, 2 * k)
            except CapabilityError:
                continue
            sweep = variance_sweep(mt, k, n_range, kind="central_moment_space")
            ups = [n for n, d in sweep.steps() if d < -tol]
            out.append({"population": name, "k": k, "scaled": sweep.scaled, "increases_at": ups})
    return out


def _control_variates(x: np.ndarray, moments: Sequence[float], order: int) -> np.ndarray:
    """Centred power sums ``p_j`` and products ``p_a p_b`` with ``a + b <= order``."""
    n = x.shape[1]
    p = {j: (x**j).sum(axis=1) for j in range(1, order + 1)}
    cols = [p[j] - n * moments[j] for j in p]
    for a in range(1, order):
        for b in range(a, order + 1 - a):
            cols.append(p[a] * p[b] - (n * moments[a + b] + n * (n - 1) * moments[a] * moments[b]))
    return np.stack(cols, axis=1)


def regression_variance(
    spec: DistributionSpec,
    n: int,
    k: int,
    log2_draws: int = 20,
    stream: SeededStream | int | None = None,
) -> float:
    """Residual variance of the least-squares regression of ``xbar`` on residual monomials.

    Independent of the Gram machinery: features are products of powers of the
    free residuals evaluated numerically, samples come from a scrambled Sobol
    sequence pushed through the quantile function, and the mean squared
    residual is corrected with power-sum control variates whose expectations
    are plain population moments.
    """
    c = canonical(spec)
    stream = as_stream(stream)
    seed = int(stream.substream(n, k).generator().integers(2**63))
    u = qmc.Sobol(d=n, scramble=True, seed=seed).random_base2(log2_draws)
    x = np.asarray(c.ppf(np.clip(u, 1e-16, 1 - 1e-16)), dtype=float)
    xc = x - x.mean(axis=1, keepdims=True)
    feats = np.stack([np.prod(xc[:, : n - 1] ** np.array(e), axis=1) for e in exponents(n - 1, k)], axis=1)
    y = x.mean(axis=1)
    coef, *_ = np.linalg.lstsq(feats, y, rcond=None)
    r2 = (y - feats @ coef) ** 2
    order = max(2 * k, 2)
    mom = [float(m) for m in moment_table(c, order).raw_moments]
    h = _control_variates(x, mom, order)
    beta, *_ = np.linalg.lstsq(np.column_stack([np.ones(len(h)), h]), r2, rcond=None)
    return float(r2.mean() - h.mean(axis=0) @ beta[1:])
