"""Named verification experiments.

Every experiment takes an :class:`ExperimentConfig` and returns a list of
:class:`InequalityVerdict`. Variances are exact where a closed form or lattice
enumeration exists and paired Monte Carlo otherwise (see :mod:`.core`).
"""

from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..anova import (
    SubsetFunction,
    decomposability_test,
    equality_predicted,
    loewner_ge,
    variance_drop_check,
)
from ..dist import (
    Cauchy,
    Convolution,
    DiscreteLattice,
    Gaussian,
    Laplace,
    ProductMultivariate,
    Scaled,
    Uniform,
    Exponential,
    VectorLattice,
    canonical,
    discretize,
    fisher_information,
    moment_table,
)
from ..errors import CapabilityError, ConfigError, ShapeError, SingularityError
from ..pitman import batch_estimator, closed_form_variance, pitman_variance_exact, score_estimator_batch
from ..poly_pitman import fit_poly_pitman, fit_tau
from ..rng import SeededStream, as_stream
from ..verdict import InequalityVerdict
from .config import ExperimentConfig
from .core import (
    Design,
    chain_kind,
    draw_columns,
    exact_variance,
    is_gaussian,
    pooled_estimator,
    pooled_exact_variance,
)

CONDITION_LIMIT = 1e8
FISHER_TOL = 1e-6

# Self-decomposable noise laws. Only those marked usable have finite variance,
# which the variance paths need.
SELF_DECOMPOSABLE = {Gaussian: True, Cauchy: False}


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _root(cfg: ExperimentConfig, name: str) -> SeededStream:
    return SeededStream(int(cfg.seed)).substream(zlib.crc32(name.encode()))


def _need(cfg: ExperimentConfig, key: str):
    value = getattr(cfg, key)
    if value is None:
        raise ConfigError(f"'{key}' is required for {cfg.experiment}", f"/{key}")
    return value


def _pops(cfg: ExperimentConfig, at_least: int = 1) -> list:
    if len(cfg.populations) < at_least:
        raise ConfigError(f"{cfg.experiment} needs at least {at_least} populations", "/populations")
    return [canonical(p) for p in cfg.populations]


def _sizes(cfg: ExperimentConfig, default_first: int = 1) -> list[int]:
    if cfg.n_values:
        return sorted(set(int(v) for v in cfg.n_values))
    return list(range(default_first, int(_need(cfg, "n")) + 1))


def _instance(cfg: ExperimentConfig, **extra) -> dict:
    out = cfg.describe()
    out["experiment"] = cfg.experiment
    out.update(extra)
    return out


def _conv(specs) -> object:
    specs = list(specs)
    return canonical(specs[0] if len(specs) == 1 else Convolution(tuple(specs)))


def _sigma2(spec) -> float:
    return float(moment_table(spec, 2).variance)


def _check_m(m: int, n_pops: int):
    if not 1 <= m <= n_pops:
        raise ConfigError(f"m must lie in [1, {n_pops}]", "/m")


# ---------------------------------------------------------------------------
# superadditivity
# ---------------------------------------------------------------------------


def verify_convolution_superadditivity(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """``var(t_n) >= C(N-1,m-1)^{-1} sum_s var(t_{s,n})`` for ``F = F_1 * ... * F_N``."""
    pops = _pops(cfg, 1)
    n = int(_need(cfg, "n"))
    big_n = len(pops)
    ms = [int(cfg.m)] if cfg.m else list(range(1, big_n + 1))
    for m in ms:
        _check_m(m, big_n)
    full = tuple(range(big_n))
    subsets = {full} | {s for m in ms for s in itertools.combinations(full, m)}
    design = Design(draw_columns(pops, n), cfg.reps, _root(cfg, cfg.experiment), cfg.mode)
    for s in sorted(subsets, key=lambda t: (len(t), t)):
        spec = _conv(pops[j] for j in s)
        design.add(s, lambda d, s=s: sum(d[j] for j in s), batch_estimator(spec), exact_variance(spec, n))
    design.run()
    gaussian = all(is_gaussian(p) for p in pops)
    out = []
    for m in ms:
        subs = list(itertools.combinations(full, m))
        c = math.comb(big_n - 1, m - 1)
        out.append(
            design.verdict(
                cfg.experiment,
                _instance(cfg, m=m, n=n),
                lambda v: v[full],
                lambda v, subs=subs, c=c: math.fsum(v[s] for s in subs) / c,
                kind=chain_kind(gaussian),
                tol=cfg.tol,
                m=m,
                trivial=m == big_n,
            )
        )
    return out


def verify_additive_superadditivity(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """The ``m = 1`` case: ``var(t_n) >= sum_k var(t_n^{(k)})``."""
    _pops(cfg, 2)
    cfg = _with(cfg, m=1)
    return verify_convolution_superadditivity(cfg)


def _with(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    from dataclasses import replace

    return replace(cfg, **changes)


def verify_combine(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """``1/var(pooled) >= C(N-1,m-1)^{-1} sum_s 1/var(t^{(s)})`` for pooled heterogeneous samples."""
    pops = _pops(cfg, 2)
    big_n = len(pops)
    if cfg.sizes:
        sizes = list(cfg.sizes)
        if len(sizes) == 1:
            sizes = sizes * big_n
        if len(sizes) != big_n:
            raise ConfigError("need one size per population", "/sizes")
    else:
        sizes = [int(_need(cfg, "n"))] * big_n
    ms = [int(cfg.m)] if cfg.m else [1]
    for m in ms:
        _check_m(m, big_n)
    full = tuple(range(big_n))
    subsets = {full} | {s for m in ms for s in itertools.combinations(full, m)}
    design = Design(draw_columns(pops, sizes), cfg.reps, _root(cfg, cfg.experiment), cfg.mode)
    for s in sorted(subsets, key=lambda t: (len(t), t)):
        specs = [pops[j] for j in s for _ in range(sizes[j])]
        design.add(
            s,
            lambda d, s=s: np.concatenate([d[j] for j in s], axis=1),
            pooled_estimator(specs),
            pooled_exact_variance(specs),
        )
    design.run()
    gaussian = all(is_gaussian(p) for p in pops)
    out = []
    for m in ms:
        subs = list(itertools.combinations(full, m))
        c = math.comb(big_n - 1, m - 1)
        out.append(
            design.verdict(
                cfg.experiment,
                _instance(cfg, m=m, sizes=sizes),
                lambda v: 1.0 / v[full],
                lambda v, subs=subs, c=c: math.fsum(1.0 / v[s] for s in subs) / c,
                kind=chain_kind(gaussian),
                tol=cfg.tol,
                m=m,
                var_pooled=design.values()[full],
            )
        )
    return out


# ---------------------------------------------------------------------------
# convolution powers of one population
# ---------------------------------------------------------------------------


def _power_design(cfg: ExperimentConfig, name: str):
    h = _pops(cfg)[0]
    n = int(_need(cfg, "n"))
    ns = sorted(set(int(v) for v in cfg.N_values)) if cfg.N_values else list(range(2, int(_need(cfg, "N")) + 1))
    if ns[0] < 2:
        raise ConfigError("convolution powers are compared from N = 2", "/N_values")
    top = ns[-1]

    def draw(rng, count):
        return {"h": np.asarray(h.draw(rng, (count, n, top)), dtype=float)}

    design = Design(draw, cfg.reps, _root(cfg, name), cfg.mode)
    for k in sorted(set(ns) | {v - 1 for v in ns}):
        spec = _conv([h] * k)
        design.add(k, lambda d, k=k: d["h"][:, :, :k].sum(axis=2), batch_estimator(spec), exact_variance(spec, n))
    return h, n, ns, design.run()


def verify_group_monotonicity(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """``var(t_n^{*N})/N >= var(t_n^{*(N-1)})/(N-1)``."""
    h, n, ns, design = _power_design(cfg, cfg.experiment)
    kind = chain_kind(is_gaussian(h))
    return [
        design.verdict(
            cfg.experiment,
            _instance(cfg, n=n, N=k),
            lambda v, k=k: v[k] / k,
            lambda v, k=k: v[k - 1] / (k - 1),
            kind=kind,
            tol=cfg.tol,
        )
        for k in ns
    ]


def verify_dissipation(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """``(N-1) D_{N-1} >= N D_N`` with ``D_N = var E(xbar_1 | R_1 + ... + R_N)``.

    Uses ``N D_N = sigma^2/n - var(t_n^{*N})/N``.
    """
    h, n, ns, design = _power_design(cfg, cfg.experiment)
    s2n = _sigma2(h) / n
    kind = chain_kind(is_gaussian(h))
    return [
        design.verdict(
            cfg.experiment,
            _instance(cfg, n=n, N=k),
            lambda v, k=k: s2n - v[k - 1] / (k - 1),
            lambda v, k=k: s2n - v[k] / k,
            kind=kind,
            tol=cfg.tol,
        )
        for k in ns
    ]


# ---------------------------------------------------------------------------
# sample size
# ---------------------------------------------------------------------------


def _size_design(cfg: ExperimentConfig, name: str, default_first: int = 1):
    pop = _pops(cfg)[0]
    sizes = _sizes(cfg, default_first)
    if len(sizes) < 2:
        raise ConfigError("need at least two sample sizes", "/n_values")
    top = sizes[-1]

    def draw(rng, count):
        return {"x": np.asarray(pop.draw(rng, (count, top)), dtype=float)}

    design = Design(draw, cfg.reps, _root(cfg, name), cfg.mode)
    est = batch_estimator(pop)
    for k in sizes:
        design.add(k, lambda d, k=k: d["x"][:, :k], est, exact_variance(pop, k))
    return pop, sizes, design.run()


def _size_kind(cfg, gaussian, k):
    return chain_kind(gaussian, strict=cfg.strict_from is not None and k >= cfg.strict_from)


def verify_sample_monotonicity(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """``n var(t_n) >= (n+1) var(t_{n+1})`` over consecutive sizes."""
    pop, sizes, design = _size_design(cfg, cfg.experiment)
    gaussian = is_gaussian(pop)
    return [
        design.verdict(
            cfg.experiment,
            _instance(cfg, n=a, n_next=b),
            lambda v, a=a: a * v[a],
            lambda v, b=b: b * v[b],
            kind=_size_kind(cfg, gaussian, a),
            tol=cfg.tol,
        )
        for a, b in zip(sizes, sizes[1:])
    ]


def verify_final_corollary(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """``n var E(xbar_n | R_n) = sigma^2 - n var(t_n)`` is nondecreasing in ``n``."""
    pop, sizes, design = _size_design(cfg, cfg.experiment)
    s2 = _sigma2(pop)
    gaussian = is_gaussian(pop)
    return [
        design.verdict(
            cfg.experiment,
            _instance(cfg, n=a, n_next=b),
            lambda v, b=b: s2 - b * v[b],
            lambda v, a=a: s2 - a * v[a],
            kind=_size_kind(cfg, gaussian, a),
            tol=cfg.tol,
        )
        for a, b in zip(sizes, sizes[1:])
    ]


# ---------------------------------------------------------------------------
# noise level
# ---------------------------------------------------------------------------


def _noise(cfg: ExperimentConfig):
    if cfg.noise is not None:
        g = canonical(cfg.noise)
    elif len(cfg.populations) >= 2:
        g = canonical(cfg.populations[1])
    else:
        raise ConfigError("a noise population is required", "/noise")
    usable = SELF_DECOMPOSABLE.get(type(g))
    if usable is None:
        raise CapabilityError(f"{g.family} is not in the self-decomposable registry")
    if not usable:
        raise CapabilityError(f"{g.family} is self-decomposable but has no finite variance path")
    return g


def verify_lambda_monotonicity(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """``var(t_{n,lambda})`` for ``F * lambda G``: nondecreasing for ``lambda > 0``, nonincreasing below 0."""
    f = _pops(cfg)[0]
    g = _noise(cfg)
    n = int(_need(cfg, "n"))
    lams = sorted(set(float(v) for v in _need(cfg, "lambda_grid")))

    def draw(rng, count):
        return {"u": np.asarray(f.draw(rng, (count, n)), float), "z": np.asarray(g.draw(rng, (count, n)), float)}

    design = Design(draw, cfg.reps, _root(cfg, cfg.experiment), cfg.mode)
    for lam in lams:
        spec = _conv([f, Scaled(g, lam)])
        design.add(lam, lambda d, lam=lam: d["u"] + lam * d["z"], batch_estimator(spec), exact_variance(spec, n))
    design.run()
    out = []
    pos = [x for x in lams if x >= 0]
    neg = [x for x in lams if x <= 0]
    for a, b in zip(pos, pos[1:]):
        out.append(
            design.verdict(
                cfg.experiment,
                _instance(cfg, n=n, lam=a, lam_next=b),
                lambda v, b=b: v[b],
                lambda v, a=a: v[a],
                tol=cfg.tol,
                side="positive",
            )
        )
    for a, b in zip(neg, neg[1:]):
        out.append(
            design.verdict(
                cfg.experiment,
                _instance(cfg, n=n, lam=a, lam_next=b),
                lambda v, a=a: v[a],
                lambda v, b=b: v[b],
                tol=cfg.tol,
                side="negative",
            )
        )
    if g.is_symmetric():
        for lam in pos:
            if lam > 0 and -lam in lams:
                out.append(
                    design.verdict(
                        cfg.experiment,
                        _instance(cfg, n=n, lam=lam, mirror=-lam),
                        lambda v, lam=lam: v[lam],
                        lambda v, lam=lam: v[-lam],
                        relation="==",
                        kind="equality",
                        tol=cfg.tol,
                        side="symmetry",
                    )
                )
    return out


# ---------------------------------------------------------------------------
# Gaussian equality characterization
# ---------------------------------------------------------------------------


def verify_gaussian_equality_characterization(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """Equality for Gaussian populations, a detectable strict gap for the others.

    Two relations per population ``P``: ``var(t_n[P*P]) >= 2 var(t_n[P])`` and
    ``1/var(t_{n1+n2}) >= 1/var(t_{n1}) + 1/var(t_{n2})``.
    """
    pops = _pops(cfg)
    n = int(_need(cfg, "n"))
    sizes = list(cfg.sizes) if cfg.sizes else [max(1, n // 2), max(1, n - n // 2)]
    total = sum(sizes)
    top = max(n, total)
    root = _root(cfg, cfg.experiment)
    out = []
    for i, p in enumerate(pops):

        def draw(rng, count, p=p):
            return {
                "a": np.asarray(p.draw(rng, (count, top)), float),
                "b": np.asarray(p.draw(rng, (count, n)), float),
            }

        design = Design(draw, cfg.reps, root.substream(i), cfg.mode)
        pp = _conv([p, p])
        est = batch_estimator(p)
        design.add("conv", lambda d: d["a"][:, :n] + d["b"], batch_estimator(pp), exact_variance(pp, n))
        design.add(("single", n), lambda d: d["a"][:, :n], est, exact_variance(p, n))
        design.add(("single", total), lambda d: d["a"][:, :total], est, exact_variance(p, total))
        starts = np.cumsum([0] + sizes)
        for j, sz in enumerate(sizes):
            design.add(
                ("part", j),
                lambda d, a=starts[j], b=starts[j + 1]: d["a"][:, a:b],
                est,
                exact_variance(p, sz),
            )
        design.run()
        gaussian = is_gaussian(p)
        kind = "equality" if gaussian else "strict"
        inst = {"population": p.to_json(), "n": n, "sizes": sizes}
        out.append(
            design.verdict(
                cfg.experiment,
                _instance(cfg, relation_form="convolution", **inst),
                lambda v: v["conv"],
                lambda v: 2.0 * v[("single", n)],
                kind=kind,
                tol=cfg.tol,
                gaussian=gaussian,
            )
        )
        out.append(
            design.verdict(
                cfg.experiment,
                _instance(cfg, relation_form="combination", **inst),
                lambda v: 1.0 / v[("single", total)],
                lambda v: math.fsum(1.0 / v[("part", j)] for j in range(len(sizes))),
                kind=kind,
                tol=cfg.tol,
                gaussian=gaussian,
            )
        )
    return out


# ---------------------------------------------------------------------------
# dyadic strong components
# ---------------------------------------------------------------------------


def _split_bits(bits: np.ndarray):
    """Even-position and odd-position parts (1-based positions) as integer numerators."""
    depth = bits.shape[-1]
    weights = 2 ** np.arange(depth - 1, -1, -1, dtype=np.int64)
    pos = np.arange(1, depth + 1)
    even = (bits * (pos % 2 == 0) * weights).sum(axis=-1)
    odd = (bits * (pos % 2 == 1) * weights).sum(axis=-1)
    return even, odd


def _bits_of(num: np.ndarray, depth: int) -> np.ndarray:
    shifts = np.arange(depth - 1, -1, -1, dtype=np.int64)
    return (np.asarray(num, dtype=np.int64)[..., None] >> shifts) & 1


def dyadic_batch(depth: int, count: int, stream: SeededStream | int | None = None):
    """``count`` draws of ``(X, Y, reconstructed)`` as arrays."""
    if not 1 <= depth <= 52:
        raise ValueError("depth must lie in [1, 52]")
    rng = as_stream(stream).generator()
    bits = rng.integers(0, 2, size=(count, depth), dtype=np.int64)
    even, odd = _split_bits(bits)
    scale = 2.0**-depth
    x, y = even * scale, odd * scale
    # recover both parts from the digits of the sum alone
    total = np.rint((x + y) / scale).astype(np.int64)
    re, ro = _split_bits(_bits_of(total, depth))
    ok = (re * scale == x) & (ro * scale == y)
    return x, y, ok


def dyadic_strong_components(depth: int, digits=None, stream: SeededStream | int | None = None):
    """Split ``xi = sum_k xi_k 2^-k`` into its even-digit part ``X`` and odd-digit part ``Y``.

    Returns ``(X, Y, reconstruction_check)``; the check recovers ``X`` and ``Y``
    from the binary digits of ``X + Y`` alone.
    """
    if not 1 <= depth <= 52:
        raise ValueError("depth must lie in [1, 52]")
    if digits is None:
        x, y, ok = dyadic_batch(depth, 1, stream)
        return float(x[0]), float(y[0]), bool(ok[0])
    bits = np.array([int(c) for c in str(digits)], dtype=np.int64)
    if len(bits) != depth or np.any((bits != 0) & (bits != 1)):
        raise ValueError("digits must be a string of depth binary digits")
    even, odd = _split_bits(bits)
    scale = 2.0**-depth
    x, y = float(even * scale), float(odd * scale)
    total = int(round((x + y) / scale))
    re, ro = _split_bits(_bits_of(np.array(total), depth))
    return x, y, bool(re * scale == x and ro * scale == y)


def verify_dyadic(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """Count exact reconstructions of both dyadic parts over ``reps`` draws."""
    depth = int(cfg.depth or 16)
    _, _, ok = dyadic_batch(depth, cfg.reps, _root(cfg, cfg.experiment))
    return [
        InequalityVerdict.build(
            cfg.experiment,
            _instance(cfg, depth=depth),
            float(ok.sum()),
            float(len(ok)),
            relation="==",
            kind="equality",
            tol=0.0,
        )
    ]


# ---------------------------------------------------------------------------
# Fisher information counterparts
# ---------------------------------------------------------------------------

_FISHER_CLOSED = (Gaussian, Cauchy)


def verify_fisher_counterparts(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """Fisher information of sums: ``1/I(X+Y) >= 1/I(X) + 1/I(Y)`` and ``N I(S_N) <= (N-1) I(S_{N-1})``.

    Laplace populations add a quadrature check of ``I``; ``n_values`` adds the
    ``n var(t_n) I`` trend.
    """
    pops = _pops(cfg)
    for i, p in enumerate(pops):
        if not isinstance(p, _FISHER_CLOSED + (Laplace,)):
            raise CapabilityError(f"population {i} ({p.family}) is outside the Fisher registry")
    out = []
    for a, b in zip(pops, pops[1:]):
        if type(a) is not type(b) or not isinstance(a, _FISHER_CLOSED):
            continue
        s = _conv([a, b])
        gaussian = isinstance(a, Gaussian)
        detail = {} if gaussian else {"margin": 4.0 * a.gamma * b.gamma}
        out.append(
            InequalityVerdict.build(
                "fisher_convolution",
                _instance(cfg, pair=[a.to_json(), b.to_json()]),
                1.0 / fisher_information(s),
                1.0 / fisher_information(a) + 1.0 / fisher_information(b),
                kind=chain_kind(gaussian, strict=True),
                tol=cfg.tol,
                **detail,
            )
        )
    ns = sorted(set(int(v) for v in cfg.N_values)) if cfg.N_values else [2, 3]
    for p in pops:
        if not isinstance(p, _FISHER_CLOSED):
            continue
        for k in ns:
            if k < 2:
                raise ConfigError("N values must be at least 2", "/N_values")
            out.append(
                InequalityVerdict.build(
                    "fisher_sum_monotonicity",
                    _instance(cfg, population=p.to_json(), N=k),
                    k * fisher_information(_conv([p] * k)),
                    (k - 1) * fisher_information(_conv([p] * (k - 1))),
                    relation="<=",
                    kind=chain_kind(isinstance(p, Gaussian), strict=True),
                    tol=cfg.tol,
                )
            )
    for p in pops:
        if isinstance(p, Laplace):
            out.append(
                InequalityVerdict.build(
                    "fisher_quadrature",
                    _instance(cfg, population=p.to_json()),
                    fisher_information(p),
                    1.0 / p.scale**2,
                    relation="==",
                    kind="equality",
                    tol=FISHER_TOL,
                )
            )
    if cfg.n_values:
        root = _root(cfg, cfg.experiment)
        for i, p in enumerate(pops):
            if isinstance(p, Cauchy):
                continue
            info = fisher_information(p)
            sizes = sorted(set(int(v) for v in cfg.n_values))
            top = sizes[-1]

            def draw(rng, count, p=p):
                return {"x": np.asarray(p.draw(rng, (count, top)), float)}

            design = Design(draw, cfg.reps, root.substream(i), cfg.mode)
            for k in sizes:
                design.add(k, lambda d, k=k: d["x"][:, :k], batch_estimator(p), exact_variance(p, k))
            design.run()
            gaussian = isinstance(p, Gaussian)
            for k in sizes:
                out.append(
                    design.verdict(
                        "efficiency_trend",
                        _instance(cfg, population=p.to_json(), n=k),
                        lambda v, k=k: k * v[k] * info,
                        lambda v: 1.0,
                        relation="==" if gaussian else ">=",
                        kind="equality" if gaussian else "probe",
                        tol=cfg.tol,
                    )
                )
    return out


# ---------------------------------------------------------------------------
# multivariate
# ---------------------------------------------------------------------------


def _guarded_inverse(a: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    cond = np.linalg.cond(a)
    if not math.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularityError(f"covariance matrix is numerically singular (condition {cond:.3g})")
    return np.linalg.inv(a)


def verify_multivariate_monotonicity(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """Loewner checks ``n V_n >= (n+1) V_{n+1}`` and the matrix combination form."""
    pops = _pops(cfg)
    for i, p in enumerate(pops):
        if not isinstance(p, (ProductMultivariate, VectorLattice)):
            raise ConfigError("multivariate experiments need s-variate populations", f"/populations/{i}")
    root = _root(cfg, cfg.experiment)
    out = []
    sizes = _sizes(cfg)
    top = sizes[-1]
    for i, p in enumerate(pops):

        def draw(rng, count, p=p):
            return {"x": np.asarray(p.draw(rng, (count, top)), float)}

        design = Design(draw, cfg.reps, root.substream(i), cfg.mode)
        est = batch_estimator(p)
        for k in sizes:
            design.add(k, lambda d, k=k: d["x"][:, :k], est, exact_variance(p, k), width=p.dimension)
        design.run()
        kind = chain_kind(is_gaussian(p))
        vals = design.values()
        for a, b in zip(sizes, sizes[1:]):
            lhs, rhs = a * vals[a], b * vals[b]
            out.append(
                design.verdict(
                    cfg.experiment,
                    _instance(cfg, population=p.to_json(), n=a, n_next=b),
                    lambda v, a=a: a * np.asarray(v[a]),
                    lambda v, b=b: b * np.asarray(v[b]),
                    kind=kind,
                    tol=cfg.tol,
                    loewner=loewner_ge(lhs, rhs, tol=max(cfg.tol, 1e-12)),
                )
            )
    if len(pops) >= 2:
        out.append(_matrix_combine(cfg, pops, root.substream(len(pops))))
    return out


def _matrix_combine(cfg, pops, stream) -> InequalityVerdict:
    """``V^{-1}(pooled) >= sum_j V^{-1}(t^{(j)})`` for s-variate samples of sizes ``n_j``."""
    big_n = len(pops)
    sizes = list(cfg.sizes) if cfg.sizes else [int(_need(cfg, "n"))] * big_n
    if len(sizes) == 1:
        sizes = sizes * big_n
    if len(sizes) != big_n:
        raise ConfigError("need one size per population", "/sizes")
    dims = {p.dimension for p in pops}
    if len(dims) != 1:
        raise ShapeError("populations differ in dimension")
    s = dims.pop()
    same = all(p == pops[0] for p in pops)
    if not same and not all(isinstance(p, ProductMultivariate) for p in pops):
        raise CapabilityError("pooled estimators for different s-variate lattices are not available")

    def draw(rng, count):
        return {j: np.asarray(p.draw(rng, (count, sizes[j])), float) for j, p in enumerate(pops)}

    design = Design(draw, cfg.reps, stream, cfg.mode)
    if same:
        p = pops[0]
        total = sum(sizes)
        est = batch_estimator(p)
        design.add("pooled", lambda d: np.concatenate([d[j] for j in range(big_n)], axis=1), est,
                   exact_variance(p, total), width=s)
        for j in range(big_n):
            design.add(("part", j), lambda d, j=j: d[j], est, exact_variance(p, sizes[j]), width=s)

        def pooled(v):
            return np.asarray(v["pooled"])

        def part(v, j):
            return np.asarray(v[("part", j)])
    else:
        # independent coordinates: the pooled estimator works coordinate by coordinate
        for c in range(s):
            specs = [pops[j].components[c] for j in range(big_n) for _ in range(sizes[j])]
            design.add(
                ("pooled", c),
                lambda d, c=c: np.concatenate([d[j][..., c] for j in range(big_n)], axis=1),
                pooled_estimator(specs),
                pooled_exact_variance(specs),
            )
            for j in range(big_n):
                comp = pops[j].components[c]
                design.add(("part", j, c), lambda d, j=j, c=c: d[j][..., c], batch_estimator(comp),
                           exact_variance(comp, sizes[j]))

        def pooled(v):
            return np.diag([v[("pooled", c)] for c in range(s)])

        def part(v, j):
            return np.diag([v[("part", j, c)] for c in range(s)])

    design.run()
    gaussian = all(is_gaussian(p) for p in pops)
    return design.verdict(
        "multivariate_combine",
        _instance(cfg, sizes=sizes),
        lambda v: _guarded_inverse(pooled(v)),
        lambda v: sum(_guarded_inverse(part(v, j)) for j in range(big_n)),
        kind=chain_kind(gaussian),
        tol=cfg.tol,
    )


# ---------------------------------------------------------------------------
# probes and cross-checks
# ---------------------------------------------------------------------------


def probe_score_monotonicity(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """Trend of ``n var`` for the one-step score estimator; reported, never asserted.

    ``score_literal`` is ``xbar - sum J(x_i - xbar)/(nI)`` exactly as displayed;
    ``score_newton`` flips the sign of the correction, which is the Newton step
    from ``xbar`` when ``J = -f'/f``.
    """
    pops = _pops(cfg) if cfg.populations else [Laplace(1.0)]
    p = pops[0]
    sizes = _sizes(cfg, 2)
    top = sizes[-1]
    fisher_information(p)  # raises for populations without a finite score

    def draw(rng, count):
        return {"x": np.asarray(p.draw(rng, (count, top)), float)}

    def newton(x):
        return 2.0 * x.mean(axis=-1) - score_estimator_batch(p, x)

    mode = "mc" if cfg.mode == "auto" else cfg.mode
    design = Design(draw, cfg.reps, _root(cfg, cfg.experiment), mode)
    for k in sizes:
        design.add(("literal", k), lambda d, k=k: d["x"][:, :k], lambda x: score_estimator_batch(p, x))
        design.add(("newton", k), lambda d, k=k: d["x"][:, :k], newton)
    design.run()
    return [
        design.verdict(
            f"score_{form}",
            _instance(cfg, form=form, n=a, n_next=b),
            lambda v, a=a, form=form: a * v[(form, a)],
            lambda v, b=b, form=form: b * v[(form, b)],
            kind="probe",
            tol=cfg.tol,
        )
        for form in ("literal", "newton")
        for a, b in zip(sizes, sizes[1:])
    ]


def published_variance(spec, n: int) -> float | None:
    """Variance formulas as printed in the source for exponential and uniform populations."""
    c = canonical(spec)
    if isinstance(c, Exponential):
        return 2.0 * c.scale / ((n + 1) * (n + 2))
    if isinstance(c, Uniform):
        return (c.b - c.a) ** 2 * n / ((n + 1) ** 2 * (n + 2))
    return None


def compare_closed_forms(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """Simulation against the derived order-statistics variances and the published ones.

    The derived formula is checked as an equality; the published formula is a
    probe. With ``lattice_points`` set, uniform populations are also checked
    against exact enumeration on a fine lattice.
    """
    pops = _pops(cfg)
    sizes = _sizes(cfg)
    top = sizes[-1]
    root = _root(cfg, cfg.experiment)
    out = []
    for i, p in enumerate(pops):
        if published_variance(p, 1) is None:
            raise CapabilityError(f"no published formula for {p.family}")

        def draw(rng, count, p=p):
            return {"x": np.asarray(p.draw(rng, (count, top)), float)}

        design = Design(draw, cfg.reps, root.substream(i), "mc")
        for k in sizes:
            design.add(k, lambda d, k=k: d["x"][:, :k], batch_estimator(p))
        design.run()
        for k in sizes:
            derived = closed_form_variance(p, k)
            published = published_variance(p, k)
            inst = _instance(cfg, population=p.to_json(), n=k)
            out.append(
                design.verdict("derived_variance", inst, lambda v, k=k: v[k], lambda v, d=derived: d,
                               relation="==", kind="equality", tol=cfg.tol)
            )
            out.append(
                design.verdict("published_variance", inst, lambda v, k=k: v[k], lambda v, q=published: q,
                               relation="==", kind="probe", tol=cfg.tol, derived=derived)
            )
            if cfg.lattice_points and isinstance(p, Uniform):
                lat = discretize(p, int(cfg.lattice_points))
                exact = float(pitman_variance_exact(lat, k).value)
                out.append(
                    InequalityVerdict.build(
                        "lattice_variance",
                        _instance(cfg, population=p.to_json(), n=k, lattice_points=cfg.lattice_points),
                        exact,
                        derived,
                        relation="==",
                        kind="equality",
                        tol=1e-3,
                    )
                )
    return out


def verify_poly_pitman_monotonicity(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """``n var(t_hat_n^{(k)})`` nonincreasing, and never above ``sigma^2/n``."""
    pops = _pops(cfg)
    k = int(_need(cfg, "k"))
    sizes = _sizes(cfg, 2)
    if sizes[0] < 2:
        raise ConfigError("polynomial Pitman estimators need n >= 2", "/n_values")
    out = []
    for p in pops:
        mt = moment_table(p, max(2 * k, 2))
        var = {m: fit_poly_pitman(mt, m, k).variance for m in sizes}
        s2 = float(mt.variance)
        gaussian = is_gaussian(p)
        for a, b in zip(sizes, sizes[1:]):
            out.append(
                InequalityVerdict.build(
                    cfg.experiment,
                    _instance(cfg, population=p.to_json(), k=k, n=a, n_next=b),
                    a * var[a],
                    b * var[b],
                    kind=chain_kind(gaussian),
                    tol=cfg.tol,
                )
            )
        for m in sizes:
            out.append(
                InequalityVerdict.build(
                    "poly_pitman_gain",
                    _instance(cfg, population=p.to_json(), k=k, n=m),
                    s2 / m,
                    var[m],
                    kind=chain_kind(gaussian or k <= 1),
                    tol=cfg.tol,
                )
            )
    return out


def probe_tau_monotonicity(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """Steps of ``n var(tau_n)`` for the moment-space projection; reported only."""
    pops = _pops(cfg)
    ks = list(cfg.k_values) if cfg.k_values else [int(_need(cfg, "k"))]
    sizes = _sizes(cfg, 2)
    out = []
    for p in pops:
        for k in ks:
            mt = moment_table(p, max(2 * k, 2))
            var = {m: fit_tau(mt, m, k).variance for m in sizes}
            for a, b in zip(sizes, sizes[1:]):
                out.append(
                    InequalityVerdict.build(
                        cfg.experiment,
                        _instance(cfg, population=p.to_json(), k=k, n=a, n_next=b),
                        a * var[a],
                        b * var[b],
                        kind="probe",
                        tol=cfg.tol,
                    )
                )
    return out


# ---------------------------------------------------------------------------
# variance drop
# ---------------------------------------------------------------------------


def random_drop_instance(rng: np.random.Generator, max_n: int = 4, max_support: int = 4, style: str = "random"):
    """Random coordinates, one table per m-subset, and positive weights.

    ``style`` is ``random`` (arbitrary tables), ``additive`` (tables of the
    form ``sum_i h_i(x_i) / w_s``, which attain the bound) or ``product``
    (products of centred unit-variance factors with ``2 <= m < N``).
    """
    if style == "product":
        big_n = int(rng.integers(3, max(3, max_n) + 1))
        m = int(rng.integers(2, big_n))
    else:
        big_n = int(rng.integers(2, max_n + 1))
        m = int(rng.integers(1, big_n + 1))
    dists = []
    for _ in range(big_n):
        size = int(rng.integers(2, max_support + 1))
        probs = rng.dirichlet(np.ones(size)) * 0.9 + 0.1 / size
        probs = probs / probs.sum()
        dists.append(DiscreteLattice(tuple(float(i) for i in range(size)), tuple(float(q) for q in probs)))
    subsets = list(itertools.combinations(range(big_n), m))
    w = rng.dirichlet(np.ones(len(subsets))) * 0.9 + 0.1 / len(subsets)
    w = w / w.sum()
    funcs = []
    h = [rng.normal(size=len(d.points)) for d in dists]
    for s, ws in zip(subsets, w):
        shape = tuple(len(dists[i].points) for i in s)
        if style == "random":
            table = rng.normal(size=shape) * rng.uniform(0.5, 3.0)
        elif style == "additive":
            table = np.zeros(shape)
            for axis, i in enumerate(s):
                view = [1] * len(s)
                view[axis] = -1
                table = table + h[i].reshape(view) / ws
        else:
            table = np.ones(shape)
            for axis, i in enumerate(s):
                p = np.asarray(dists[i].probs)
                v = rng.normal(size=len(p))
                v = v - p @ v
                v = v / math.sqrt(max(p @ v**2, 1e-300))
                view = [1] * len(s)
                view[axis] = -1
                table = table * v.reshape(view)
        funcs.append(SubsetFunction(s, table))
    return funcs, [float(x) for x in w], dists


def verify_variance_drop(cfg: ExperimentConfig) -> list[InequalityVerdict]:
    """Exact variance-drop verdicts on randomized, additive and product instances."""
    count = int(cfg.instances or 200)
    max_n = int(cfg.N or 4)
    max_support = int(cfg.max_support or 4)
    rng = _root(cfg, cfg.experiment).generator()
    styles = ("random", "additive", "product")
    out = []
    for i in range(count):
        style = styles[i % 3]
        funcs, w, dists = random_drop_instance(rng, max_n, max_support, style)
        v = variance_drop_check(funcs, w, dists, tol=cfg.tol)
        predicted = equality_predicted(funcs, w, dists, tol=1e-9)
        observed = abs(v.slack) < 1e-9
        v.detail.update(
            style=style,
            decomposable=all(decomposability_test(f, dists) for f in funcs),
            equality_predicted=predicted,
            equality_observed=observed,
            consistent=predicted == observed,
        )
        v.instance.update(index=i, style=style, seed=int(cfg.seed))
        if style == "additive":
            v = _rekind(v, "equality")
        elif style == "product":
            v = _rekind(v, "strict")
        out.append(v)
    return out


def _rekind(v: InequalityVerdict, kind: str) -> InequalityVerdict:
    return InequalityVerdict.build(
        v.name, v.instance, v.lhs, v.rhs, relation=v.relation, kind=kind, tol=v.tol, slack=v.slack, **v.detail
    )


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Experiment:
    name: str
    run: Callable[[ExperimentConfig], list]
    required: tuple
    summary: str


_TABLE = [
    ("convolution_superadditivity", verify_convolution_superadditivity, ("populations", "n")),
    ("additive_superadditivity", verify_additive_superadditivity, ("populations", "n")),
    ("group_monotonicity", verify_group_monotonicity, ("populations", "n")),
    ("combine", verify_combine, ("populations",)),
    ("sample_monotonicity", verify_sample_monotonicity, ("populations",)),
    ("dissipation", verify_dissipation, ("populations", "n")),
    ("final_corollary", verify_final_corollary, ("populations",)),
    ("lambda_monotonicity", verify_lambda_monotonicity, ("populations", "n", "lambda_grid")),
    ("gaussian_equality_characterization", verify_gaussian_equality_characterization, ("populations", "n")),
    ("dyadic_strong_components", verify_dyadic, ()),
    ("fisher_counterparts", verify_fisher_counterparts, ("populations",)),
    ("multivariate_monotonicity", verify_multivariate_monotonicity, ("populations",)),
    ("probe_score_monotonicity", probe_score_monotonicity, ()),
    ("closed_form_comparison", compare_closed_forms, ("populations",)),
    ("poly_pitman_monotonicity", verify_poly_pitman_monotonicity, ("populations", "k")),
    ("probe_tau_monotonicity", probe_tau_monotonicity, ("populations",)),
    ("variance_drop", verify_variance_drop, ()),
]

REGISTRY = {
    name: Experiment(name, fn, req, ((fn.__doc__ or "").strip().splitlines() or [""])[0]) for name, fn, req in _TABLE
}
