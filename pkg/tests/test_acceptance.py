"""Acceptance suite: one PASS/FAIL line per criterion, with its runtime.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed even
when output capture is on.
"""

import itertools
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy import integrate

from pitmanlab import bench
from pitmanlab.anova import decomposability_test, equality_predicted, variance_drop_check
from pitmanlab.bench.experiments import published_variance, random_drop_instance
from pitmanlab.cli import run as cli_run
from pitmanlab.dist import (
    DiscreteLattice,
    Exponential,
    Gaussian,
    Laplace,
    ProductMultivariate,
    Uniform,
    discretize,
    fisher_information,
    moment_table,
)
from pitmanlab.pitman import (
    closed_form_variance,
    covariance_exact,
    pitman_closed,
    pitman_quadrature,
    pitman_variance_exact,
    pitman_variance_mc,
)
from pitmanlab.poly_pitman import fit_poly_pitman, regression_variance, variance_sweep
from pitmanlab.rng import SeededStream

PM = {"family": "lattice", "params": {"points": [-1, 1], "probs": [0.5, 0.5]}}
PM_SKEW = {"family": "lattice", "params": {"points": [-1, 1], "probs": [0.25, 0.75]}}
G = {"family": "gaussian", "params": {}}
G2 = {"family": "gaussian", "params": {"sigma": 2}}
U = {"family": "uniform", "params": {"a": -1, "b": 1}}
L = {"family": "laplace", "params": {"scale": 1}}


@contextmanager
def criterion(capsys, number, title, limit):
    """Collect checks for one criterion, print its line, then assert."""
    failures = []
    start = time.perf_counter()
    yield failures
    elapsed = time.perf_counter() - start
    if elapsed > limit:
        failures.append(f"runtime {elapsed:.1f}s exceeds {limit:.0f}s")
    status = "FAIL" if failures else "PASS"
    with capsys.disabled():
        print(f"\n{status} criterion {number:2d} {title} ({elapsed:.1f}s, limit {limit:.0f}s)")
        for f in failures:
            print(f"    {f}")
    assert not failures, failures


def check(failures, ok, message):
    if not ok:
        failures.append(message)


def midrange_oracle(n):
    """var of (min + max)/2 for Uniform(-1, 1) by integrating the joint law of the extremes."""
    if n == 1:
        return 1 / 3
    dens = lambda v, u: n * (n - 1) * (v - u) ** (n - 2) / 2**n * ((u + v) / 2) ** 2
    val, _ = integrate.dblquad(dens, -1, 1, lambda u: u, lambda u: 1, epsabs=1e-13, epsrel=1e-12)
    return val


def test_criterion_01_gaussian_exactness(capsys):
    with criterion(capsys, 1, "Gaussian exactness", 30) as bad:
        spec = Gaussian(0.0, 1.0)
        gen = SeededStream(101).generator()
        for n in range(1, 9):
            for x in gen.standard_normal((5, n)):
                t = pitman_closed(spec, x)
                check(bad, t == math.fsum(x) / n or t == x.mean(), f"closed form differs from mean at n={n}")
                q = pitman_quadrature(spec, x)
                check(bad, abs(q - x.mean()) <= 1e-8, f"quadrature off by {abs(q - x.mean()):.2e} at n={n}")
            v = pitman_variance_mc(spec, n, 100_000, SeededStream(7).substream(n))
            check(bad, v.ci_low <= 1 / n <= v.ci_high, f"MC interval [{v.ci_low}, {v.ci_high}] misses 1/{n}")
            check(bad, n * closed_form_variance(spec, n) == pytest.approx(1.0, abs=1e-15), f"n var != 1 at n={n}")


def test_criterion_02_sample_size_monotonicity(capsys):
    with criterion(capsys, 2, "sample-size monotonicity on lattices", 60) as bad:
        sym = [DiscreteLattice((-1.0, 1.0), (0.5, 0.5)), DiscreteLattice((-1.0, 0.0, 1.0), (0.25, 0.5, 0.25))]
        skew = DiscreteLattice((0.0, 3.0), (0.75, 0.25))
        for lat in sym + [skew]:
            scaled = [n * pitman_variance_exact(lat, n).value for n in range(1, 7)]
            for n in range(1, 6):
                slack = scaled[n - 1] - scaled[n]
                check(bad, slack >= -1e-10, f"{lat.points} n={n}: slack {slack:.3e}")
                if lat is skew and n >= 2:
                    check(bad, slack > 1e-10, f"skew lattice not strict at n={n}: slack {slack:.3e}")


def test_criterion_03_uniform_oracle_chain(capsys):
    with criterion(capsys, 3, "Uniform oracle chain", 120) as bad:
        spec = Uniform(-1.0, 1.0)
        lattice = discretize(spec, 40)
        rows = []
        for n in range(1, 7):
            oracle = midrange_oracle(n)
            enum = pitman_variance_exact(lattice, n).value
            check(bad, abs(oracle - enum) <= 1e-3, f"n={n}: lattice {enum:.6f} vs oracle {oracle:.6f}")
            mc = pitman_variance_mc(spec, n, 100_000, SeededStream(303).substream(n))
            check(bad, abs(mc.value - oracle) <= 3 * mc.stderr, f"n={n}: MC {mc.value:.6f}+-{mc.stderr:.1e}")
            rows.append((n, oracle, enum, mc.value, published_variance(spec, n)))
        with capsys.disabled():
            print("\n    n   oracle     lattice    MC         published")
            for n, o, e, m, p in rows:
                print(f"    {n}   {o:.6f}   {e:.6f}   {m:.6f}   {p:.6f}")


def test_criterion_04_convolution_superadditivity(capsys):
    with criterion(capsys, 4, "convolution superadditivity", 180) as bad:
        count = 0
        for big_n in (1, 2, 3):
            for pops in itertools.combinations_with_replacement([PM, PM_SKEW], big_n):
                for m in range(1, big_n + 1):
                    (v,) = bench.run_experiment({"populations": list(pops), "n": 2, "m": m, "reps": 100},
                                                "convolution_superadditivity")
                    count += 1
                    check(bad, v.uncertainty == 0 and v.status == "pass", f"lattice N={big_n} m={m}: {v.status}")
        check(bad, count == 20, f"expected 20 lattice instances, ran {count}")
        for pops, n, m in (([G, G], 3, 1), ([G, G, G], 2, 2), ([G, G2], 2, 1), ([G, G2, G], 3, 2)):
            (v,) = bench.run_experiment({"populations": pops, "n": n, "m": m, "reps": 100},
                                        "convolution_superadditivity")
            check(bad, abs(v.slack) <= 1e-10, f"Gaussian instance slack {v.slack:.2e}")
        for pops in ([U, G], [U, L], [L, G]):
            (v,) = bench.run_experiment({"populations": pops, "n": 2, "m": 1, "reps": 100_000},
                                        "convolution_superadditivity")
            check(bad, v.uncertainty > 0 and v.slack >= -3 * v.uncertainty,
                  f"mixed instance slack {v.slack:.2e} +- {v.uncertainty:.1e}")


def test_criterion_05_combination(capsys):
    with criterion(capsys, 5, "combination superadditivity", 120) as bad:
        oracle = lambda n: 2 / ((n + 1) * (n + 2))
        check(bad, 1 / oracle(4) == pytest.approx(15) and 2 / oracle(2) == pytest.approx(12), "oracle arithmetic")
        cfg = {"populations": [U, U], "sizes": [2, 2], "m": 1, "reps": 100_000}
        (exact,) = bench.run_experiment(dict(cfg), "combine")
        check(bad, exact.lhs == pytest.approx(15.0) and exact.rhs == pytest.approx(12.0),
              f"exact sides {exact.lhs}, {exact.rhs}")
        check(bad, exact.status == "pass", "exact verdict")
        (sim,) = bench.run_experiment(dict(cfg, mode="mc"), "combine")
        check(bad, sim.status == "pass", f"MC verdict {sim.status}")
        check(bad, abs(sim.lhs - 15) <= 3 * sim.detail["lhs_stderr"], f"MC lhs {sim.lhs:.4f}")
        check(bad, abs(sim.rhs - 12) <= 3 * sim.detail["rhs_stderr"], f"MC rhs {sim.rhs:.4f}")


def test_criterion_06_variance_drop(capsys):
    with criterion(capsys, 6, "variance drop lemma", 60) as bad:
        rng = np.random.default_rng(2024)
        for i in range(200):
            style = ("random", "additive", "product")[i % 3]
            fs, w, dists = random_drop_instance(rng, 4, 4, style)
            v = variance_drop_check(fs, w, dists)
            check(bad, v.status == "pass", f"instance {i} ({style}) {v.status}")
            gap = v.detail["equality_gap"]
            decomposable = [decomposability_test(f, dists) for f in fs]
            if style == "additive":
                check(bad, abs(gap) < 1e-10 and all(decomposable), f"additive instance {i} gap {gap:.2e}")
            if style == "product":
                check(bad, gap > 0.1 and not any(decomposable), f"product instance {i} gap {gap:.2e}")
            equal = abs(gap) < 1e-9
            check(bad, equality_predicted(fs, w, dists, tol=1e-9) == equal,
                  f"instance {i}: equality condition disagrees with gap {gap:.2e}")
            if len(fs[0].subset) < len(dists):
                check(bad, all(decomposable) == equal, f"instance {i}: decomposability disagrees with gap {gap:.2e}")


def test_criterion_07_polynomial_pitman(capsys):
    with criterion(capsys, 7, "polynomial Pitman", 120) as bad:
        families = [Gaussian(0.0, 1.5), Uniform(-1.0, 1.0), Exponential(1.0), Laplace(0.7),
                    DiscreteLattice((0.0, 3.0), (0.75, 0.25))]
        for spec in families:
            mt = moment_table(spec, 2)
            s2 = float(mt.central()[2])
            for n in range(2, 7):
                v = fit_poly_pitman(mt, n, 1).variance
                check(bad, abs(v - s2 / n) <= 1e-12 * s2, f"{spec} n={n}: k=1 variance {v}")
        for k in (1, 2, 3):
            for n in range(2, 7):
                v = fit_poly_pitman(moment_table(Gaussian(), 2 * k), n, k).variance
                check(bad, abs(v - 1 / n) <= 1e-12, f"Gaussian k={k} n={n}: {v}")
        exp4 = moment_table(Exponential(1.0), 4)
        gap = 0.5 - fit_poly_pitman(exp4, 2, 2).variance
        check(bad, gap > 0.01, f"Exponential gain {gap}")
        sweep = variance_sweep(exp4, 2, range(2, 7))
        check(bad, all(d >= -1e-10 for _, d in sweep.steps()), f"sweep steps {sweep.steps()}")
        for spec, n, k in ((Exponential(1.0), 2, 2), (Exponential(1.0), 3, 2), (Uniform(-1.0, 1.0), 3, 3),
                           (Laplace(1.0), 2, 3), (Exponential(2.0), 4, 2)):
            exact = fit_poly_pitman(moment_table(spec, 2 * k), n, k).variance
            approx = regression_variance(spec, n, k, log2_draws=20, stream=SeededStream(77))
            check(bad, abs(approx - exact) <= 1e-3 * exact, f"{spec} n={n} k={k}: {approx} vs {exact}")


def test_criterion_08_lambda_monotonicity(capsys):
    with criterion(capsys, 8, "lambda monotonicity", 180) as bad:
        grid = [0.25, 0.5, 1, 2]
        vs = bench.run_experiment({"populations": [U], "noise": G, "n": 2, "lambda_grid": grid, "reps": 100_000},
                                  "lambda_monotonicity")
        check(bad, len(vs) == 3, f"expected 3 steps, got {len(vs)}")
        check(bad, all(v.status == "pass" for v in vs), f"statuses {[v.status for v in vs]}")
        vs = bench.run_experiment({"populations": [G], "noise": G, "n": 2, "lambda_grid": grid, "reps": 100},
                                  "lambda_monotonicity")
        values = [vs[0].rhs] + [v.lhs for v in vs]
        for lam, value in zip(grid, values):
            check(bad, abs(value - (1 + lam**2) / 2) <= 1e-3, f"lambda={lam}: {value}")


def test_criterion_09_multivariate(capsys):
    with criterion(capsys, 9, "multivariate Loewner monotonicity", 60) as bad:
        gauss = ProductMultivariate((Gaussian(0.0, 1.0), Gaussian(0.0, 2.0)))
        sigma = np.diag([1.0, 4.0])
        for n in (1, 2, 3):
            nv = n * np.asarray(covariance_exact(gauss, n).value)
            check(bad, np.abs(nv - sigma).max() <= 1e-10, f"Gaussian n={n}: n V_n = {nv.tolist()}")
        g = {"family": "product", "params": {}, "children": [G, G2]}
        vs = bench.run_experiment({"populations": [g], "n_values": [1, 2, 3], "n": 2, "reps": 100},
                                  "multivariate_monotonicity")
        check(bad, all(abs(v.slack) <= 1e-10 for v in vs), "Gaussian verdict slack")
        lat = {"family": "product", "params": {}, "children": [PM, PM]}
        vs = bench.run_experiment({"populations": [lat], "n_values": [1, 2, 3, 4], "n": 2, "reps": 100},
                                  "multivariate_monotonicity")
        check(bad, len(vs) == 3, f"expected 3 lattice steps, got {len(vs)}")
        check(bad, all(v.slack >= -1e-10 and v.uncertainty == 0 for v in vs), f"slacks {[v.slack for v in vs]}")


def test_criterion_10_fisher(capsys):
    with criterion(capsys, 10, "Fisher counterparts", 30) as bad:
        g3 = {"family": "gaussian", "params": {"sigma": 3}}
        conv = [v for v in bench.run_experiment({"populations": [G2, g3], "reps": 100}, "fisher_counterparts")
                if v.name == "fisher_convolution"]
        check(bad, len(conv) == 1 and conv[0].slack == pytest.approx(0.0, abs=1e-12), "Gaussian convolution equality")
        for g1, g2 in ((1.0, 1.0), (0.5, 2.0), (3.0, 0.25)):
            pops = [{"family": "cauchy", "params": {"gamma": g1}}, {"family": "cauchy", "params": {"gamma": g2}}]
            (v,) = [v for v in bench.run_experiment({"populations": pops, "reps": 100}, "fisher_counterparts")
                    if v.name == "fisher_convolution"]
            check(bad, v.status == "pass" and abs(v.slack - 4 * g1 * g2) <= 1e-10 * (1 + v.slack),
                  f"Cauchy {g1},{g2}: slack {v.slack}")
        for b in (0.5, 1.0, 2.0):
            info = fisher_information(Laplace(b))
            check(bad, abs(info - 1 / b**2) <= 1e-6, f"Laplace b={b}: {info}")


def test_criterion_11_dyadic(capsys):
    with criterion(capsys, 11, "dyadic strong components", 5) as bad:
        x, y, ok = bench.dyadic_batch(16, 10_000, SeededStream(11))
        check(bad, bool(ok.all()), f"{int((~ok).sum())} draws failed to reconstruct")
        check(bad, len(ok) == 10_000, "draw count")


def test_criterion_12_reproducibility(capsys, tmp_path, monkeypatch):
    with criterion(capsys, 12, "byte-identical reports across worker counts", 120) as bad:
        import json

        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"experiment": "convolution_superadditivity", "populations": [U, L],
                                   "n": 2, "m": 1, "reps": 5000}))
        outputs = []
        for workers in ("1", "2", "5"):
            monkeypatch.setenv("PITMANLAB_WORKERS", workers)
            target = tmp_path / f"w{workers}.csv"
            code = cli_run(["verify", "--config", str(cfg), "--seed", "12345", "--output", str(target)])
            check(bad, code == 0, f"exit code {code} with {workers} workers")
            outputs.append(target.read_bytes())
        check(bad, len(set(outputs)) == 1, "reports differ across worker counts")
