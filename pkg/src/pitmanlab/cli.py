"""Command-line interface.

Exit codes: 0 when every verdict passes or is informational, 1 when any
verdict fails, 2 on usage or configuration errors.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import bench
from .dist import from_json, moment_table
from .errors import ConfigError, PitmanLabError
from .pitman import estimate as pitman_estimate
from .pitman import (
    VarianceEstimate,
    closed_form_variance,
    pitman_variance,
    pitman_variance_exact,
    pitman_variance_mc,
)
from .poly_pitman import variance_sweep
from .rng import DEFAULT_SEED, SeededStream
from .verdict import _jsonable

EXIT_FAIL = 1
EXIT_USAGE = 2


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_params(text: str | None) -> dict:
    """``a=-1,b=1`` -> ``{"a": -1, "b": 1}``; list values use ``;`` as in ``points=-1;1``."""
    out: dict = {}
    if not text:
        return out
    for item in text.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigError(f"parameter {item!r} is not of the form key=value", "/params")
        key, value = (s.strip() for s in item.split("=", 1))
        try:
            out[key] = [_number(v) for v in value.split(";") if v] if ";" in value else _number(value)
        except ValueError as exc:
            raise ConfigError(f"parameter {key!r} is not numeric", f"/params/{key}") from exc
    return out


def build_spec(family: str | None, params: str | None, spec: str | None):
    if spec:
        try:
            return from_json(spec)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"invalid population JSON: {exc}", "/population") from exc
    if not family:
        raise ConfigError("give --family (with --params) or --spec", "/family")
    try:
        return from_json({"family": family, "params": parse_params(params)})
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid population: {exc}", "/params") from exc


def _emit(text: str, output: str | None):
    if output:
        bench.write_atomic(output, text)
    else:
        click.echo(text, nl=False)


def _report_error(exc: Exception) -> int:
    pointer = getattr(exc, "pointer", "")
    where = f" (at {pointer})" if pointer else ""
    click.echo(f"error: {exc}{where}", err=True)
    return EXIT_USAGE


def _fmt(x) -> str:
    return f"{float(x):.15g}"


_family = click.option("--family", help="Population family, e.g. gaussian, uniform, lattice.")
_params = click.option("--params", help="Family parameters, e.g. a=-1,b=1 or points=-1;1,probs=0.5;0.5.")
_spec = click.option("--spec", help="Population as JSON (overrides --family/--params).")
_seed = click.option("--seed", type=int, default=None, help=f"Random seed (default {DEFAULT_SEED:#x}).")
_output = click.option("--output", "-o", type=click.Path(dir_okay=False), help="Write the report here.")
_format = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)


@click.group()
@click.version_option(package_name="artifact")
def cli():
    """Pitman location estimators and checks of their variance inequalities."""


@cli.command()
@_family
@_params
@_spec
@click.option("--sample", required=True, help='Comma-separated observations, e.g. "-0.5,0.9".')
def estimate(family, params, spec, sample):
    """Pitman estimate for one sample."""
    population = build_spec(family, params, spec)
    try:
        x = np.array([float(v) for v in sample.split(",") if v.strip()])
    except ValueError as exc:
        raise ConfigError(f"sample is not a list of numbers: {exc}", "/sample") from exc
    value = pitman_estimate(population, x)
    if np.ndim(value):
        click.echo(json.dumps([float(v) for v in value]))
    else:
        click.echo(_fmt(value))


@cli.command()
@_family
@_params
@_spec
@click.option("--n", "n", type=int, required=True, help="Sample size.")
@click.option("--reps", type=int, default=100_000, show_default=True, help="Monte Carlo replications.")
@click.option("--method", type=click.Choice(["auto", "exact", "mc"]), default="auto", show_default=True)
@_seed
@_output
def variance(family, params, spec, n, reps, method, seed, output):
    """Variance of the Pitman estimator at sample size n (JSON)."""
    population = build_spec(family, params, spec)
    stream = SeededStream(DEFAULT_SEED if seed is None else seed)
    if method == "mc":
        v = pitman_variance_mc(population, n, reps, stream)
    elif method == "exact":
        closed = closed_form_variance(population, n)
        if closed is not None:
            v = VarianceEstimate.exact(closed, method="closed_form")
        else:
            v = pitman_variance_exact(population, n)
    else:
        v = pitman_variance(population, n, reps, stream)
    _emit(json.dumps(_jsonable(v.to_json()), sort_keys=True) + "\n", output)


@cli.command()
@click.option("--experiment", help="Registered experiment name (overrides the config).")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON experiment config.")
@_seed
@click.option("--reps", type=int, default=None, help="Override the config's replications.")
@_output
@_format
def verify(experiment, config_path, seed, reps, output, fmt):
    """Run a named verification experiment and report its verdicts."""
    if config_path is None:
        if experiment is None:
            raise ConfigError("give --config and/or --experiment", "/experiment")
        raw: dict = {"experiment": experiment}
    else:
        try:
            with open(config_path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg} at line {exc.lineno}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object", "")
    if seed is not None:
        raw["seed"] = seed
    if reps is not None:
        raw["reps"] = reps
    cfg = bench.load_config(raw, experiment)
    verdicts = bench.run_experiment(cfg)
    _emit(bench.render(verdicts, fmt), output)
    counts = bench.summarize(verdicts)
    click.echo(
        f"{cfg.experiment}: {counts['pass']} pass, {counts['fail']} fail, {counts['indeterminate']} indeterminate",
        err=True,
    )
    if counts["fail"]:
        sys.exit(EXIT_FAIL)


@cli.command()
@_family
@_params
@_spec
@click.option("--k", "k", type=int, required=True, help="Polynomial degree.")
@click.option("--n", "n", type=int, required=True, help="Largest sample size (sweeps 2..n).")
@click.option("--kind", type=click.Choice(["residual_space", "central_moment_space"]), default="residual_space")
@_output
@_format
def sweep(family, params, spec, k, n, kind, output, fmt):
    """Variances of the degree-k polynomial Pitman estimator for n = 2..N."""
    population = build_spec(family, params, spec)
    if n < 2:
        raise ConfigError("n must be at least 2", "/n")
    mt = moment_table(population, max(2 * k, 2))
    result = variance_sweep(mt, k, range(2, n + 1), kind=kind)
    rows = [{"n": m, "variance": v, "n_variance": m * v} for m, v in result.points]
    if fmt == "json":
        text = json.dumps({"k": k, "kind": kind, "rows": rows}, indent=2, sort_keys=True) + "\n"
    else:
        text = "n,variance,n_variance\n" + "".join(
            f"{r['n']},{r['variance']!r},{r['n_variance']!r}\n" for r in rows
        )
    _emit(text, output)


@cli.command("list-experiments")
def list_experiments():
    """Names of the registered experiments."""
    for name in bench.experiment_names():
        click.echo(f"{name}\t{bench.REGISTRY[name].summary}")


def run(argv=None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    try:
        cli.main(args=argv, prog_name="pitmanlab", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except (PitmanLabError, ValueError) as exc:
        return _report_error(exc)
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
