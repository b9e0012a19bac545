"""Command line interface: one subcommand per experiment driver.

Failures print a single-line JSON error record to stderr and exit nonzero
(2 for configuration problems, 1 for runtime failures); successes print the
run summary as JSON on stdout.
"""

from __future__ import annotations

import json
import sys

import click

from . import __version__
from .config import load_config
from .errors import ConfigError
from .experiments import (
    run_estimate,
    run_forecast,
    run_regime_probe,
    run_scaling,
    run_simulate,
)


def _common(fn):
    fn = click.option("--provider", default=None,
                      type=click.Choice(["oracle", "empirical", "remote"]),
                      help="Override the provider kind from the config.")(fn)
    fn = click.option("--out", default=None, type=click.Path(file_okay=False),
                      help="Output directory (defaults to the config's out_dir).")(fn)
    fn = click.option("--seed", default=None, type=int,
                      help="Override the master seed from the config.")(fn)
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(dir_okay=False),
                      help="Path to the experiment config file.")(fn)
    return fn


def _fail(code: int, exc: BaseException) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(record), err=True)
    sys.exit(code)


def _run(runner, config_path, seed, out, provider):
    try:
        cfg = load_config(config_path, seed=seed, provider=provider)
        summary = runner(cfg, out_dir=out)
    except ConfigError as exc:
        _fail(2, exc)
    except Exception as exc:  # noqa: BLE001 - process boundary, report and exit
        _fail(1, exc)
    click.echo(json.dumps(summary, sort_keys=True))


@click.group()
@click.version_option(__version__)
def main():
    """Discrete transition-kernel experiments for optimizer trajectories."""


@main.command()
@_common
def simulate(config_path, seed, out, provider):
    """Run the configured optimizer and store raw trajectories."""
    _run(run_simulate, config_path, seed, out, provider)


@main.command()
@_common
def estimate(config_path, seed, out, provider):
    """Estimate the block transition kernel from simulated runs."""
    _run(run_estimate, config_path, seed, out, provider)


@main.command()
@_common
def forecast(config_path, seed, out, provider):
    """Simulate, estimate, and forecast from unseen initial points."""
    _run(run_forecast, config_path, seed, out, provider)


@main.command(name="regime-probe")
@_common
def regime_probe(config_path, seed, out, provider):
    """Contrast predicted next-state laws across sample-count regimes."""
    _run(run_regime_probe, config_path, seed, out, provider)


@main.command()
@_common
def scaling(config_path, seed, out, provider):
    """Estimation error versus context length for two-state chains."""
    _run(run_scaling, config_path, seed, out, provider)


if __name__ == "__main__":
    main()
