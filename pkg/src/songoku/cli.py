"""Command-line entry point: run one experiment, write artifacts to a directory.

Exit status is 0 on success; any failure prints a machine-readable JSON error
object to stderr and exits nonzero.
"""
from __future__ import annotations

import json
import sys

import click

from .config import EXPERIMENTS, ConfigError, defaults, emit_config, parse_config
from .experiments import run_experiment
from .sketch import SKETCH_MODES

_DEF = defaults()


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Key=value config file; flags override it.")
@click.option("--experiment", type=click.Choice(EXPERIMENTS), default=None,
              help=f"Experiment to run [default: {_DEF['experiment']}].")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out",
              show_default=True, help="Output directory for run.csv / summary.json.")
@click.option("--seed", type=int, default=None,
              help=f"RNG seed [default: {_DEF['seed']}].")
@click.option("--K", "K", type=int, default=None,
              help=f"Number of tasks [default: {_DEF['K']}].")
@click.option("--d", "d", type=int, default=None,
              help=f"Parameter dimension [default: {_DEF['d']}].")
@click.option("--R", "R", type=int, default=None,
              help=f"Refresh period in steps [default: {_DEF['R']}].")
@click.option("--tau-star", type=float, default=None,
              help=f"Steady-state conflict threshold [default: {_DEF['tau_star']}].")
@click.option("--beta", type=float, default=None,
              help=f"EMA decay for gradient statistics [default: {_DEF['beta']}].")
@click.option("--f-min", type=int, default=None,
              help=f"Minimum per-cycle appearances [default: {_DEF['f_min']}].")
@click.option("--steps", type=int, default=None,
              help=f"Total scheduler steps [default: {_DEF['steps']}].")
@click.option("--repeats", type=int, default=None,
              help=f"Timing repeats for bench [default: {_DEF['repeats']}].")
@click.option("--sketch-mode", type=click.Choice(SKETCH_MODES), default=None,
              help=f"Interference estimator backend [default: {_DEF['sketch_mode']}].")
def main(config_path, experiment, out_dir, seed, K, d, R, tau_star, beta,
         f_min, steps, repeats, sketch_mode):
    """Run a scheduling experiment and write its artifacts under --out."""
    overrides = {
        "experiment": experiment,
        "seed": seed,
        "K": K,
        "d": d,
        "R": R,
        "tau_star": tau_star,
        "beta": beta,
        "f_min": f_min,
        "steps": steps,
        "repeats": repeats,
        "sketch_mode": sketch_mode,
    }
    try:
        cfg = parse_config(config_path, overrides)
        summary = run_experiment(cfg["experiment"], cfg, out_dir)
    except ConfigError as exc:
        _fail("config_error", str(exc), field=exc.field)
    except Exception as exc:   # noqa: BLE001 - CLI boundary, report and exit
        _fail(type(exc).__name__, str(exc))
    click.echo(f"experiment={cfg['experiment']} out={out_dir}")
    click.echo(f"content_hash={summary['content_hash']}")
    sys.exit(0)


def _fail(kind: str, message: str, **extra) -> None:
    payload = {"error": kind, "message": message}
    payload.update(extra)
    click.echo(json.dumps(payload, sort_keys=True), err=True)
    sys.exit(2)


def emit_default_config() -> str:
    """The default configuration in the file format parse_config accepts."""
    return emit_config(defaults())


if __name__ == "__main__":
    main()
