from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
from pydantic import ValidationError

from .config import configure_logging
from .equilibrium import equilibrium_q
from .errors import AltqError
from .experiments import DEFAULT_GRIDS, parse_grid, run_sweep, write_csv
from .model import load_params, strategy_for, validate
from .reports import solve_params
from .schemas import SimConfig, SolveMethod, SweepFamily, SweepSpec
from .simulator import simulate
from .steady_state import to_frame

CONFIG = click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="JSON parameter document (lambda, mu, theta, zeta, R, C, fe, fs, r).",
)
METHOD = click.option(
    "--method",
    type=click.Choice([m.value for m in SolveMethod]),
    default=SolveMethod.QBD.value,
    show_default=True,
)


def _exit_codes(command):
    """Map validation errors to exit 2 and numerical failures to exit 3."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"invalid parameters: {exc}", err=True)
            sys.exit(2)
        except AltqError as exc:
            click.echo(f"{type(exc).__name__}: {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


@click.group()
@click.option("--log-level", default=None, help="Overrides ALTQ_LOG_LEVEL.")
def cli(log_level: str | None) -> None:
    """Equilibrium analysis of a queue with alternating information periods."""
    configure_logging(log_level)


@cli.command()
@CONFIG
@METHOD
@click.option(
    "--dump-stationary",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Write the stationary vector at q_e as CSV (n, p0, p1).",
)
@_exit_codes
def solve(config_path: Path, method: str, dump_stationary: Path | None) -> None:
    report, ss = solve_params(load_params(config_path), method)
    if dump_stationary is not None:
        to_frame(ss).to_csv(dump_stationary, index=False, float_format="%.17g", lineterminator="\n")
    click.echo(report.model_dump_json(by_alias=True, indent=2))


@cli.command()
@click.option("--family", type=click.Choice([f.value for f in SweepFamily]), required=True)
@CONFIG
@click.option("--grid", default=None, help='"a:b:step" (inclusive) or "v1,v2,...".')
@click.option("--B", "cycle", type=float, default=None, help="Mean information cycle (gamma family).")
@click.option("--zeta", type=float, default=None, help="Observable-period end rate (theta family).")
@click.option("--gamma", type=float, default=None, help="Observable time fraction (cycle family).")
@click.option("--total-fee", type=float, default=None, help="f_e + f_s (feesplit family).")
@click.option("--refund-ratio", type=float, default=None, help="r / f_e (feesplit family).")
@METHOD
@click.option("--out", default="-", show_default=True, help="CSV path, or - for stdout.")
@_exit_codes
def sweep(
    family: str,
    config_path: Path,
    grid: str | None,
    cycle: float | None,
    zeta: float | None,
    gamma: float | None,
    total_fee: float | None,
    refund_ratio: float | None,
    method: str,
    out: str,
) -> None:
    family = SweepFamily(family)
    grid = grid or DEFAULT_GRIDS.get(family)
    if grid is None:
        raise click.UsageError(f"--grid is required for the {family.value} family")
    spec = SweepSpec(
        family=family,
        base=load_params(config_path),
        grid=parse_grid(grid),
        cycle=cycle,
        zeta=zeta,
        gamma=gamma,
        total_fee=total_fee,
        refund_ratio=refund_ratio,
    )
    rows = run_sweep(spec, method)
    if out == "-":
        write_csv(rows, sys.stdout)
    else:
        write_csv(rows, Path(out))


@cli.command(name="simulate")
@CONFIG
@click.option("--q", type=float, default=None, help="Hidden-period joining probability (default: q_e).")
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--events", type=int, default=1_000_000, show_default=True)
@click.option("--reps", type=int, default=20, show_default=True)
@click.option("--warmup", type=float, default=0.1, show_default=True)
@_exit_codes
def simulate_command(config_path: Path, q: float | None, seed: int, events: int, reps: int, warmup: float) -> None:
    params = validate(load_params(config_path))
    if q is None:
        q = equilibrium_q(params).q_e
    config = SimConfig(seed=seed, events=events, replications=reps, warmup_fraction=warmup)
    estimates = simulate(params, strategy_for(params, q), config)
    click.echo(estimates.model_dump_json(indent=2))


def main() -> None:
    cli(prog_name="altq")
