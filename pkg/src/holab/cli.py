"""Command line front end: ``holab run``, ``holab validate``, ``holab presets``."""

from __future__ import annotations

import sys

import click

from .connections import CONNECTION_TAGS
from .errors import ParseError, SchemaError
from .metrics import METRIC_TAGS
from .runner import emit_csv, render_csv, run
from .scenario import P_PRESETS, TASK_TYPES, parse_scenario


def _load(path):
    try:
        return parse_scenario(path)
    except (ParseError, SchemaError) as exc:
        click.echo(f"invalid scenario: {exc}", err=True)
        sys.exit(1)
    except OSError as exc:
        click.echo(f"cannot read scenario: {exc}", err=True)
        sys.exit(1)


@click.group()
def main():
    """Geometric phases, holonomies, distances and speed limits for mixed states."""


@main.command("run")
@click.argument("scenario", type=click.Path(dir_okay=False))
@click.option("--out", "out", type=click.Path(dir_okay=False), default=None, help="CSV output path (default stdout).")
@click.option("--steps", type=click.IntRange(min=4), default=None, help="Override the grid step count.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for randomized restarts.")
def run_cmd(scenario, out, steps, seed):
    """Run every task of SCENARIO and write a CSV table."""
    scn = _load(scenario)
    outcome = run(scn, steps=steps, seed=seed)
    try:
        if out is None:
            click.echo(render_csv(outcome.table), nl=False)
        else:
            emit_csv(outcome.table, out)
    except OSError as exc:
        click.echo(f"cannot write output: {exc}", err=True)
        sys.exit(1)
    for row in outcome.table.rows:
        if row.get("error"):
            click.echo(f"{row.get('task')}: {row['error']}", err=True)
    sys.exit(outcome.exit_code)


@main.command("validate")
@click.argument("scenario", type=click.Path(dir_okay=False))
def validate_cmd(scenario):
    """Check SCENARIO against the schema."""
    scn = _load(scenario)
    click.echo(f"ok: dim {scn.dim}, {len(scn.tasks)} task(s), {scn.grid['steps']} steps")


@main.command("presets")
def presets_cmd():
    """List connection, metric and p-function presets."""
    click.echo("connections: " + ", ".join(CONNECTION_TAGS))
    click.echo("metrics: " + ", ".join(METRIC_TAGS))
    click.echo("p-functions: " + ", ".join(f"{k} (p = {v})" for k, v in P_PRESETS.items()))
    click.echo("tasks: " + ", ".join(TASK_TYPES))


if __name__ == "__main__":
    main()
