#!/usr/bin/env python3
"""
Command line entry point for the kinlim simulation suite.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 acceptance failure.
"""

import click

from kinlim import configure
from kinlim.controllers import (
    CheckController,
    PlotController,
    ProfileController,
    SimulationController,
    SweepController,
)
from kinlim.exceptions import KinlimError
from kinlim.run_config import RunConfig
from kinlim.views.base_view import BaseView


def _run_config(ctx):
    """Load the run configuration once per invocation; exit 2 when it is invalid."""
    obj = ctx.obj
    if 'run_config' not in obj:
        try:
            obj['run_config'] = RunConfig.load(obj['config_path'], obj['overrides'])
        except KinlimError as e:
            ctx.exit(BaseView('Config').render_error(e))
    return obj['run_config']


@click.group()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='TOML run configuration (defaults are used when omitted).')
@click.option('--set', 'overrides', multiple=True, metavar='BLOCK.KEY=VALUE',
              help='Override one configuration key; may be repeated.')
@click.option('--out', 'out', type=click.Path(file_okay=False), default=None,
              help='Root directory for run output.')
@click.option('--env', 'env', type=click.Choice(['development', 'production', 'testing']), default=None,
              help="Settings profile: 'development', 'production' or 'testing'.")
@click.pass_context
def cli(ctx, config_path, overrides, out, env):
    """Kinetic diffusion-limit simulation and verification suite."""
    ctx.ensure_object(dict)
    ctx.obj.update({
        'settings': configure(env),
        'config_path': config_path,
        'overrides': list(overrides),
        'out': out,
    })


@cli.command()
@click.option('--check', is_flag=True, help='Compare the profile against the independent oracles.')
@click.pass_context
def profile(ctx, check):
    """Compute the self-similar profile, its corrections and residuals."""
    controller = ProfileController(ctx.obj['settings'])
    ctx.exit(controller.build(_run_config(ctx), ctx.obj['out'], check))


@cli.command()
@click.option('--restart', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Continue from a checkpoint file.')
@click.pass_context
def simulate(ctx, restart):
    """Run the kinetic solver at a single epsilon."""
    controller = SimulationController(ctx.obj['settings'])
    ctx.exit(controller.simulate(_run_config(ctx), ctx.obj['out'], restart))


@cli.command()
@click.option('--jobs', type=click.IntRange(min=1), default=None,
              help='Number of kinetic runs executed in parallel.')
@click.option('--synthetic', is_flag=True, help='Fit injected power laws instead of running the solver.')
@click.option('--eta0', type=click.FloatRange(min=0.0, min_open=True), default=None,
              help='Half-width of the flow-induction region.')
@click.pass_context
def sweep(ctx, jobs, synthetic, eta0):
    """Run an epsilon sweep and evaluate the acceptance criteria."""
    settings = ctx.obj['settings']
    controller = SweepController(settings)
    ctx.exit(controller.sweep(_run_config(ctx), ctx.obj['out'], jobs or settings.DEFAULT_JOBS,
                              synthetic, eta0))


@cli.command()
@click.option('--full', is_flag=True, help='Use the full sample sizes instead of the fast ones.')
@click.pass_context
def check(ctx, full):
    """Run the collision, projection and closed-form self-checks."""
    controller = CheckController(ctx.obj['settings'])
    ctx.exit(controller.check(_run_config(ctx), full))


@cli.command()
@click.argument('run_dir', type=click.Path(file_okay=False))
@click.pass_context
def plot(ctx, run_dir):
    """Re-render the figures of an existing run directory."""
    controller = PlotController(ctx.obj['settings'])
    ctx.exit(controller.plot(run_dir))


if __name__ == '__main__':
    cli(obj={})
