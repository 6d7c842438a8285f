"""
Command-line interface: run, accept, sweep

Exit codes: 0 success, 1 config error (or failed acceptance), 2 numerical divergence.
"""

import logging
import sys
from pathlib import Path
from typing import Optional, Tuple

import click

from src.cli.acceptance import run_acceptance
from src.cli.runner import execute_run
from src.cli.sweep import ScenarioSweep
from src.config.scenario_config import resolve_config_arg
from src.errors import BudgetTooSmall, ConfigError, NonFiniteState, NotHurwitz, StepMisaligned

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2

CONFIG_ERRORS = (ConfigError, BudgetTooSmall, NotHurwitz, StepMisaligned, ValueError)


def _config_failure(e: Exception) -> int:
    click.echo(f"❌ Config error: {e}", err=True)
    return EXIT_CONFIG


@click.group()
@click.version_option(version="1.0.0")
def cli():
    """Remote output tracking over a finite-capacity channel"""


@cli.command()
@click.option("--config", "config_path", required=True, help="Scenario YAML, or scenario1 / scenario2")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Artifact directory (overrides output.dir)")
@click.option("--seed", type=click.IntRange(min=0), help="Seed for the M(T) estimate (overrides expansion.seed)")
def run(config_path: str, out_dir: Optional[str], seed: Optional[int]):
    """Simulate one scenario; write trajectory CSV, frame log and metrics.json"""
    try:
        cfg = resolve_config_arg(config_path)
        target = Path(out_dir) if out_dir else Path(cfg.output.dir)
        outcome = execute_run(cfg, target, seed=seed)
    except NonFiniteState as e:
        click.echo(f"❌ Closed loop diverged: {e}", err=True)
        sys.exit(EXIT_DIVERGED)
    except CONFIG_ERRORS as e:
        sys.exit(_config_failure(e))

    m = outcome.metrics
    click.echo(f"📊 {cfg.name}")
    click.echo(f"   tail tracking error : {m['tail_tracking_error']:.4e} (threshold {m['tracking_threshold']})")
    click.echo(f"   tail decoder error  : {m['tail_decoder_error']:.4e} (threshold {m['decoder_threshold']})")
    click.echo(f"   max state norm      : {m['max_state_norm']:.4g}")
    click.echo(f"   L-decay ratio       : {m['zoom_ratio']:.6f}")
    click.echo(f"   M(T)                : {m['M_T']:.6f}{' (forced)' if m['M_T_forced'] else ''}")
    click.echo(f"   rate condition      : {m['rate_condition']}")
    for path in outcome.paths.values():
        click.echo(f"💾 {path}")
    sys.exit(EXIT_OK)


@cli.command()
@click.option("--config", "config_paths", multiple=True, help="Scenario configs to check (default: both built-ins)")
@click.option("--seed", type=click.IntRange(min=0), help="Seed for the M(T) estimates")
@click.option("--scenarios-only", is_flag=True, help="Skip the property suites")
def accept(config_paths: Tuple[str, ...], seed: Optional[int], scenarios_only: bool):
    """Run the acceptance suite and print the report"""
    configs = None
    if config_paths:
        try:
            loaded = [resolve_config_arg(p) for p in config_paths]
        except ConfigError as e:
            sys.exit(_config_failure(e))
        configs = {cfg.name: cfg for cfg in loaded}
    report = run_acceptance(configs, properties=not scenarios_only, seed=seed)
    click.echo(report.render())
    sys.exit(EXIT_OK if report.passed else EXIT_CONFIG)


@cli.command()
@click.option("--config", "config_path", required=True, help="Scenario YAML, or scenario1 / scenario2")
@click.option("--grid", "grid", multiple=True, help="key=v1,v2,... (repeatable); linked keys as T/N_b=0.15/2,0.5/4")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Sweep directory (overrides output.dir)")
@click.option("--seed", type=click.IntRange(min=0), help="Seed for the M(T) estimates")
def sweep(config_path: str, grid: Tuple[str, ...], out_dir: Optional[str], seed: Optional[int]):
    """Run a scenario over a parameter grid and write one merged table"""
    try:
        cfg = resolve_config_arg(config_path)
        target = Path(out_dir) if out_dir else Path(cfg.output.dir)
        runner = ScenarioSweep(cfg, grid, out_dir=target, seed=seed)
    except ConfigError as e:
        sys.exit(_config_failure(e))

    rows = runner.run()
    table = runner.write_table(rows, target / cfg.output.sweep)
    click.echo(f"📊 {len(rows)} grid point(s), {sum(1 for r in rows if r.metrics.get('passed'))} within thresholds")
    click.echo(f"💾 {table}")
    sys.exit(EXIT_OK)


def main():
    cli()
