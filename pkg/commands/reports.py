"""
Report command for the FairRec marketing-bias lab
"""

import os

import click

from commands import command_run, common_options, handle_command_errors, load_experiment
from services.report_service import ReportService


@click.command('report')
@common_options
@handle_command_errors
def report(config_path, seed, out, dataset, k):
    """Merge every metrics report under <out>/reports into report.json, report.tsv and report.xlsx"""
    cfg = load_experiment(config_path, seed, out, dataset, k)
    with command_run('report', cfg):
        rows = ReportService.consolidate(cfg.out_dir)

    click.echo(f"{len(rows)} rows -> {os.path.join(cfg.out_dir, 'report.tsv')}")
