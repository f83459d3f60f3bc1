"""
Analysis commands for the FairRec marketing-bias lab
Handles `analyze` (observational study) and `synth` (synthetic marketplace)
"""

import os

import click

from commands import command_run, common_options, handle_command_errors, load_dataset, load_experiment
from models.statistics import format_p_value
from services.analysis_service import AnalysisService
from services.data_service import DataService
from services.synthetic_service import SyntheticService


@click.command('analyze')
@common_options
@handle_command_errors
def analyze(config_path, seed, out, dataset, k):
    """χ², ANOVA and segment statistics of a dataset"""
    cfg = load_experiment(config_path, seed, out, dataset, k)
    with command_run('analyze', cfg) as run:
        ds = load_dataset(cfg)
        run.dataset_name = ds.name
        record = AnalysisService.run(ds, cfg.out_dir, cfg.year_edges)

    if record['statistic'] is None:
        click.echo(f"{ds.name}: chi2 not computed ({record['note']}) n={record['n_reviews']}")
        return
    click.echo(f"{ds.name}: chi2={record['statistic']:.3f} dof={record['dof']} "
               f"p={format_p_value(record['p_value'])} n={record['n_reviews']}")


@click.command('synth')
@common_options
@handle_command_errors
def synth(config_path, seed, out, dataset, k):
    """Generate a synthetic marketplace as canonical CSV plus dataset cache"""
    cfg = load_experiment(config_path, seed, out, dataset, k)
    with command_run('synth', cfg) as run:
        ds = SyntheticService.generate(cfg.synth)
        run.dataset_name = ds.name
        csv_path = DataService.write_csv(ds, os.path.join(cfg.out_dir, f'{ds.name}.csv'))
        cache_path = DataService.save_dataset(ds, os.path.join(cfg.out_dir, f'{ds.name}.frd'))

    click.echo(f"{ds.n_interactions} interactions -> {csv_path}, {cache_path}")
