"""
Command-line interface for the FairRec marketing-bias lab
Verbs: analyze | synth | train | evaluate | sweep | report
"""

import logging
import os
from contextlib import contextmanager
from functools import wraps

import click

from app import configure_logging, create_app
from config import Config, ExperimentConfig
from models.run import ExperimentRun
from services.data_service import DataService
from services.synthetic_service import SyntheticService
from utils.db_helpers import safe_add_and_commit, safe_update_and_commit
from utils.exceptions import FairRecError

logger = logging.getLogger(__name__)


def handle_command_errors(func):
    """Turn lab errors into a diagnostic on stderr and the documented exit code"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except FairRecError as e:
            click.echo(f"error: {e}", err=True)
            raise click.exceptions.Exit(e.exit_code)
    return wrapper


def common_options(func):
    """--config, --seed, --out, --dataset, --k"""
    options = [
        click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
                     help='Experiment file (INI sections).'),
        click.option('--seed', type=int, default=None, help='Seed for every random draw.'),
        click.option('--out', type=click.Path(file_okay=False), default=None, help='Output directory.'),
        click.option('--dataset', type=click.Path(dir_okay=False), default=None,
                     help='Interaction CSV or .frd dataset cache.'),
        click.option('--k', 'k', type=int, default=None, help='Recommendation list length.'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def load_experiment(config_path, seed=None, out=None, dataset=None, k=None):
    """Experiment file values with command-line flags on top"""
    return ExperimentConfig.load(config_path).with_overrides(seed=seed, out=out, dataset=dataset, k=k)


def load_dataset(cfg):
    """Dataset named by the config, or the configured synthetic marketplace"""
    if cfg.dataset_path is None:
        logger.info("No dataset given; generating the configured synthetic marketplace")
        return SyntheticService.generate(cfg.synth)
    return DataService.load(cfg.dataset_path, cfg.schema, cfg.malformed_tolerance, cfg.dataset_name)


@contextmanager
def command_run(command, cfg, model_name=None):
    """App context plus a run-manifest row that records the outcome"""
    out_dir = os.path.abspath(cfg.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    app = create_app({'SQLALCHEMY_DATABASE_URI': f"sqlite:///{os.path.join(out_dir, 'runs.db')}"})
    with app.app_context():
        run = ExperimentRun(
            command=command,
            model_name=model_name,
            config_hash=cfg.fingerprint(),
            seed=cfg.train.seed,
            output_path=out_dir,
        )
        safe_add_and_commit(run)
        try:
            yield run
        except FairRecError as e:
            run.finish(e.exit_code, str(e))
            safe_update_and_commit()
            raise
        run.finish(0)
        safe_update_and_commit()


@click.group()
@click.option('--log-level', default=None, help='Logging level (default from FAIRREC_LOG_LEVEL).')
def cli(log_level):
    """FairRec marketing-bias lab"""
    configure_logging((log_level or Config.LOG_LEVEL).upper())


from commands.analysis import analyze, synth  # noqa: E402
from commands.experiments import evaluate, sweep, train  # noqa: E402
from commands.reports import report  # noqa: E402

cli.add_command(analyze)
cli.add_command(synth)
cli.add_command(train)
cli.add_command(evaluate)
cli.add_command(sweep)
cli.add_command(report)
