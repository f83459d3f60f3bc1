"""
Experiment commands for the FairRec marketing-bias lab
Handles `train`, `evaluate` and `sweep` (hyperparameter selection plus the model comparison)
"""

import logging
import os
from dataclasses import replace

import click
from flask import current_app

from commands import command_run, common_options, handle_command_errors, load_dataset, load_experiment
from models.recommenders import DISPLAY_NAMES, MODEL_KINDS
from models.training import LOSS_VARIANTS, VARIANT_DISPLAY, LossConfig
from services.data_service import DataService
from services.evaluation_service import EvaluationService
from services.recommender_service import RecommenderService
from services.report_service import ReportService
from services.training_service import TrainingService
from utils.exceptions import EmptyAfterFiltering, InputError
from utils.sorting_helpers import SortingHelpers

logger = logging.getLogger(__name__)

MODELS_DIR = 'models'
SWEEP_DIR = 'sweep'
SWEEP_COLUMNS = ['variant', 'kappa', 'lambda_l2', 'alpha', 'validation_mse', 'validation_f', 'validation_ndcg',
                 'validation_kl', 'selected_epoch']


def model_options(func):
    func = click.option('--variant', type=click.Choice(LOSS_VARIANTS), default=None,
                        help='Loss variant (overrides [loss] variant).')(func)
    func = click.option('--kind', type=click.Choice(MODEL_KINDS), default=None,
                        help='Model kind (overrides [model] kind).')(func)
    return func


def apply_model_options(cfg, kind=None, variant=None):
    changes = {}
    if kind is not None:
        changes['model_kind'] = kind
    if variant is not None:
        changes['loss'] = replace(cfg.loss, variant=variant)
    return replace(cfg, **changes) if changes else cfg


def model_path(out_dir, model_name):
    return os.path.join(out_dir, MODELS_DIR, f'{ReportService.slug(model_name)}.frm')


def training_segment_order(ds, split):
    """Segments by descending training-set market size"""
    try:
        counts = DataService.contingency_table(ds, split.train).counts
    except EmptyAfterFiltering:
        return None
    return SortingHelpers.sort_segments_by_size(counts)


def save_trained(cfg, model, model_name, loss):
    path = model_path(cfg.out_dir, model_name)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    RecommenderService.save_model(model, path, seed=cfg.train.seed, config_hash=cfg.fingerprint(), extra={
        'model_name': model_name,
        'loss': loss.to_dict(),
        'train': cfg.train.to_dict(),
        'neighbors': cfg.neighbors,
    })
    return path


def evaluate_and_write(cfg, ds, split, model, model_name, model_config, order):
    report = EvaluationService.evaluate_model(
        model, ds, split, model_name,
        k=cfg.k,
        reference=cfg.reference,
        threshold=cfg.positive_threshold,
        seed=cfg.train.seed,
        model_config=model_config,
    )
    ReportService.write_metrics_report(report, cfg.out_dir, order)
    return report


@click.command('train')
@common_options
@model_options
@handle_command_errors
def train(config_path, seed, out, dataset, k, kind, variant):
    """Fit one model on the training split and save it under <out>/models"""
    cfg = apply_model_options(load_experiment(config_path, seed, out, dataset, k), kind, variant)
    name = cfg.display_name
    with command_run('train', cfg, model_name=name) as run:
        ds = load_dataset(cfg)
        run.dataset_name = ds.name
        split = DataService.split_leave_latest(ds)
        path = model_path(cfg.out_dir, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        model, history = TrainingService.train(
            ds, split, cfg.model_kind, cfg.loss, cfg.train, cfg.neighbors,
            history_path=path[:-len('.frm')] + '.history.jsonl',
        )
        save_trained(cfg, model, name, cfg.loss)

    click.echo(f"{name}: epoch {history.selected_epoch}, validation MSE "
               f"{history.best_validation_mse():.4f} -> {path}")


@click.command('evaluate')
@common_options
@model_options
@click.option('--model', 'model_file', type=click.Path(dir_okay=False), default=None,
              help='Model file (default <out>/models/<model>.frm).')
@handle_command_errors
def evaluate(config_path, seed, out, dataset, k, kind, variant, model_file):
    """Score a trained model on the test split and write its metrics report"""
    cfg = apply_model_options(load_experiment(config_path, seed, out, dataset, k), kind, variant)
    path = model_file or model_path(cfg.out_dir, cfg.display_name)
    with command_run('evaluate', cfg, model_name=cfg.display_name) as run:
        model, header = RecommenderService.load_model(path)
        ds = load_dataset(cfg)
        run.dataset_name = ds.name
        if (header['n_users'], header['n_items']) != (ds.n_users, ds.n_items):
            raise InputError(
                f"{path} was trained on {header['n_users']} users x {header['n_items']} items; "
                f"{ds.name} has {ds.n_users} x {ds.n_items}"
            )
        name = (header.get('extra') or {}).get('model_name') or cfg.display_name
        run.model_name = name
        split = DataService.split_leave_latest(ds)
        report = evaluate_and_write(cfg, ds, split, model, name, header.get('extra') or {},
                                    training_segment_order(ds, split))

    row = report.table_row()
    click.echo('\t'.join(f"{column}={row[column]}" for column in ('model', 'MSE', 'F-stat', 'NDCG', 'KL')))


@click.command('sweep')
@common_options
@handle_command_errors
def sweep(config_path, seed, out, dataset, k):
    """Select hyperparameters per variant and compare every model on the test split"""
    cfg = load_experiment(config_path, seed, out, dataset, k)
    with command_run('sweep', cfg, model_name='sweep') as run:
        threads = max(1, int(current_app.config['FAIRREC_THREADS']))
        ds = load_dataset(cfg)
        run.dataset_name = ds.name
        split = DataService.split_leave_latest(ds)
        order = training_segment_order(ds, split)
        sweep_dir = os.path.join(cfg.out_dir, SWEEP_DIR)
        os.makedirs(sweep_dir, exist_ok=True)

        reports = []
        selection = {}
        trials = []

        def finish(model, name, loss):
            save_trained(cfg, model, name, loss)
            model_config = {'kind': model.kind, 'loss': loss.to_dict(), 'train': cfg.train.to_dict()}
            reports.append(evaluate_and_write(cfg, ds, split, model, name, model_config, order))

        for kind in ('item_cf', 'user_cf'):
            logger.info("Fitting %s", DISPLAY_NAMES[kind])
            model, _ = TrainingService.train(ds, split, kind, LossConfig(variant='plain'), cfg.train, cfg.neighbors)
            finish(model, DISPLAY_NAMES[kind], LossConfig(variant='plain'))

        for kind in ('poisson_mf', 'mf'):
            logger.info("Selecting λ for %s", DISPLAY_NAMES[kind])
            trial = TrainingService.select_lambda(ds, split, kind, cfg.train, cfg.lambda_grid, threads)
            selection[DISPLAY_NAMES[kind]] = trial.to_record()
            finish(trial.params, DISPLAY_NAMES[kind], trial.loss)

        for variant in cfg.sweep_variants:
            name = DISPLAY_NAMES['mf'] + VARIANT_DISPLAY[variant]
            logger.info("Grid search for %s", name)
            result = TrainingService.grid_search(
                ds, split, cfg.train,
                variant=variant,
                lambda_grid=cfg.lambda_grid,
                alpha_grid=cfg.alpha_grid,
                kappa_grid=cfg.kappa_grid,
                objective=cfg.objective,
                threads=threads,
                k=cfg.k,
                threshold=cfg.positive_threshold,
            )
            trials.extend(trial.to_record() for trial in result.trials)
            selection[name] = {
                'objective': result.objective,
                'selected': result.selected.to_record(),
                'per_kappa': [result.per_kappa[tuple(kappa)].to_record() for kappa in cfg.kappa_grid],
            }
            finish(result.selected.params, name, result.selected.loss)

        ReportService.write_tsv(os.path.join(sweep_dir, 'sweep_results.tsv'), SWEEP_COLUMNS, trials)
        ReportService.write_json(os.path.join(sweep_dir, 'selection.json'), selection)
        comparison = ReportService.write_comparison(os.path.join(cfg.out_dir, 'comparison.tsv'), reports)

    click.echo(f"{len(reports)} models compared -> {comparison}")
