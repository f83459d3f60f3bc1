"""
Configuration settings for the FairRec marketing-bias lab
Config holds application defaults; ExperimentConfig is read from an INI-style experiment file
"""

import configparser
import os
from dataclasses import dataclass, field, replace

from models.dataset import ColumnSchema
from models.recommenders import DISPLAY_NAMES, MODEL_KINDS
from models.synthetic import SynthConfig
from models.training import VARIANT_DISPLAY, LossConfig, TrainConfig, config_hash
from utils.exceptions import InputError, InvalidConfig
from utils.validators import (
    validate_choice, validate_kappa, validate_nonnegative, validate_positive_int,
    validate_year_edges,
)


class Config:
    """Base configuration class"""

    # Logging
    LOG_LEVEL = os.environ.get('FAIRREC_LOG_LEVEL') or 'INFO'

    # Run manifest database (commands point this at <out>/runs.db)
    SQLALCHEMY_DATABASE_URI = os.environ.get('DATABASE_URL') or 'sqlite:///fairrec_runs.db'
    SQLALCHEMY_TRACK_MODIFICATIONS = False

    # Sweep parallelism cap
    FAIRREC_THREADS = int(os.environ.get('FAIRREC_THREADS') or 1)

    # Training protocol defaults
    LEARNING_RATE = 0.001
    BATCH_SIZE = 512
    EMBEDDING_DIM = 10
    MAX_EPOCHS = 200
    PATIENCE = 5

    # Evaluation defaults
    TOP_K = 10
    POSITIVE_THRESHOLD = 3.0
    NEIGHBORS = 50

    # Analysis defaults: first years of the buckets after "<=2014"
    YEAR_EDGES = (2015, 2016, 2017)
    MALFORMED_TOLERANCE = 0.01

    # Sweep grids
    LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0)
    ALPHA_GRID = (0.5, 1.0, 5.0, 10.0)
    KAPPA_GRID = ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 1, 1))


SWEEP_VARIANTS = ('corr_error', 'corr_value', 'reweighted')


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one command needs; defaults give the standard protocol"""
    dataset_path: str = None
    dataset_name: str = None
    schema: ColumnSchema = field(default_factory=ColumnSchema)
    synth: SynthConfig = field(default_factory=SynthConfig)
    model_kind: str = 'mf'
    model_name: str = None
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    k: int = Config.TOP_K
    reference: str = 'positives'
    positive_threshold: float = Config.POSITIVE_THRESHOLD
    neighbors: int = Config.NEIGHBORS
    year_edges: tuple = Config.YEAR_EDGES
    malformed_tolerance: float = Config.MALFORMED_TOLERANCE
    lambda_grid: tuple = Config.LAMBDA_GRID
    alpha_grid: tuple = Config.ALPHA_GRID
    kappa_grid: tuple = Config.KAPPA_GRID
    objective: str = 'rating'
    sweep_variants: tuple = SWEEP_VARIANTS
    out_dir: str = 'out'

    def __post_init__(self):
        for is_valid, message in (
            validate_choice(self.model_kind, MODEL_KINDS, 'Model kind'),
            validate_positive_int(self.k, 'K'),
            validate_choice(self.reference, ('positives', 'all'), 'Reference distribution'),
            validate_positive_int(self.neighbors, 'Neighbors'),
            validate_year_edges(self.year_edges),
            validate_nonnegative(self.malformed_tolerance, 'Malformed tolerance'),
            validate_choice(self.objective, ('rating', 'ranking'), 'Sweep objective'),
        ):
            if not is_valid:
                raise InvalidConfig(message)
        if self.model_kind == 'poisson_mf' and self.loss.variant != 'plain':
            raise InvalidConfig("PoissonMF supports the plain loss only")
        for variant in self.sweep_variants:
            is_valid, message = validate_choice(variant, SWEEP_VARIANTS, 'Sweep variant')
            if not is_valid:
                raise InvalidConfig(message)
        for grid, name in ((self.lambda_grid, 'Lambda grid'), (self.alpha_grid, 'Alpha grid')):
            if not grid:
                raise InvalidConfig(f"{name} must not be empty")
            for value in grid:
                is_valid, message = validate_nonnegative(value, name)
                if not is_valid:
                    raise InvalidConfig(message)
        if not self.kappa_grid:
            raise InvalidConfig("Kappa grid must not be empty")
        for kappa in self.kappa_grid:
            is_valid, message = validate_kappa(kappa)
            if not is_valid:
                raise InvalidConfig(message)

    @property
    def display_name(self):
        """Row label in the comparison table, e.g. 'MF (corr.error)'"""
        if self.model_name:
            return self.model_name
        return DISPLAY_NAMES[self.model_kind] + VARIANT_DISPLAY[self.loss.variant]

    def fingerprint(self):
        """Short hash over everything that determines a trained model"""
        return config_hash(
            {'kind': self.model_kind, 'neighbors': self.neighbors},
            self.loss.to_dict(),
            self.train.to_dict(),
        )

    def with_overrides(self, seed=None, out=None, dataset=None, k=None):
        """Apply command-line flags on top of file values"""
        changes = {}
        if seed is not None:
            changes['train'] = replace(self.train, seed=int(seed))
            changes['synth'] = replace(self.synth, seed=int(seed))
        if out is not None:
            changes['out_dir'] = out
        if dataset is not None:
            changes['dataset_path'] = dataset
        if k is not None:
            changes['k'] = int(k)
        return replace(self, **changes) if changes else self

    # --- file loading ---------------------------------------------------------------

    @classmethod
    def load(cls, path=None):
        """Read an experiment file; None or an empty file gives the defaults"""
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        if path is not None:
            if not os.path.isfile(path):
                raise InputError(f"Config file not found: {path}")
            try:
                parser.read(path, encoding='utf-8')
            except configparser.Error as e:
                raise InvalidConfig(f"Could not parse {path}: {e}")

        try:
            return cls._from_parser(parser)
        except (ValueError, TypeError) as e:
            raise InvalidConfig(f"Invalid value in {path}: {e}")

    @classmethod
    def _from_parser(cls, parser):
        def section(name):
            return parser[name] if parser.has_section(name) else {}

        dataset = section('dataset')
        columns = section('columns')
        synth = section('synth')
        model = section('model')
        loss = section('loss')
        train = section('train')
        evaluation = section('evaluation')
        analysis = section('analysis')
        sweep = section('sweep')

        schema_fields = {key: columns[key] for key in (
            'user_id', 'item_id', 'rating', 'timestamp', 'user_attr', 'model_attr', 'fit', 'user_axis', 'item_axis',
        ) if key in columns}
        for key in ('user_labels', 'item_labels'):
            if key in columns:
                schema_fields[key] = _texts(columns[key])

        synth_fields = {}
        for key in ('n_users', 'n_items', 'M', 'N', 'interactions_per_user', 'latent_rank', 'seed', 'span_days',
                    'start_timestamp'):
            if key in synth:
                synth_fields[key] = int(synth[key])
        for key in ('rating_base', 'noise_sd', 'latent_sd'):
            if key in synth:
                synth_fields[key] = float(synth[key])
        for key in ('selection_bias', 'segment_shift'):
            if key in synth:
                synth_fields[key] = _matrix(synth[key])
        for key in ('user_labels', 'item_labels'):
            if key in synth:
                synth_fields[key] = _texts(synth[key])
        if 'name' in synth:
            synth_fields['name'] = synth['name']
        synth_config = SynthConfig(**synth_fields)
        synth_config.validate()

        loss_fields = {}
        if 'variant' in loss:
            loss_fields['variant'] = loss['variant'].strip()
        for key in ('alpha', 'lambda_l2'):
            if key in loss:
                loss_fields[key] = float(loss[key])
        if 'kappa' in loss:
            loss_fields['kappa'] = _ints(loss['kappa'])

        train_fields = {}
        for key, parse in (('learning_rate', float), ('batch_size', int), ('d', int), ('max_epochs', int),
                           ('patience', int), ('seed', int)):
            if key in train:
                train_fields[key] = parse(train[key])

        fields = {
            'schema': ColumnSchema(**schema_fields),
            'synth': synth_config,
            'loss': LossConfig(**loss_fields),
            'train': TrainConfig(**train_fields),
        }
        if 'path' in dataset:
            fields['dataset_path'] = dataset['path']
        if 'name' in dataset:
            fields['dataset_name'] = dataset['name']
        if 'malformed_tolerance' in dataset:
            fields['malformed_tolerance'] = float(dataset['malformed_tolerance'])
        if 'kind' in model:
            fields['model_kind'] = model['kind'].strip()
        if 'name' in model:
            fields['model_name'] = model['name'].strip()
        if 'neighbors' in model:
            fields['neighbors'] = int(model['neighbors'])
        if 'k' in evaluation:
            fields['k'] = int(evaluation['k'])
        if 'reference' in evaluation:
            fields['reference'] = evaluation['reference'].strip()
        if 'positive_threshold' in evaluation:
            fields['positive_threshold'] = float(evaluation['positive_threshold'])
        if 'year_edges' in analysis:
            fields['year_edges'] = _ints(analysis['year_edges'])
        if 'lambda_grid' in sweep:
            fields['lambda_grid'] = _floats(sweep['lambda_grid'])
        if 'alpha_grid' in sweep:
            fields['alpha_grid'] = _floats(sweep['alpha_grid'])
        if 'kappa_grid' in sweep:
            fields['kappa_grid'] = tuple(_ints(row) for row in sweep['kappa_grid'].split(';') if row.strip())
        if 'objective' in sweep:
            fields['objective'] = sweep['objective'].strip()
        if 'variants' in sweep:
            fields['sweep_variants'] = _texts(sweep['variants'])
        return cls(**fields)


def _texts(value):
    return tuple(part.strip() for part in value.split(',') if part.strip())


def _ints(value):
    return tuple(int(part) for part in _texts(value))


def _floats(value):
    return tuple(float(part) for part in _texts(value))


def _matrix(value):
    """'1,2;3,4' -> [[1.0, 2.0], [3.0, 4.0]]"""
    return [list(_floats(row)) for row in value.split(';') if row.strip()]

