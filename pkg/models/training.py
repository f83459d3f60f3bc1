"""
Training configuration and history models for the FairRec marketing-bias lab
LossConfig, TrainConfig, OptimizerState, TrainHistory and Batch
"""

import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from utils.exceptions import InvalidConfig
from utils.validators import (
    validate_choice, validate_kappa, validate_nonnegative, validate_positive, validate_positive_int,
)

LOSS_VARIANTS = ('plain', 'corr_error', 'corr_value', 'reweighted')

VARIANT_DISPLAY = {
    'plain': '',
    'corr_error': ' (corr.error)',
    'corr_value': ' (corr.value)',
    'reweighted': ' (reweighted)',
}


@dataclass(frozen=True)
class LossConfig:
    """Loss variant selector; kappa = (user, product, market) switches"""
    variant: str = 'plain'
    alpha: float = 1.0
    kappa: tuple = (0, 0, 1)
    lambda_l2: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, 'kappa', tuple(int(k) for k in self.kappa))
        object.__setattr__(self, 'alpha', float(self.alpha))
        object.__setattr__(self, 'lambda_l2', float(self.lambda_l2))
        for is_valid, message in (
            validate_choice(self.variant, LOSS_VARIANTS, 'Loss variant'),
            validate_kappa(self.kappa),
            validate_nonnegative(self.alpha, 'Alpha'),
            validate_nonnegative(self.lambda_l2, 'Lambda'),
        ):
            if not is_valid:
                raise InvalidConfig(message)

    @property
    def uses_parity(self):
        return self.variant in ('corr_error', 'corr_value')

    def to_dict(self):
        return {'variant': self.variant, 'alpha': self.alpha, 'kappa': list(self.kappa), 'lambda_l2': self.lambda_l2}


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; defaults give the standard protocol"""
    learning_rate: float = 0.001
    batch_size: int = 512
    d: int = 10
    max_epochs: int = 200
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        for is_valid, message in (
            validate_positive(self.learning_rate, 'Learning rate'),
            validate_positive_int(self.batch_size, 'Batch size'),
            validate_positive_int(self.d, 'Embedding dimension'),
            validate_positive_int(self.max_epochs, 'Max epochs'),
            validate_positive_int(self.patience, 'Patience'),
        ):
            if not is_valid:
                raise InvalidConfig(message)
        if int(self.seed) < 0:
            raise InvalidConfig("Seed must be nonnegative")

    def to_dict(self):
        return asdict(self)


def config_hash(*parts):
    """Stable short hash over JSON-serializable config dicts"""
    payload = json.dumps([p for p in parts], sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]


@dataclass
class OptimizerState:
    """Adaptive-moment accumulators, one pair per named parameter array"""
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    validation_mse: float
    penalty: float
    skipped_terms: int = 0

    def to_record(self):
        return {
            'epoch': self.epoch,
            'train_loss': _json_float(self.train_loss),
            'validation_mse': _json_float(self.validation_mse),
            'penalty': _json_float(self.penalty),
            'skipped_terms': self.skipped_terms,
        }


@dataclass
class TrainHistory:
    """Per-epoch losses; selected_epoch is the argmin of validation MSE"""
    epochs: list = field(default_factory=list)
    selected_epoch: int = -1
    stopped_early: bool = False

    def append(self, record):
        self.epochs.append(record)

    def best_validation_mse(self):
        if self.selected_epoch < 0:
            return float('nan')
        return self.epochs[self.selected_epoch].validation_mse

    def to_records(self):
        return [record.to_record() for record in self.epochs]


@dataclass(frozen=True, eq=False)
class Batch:
    """Aligned arrays for one minibatch; user_groups uses UNKNOWN_GROUP for unknown identity"""
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    user_groups: np.ndarray
    item_groups: np.ndarray
    M: int
    N: int

    @classmethod
    def from_dataset(cls, ds, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return cls(
            users=ds.user_index[indices],
            items=ds.item_index[indices],
            ratings=ds.ratings[indices],
            user_groups=ds.interaction_user_groups[indices],
            item_groups=ds.interaction_item_groups[indices],
            M=ds.M,
            N=ds.N,
        )

    def __len__(self):
        return len(self.ratings)


def _json_float(value):
    value = float(value)
    return value if np.isfinite(value) else None


@dataclass(frozen=True)
class LossBreakdown:
    """Components of one minibatch objective"""
    total: float
    data_loss: float
    penalty: float = 0.0
    regularization: float = 0.0
    skipped_terms: int = 0


@dataclass(eq=False)
class GridTrial:
    """One trained configuration of a hyperparameter sweep with its validation scores"""
    loss: LossConfig
    validation_mse: float
    validation_f: float = None
    validation_ndcg: float = None
    validation_kl: float = None
    selected_epoch: int = -1
    params: object = field(default=None, repr=False)

    def to_record(self):
        return {
            'variant': self.loss.variant,
            'kappa': ','.join(str(k) for k in self.loss.kappa),
            'lambda_l2': self.loss.lambda_l2,
            'alpha': self.loss.alpha,
            'validation_mse': _json_float(self.validation_mse),
            'validation_f': None if self.validation_f is None else _json_float(self.validation_f),
            'validation_ndcg': None if self.validation_ndcg is None else _json_float(self.validation_ndcg),
            'validation_kl': None if self.validation_kl is None else _json_float(self.validation_kl),
            'selected_epoch': self.selected_epoch,
        }


@dataclass(eq=False)
class GridSearchResult:
    """Every trial in grid order, the stage-one winner per κ and the final selection"""
    trials: list
    per_kappa: dict
    selected: GridTrial
    objective: str = 'rating'
