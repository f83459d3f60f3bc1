"""
Evaluation models for the FairRec marketing-bias lab
SegmentDistribution, FairnessF, RecList and MetricsReport
"""

import math
from dataclasses import dataclass, field

import numpy as np

from models.statistics import format_p_value

REPORT_VERSION = 1


@dataclass(frozen=True, eq=False)
class SegmentDistribution:
    """Normalized frequencies p_{m,n} over the M×N market segments"""
    probabilities: np.ndarray
    count: int

    def __post_init__(self):
        probabilities = np.array(self.probabilities, dtype=np.float64)
        if np.any(probabilities < 0):
            raise ValueError("Segment probabilities must be nonnegative")
        if abs(probabilities.sum() - 1.0) > 1e-9:
            raise ValueError("Segment probabilities must sum to 1")
        probabilities.setflags(write=False)
        object.__setattr__(self, 'probabilities', probabilities)

    @property
    def shape(self):
        return self.probabilities.shape


@dataclass(frozen=True)
class FairnessF:
    """One-way F-statistic of prediction errors across populated segments"""
    F: float
    dof_num: int
    dof_den: int
    p_value: float
    populated: int

    def to_dict(self):
        return {
            'F': _json_float(self.F),
            'dof_num': self.dof_num,
            'dof_den': self.dof_den,
            'p': _json_float(self.p_value),
            'populated_segments': self.populated,
        }


@dataclass(frozen=True)
class RecList:
    """Top-K recommendations per user index"""
    items: dict = field(default_factory=dict)
    k: int = 10

    def for_user(self, user):
        return self.items.get(user, [])

    def pairs(self):
        users = []
        items = []
        for user in sorted(self.items):
            for item in self.items[user]:
                users.append(user)
                items.append(item)
        return np.array(users, dtype=np.int64), np.array(items, dtype=np.int64)


@dataclass
class MetricsReport:
    """Accuracy and fairness of one trained model on the test split"""
    model_name: str
    dataset_name: str
    mse: float
    mae: float
    fairness_f: FairnessF = None
    auc: float = None
    ndcg_at_k: float = None
    kl: float = None
    kl_smoothed: bool = False
    diff_matrix: np.ndarray = None
    k: int = 10
    user_labels: tuple = ()
    item_labels: tuple = ()
    model_config: dict = field(default_factory=dict)
    distributions: dict = field(default_factory=dict)

    def to_dict(self):
        diff = None
        if self.diff_matrix is not None:
            diff = [[_json_float(v) for v in row] for row in np.asarray(self.diff_matrix)]
        distributions = {
            name: [[float(v) for v in row] for row in np.asarray(matrix)]
            for name, matrix in sorted(self.distributions.items())
        }
        return {
            'version': REPORT_VERSION,
            'model_name': self.model_name,
            'dataset_name': self.dataset_name,
            'mse': _json_float(self.mse),
            'mae': _json_float(self.mae),
            'fairness_f': self.fairness_f.to_dict() if self.fairness_f else None,
            'auc': _json_float(self.auc),
            'ndcg_at_k': _json_float(self.ndcg_at_k),
            'k': self.k,
            'kl': _json_float(self.kl),
            'kl_smoothed': self.kl_smoothed,
            'diff_matrix': diff,
            'user_labels': list(self.user_labels),
            'item_labels': list(self.item_labels),
            'model_config': self.model_config,
            'segment_distributions': distributions,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get('version') != REPORT_VERSION:
            raise ValueError(f"Unsupported report version {data.get('version')!r}")
        fairness = data.get('fairness_f')
        diff = data.get('diff_matrix')
        return cls(
            model_name=str(data['model_name']),
            dataset_name=str(data['dataset_name']),
            mse=_from_json(data['mse']),
            mae=_from_json(data['mae']),
            fairness_f=FairnessF(
                F=_from_json(fairness['F']),
                dof_num=int(fairness['dof_num']),
                dof_den=int(fairness['dof_den']),
                p_value=_from_json(fairness['p']),
                populated=int(fairness['populated_segments']),
            ) if fairness else None,
            auc=_from_json(data.get('auc')),
            ndcg_at_k=_from_json(data.get('ndcg_at_k')),
            kl=_from_json(data.get('kl')),
            kl_smoothed=bool(data.get('kl_smoothed', False)),
            diff_matrix=np.array([[_from_json(v) for v in row] for row in diff], dtype=np.float64) if diff else None,
            k=int(data.get('k', 10)),
            user_labels=tuple(data.get('user_labels', ())),
            item_labels=tuple(data.get('item_labels', ())),
            model_config=dict(data.get('model_config') or {}),
            distributions={
                name: np.array(matrix, dtype=np.float64)
                for name, matrix in (data.get('segment_distributions') or {}).items()
            },
        )

    def table_row(self):
        """Flat row in the comparison-table column order"""
        fairness = self.fairness_f
        return {
            'model': self.model_name,
            'dataset': self.dataset_name,
            'MSE': _fmt(self.mse),
            'MAE': _fmt(self.mae),
            'F-stat': _fmt(fairness.F) if fairness else '',
            'p-value': format_p_value(fairness.p_value) if fairness and fairness.p_value is not None else '',
            'AUC': _fmt(self.auc),
            'NDCG': _fmt(self.ndcg_at_k),
            'KL': _fmt(self.kl),
        }


TABLE_COLUMNS = ['model', 'dataset', 'MSE', 'MAE', 'F-stat', 'p-value', 'AUC', 'NDCG', 'KL']


def _fmt(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ''
    return f'{value:.3f}'


def _json_float(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _from_json(value):
    if value is None:
        return None
    return float(value)
