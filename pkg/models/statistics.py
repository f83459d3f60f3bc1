"""
Result models for observational-study statistics
Chi2Result, AnovaResult and SegmentSummary
"""

from dataclasses import dataclass, field

import numpy as np


def format_p_value(p_value):
    """Render a p-value for a results table, abbreviating tiny values"""
    if p_value is None:
        return ''
    if p_value < 0.001:
        return '<0.001'
    return f'{p_value:.3f}'


@dataclass(frozen=True, eq=False)
class Chi2Result:
    """Pearson χ² independence test on an M×N contingency table"""
    statistic: float
    dof: int
    p_value: float
    observed: np.ndarray
    expected: np.ndarray
    deviations: np.ndarray

    def to_record(self, test='all', n_reviews=None):
        return {
            'test': test,
            'statistic': float(self.statistic),
            'dof': int(self.dof),
            'p_value': float(self.p_value),
            'n_reviews': int(self.observed.sum()) if n_reviews is None else int(n_reviews),
        }


@dataclass(frozen=True)
class AnovaRow:
    """One effect of the two-way ANOVA table"""
    effect: str
    sum_sq: float
    F: float
    dof_num: int
    dof_den: int
    p_value: float

    def to_record(self):
        return {
            'effect': self.effect,
            'sum_sq': float(self.sum_sq),
            'F': float(self.F),
            'dof_num': int(self.dof_num),
            'dof_den': int(self.dof_den),
            'p_value': float(self.p_value),
        }


@dataclass(frozen=True)
class AnovaResult:
    """Type II two-way ANOVA: product, user and product×user effects"""
    product: AnovaRow
    user: AnovaRow
    interaction: AnovaRow
    residual_sum_sq: float
    n_observations: int

    def rows(self):
        return [self.product, self.user, self.interaction]

    def to_records(self):
        return [row.to_record() for row in self.rows()]


@dataclass(frozen=True)
class SegmentCell:
    count: int
    mean: float
    std_error: float
    ci_half_width: float
    ci_defined: bool


@dataclass(frozen=True)
class SegmentSummary:
    """Per-segment descriptive statistics; absent cells are not in `cells`"""
    cells: dict = field(default_factory=dict)

    def get(self, key):
        return self.cells.get(key)

    def mean_matrix(self, M, N):
        """M×N matrix of segment means (NaN where a cell is absent)"""
        means = np.full((M, N), np.nan)
        for key, cell in self.cells.items():
            means[key.m, key.n] = cell.mean
        return means
