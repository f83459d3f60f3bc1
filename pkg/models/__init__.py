"""
Domain models package for the FairRec marketing-bias lab
"""

from .dataset import (
    UNKNOWN, UNKNOWN_GROUP, ColumnSchema, ContingencyTable, DataSplit, Dataset, GroupVocab,
    Interaction, SegmentKey,
)
from .statistics import AnovaResult, AnovaRow, Chi2Result, SegmentCell, SegmentSummary
from .recommenders import MfParams, NeighborModel, PoissonParams
from .training import (
    Batch, EpochRecord, GridSearchResult, GridTrial, LossBreakdown, LossConfig, OptimizerState, TrainConfig,
    TrainHistory,
)
from .metrics import FairnessF, MetricsReport, RecList, SegmentDistribution
from .synthetic import SynthConfig

__all__ = [
    'UNKNOWN', 'UNKNOWN_GROUP', 'ColumnSchema', 'ContingencyTable', 'DataSplit', 'Dataset',
    'GroupVocab', 'Interaction', 'SegmentKey',
    'AnovaResult', 'AnovaRow', 'Chi2Result', 'SegmentCell', 'SegmentSummary',
    'MfParams', 'NeighborModel', 'PoissonParams',
    'Batch', 'EpochRecord', 'GridSearchResult', 'GridTrial', 'LossBreakdown', 'LossConfig', 'OptimizerState', 'TrainConfig', 'TrainHistory',
    'FairnessF', 'MetricsReport', 'RecList', 'SegmentDistribution',
    'SynthConfig',
]
