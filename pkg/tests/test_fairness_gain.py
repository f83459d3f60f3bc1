"""
End-to-end check that the fairness-aware losses reduce segment unfairness
on a biased synthetic marketplace without giving up much accuracy
"""

import unittest

import numpy as np

from models.synthetic import SynthConfig
from models.training import LossConfig, TrainConfig
from services.data_service import DataService
from services.evaluation_service import EvaluationService
from services.synthetic_service import SyntheticService
from services.training_service import TrainingService

SEEDS = (0, 1, 2, 3, 4)

VARIANTS = {
    'MF': LossConfig(variant='plain'),
    'MF (corr.error)': LossConfig(variant='corr_error', alpha=1.0, kappa=(0, 0, 1)),
    'MF (reweighted)': LossConfig(variant='reweighted', kappa=(0, 0, 1)),
}


def run_seed(seed):
    cfg = SynthConfig(n_users=200, n_items=100, interactions_per_user=20, seed=seed,
                      selection_bias=[[1.0, 0.4], [0.4, 1.0]], segment_shift=[[0.5, -0.5], [-0.5, 0.5]])
    ds = SyntheticService.generate(cfg)
    split = DataService.split_leave_latest(ds)
    tc = TrainConfig(learning_rate=0.01, max_epochs=100, seed=seed)
    reports = {}
    for name, loss in VARIANTS.items():
        model, _ = TrainingService.train(ds, split, 'mf', loss, tc)
        reports[name] = EvaluationService.evaluate_model(model, ds, split, name, seed=seed)
    return reports


class TestFairnessGain(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.runs = [run_seed(seed) for seed in SEEDS]

    def mean(self, name, metric):
        return float(np.mean([metric(run[name]) for run in self.runs]))

    def test_corr_error_halves_segment_f(self):
        """Test MF (corr.error) has at most half the mean test F-statistic of plain MF"""
        plain = self.mean('MF', lambda r: r.fairness_f.F)
        fair = self.mean('MF (corr.error)', lambda r: r.fairness_f.F)
        self.assertLessEqual(fair, 0.5 * plain)

    def test_corr_error_keeps_accuracy(self):
        """Test MF (corr.error) stays within 10% of plain MF test MSE"""
        plain = self.mean('MF', lambda r: r.mse)
        fair = self.mean('MF (corr.error)', lambda r: r.mse)
        self.assertLessEqual(fair, 1.10 * plain)

    def test_fair_variants_match_segment_distribution(self):
        """Test a fairness-aware variant has KL no worse than plain MF in at least 4 of 5 seeds"""
        wins = sum(
            1 for run in self.runs
            if min(run['MF (corr.error)'].kl, run['MF (reweighted)'].kl) <= run['MF'].kl
        )
        self.assertGreaterEqual(wins, 4)


if __name__ == '__main__':
    unittest.main()
