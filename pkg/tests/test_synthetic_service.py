"""
Unit tests for the synthetic marketplace generator
"""

import unittest

import numpy as np

from models.synthetic import SynthConfig
from services.data_service import DataService
from services.stats_service import StatsService
from services.synthetic_service import SECONDS_PER_DAY, SyntheticService
from utils.exceptions import InvalidConfig

CHI2_CRITICAL_0001_DOF1 = 10.827566170662733


class TestSyntheticService(unittest.TestCase):

    def test_same_seed_same_dataset(self):
        """Test generation is a pure function of the config"""
        cfg = SynthConfig(n_users=20, n_items=10, interactions_per_user=5, seed=11)
        first = SyntheticService.generate(cfg)
        second = SyntheticService.generate(cfg)
        self.assertEqual(first.user_ids, second.user_ids)
        np.testing.assert_array_equal(first.item_index, second.item_index)
        np.testing.assert_array_equal(first.ratings, second.ratings)
        np.testing.assert_array_equal(first.timestamps, second.timestamps)

        other = SyntheticService.generate(SynthConfig(n_users=20, n_items=10, interactions_per_user=5, seed=12))
        self.assertFalse(np.array_equal(first.ratings, other.ratings))

    def test_shape_and_groups(self):
        """Test sizes, balanced group assignment and default labels"""
        ds = SyntheticService.generate(SynthConfig(n_users=20, n_items=10, interactions_per_user=5, seed=0))
        self.assertEqual(ds.n_users, 20)
        self.assertEqual(ds.n_interactions, 100)
        self.assertEqual(ds.vocab_user.labels, ('U0', 'U1'))
        self.assertEqual(ds.vocab_item.labels, ('P0', 'P1'))
        self.assertEqual(list(np.bincount(ds.user_groups)), [10, 10])
        self.assertTrue(np.all(ds.ratings >= 1.0) and np.all(ds.ratings <= 5.0))

    def test_timestamps_are_distinct_per_user(self):
        """Test each user's interactions fall on distinct days inside the span"""
        cfg = SynthConfig(n_users=10, n_items=30, interactions_per_user=6, span_days=30, seed=2)
        ds = SyntheticService.generate(cfg)
        end = cfg.start_timestamp + cfg.span_days * SECONDS_PER_DAY
        self.assertTrue(np.all(ds.timestamps >= cfg.start_timestamp))
        self.assertTrue(np.all(ds.timestamps < end))
        for user in range(ds.n_users):
            stamps = ds.timestamps[ds.user_index == user]
            self.assertEqual(len(np.unique(stamps)), len(stamps))

    def test_selection_bias_controls_segment_counts(self):
        """Test a zero propensity leaves its segment empty"""
        cfg = SynthConfig(n_users=20, n_items=20, interactions_per_user=4, seed=5,
                          selection_bias=[[1.0, 0.0], [0.0, 1.0]])
        table = DataService.contingency_table(SyntheticService.generate(cfg))
        np.testing.assert_array_equal(table.counts, [[40, 0], [0, 40]])

    def test_unbiased_marketplace_passes_independence(self):
        """Test uniform propensities and no shift rarely reject independence at the 0.001 level"""
        passed = 0
        seeds = range(20)
        for seed in seeds:
            cfg = SynthConfig(n_users=500, n_items=200, interactions_per_user=20, seed=seed,
                              selection_bias=[[1.0, 1.0], [1.0, 1.0]], segment_shift=[[0.0, 0.0], [0.0, 0.0]])
            table = DataService.contingency_table(SyntheticService.generate(cfg))
            self.assertEqual(table.grand_total, 10000)
            passed += int(StatsService.chi2_independence(table.counts).p_value > 0.001)
        self.assertGreaterEqual(passed / len(seeds), 0.95)

    def test_biased_marketplace_rejects_independence(self):
        """Test a diagonal propensity three times the off-diagonal exceeds the 0.001 critical value"""
        seeds = range(20)
        for seed in seeds:
            cfg = SynthConfig(n_users=500, n_items=200, interactions_per_user=20, seed=seed,
                              selection_bias=[[3.0, 1.0], [1.0, 3.0]])
            table = DataService.contingency_table(SyntheticService.generate(cfg))
            with self.subTest(seed=seed):
                self.assertGreater(StatsService.chi2_independence(table.counts).statistic, CHI2_CRITICAL_0001_DOF1)

    def test_draws_capped_by_reachable_items(self):
        """Test users draw at most as many items as their nonzero propensities allow"""
        cfg = SynthConfig(n_users=4, n_items=6, interactions_per_user=5, seed=5,
                          selection_bias=[[1.0, 0.0], [1.0, 1.0]])
        ds = SyntheticService.generate(cfg)
        per_user = np.bincount(ds.user_index, minlength=ds.n_users)
        per_user_group = {int(ds.user_groups[u]): int(per_user[u]) for u in range(ds.n_users)}
        self.assertEqual(per_user_group, {0: 3, 1: 5})

    def test_segment_shift_without_noise(self):
        """Test noiseless ratings equal base plus the segment shift"""
        cfg = SynthConfig(n_users=10, n_items=10, interactions_per_user=4, seed=9, noise_sd=0.0,
                          latent_sd=0.0, rating_base=3.0, segment_shift=[[1.0, 0.0], [0.0, -1.5]])
        ds = SyntheticService.generate(cfg)
        expected = 3.0 + cfg.segment_shift[ds.interaction_user_groups, ds.interaction_item_groups]
        np.testing.assert_allclose(ds.ratings, expected)

    def test_latent_sd(self):
        """Test the derived factor spread and the explicit override"""
        self.assertAlmostEqual(SyntheticService.latent_sd(SynthConfig(noise_sd=0.5, latent_rank=2)),
                               (0.25 / 2) ** 0.25)
        self.assertEqual(SyntheticService.latent_sd(SynthConfig(latent_sd=0.3)), 0.3)

    def test_invalid_configs(self):
        """Test configs the generator cannot honor"""
        invalid = [
            SynthConfig(n_users=0),
            SynthConfig(n_items=1, N=2),
            SynthConfig(selection_bias=[[1.0, -1.0], [1.0, 1.0]]),
            SynthConfig(selection_bias=[[0.0, 0.0], [1.0, 1.0]]),
            SynthConfig(segment_shift=[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
            SynthConfig(noise_sd=-0.1),
            SynthConfig(interactions_per_user=40, span_days=30),
            SynthConfig(user_labels=('Small',)),
        ]
        for cfg in invalid:
            with self.subTest(cfg=cfg.to_dict()):
                with self.assertRaises(InvalidConfig):
                    SyntheticService.generate(cfg)


if __name__ == '__main__':
    unittest.main()
