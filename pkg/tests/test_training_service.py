"""
Unit tests for the training service
"""

import json
import os
import tempfile
import unittest

import numpy as np

from models.dataset import DataSplit
from models.recommenders import MfParams, NeighborModel, PoissonParams
from models.synthetic import SynthConfig
from models.training import LossConfig, TrainConfig
from services.data_service import DataService
from services.fairness_service import FairnessService
from services.recommender_service import RecommenderService
from services.synthetic_service import SyntheticService
from services.training_service import AdamOptimizer, TrainingService
from tests.fixtures import build_dataset
from utils.exceptions import EmptyInput, InvalidConfig

FAST = TrainConfig(learning_rate=0.01, batch_size=64, d=4, max_epochs=4, patience=2, seed=3)


def small_marketplace(seed=1):
    cfg = SynthConfig(n_users=30, n_items=20, interactions_per_user=8, seed=seed,
                      segment_shift=[[0.5, 0.0], [0.0, -0.5]])
    ds = SyntheticService.generate(cfg)
    return ds, DataService.split_leave_latest(ds)


class TestAdamOptimizer(unittest.TestCase):

    def test_first_step_moves_by_learning_rate(self):
        """Test the bias-corrected first step has magnitude lr per coordinate"""
        params = {'w': np.array([1.0, -2.0])}
        optimizer = AdamOptimizer(params, learning_rate=0.1)
        optimizer.step({'w': np.array([0.5, -3.0])})
        np.testing.assert_allclose(params['w'], [0.9, -1.9], atol=1e-6)
        self.assertEqual(optimizer.state.step, 1)

    def test_minimizes_quadratic(self):
        """Test repeated steps approach the minimum of (w - 3)²"""
        params = {'w': np.array([0.0])}
        optimizer = AdamOptimizer(params, learning_rate=0.05)
        for _ in range(2000):
            optimizer.step({'w': 2.0 * (params['w'] - 3.0)})
        self.assertAlmostEqual(float(params['w'][0]), 3.0, delta=1e-2)


class TestTraining(unittest.TestCase):

    def setUp(self):
        self.ds, self.split = small_marketplace()

    def test_training_is_deterministic(self):
        """Test the same seed gives identical parameters"""
        cfg = LossConfig(variant='corr_error', alpha=1.0, kappa=(1, 1, 1))
        first, _ = TrainingService.train(self.ds, self.split, 'mf', cfg, FAST)
        second, _ = TrainingService.train(self.ds, self.split, 'mf', cfg, FAST)
        self.assertIsInstance(first, MfParams)
        np.testing.assert_array_equal(first.gamma_user, second.gamma_user)
        np.testing.assert_array_equal(first.b_item, second.b_item)

        other, _ = TrainingService.train(self.ds, self.split, 'mf', cfg, TrainConfig(
            learning_rate=0.01, batch_size=64, d=4, max_epochs=4, patience=2, seed=4))
        self.assertFalse(np.array_equal(first.gamma_user, other.gamma_user))

    def test_selected_epoch_minimizes_validation_mse(self):
        """Test the returned parameters come from the best validation epoch"""
        model, history = TrainingService.train(self.ds, self.split, 'mf', LossConfig(), FAST)
        scores = [record.validation_mse for record in history.epochs]
        self.assertLessEqual(len(scores), FAST.max_epochs)
        self.assertEqual(history.selected_epoch, int(np.argmin(scores)))
        self.assertAlmostEqual(history.best_validation_mse(), min(scores))
        self.assertTrue(model.is_finite())

    def test_early_stopping(self):
        """Test training stops once validation MSE stalls for `patience` epochs"""
        tc = TrainConfig(learning_rate=1.0, batch_size=32, d=8, max_epochs=200, patience=2, seed=0)
        _, history = TrainingService.train(self.ds, self.split, 'mf', LossConfig(lambda_l2=0.0), tc)
        self.assertTrue(history.stopped_early)
        self.assertLess(len(history.epochs), 200)
        self.assertEqual(len(history.epochs) - 1 - history.selected_epoch, tc.patience)

    def test_history_file(self):
        """Test the JSON-lines history has one record per epoch"""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'mf.history.jsonl')
            _, history = TrainingService.train(self.ds, self.split, 'mf', LossConfig(), FAST, history_path=path)
            with open(path, encoding='utf-8') as fh:
                records = [json.loads(line) for line in fh]
        self.assertEqual(len(records), len(history.epochs))
        self.assertEqual(records[0]['epoch'], 0)
        self.assertIn('validation_mse', records[0])

    def test_poisson_training(self):
        """Test PoissonMF trains with the plain loss and rejects fairness variants"""
        model, _ = TrainingService.train(self.ds, self.split, 'poisson_mf', LossConfig(), FAST)
        self.assertIsInstance(model, PoissonParams)
        with self.assertRaises(InvalidConfig):
            TrainingService.train(self.ds, self.split, 'poisson_mf', LossConfig(variant='reweighted'), FAST)

    def test_neighbor_training(self):
        """Test CF models are fitted in one pass with a single history record"""
        model, history = TrainingService.train(self.ds, self.split, 'item_cf', LossConfig(), FAST, k_neighbors=5)
        self.assertIsInstance(model, NeighborModel)
        self.assertEqual(model.kind, 'item_cf')
        self.assertEqual(len(history.epochs), 1)
        self.assertEqual(history.selected_epoch, 0)

    def test_empty_training_split(self):
        """Test an empty training split is rejected"""
        split = DataService.split_leave_latest(self.ds)
        empty = DataSplit(train=np.array([], dtype=np.int64), validation=split.validation, test=split.test)
        with self.assertRaises(EmptyInput):
            TrainingService.train(self.ds, empty, 'mf', LossConfig(), FAST)


def rank_one_dataset(n_users=40, n_items=30, seed=0):
    """Every user rates every item; r = 1 + a_u b_i with a, b ~ U[0.5, 2]"""
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.5, 2.0, size=n_users)
    b = rng.uniform(0.5, 2.0, size=n_items)
    rows = [
        (f'u{u:02d}', f'i{i:02d}', 1.0 + a[u] * b[i], i + 1,
         ('Small', 'Large')[u % 2], ('Small', 'Small&Large')[i % 2])
        for u in range(n_users) for i in range(n_items)
    ]
    return build_dataset(rows, name='rank-one')


class TestConvergence(unittest.TestCase):

    def test_rank_one_matrix_is_recovered(self):
        """Test plain MF with d=2 fits a full rank-one matrix to train MSE below 0.01 within 200 epochs"""
        ds = rank_one_dataset()
        everything = DataSplit(train=np.arange(ds.n_interactions), validation=np.array([], dtype=np.int64),
                               test=np.array([], dtype=np.int64))
        tc = TrainConfig(learning_rate=0.01, batch_size=64, d=2, max_epochs=200, patience=200, seed=0)
        model, history = TrainingService.train(ds, everything, 'mf', LossConfig(variant='plain', lambda_l2=0.0), tc)
        predictions = RecommenderService.score_pairs(model, ds.user_index, ds.item_index)
        self.assertLess(float(np.mean((predictions - ds.ratings) ** 2)), 0.01)
        self.assertLessEqual(len(history.epochs), 200)

    def test_training_lowers_parity_penalty(self):
        """Test corr_error training ends with a smaller segment parity penalty on the training errors"""
        ds, split = small_marketplace()
        tc = TrainConfig(learning_rate=0.01, batch_size=64, d=4, max_epochs=30, patience=30, seed=3)
        cfg = LossConfig(variant='corr_error', alpha=1.0, kappa=(0, 0, 1))
        train = split.train
        users, items, ratings = ds.user_index[train], ds.item_index[train], ds.ratings[train]

        def penalty(model):
            errors = RecommenderService.score_pairs(model, users, items) - ratings
            value, _, skipped = FairnessService.parity_terms(
                errors, ds.interaction_user_groups[train], ds.interaction_item_groups[train], ds.N, cfg.kappa)
            self.assertEqual(skipped, 0)
            return value

        initial = RecommenderService.init_params('mf', ds.n_users, ds.n_items, tc.d, tc.seed, float(ratings.mean()))
        model, _ = TrainingService.train(ds, split, 'mf', cfg, tc)
        self.assertLess(penalty(model), penalty(initial))


class TestGridSearch(unittest.TestCase):

    def setUp(self):
        self.ds, self.split = small_marketplace()
        self.tc = TrainConfig(learning_rate=0.01, batch_size=64, d=4, max_epochs=2, patience=2, seed=0)
        self.kappas = ((0, 0, 1), (1, 1, 1))

    def search(self, **kwargs):
        options = dict(variant='corr_error', lambda_grid=(0.1, 1.0), alpha_grid=(1.0, 5.0), kappa_grid=self.kappas)
        options.update(kwargs)
        return TrainingService.grid_search(self.ds, self.split, self.tc, **options)

    def test_two_stage_selection(self):
        """Test accuracy picks (λ, α) per κ and fairness picks κ"""
        result = self.search()
        self.assertEqual(len(result.trials), 8)
        self.assertEqual([t.loss.kappa for t in result.trials], [(0, 0, 1)] * 4 + [(1, 1, 1)] * 4)
        self.assertEqual([t.loss.lambda_l2 for t in result.trials[:4]], [0.1, 0.1, 1.0, 1.0])

        for kappa in self.kappas:
            group = [t for t in result.trials if t.loss.kappa == kappa]
            best = min(t.validation_mse for t in group)
            self.assertEqual(result.per_kappa[kappa].validation_mse, best)

        fairness = [TrainingService._fairness_key(result.per_kappa[k], 'rating') for k in self.kappas]
        self.assertEqual(TrainingService._fairness_key(result.selected, 'rating'), min(fairness))

    def test_reweighted_ignores_alpha_grid(self):
        """Test the reweighted loss is swept over λ and κ only"""
        result = self.search(variant='reweighted')
        self.assertEqual(len(result.trials), 4)
        self.assertTrue(all(t.loss.alpha == 1.0 for t in result.trials))

    def test_threads_do_not_change_results(self):
        """Test concurrent trials produce the same records in grid order"""
        serial = self.search(lambda_grid=(0.1,), alpha_grid=(1.0,))
        parallel = self.search(lambda_grid=(0.1,), alpha_grid=(1.0,), threads=2)
        self.assertEqual([t.to_record() for t in serial.trials], [t.to_record() for t in parallel.trials])

    def test_ranking_objective(self):
        """Test ranking sweeps record validation NDCG and KL"""
        result = self.search(lambda_grid=(0.1,), alpha_grid=(1.0,), objective='ranking')
        self.assertEqual(result.objective, 'ranking')
        for trial in result.trials:
            self.assertIsNotNone(trial.validation_ndcg)
            self.assertIsNotNone(trial.validation_kl)

    def test_invalid_grids(self):
        """Test empty grids and unknown objectives"""
        with self.assertRaises(InvalidConfig):
            self.search(lambda_grid=())
        with self.assertRaises(InvalidConfig):
            self.search(objective='precision')

    def test_select_lambda(self):
        """Test plain-loss models pick λ by validation MSE"""
        trial = TrainingService.select_lambda(self.ds, self.split, 'poisson_mf', self.tc, lambda_grid=(0.01, 10.0))
        self.assertEqual(trial.loss.variant, 'plain')
        self.assertIn(trial.loss.lambda_l2, (0.01, 10.0))
        self.assertIsInstance(trial.params, PoissonParams)


if __name__ == '__main__':
    unittest.main()
