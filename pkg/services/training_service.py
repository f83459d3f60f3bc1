"""
Training service for the FairRec marketing-bias lab
Handles the adaptive-moment optimizer, minibatch training with early stopping and the two-stage grid search
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from models.recommenders import MfParams, PoissonParams
from models.training import (
    Batch, EpochRecord, GridSearchResult, GridTrial, LossConfig, OptimizerState, TrainHistory,
)
from services.evaluation_service import EvaluationService
from services.fairness_service import FairnessService
from services.recommender_service import RecommenderService, softplus
from utils.exceptions import (
    DegenerateSegments, EmptyAfterFiltering, EmptyInput, InvalidConfig, NoPositives, NonFiniteLoss,
)

logger = logging.getLogger(__name__)

LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0)
ALPHA_GRID = (0.5, 1.0, 5.0, 10.0)
KAPPA_GRID = ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 1, 1))


class AdamOptimizer:
    """Adaptive moment estimation over a dict of parameter arrays, updated in place"""

    def __init__(self, params, learning_rate=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.state = OptimizerState(
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
            first_moment={name: np.zeros_like(value) for name, value in params.items()},
            second_moment={name: np.zeros_like(value) for name, value in params.items()},
        )

    def step(self, gradients):
        state = self.state
        state.step += 1
        correction1 = 1.0 - state.beta1 ** state.step
        correction2 = 1.0 - state.beta2 ** state.step
        for name, gradient in gradients.items():
            m = state.first_moment[name]
            v = state.second_moment[name]
            m *= state.beta1
            m += (1.0 - state.beta1) * gradient
            v *= state.beta2
            v += (1.0 - state.beta2) * gradient ** 2
            self.params[name] -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)


class TrainingService:
    """Service for fitting recommenders and selecting hyperparameters"""

    @staticmethod
    def _heldout_mse(arrays, ds, indices, poisson):
        users = ds.user_index[indices]
        items = ds.item_index[indices]
        linear = (arrays['b0'][0] + arrays['b_item'][items] + arrays['b_user'][users]
                  + np.einsum('ij,ij->i', arrays['gamma_item'][items], arrays['gamma_user'][users]))
        predictions = softplus(linear) if poisson else linear
        return float(np.mean((predictions - ds.ratings[indices]) ** 2))

    @staticmethod
    def write_history(history, path):
        """JSON-lines log: one record per epoch"""
        with open(path, 'w', encoding='utf-8') as fh:
            for record in history.to_records():
                fh.write(json.dumps(record, sort_keys=True) + '\n')
        return path

    @staticmethod
    def train(ds, split, kind, cfg, tc, k_neighbors=50, history_path=None):
        """
        Fit one model on split.train. Factorization models use seeded minibatches,
        adaptive-moment updates and early stopping on validation MSE; the parameters
        of the best epoch are returned.
        """
        if len(split.train) == 0:
            raise EmptyInput("Training split is empty")

        if kind in ('item_cf', 'user_cf'):
            model = RecommenderService.fit_neighbor(ds, split.train, 'item' if kind == 'item_cf' else 'user', k_neighbors)
            history = TrainHistory()
            heldout = split.validation if len(split.validation) else split.train
            predictions = RecommenderService.score_pairs(model, ds.user_index[heldout], ds.item_index[heldout])
            mse = float(np.mean((predictions - ds.ratings[heldout]) ** 2))
            history.append(EpochRecord(epoch=0, train_loss=float('nan'), validation_mse=mse, penalty=0.0))
            history.selected_epoch = 0
            if history_path:
                TrainingService.write_history(history, history_path)
            return model, history

        poisson = kind == 'poisson_mf'
        if poisson and cfg.variant != 'plain':
            raise InvalidConfig("PoissonMF supports the plain loss only")

        train_mean = float(ds.ratings[split.train].mean())
        params = RecommenderService.init_params(kind, ds.n_users, ds.n_items, tc.d, tc.seed, train_mean)
        arrays = params.to_arrays()
        optimizer = AdamOptimizer(arrays, learning_rate=tc.learning_rate)
        rng = np.random.default_rng([tc.seed, 1])

        history = TrainHistory()
        best_arrays = {name: value.copy() for name, value in arrays.items()}
        best_score = math.inf
        stale_epochs = 0
        use_validation = len(split.validation) > 0

        for epoch in range(tc.max_epochs):
            order = rng.permutation(split.train)
            total = 0.0
            penalty = 0.0
            skipped = 0
            for batch_number, start in enumerate(range(0, len(order), tc.batch_size)):
                batch = Batch.from_dataset(ds, order[start:start + tc.batch_size])
                breakdown, gradient = FairnessService.evaluate(batch, arrays, cfg, poisson=poisson)
                if not math.isfinite(breakdown.total):
                    raise NonFiniteLoss(epoch, batch_number, f"loss={breakdown.total}")
                optimizer.step(gradient)
                total += breakdown.total * len(batch)
                penalty += breakdown.penalty * len(batch)
                skipped += breakdown.skipped_terms

            train_loss = total / len(order)
            if not all(np.all(np.isfinite(value)) for value in arrays.values()):
                raise NonFiniteLoss(epoch, batch_number, "parameters diverged")

            validation_mse = (TrainingService._heldout_mse(arrays, ds, split.validation, poisson)
                              if use_validation else float('nan'))
            history.append(EpochRecord(
                epoch=epoch,
                train_loss=train_loss,
                validation_mse=validation_mse,
                penalty=penalty / len(order),
                skipped_terms=skipped,
            ))
            if skipped:
                logger.info("Epoch %d: skipped %d degenerate parity terms", epoch, skipped)
            logger.debug("Epoch %d: train loss %.6f, validation MSE %.6f", epoch, train_loss, validation_mse)

            score = validation_mse if use_validation else train_loss
            if score < best_score:
                best_score = score
                history.selected_epoch = epoch
                best_arrays = {name: value.copy() for name, value in arrays.items()}
                stale_epochs = 0
            else:
                stale_epochs += 1
                if stale_epochs >= tc.patience:
                    history.stopped_early = True
                    logger.info("Early stop at epoch %d; best epoch %d", epoch, history.selected_epoch)
                    break

        model = (PoissonParams if poisson else MfParams).from_arrays(best_arrays)
        if history_path:
            TrainingService.write_history(history, history_path)
        return model, history

    # --- hyperparameter selection ----------------------------------------------------------

    @staticmethod
    def _run_trial(ds, split, kind, cfg, tc, objective, k, threshold):
        model, history = TrainingService.train(ds, split, kind, cfg, tc)
        validation = split.validation
        trial = GridTrial(loss=cfg, validation_mse=history.best_validation_mse(),
                          selected_epoch=history.selected_epoch, params=model)
        if len(validation) == 0:
            return trial

        if objective == 'rating':
            predictions = RecommenderService.score_pairs(model, ds.user_index[validation], ds.item_index[validation])
            try:
                trial.validation_f = EvaluationService.fairness_f_arrays(
                    predictions - ds.ratings[validation],
                    ds.interaction_user_groups[validation],
                    ds.interaction_item_groups[validation],
                    ds.N,
                ).F
            except DegenerateSegments:
                trial.validation_f = math.inf
        else:
            try:
                _, trial.validation_ndcg = EvaluationService.ranking_accuracy(
                    model, ds, split, k, heldout=validation, threshold=threshold, seed=tc.seed)
                users = np.unique(ds.user_index[validation])
                recs = EvaluationService.recommend_all(model, ds, split, k, users=users)
                positives = validation[ds.ratings[validation] > threshold]
                P = EvaluationService.segment_distribution(*recs.pairs(), ds)
                Q = EvaluationService.segment_distribution(ds.user_index[positives], ds.item_index[positives], ds)
                trial.validation_kl, _ = EvaluationService.kl_divergence(P, Q)
            except (NoPositives, EmptyAfterFiltering, EmptyInput) as e:
                logger.warning("Ranking validation failed for %s: %s", cfg.to_dict(), e)
                trial.validation_ndcg = -math.inf
                trial.validation_kl = math.inf
        return trial

    @staticmethod
    def _accuracy_key(trial, objective):
        if objective == 'rating':
            return trial.validation_mse if math.isfinite(trial.validation_mse) else math.inf
        return -(trial.validation_ndcg if trial.validation_ndcg is not None else -math.inf)

    @staticmethod
    def _fairness_key(trial, objective):
        value = trial.validation_f if objective == 'rating' else trial.validation_kl
        return math.inf if value is None or not math.isfinite(value) else value

    @staticmethod
    def grid_search(ds, split, tc, variant='corr_error', lambda_grid=LAMBDA_GRID, alpha_grid=ALPHA_GRID,
                    kappa_grid=KAPPA_GRID, objective='rating', kind='mf', threads=1, k=10, threshold=3.0):
        """
        Two-stage selection: per κ choose (λ, α) by validation accuracy, then choose κ
        by validation fairness. Trials may run concurrently; results keep grid order.
        """
        if not lambda_grid or not kappa_grid or not alpha_grid:
            raise InvalidConfig("Hyperparameter grids must be non-empty")
        if objective not in ('rating', 'ranking'):
            raise InvalidConfig("Sweep objective must be 'rating' or 'ranking'")

        alphas = alpha_grid if variant in ('corr_error', 'corr_value') else alpha_grid[:1]
        configs = [
            LossConfig(variant=variant, alpha=alpha, kappa=tuple(kappa), lambda_l2=lam)
            for kappa in kappa_grid for lam in lambda_grid for alpha in alphas
        ]
        logger.info("Grid search over %d configurations with %d threads", len(configs), threads)

        def run(cfg):
            return TrainingService._run_trial(ds, split, kind, cfg, tc, objective, k, threshold)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                trials = list(pool.map(run, configs))
        else:
            trials = [run(cfg) for cfg in configs]

        per_kappa = {}
        for trial in trials:
            kappa = trial.loss.kappa
            best = per_kappa.get(kappa)
            if best is None or TrainingService._accuracy_key(trial, objective) < TrainingService._accuracy_key(best, objective):
                per_kappa[kappa] = trial

        selected = None
        for kappa in (tuple(kappa) for kappa in kappa_grid):
            candidate = per_kappa[kappa]
            if selected is None or TrainingService._fairness_key(candidate, objective) < TrainingService._fairness_key(selected, objective):
                selected = candidate
        logger.info("Selected %s", selected.loss.to_dict())
        return GridSearchResult(trials=trials, per_kappa=per_kappa, selected=selected, objective=objective)

    @staticmethod
    def select_lambda(ds, split, kind, tc, lambda_grid=LAMBDA_GRID, threads=1):
        """Pick λ for a plain-loss model by validation MSE"""
        result = TrainingService.grid_search(
            ds, split, tc, variant='plain', lambda_grid=lambda_grid, alpha_grid=(1.0,),
            kappa_grid=((0, 0, 0),), objective='rating', kind=kind, threads=threads,
        )
        return result.selected
