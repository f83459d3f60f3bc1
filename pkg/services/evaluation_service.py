"""
Evaluation service for the FairRec marketing-bias lab
Handles accuracy, the fairness F-statistic, top-K lists, AUC/NDCG, segment KL divergence and diff matrices
"""

import logging
import math

import numpy as np
from scipy import special, stats

from models.dataset import UNKNOWN_GROUP
from models.metrics import FairnessF, MetricsReport, RecList, SegmentDistribution
from services.recommender_service import RecommenderService
from services.stats_service import StatsService
from utils.exceptions import (
    DegenerateSegments, DimensionMismatch, EmptyAfterFiltering, EmptyInput, LengthMismatch,
    NoPositives,
)

logger = logging.getLogger(__name__)

KL_SMOOTHING = 1e-9
MAX_EXHAUSTIVE_ITEMS = 100000
SAMPLED_NEGATIVES = 100


class EvaluationService:
    """Service for measuring accuracy and fairness of fitted models"""

    # --- rating prediction ---------------------------------------------------------

    @staticmethod
    def accuracy(predictions, truths):
        """(MSE, MAE) of aligned predictions and truths"""
        predictions = np.asarray(predictions, dtype=np.float64)
        truths = np.asarray(truths, dtype=np.float64)
        if len(predictions) != len(truths):
            raise LengthMismatch(f"{len(predictions)} predictions for {len(truths)} truths")
        if len(predictions) == 0:
            raise EmptyInput("Accuracy needs at least one prediction")
        errors = predictions - truths
        return float(np.mean(errors ** 2)), float(np.mean(np.abs(errors)))

    @staticmethod
    def fairness_f_arrays(errors, user_groups, item_groups, n_item_groups, n_cells=None):
        """One-way F-statistic of errors across populated segments; UNKNOWN users dropped"""
        errors = np.asarray(errors, dtype=np.float64)
        user_groups = np.asarray(user_groups, dtype=np.int64)
        item_groups = np.asarray(item_groups, dtype=np.int64)
        if not (len(errors) == len(user_groups) == len(item_groups)):
            raise LengthMismatch("Errors and segments must align")

        known = user_groups != UNKNOWN_GROUP
        errors = errors[known]
        segments = user_groups[known] * n_item_groups + item_groups[known]
        _, codes = np.unique(segments, return_inverse=True)
        populated = int(codes.max()) + 1 if len(codes) else 0
        n = len(errors)
        if populated < 2:
            raise DegenerateSegments(f"F-statistic needs two populated segments, found {populated}")
        if n <= populated:
            raise DegenerateSegments("F-statistic needs more observations than populated segments")
        if n_cells is not None and populated < n_cells:
            logger.info("Only %d of %d segments populated; F uses dof (%d, %d)",
                        populated, n_cells, populated - 1, n - populated)

        counts = np.bincount(codes)
        means = np.bincount(codes, weights=errors) / counts
        between = float(np.sum(counts * (means - errors.mean()) ** 2))
        within = float(np.sum((errors - means[codes]) ** 2))
        dof_num = populated - 1
        dof_den = n - populated

        if between <= 1e-12 * max(between + within, 1e-300):
            F, p_value = 0.0, 1.0
        elif within == 0:
            F, p_value = math.inf, 0.0
        else:
            F = (between / dof_num) / (within / dof_den)
            p_value = StatsService.f_sf(F, dof_num, dof_den)
        return FairnessF(F=F, dof_num=dof_num, dof_den=dof_den, p_value=p_value, populated=populated)

    @staticmethod
    def fairness_f(errors, segments):
        """F-statistic over errors tagged with SegmentKeys"""
        segments = list(segments)
        if len(segments) != len(errors):
            raise LengthMismatch("Errors and segments must align")
        user_groups = np.array([key.m for key in segments], dtype=np.int64)
        item_groups = np.array([key.n for key in segments], dtype=np.int64)
        n_item_groups = int(item_groups.max()) + 1 if len(item_groups) else 1
        return EvaluationService.fairness_f_arrays(errors, user_groups, item_groups, n_item_groups)

    @staticmethod
    def diff_matrix_arrays(errors, user_groups, item_groups, M, N):
        """Out-segment MSE minus in-segment MSE per cell; NaN where a side is empty"""
        errors = np.asarray(errors, dtype=np.float64)
        user_groups = np.asarray(user_groups, dtype=np.int64)
        item_groups = np.asarray(item_groups, dtype=np.int64)
        known = user_groups != UNKNOWN_GROUP
        squared = errors[known] ** 2
        cells = user_groups[known] * N + item_groups[known]

        diff = np.full((M, N), np.nan)
        for m in range(M):
            for n in range(N):
                inside = cells == m * N + n
                if inside.any() and not inside.all():
                    diff[m, n] = squared[~inside].mean() - squared[inside].mean()
        return diff

    @staticmethod
    def diff_matrix(errors, segments, M, N):
        segments = list(segments)
        if len(segments) != len(errors):
            raise LengthMismatch("Errors and segments must align")
        return EvaluationService.diff_matrix_arrays(
            errors, [key.m for key in segments], [key.n for key in segments], M, N)

    # --- ranking ----------------------------------------------------------------------

    @staticmethod
    def items_by_user(ds, indices):
        """{user index: sorted unique item indices} over the given interactions"""
        indices = np.asarray(indices, dtype=np.int64)
        users = ds.user_index[indices]
        items = ds.item_index[indices]
        order = np.lexsort((items, users))
        users, items = users[order], items[order]
        boundaries = np.flatnonzero(np.diff(users)) + 1
        grouped = {}
        for user_items, user in zip(np.split(items, boundaries), users[np.r_[0, boundaries]] if len(users) else []):
            grouped[int(user)] = np.unique(user_items)
        return grouped

    @staticmethod
    def rank_items(scores, K, exclude=()):
        """Indices of the K highest scores outside exclude; ties by ascending index"""
        scores = np.asarray(scores, dtype=np.float64)
        allowed = np.ones(len(scores), dtype=bool)
        allowed[np.asarray(exclude, dtype=np.int64)] = False
        candidates = np.flatnonzero(allowed)
        order = np.lexsort((candidates, -scores[candidates]))
        return candidates[order[:K]]

    @staticmethod
    def topk(model, ds, user, K, exclude=()):
        """Top-K unseen items for one user"""
        return EvaluationService.rank_items(RecommenderService.score_items(model, user), K, exclude)

    @staticmethod
    def recommend_all(model, ds, split, K=10, users=None):
        """RecList for every user with a test interaction (or the given users)"""
        train_items = EvaluationService.items_by_user(ds, split.train)
        if users is None:
            users = np.unique(ds.user_index[split.test])
        empty = np.array([], dtype=np.int64)
        lists = {
            int(user): [int(i) for i in EvaluationService.topk(model, ds, user, K, train_items.get(int(user), empty))]
            for user in users
        }
        return RecList(items=lists, k=K)

    @staticmethod
    def _user_auc(scores, positives, negatives, rng, exhaustive):
        if exhaustive:
            ranks = stats.rankdata(np.concatenate([scores[positives], scores[negatives]]))
            n_pos, n_neg = len(positives), len(negatives)
            return (ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

        wins = 0.0
        total = 0
        for positive in positives:
            sample = rng.choice(negatives, size=SAMPLED_NEGATIVES, replace=len(negatives) < SAMPLED_NEGATIVES)
            wins += np.sum(scores[positive] > scores[sample]) + 0.5 * np.sum(scores[positive] == scores[sample])
            total += len(sample)
        return wins / total

    @staticmethod
    def _user_ndcg(ranked, positives, K):
        hits = np.isin(ranked[:K], positives)
        discounts = 1.0 / np.log2(np.arange(2, K + 2))
        ideal = discounts[:min(len(positives), K)].sum()
        return float(np.sum(discounts[:len(hits)][hits]) / ideal)

    @staticmethod
    def ranking_accuracy(model, ds, split, K=10, heldout=None, threshold=3.0, seed=0):
        """
        Mean per-user AUC and NDCG@K over users with at least one held-out positive
        (rating > threshold). Negatives are all items neither trained on nor positive.
        """
        heldout = split.test if heldout is None else np.asarray(heldout, dtype=np.int64)
        if len(heldout) == 0:
            raise EmptyInput("Ranking evaluation needs held-out interactions")
        positive_rows = heldout[ds.ratings[heldout] > threshold]
        if len(positive_rows) == 0:
            raise NoPositives(f"No held-out interactions rated above {threshold}")

        train_items = EvaluationService.items_by_user(ds, split.train)
        positives_by_user = EvaluationService.items_by_user(ds, positive_rows)
        exhaustive = ds.n_items <= MAX_EXHAUSTIVE_ITEMS
        rng = np.random.default_rng(seed)
        empty = np.array([], dtype=np.int64)

        aucs = []
        ndcgs = []
        for user in sorted(positives_by_user):
            seen = train_items.get(user, empty)
            positives = np.setdiff1d(positives_by_user[user], seen)
            if len(positives) == 0:
                continue
            scores = RecommenderService.score_items(model, user)
            unseen = np.ones(ds.n_items, dtype=bool)
            unseen[seen] = False
            unseen[positives] = False
            negatives = np.flatnonzero(unseen)

            ndcgs.append(EvaluationService._user_ndcg(EvaluationService.rank_items(scores, K, seen), positives, K))
            if len(negatives):
                aucs.append(EvaluationService._user_auc(scores, positives, negatives, rng, exhaustive))

        if not ndcgs:
            raise NoPositives("Every held-out positive is already in the training set")
        auc = float(np.mean(aucs)) if aucs else None
        return auc, float(np.mean(ndcgs))

    # --- segment distributions -------------------------------------------------------

    @staticmethod
    def segment_distribution(users, items, ds):
        """Normalized segment frequencies of (user, item) pairs; UNKNOWN users dropped"""
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        user_groups = ds.user_groups[users]
        known = user_groups != UNKNOWN_GROUP
        if not known.any():
            raise EmptyAfterFiltering("No pairs with a known user identity")
        cells = user_groups[known] * ds.N + ds.item_groups[items[known]]
        counts = np.bincount(cells, minlength=ds.M * ds.N).reshape(ds.M, ds.N)
        return SegmentDistribution(probabilities=counts / counts.sum(), count=int(counts.sum()))

    @staticmethod
    def kl_divergence(P, Q):
        """
        Σ p log(p/q) in nats. Returns (value, smoothed); smoothing is applied when some
        q is zero where p is positive.
        """
        p = np.asarray(P.probabilities, dtype=np.float64)
        q = np.asarray(Q.probabilities, dtype=np.float64)
        if p.shape != q.shape:
            raise DimensionMismatch(f"Distribution shapes differ: {p.shape} vs {q.shape}")
        smoothed = bool(np.any((q == 0) & (p > 0)))
        if smoothed:
            p = (p + KL_SMOOTHING) / (p + KL_SMOOTHING).sum()
            q = (q + KL_SMOOTHING) / (q + KL_SMOOTHING).sum()
            logger.info("KL divergence smoothed: reference distribution has empty segments")
        return float(np.sum(special.rel_entr(p, q))), smoothed

    # --- full report ---------------------------------------------------------------------

    @staticmethod
    def evaluate_model(model, ds, split, model_name, k=10, reference='positives', threshold=3.0,
                       seed=0, model_config=None):
        """Every test-split metric of one fitted model"""
        test = split.test
        if len(test) == 0:
            raise EmptyInput("Test split is empty")

        users = ds.user_index[test]
        items = ds.item_index[test]
        predictions = RecommenderService.score_pairs(model, users, items)
        errors = predictions - ds.ratings[test]
        mse, mae = EvaluationService.accuracy(predictions, ds.ratings[test])
        user_groups = ds.interaction_user_groups[test]
        item_groups = ds.interaction_item_groups[test]

        try:
            fairness = EvaluationService.fairness_f_arrays(errors, user_groups, item_groups, ds.N, ds.M * ds.N)
        except DegenerateSegments as e:
            logger.warning("F-statistic unavailable: %s", e)
            fairness = None

        try:
            auc, ndcg = EvaluationService.ranking_accuracy(model, ds, split, k, threshold=threshold, seed=seed)
        except NoPositives as e:
            logger.warning("Ranking metrics unavailable: %s", e)
            auc, ndcg = None, None

        kl, smoothed = None, False
        distributions = {}
        try:
            recs = EvaluationService.recommend_all(model, ds, split, k)
            rec_users, rec_items = recs.pairs()
            reference_rows = test if reference == 'all' else test[ds.ratings[test] > threshold]
            P = EvaluationService.segment_distribution(rec_users, rec_items, ds)
            Q = EvaluationService.segment_distribution(ds.user_index[reference_rows], ds.item_index[reference_rows], ds)
            kl, smoothed = EvaluationService.kl_divergence(P, Q)
            distributions = {'recommended': P.probabilities, 'reference': Q.probabilities}
        except EmptyAfterFiltering as e:
            logger.warning("KL divergence unavailable: %s", e)

        return MetricsReport(
            model_name=model_name,
            dataset_name=ds.name,
            mse=mse,
            mae=mae,
            fairness_f=fairness,
            auc=auc,
            ndcg_at_k=ndcg,
            kl=kl,
            kl_smoothed=smoothed,
            diff_matrix=EvaluationService.diff_matrix_arrays(errors, user_groups, item_groups, ds.M, ds.N),
            k=k,
            user_labels=ds.vocab_user.labels,
            item_labels=ds.vocab_item.labels,
            model_config=model_config or {},
            distributions=distributions,
        )
