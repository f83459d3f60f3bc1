"""
Fairness loss service for the FairRec marketing-bias lab
Handles MSE, the error/value parity penalty, the reweighted loss and their analytic gradients
"""

import logging

import numpy as np

from models.dataset import UNKNOWN_GROUP
from models.recommenders import MfParams, PoissonParams
from models.training import LossBreakdown
from services.recommender_service import sigmoid, softplus
from utils.exceptions import DegenerateBatch, EmptyBatch, InvalidConfig, LengthMismatch

logger = logging.getLogger(__name__)

TERM_NAMES = ('user', 'product', 'market')


class FairnessService:
    """Service for batch objectives and their gradients"""

    @staticmethod
    def mse_loss(errors):
        """Mean of squared errors"""
        errors = np.asarray(errors, dtype=np.float64)
        if errors.size == 0:
            raise EmptyBatch("Cannot compute a loss on an empty batch")
        return float(np.mean(errors ** 2))

    # --- parity penalty -----------------------------------------------------------------

    @staticmethod
    def parity_term(values, groups):
        """
        Between/within variation ratio T = V/U of values across groups, and dT/dvalues.
        Raises DegenerateBatch for fewer than two groups or zero within-group variation.
        """
        values = np.asarray(values, dtype=np.float64)
        _, codes = np.unique(groups, return_inverse=True)
        n_groups = codes.max() + 1 if len(codes) else 0
        if n_groups < 2:
            raise DegenerateBatch("Parity term needs at least two groups")

        n = len(values)
        counts = np.bincount(codes, minlength=n_groups)
        group_means = np.bincount(codes, weights=values, minlength=n_groups) / counts
        overall = values.mean()
        own_mean = group_means[codes]

        between = float(np.sum(counts * (group_means - overall) ** 2) / n)
        within = float(np.sum((values - own_mean) ** 2) / n)
        if within <= np.finfo(np.float64).tiny:
            raise DegenerateBatch("Parity term has zero within-group variation")

        ratio = between / within
        gradient = (2.0 / n) * ((own_mean - overall) - ratio * (values - own_mean)) / within
        return ratio, gradient

    @staticmethod
    def _term_groups(user_groups, item_groups, n_item_groups):
        """Group labels per κ term: user group, product group, market segment"""
        return (
            user_groups,
            item_groups,
            user_groups * n_item_groups + item_groups,
        )

    @staticmethod
    def parity_terms(values, user_groups, item_groups, n_item_groups, kappa):
        """
        Sum of active parity terms over known-identity entries.
        Returns (penalty, gradient over all entries, skipped term count).
        """
        values = np.asarray(values, dtype=np.float64)
        user_groups = np.asarray(user_groups, dtype=np.int64)
        item_groups = np.asarray(item_groups, dtype=np.int64)
        known = np.flatnonzero(user_groups != UNKNOWN_GROUP)

        penalty = 0.0
        gradient = np.zeros(len(values))
        skipped = 0
        term_groups = FairnessService._term_groups(user_groups[known], item_groups[known], n_item_groups)
        for switch, name, groups in zip(kappa, TERM_NAMES, term_groups):
            if not switch:
                continue
            try:
                ratio, term_gradient = FairnessService.parity_term(values[known], groups)
            except DegenerateBatch as e:
                logger.debug("Skipping %s parity term: %s", name, e)
                skipped += 1
                continue
            penalty += ratio
            gradient[known] += term_gradient
        return penalty, gradient, skipped

    @staticmethod
    def parity_penalty(values, segments, kappa):
        """Parity penalty over values tagged with SegmentKeys; UNKNOWN-flagged keys are excluded"""
        segments = list(segments)
        if len(segments) != len(values):
            raise LengthMismatch("Values and segments must align")
        user_groups = np.array([key.m for key in segments], dtype=np.int64)
        item_groups = np.array([key.n for key in segments], dtype=np.int64)
        n_item_groups = int(item_groups.max()) + 1 if len(item_groups) else 1
        penalty, _, skipped = FairnessService.parity_terms(values, user_groups, item_groups, n_item_groups, kappa)
        if skipped:
            logger.info("Skipped %d degenerate parity terms", skipped)
        return penalty

    # --- reweighted loss ----------------------------------------------------------------

    @staticmethod
    def reweighted_terms(errors, user_groups, item_groups, n_item_groups, kappa):
        """
        κ-weighted average of per-group MSEs; user-axis terms use known-identity entries.
        Without the product term, UNKNOWN-identity entries keep their plain squared-error share.
        Returns (loss, gradient over all entries).
        """
        n = len(errors)
        if not any(kappa):
            return FairnessService.mse_loss(errors), 2.0 * errors / n

        known = user_groups != UNKNOWN_GROUP
        loss = 0.0
        gradient = np.zeros(n)
        if not kappa[1] and not known.all():
            unknown = np.flatnonzero(~known)
            loss += float(np.sum(errors[unknown] ** 2) / n)
            gradient[unknown] += 2.0 * errors[unknown] / n
        term_groups = FairnessService._term_groups(user_groups, item_groups, n_item_groups)
        term_masks = (known, np.ones(len(errors), dtype=bool), known)
        for switch, groups, mask in zip(kappa, term_groups, term_masks):
            if not switch or not mask.any():
                continue
            positions = np.flatnonzero(mask)
            _, codes = np.unique(groups[positions], return_inverse=True)
            counts = np.bincount(codes)
            n_groups = len(counts)
            squared = errors[positions] ** 2
            loss += float(np.sum(np.bincount(codes, weights=squared) / counts) / n_groups)
            gradient[positions] += 2.0 * errors[positions] / (n_groups * counts[codes])
        return loss, gradient

    # --- full objective ---------------------------------------------------------------------

    @staticmethod
    def _as_arrays(params):
        if isinstance(params, MfParams):
            return params.to_arrays(), isinstance(params, PoissonParams)
        return params, False

    @staticmethod
    def evaluate(batch, params, cfg, poisson=None):
        """
        Objective and gradient for one batch.
        params: MfParams/PoissonParams or the optimizer's array dict (poisson flag then required)
        Returns (LossBreakdown, gradient dict keyed like MfParams.to_arrays()).
        """
        if len(batch) == 0:
            raise EmptyBatch("Cannot compute a loss on an empty batch")
        arrays, is_poisson = FairnessService._as_arrays(params)
        if poisson is not None:
            is_poisson = poisson
        if is_poisson and cfg.variant != 'plain':
            raise InvalidConfig("PoissonMF supports the plain loss only")

        users, items, ratings = batch.users, batch.items, batch.ratings
        n = len(batch)
        gamma_item = arrays['gamma_item'][items]
        gamma_user = arrays['gamma_user'][users]
        linear = (arrays['b0'][0] + arrays['b_item'][items] + arrays['b_user'][users]
                  + np.einsum('ij,ij->i', gamma_item, gamma_user))

        penalty = 0.0
        skipped = 0
        if is_poisson:
            rate = softplus(linear)
            data_loss = float(np.mean(rate - ratings * np.log(rate)))
            grad_linear = (1.0 - ratings / rate) * sigmoid(linear) / n
        else:
            errors = linear - ratings
            if cfg.variant == 'reweighted':
                data_loss, grad_linear = FairnessService.reweighted_terms(
                    errors, batch.user_groups, batch.item_groups, batch.N, cfg.kappa)
            else:
                data_loss = FairnessService.mse_loss(errors)
                grad_linear = 2.0 * errors / n
                if cfg.uses_parity and cfg.alpha > 0:
                    target = errors if cfg.variant == 'corr_error' else linear
                    penalty, grad_penalty, skipped = FairnessService.parity_terms(
                        target, batch.user_groups, batch.item_groups, batch.N, cfg.kappa)
                    grad_linear = grad_linear + cfg.alpha * grad_penalty

        gradient = {
            'b0': np.array([grad_linear.sum()]),
            'b_item': np.bincount(items, weights=grad_linear, minlength=len(arrays['b_item'])),
            'b_user': np.bincount(users, weights=grad_linear, minlength=len(arrays['b_user'])),
            'gamma_item': np.zeros_like(arrays['gamma_item']),
            'gamma_user': np.zeros_like(arrays['gamma_user']),
        }
        np.add.at(gradient['gamma_item'], items, grad_linear[:, None] * gamma_user)
        np.add.at(gradient['gamma_user'], users, grad_linear[:, None] * gamma_item)

        regularization = 0.0
        if cfg.lambda_l2 > 0:
            # each touched row is weighted by its share of the batch, like the batch-mean data term
            for offset, embedding, index in (('b_item', 'gamma_item', items), ('b_user', 'gamma_user', users)):
                rows, counts = np.unique(index, return_counts=True)
                weights = cfg.lambda_l2 * counts / n
                norms = arrays[offset][rows] ** 2 + np.sum(arrays[embedding][rows] ** 2, axis=1)
                regularization += float(np.sum(weights * norms))
                gradient[offset][rows] += 2.0 * weights * arrays[offset][rows]
                gradient[embedding][rows] += 2.0 * weights[:, None] * arrays[embedding][rows]

        breakdown = LossBreakdown(
            total=data_loss + cfg.alpha * penalty + regularization,
            data_loss=data_loss,
            penalty=penalty,
            regularization=regularization,
            skipped_terms=skipped,
        )
        return breakdown, gradient

    @staticmethod
    def total_loss(batch, params, cfg):
        """Scalar objective of one batch"""
        return FairnessService.evaluate(batch, params, cfg)[0].total

    @staticmethod
    def loss_gradient(batch, params, cfg):
        """Analytic gradient of total_loss, keyed like MfParams.to_arrays()"""
        return FairnessService.evaluate(batch, params, cfg)[1]
