"""
Synthetic marketplace service for the FairRec marketing-bias lab
Generates interaction data with controllable selection bias and segment rating shifts
"""

import logging

import numpy as np

from models.dataset import Dataset, GroupVocab, Interaction

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400


class SyntheticService:
    """Service for generating seeded synthetic datasets"""

    @staticmethod
    def latent_sd(cfg):
        """Per-entry factor sd so that the inner-product term has variance ≈ noise_sd²"""
        if cfg.latent_sd is not None:
            return float(cfg.latent_sd)
        return float((cfg.noise_sd ** 2 / cfg.latent_rank) ** 0.25)

    @staticmethod
    def generate(cfg):
        """
        Build a Dataset: balanced group assignment, propensity-weighted item draws per
        user, rating = base + latent term + segment shift + noise clipped to [1, 5].
        """
        cfg.validate()
        rng = np.random.default_rng(cfg.seed)

        user_groups = rng.permutation(np.arange(cfg.n_users) % cfg.M)
        item_groups = rng.permutation(np.arange(cfg.n_items) % cfg.N)
        sd = SyntheticService.latent_sd(cfg)
        user_factors = rng.normal(0.0, sd, size=(cfg.n_users, cfg.latent_rank))
        item_factors = rng.normal(0.0, sd, size=(cfg.n_items, cfg.latent_rank))
        group_sizes = np.bincount(item_groups, minlength=cfg.N)

        interactions = []
        for user in range(cfg.n_users):
            m = user_groups[user]
            weights = cfg.selection_bias[m, item_groups] / group_sizes[item_groups]
            weights = weights / weights.sum()
            n_draws = min(cfg.interactions_per_user, int(np.count_nonzero(weights)))
            items = rng.choice(cfg.n_items, size=n_draws, replace=False, p=weights)

            latent = item_factors[items] @ user_factors[user]
            shift = cfg.segment_shift[m, item_groups[items]]
            noise = rng.normal(0.0, cfg.noise_sd, size=n_draws)
            ratings = np.clip(cfg.rating_base + latent + shift + noise, 1.0, 5.0)
            days = np.sort(rng.choice(cfg.span_days, size=n_draws, replace=False))

            for item, rating, day in zip(items, ratings, days):
                interactions.append(Interaction(
                    user_id=f'u{user:05d}',
                    item_id=f'i{item:05d}',
                    rating=float(rating),
                    timestamp=int(cfg.start_timestamp + day * SECONDS_PER_DAY),
                ))

        user_group = {f'u{u:05d}': cfg.user_labels[g] for u, g in enumerate(user_groups)}
        item_group = {f'i{i:05d}': cfg.item_labels[g] for i, g in enumerate(item_groups)}
        dataset = Dataset.build(
            interactions, user_group, item_group,
            GroupVocab('user identity', tuple(cfg.user_labels)),
            GroupVocab('product image', tuple(cfg.item_labels)),
            name=cfg.name,
        )
        logger.info("Generated %r", dataset)
        return dataset
