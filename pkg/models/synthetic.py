"""
Synthetic marketplace configuration for the FairRec marketing-bias lab
"""

from dataclasses import dataclass, field

import numpy as np

from utils.exceptions import InvalidConfig


@dataclass(frozen=True, eq=False)
class SynthConfig:
    """
    Generator settings.
    selection_bias: M×N nonnegative propensities (user group × item group)
    segment_shift: M×N additive rating shift
    latent_sd: per-entry sd of the latent factors; None derives it from noise_sd
    """
    n_users: int = 200
    n_items: int = 100
    M: int = 2
    N: int = 2
    interactions_per_user: int = 20
    selection_bias: np.ndarray = None
    rating_base: float = 3.5
    segment_shift: np.ndarray = None
    latent_rank: int = 2
    noise_sd: float = 0.5
    latent_sd: float = None
    seed: int = 0
    name: str = 'synthetic'
    start_timestamp: int = 1388534400  # 2014-01-01 UTC
    span_days: int = 1826
    user_labels: tuple = field(default=None)
    item_labels: tuple = field(default=None)

    def __post_init__(self):
        bias = np.ones((self.M, self.N)) if self.selection_bias is None else np.array(self.selection_bias, dtype=np.float64)
        shift = np.zeros((self.M, self.N)) if self.segment_shift is None else np.array(self.segment_shift, dtype=np.float64)
        object.__setattr__(self, 'selection_bias', bias)
        object.__setattr__(self, 'segment_shift', shift)
        if self.user_labels is None:
            object.__setattr__(self, 'user_labels', tuple(f'U{m}' for m in range(self.M)))
        if self.item_labels is None:
            object.__setattr__(self, 'item_labels', tuple(f'P{n}' for n in range(self.N)))

    def validate(self):
        """Raise InvalidConfig describing the first violated constraint"""
        for name in ('n_users', 'n_items', 'M', 'N', 'interactions_per_user', 'latent_rank', 'span_days'):
            if int(getattr(self, name)) < 1:
                raise InvalidConfig(f"{name} must be a positive integer")
        if self.N > self.n_items:
            raise InvalidConfig("Every item group needs at least one item (N <= n_items)")
        if self.selection_bias.shape != (self.M, self.N) or self.segment_shift.shape != (self.M, self.N):
            raise InvalidConfig(f"selection_bias and segment_shift must be {self.M}×{self.N}")
        if np.any(self.selection_bias < 0) or not np.all(np.isfinite(self.selection_bias)):
            raise InvalidConfig("selection_bias must be nonnegative and finite")
        if np.any(self.selection_bias.sum(axis=1) <= 0):
            raise InvalidConfig("Every selection_bias row needs a positive entry")
        if not np.all(np.isfinite(self.segment_shift)):
            raise InvalidConfig("segment_shift must be finite")
        if self.noise_sd < 0 or (self.latent_sd is not None and self.latent_sd < 0):
            raise InvalidConfig("Standard deviations must be nonnegative")
        if self.interactions_per_user > self.span_days:
            raise InvalidConfig("interactions_per_user cannot exceed span_days")
        if len(self.user_labels) != self.M or len(self.item_labels) != self.N:
            raise InvalidConfig("Label counts must match M and N")
        if self.seed < 0:
            raise InvalidConfig("seed must be nonnegative")
        return True

    def to_dict(self):
        return {
            'n_users': self.n_users, 'n_items': self.n_items, 'M': self.M, 'N': self.N,
            'interactions_per_user': self.interactions_per_user,
            'selection_bias': self.selection_bias.tolist(), 'rating_base': self.rating_base,
            'segment_shift': self.segment_shift.tolist(), 'latent_rank': self.latent_rank,
            'noise_sd': self.noise_sd, 'latent_sd': self.latent_sd, 'seed': self.seed, 'name': self.name,
        }
