"""
Recommender parameter models for the FairRec marketing-bias lab
MfParams, PoissonParams and NeighborModel
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

MODEL_KINDS = ('mf', 'poisson_mf', 'item_cf', 'user_cf')

DISPLAY_NAMES = {
    'mf': 'MF',
    'poisson_mf': 'PoissonMF',
    'item_cf': 'itemCF',
    'user_cf': 'userCF',
}


@dataclass(eq=False)
class MfParams:
    """Global intercept, user/item offsets and d-dimensional embeddings"""
    b0: float
    b_item: np.ndarray
    b_user: np.ndarray
    gamma_item: np.ndarray
    gamma_user: np.ndarray

    kind = 'mf'

    @property
    def d(self):
        return self.gamma_item.shape[1]

    @property
    def n_users(self):
        return self.b_user.shape[0]

    @property
    def n_items(self):
        return self.b_item.shape[0]

    @classmethod
    def zeros(cls, n_users, n_items, d, b0=0.0):
        return cls(
            b0=float(b0),
            b_item=np.zeros(n_items),
            b_user=np.zeros(n_users),
            gamma_item=np.zeros((n_items, d)),
            gamma_user=np.zeros((n_users, d)),
        )

    def to_arrays(self):
        """Copy into the flat dict the optimizer updates in place"""
        return {
            'b0': np.array([self.b0], dtype=np.float64),
            'b_item': self.b_item.astype(np.float64, copy=True),
            'b_user': self.b_user.astype(np.float64, copy=True),
            'gamma_item': self.gamma_item.astype(np.float64, copy=True),
            'gamma_user': self.gamma_user.astype(np.float64, copy=True),
        }

    @classmethod
    def from_arrays(cls, arrays):
        return cls(
            b0=float(arrays['b0'][0]),
            b_item=np.array(arrays['b_item'], dtype=np.float64),
            b_user=np.array(arrays['b_user'], dtype=np.float64),
            gamma_item=np.array(arrays['gamma_item'], dtype=np.float64),
            gamma_user=np.array(arrays['gamma_user'], dtype=np.float64),
        )

    def linear_scores(self, users, items):
        """b0 + b_i + b_u + <γ_i, γ_u> for aligned index arrays"""
        return (self.b0 + self.b_item[items] + self.b_user[users]
                + np.einsum('ij,ij->i', self.gamma_item[items], self.gamma_user[users]))

    def linear_item_scores(self, user):
        """Linear score of one user against every item"""
        return self.b0 + self.b_item + self.b_user[user] + self.gamma_item @ self.gamma_user[user]

    def is_finite(self):
        return bool(np.isfinite(self.b0) and all(
            np.all(np.isfinite(a)) for a in (self.b_item, self.b_user, self.gamma_item, self.gamma_user)
        ))

    def __repr__(self):
        return f'<{self.__class__.__name__} users={self.n_users} items={self.n_items} d={self.d}>'


@dataclass(eq=False)
class PoissonParams(MfParams):
    """Same shape as MfParams; scores pass through the softplus positivity link"""

    kind = 'poisson_mf'


@dataclass(eq=False)
class NeighborModel:
    """
    Neighborhood CF model.
    similarity: symmetric CSR matrix over items (axis='item') or users (axis='user')
    train_matrix: users×items CSR of training ratings
    user_means / item_means: NaN where the user / item has no training rating
    """
    axis: str
    similarity: sparse.csr_matrix
    k_neighbors: int
    global_mean: float
    user_means: np.ndarray
    item_means: np.ndarray
    train_matrix: sparse.csr_matrix

    @property
    def kind(self):
        return 'item_cf' if self.axis == 'item' else 'user_cf'

    @property
    def n_users(self):
        return self.train_matrix.shape[0]

    @property
    def n_items(self):
        return self.train_matrix.shape[1]

    @property
    def d(self):
        return 0

    def __repr__(self):
        return f'<NeighborModel {self.axis} k={self.k_neighbors} nnz={self.similarity.nnz}>'
