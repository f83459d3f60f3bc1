"""
Recommender service for the FairRec marketing-bias lab
Handles MF / PoissonMF prediction, neighborhood CF fitting and scoring, and model files
"""

import logging
import os

import numpy as np
from scipy import sparse

from models.recommenders import MODEL_KINDS, MfParams, NeighborModel, PoissonParams
from utils.binary_store import read_container, write_container
from utils.exceptions import EmptyInput, IndexOutOfRange, InvalidConfig, MissingArtifact

logger = logging.getLogger(__name__)

MODEL_KIND = 'model'
MODEL_FORMAT_VERSION = 1
INIT_SCALE = 0.01
MIN_CO_RATINGS = 2


def softplus(z):
    """log(1 + exp(z)), floored at the smallest positive double"""
    return np.maximum(np.logaddexp(0.0, z), np.finfo(np.float64).tiny)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def inverse_softplus(y):
    y = float(y)
    return y + np.log(-np.expm1(-y))


class RecommenderService:
    """Service for building, scoring and persisting recommenders"""

    # --- parameter models ----------------------------------------------------------

    @staticmethod
    def init_params(kind, n_users, n_items, d, seed, train_mean=0.0):
        """Intercept at the training mean, zero offsets, small uniform embeddings"""
        rng = np.random.default_rng(seed)
        if kind == 'mf':
            cls, b0 = MfParams, float(train_mean)
        elif kind == 'poisson_mf':
            cls, b0 = PoissonParams, inverse_softplus(max(float(train_mean), 1e-3))
        else:
            raise InvalidConfig(f"{kind!r} is not a factorization model")
        return cls(
            b0=b0,
            b_item=np.zeros(n_items),
            b_user=np.zeros(n_users),
            gamma_item=rng.uniform(-INIT_SCALE, INIT_SCALE, size=(n_items, d)),
            gamma_user=rng.uniform(-INIT_SCALE, INIT_SCALE, size=(n_users, d)),
        )

    @staticmethod
    def _check_indices(model, users, items):
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if users.shape != items.shape:
            raise IndexOutOfRange("User and item index arrays differ in length")
        if users.size and (users.min() < 0 or users.max() >= model.n_users):
            raise IndexOutOfRange(f"User index out of range [0, {model.n_users})")
        if items.size and (items.min() < 0 or items.max() >= model.n_items):
            raise IndexOutOfRange(f"Item index out of range [0, {model.n_items})")
        return users, items

    @staticmethod
    def predict_mf(params, u, i):
        """s = b0 + b_i + b_u + <γ_i, γ_u>"""
        users, items = RecommenderService._check_indices(params, [u], [i])
        return float(params.linear_scores(users, items)[0])

    @staticmethod
    def predict_poisson(params, u, i):
        """Softplus-linked factorization score; strictly positive"""
        users, items = RecommenderService._check_indices(params, [u], [i])
        return float(softplus(params.linear_scores(users, items))[0])

    # --- neighborhood models ----------------------------------------------------------

    @staticmethod
    def _rating_matrix(ds, train):
        """users×items CSR of training ratings; repeated pairs are averaged"""
        train = np.asarray(train, dtype=np.int64)
        shape = (ds.n_users, ds.n_items)
        users = ds.user_index[train]
        items = ds.item_index[train]
        sums = sparse.coo_matrix((ds.ratings[train], (users, items)), shape=shape).tocsr()
        counts = sparse.coo_matrix((np.ones(len(train)), (users, items)), shape=shape).tocsr()
        sums.sum_duplicates()
        counts.sum_duplicates()
        matrix = sums.copy()
        matrix.data = sums.data / counts.data
        return matrix

    @staticmethod
    def _row_means(matrix):
        counts = np.diff(matrix.indptr)
        sums = np.asarray(matrix.sum(axis=1)).ravel()
        means = np.full(matrix.shape[0], np.nan)
        rated = counts > 0
        means[rated] = sums[rated] / counts[rated]
        return means

    @staticmethod
    def _centered_cosine(centered, pattern):
        """Cosine between the columns of centered; zero below MIN_CO_RATINGS co-ratings"""
        gram = (centered.T @ centered).tocsr()
        co_ratings = (pattern.T @ pattern).tocsr()
        gram = gram.multiply(co_ratings >= MIN_CO_RATINGS).tocsr()

        norms = np.sqrt(np.asarray(centered.multiply(centered).sum(axis=0)).ravel())
        inverse = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        scale = sparse.diags(inverse)
        similarity = (scale @ gram @ scale).tocsr()
        similarity = (similarity - sparse.diags(similarity.diagonal())).tocsr()
        similarity.data = np.clip(similarity.data, -1.0, 1.0)
        similarity.eliminate_zeros()
        similarity.sort_indices()
        return similarity

    @staticmethod
    def fit_neighbor(ds, train, axis='item', k=50):
        """Fit itemCF (axis='item') or userCF (axis='user') on the training interactions"""
        if axis not in ('item', 'user'):
            raise InvalidConfig(f"Neighborhood axis must be 'item' or 'user', got {axis!r}")
        if len(train) == 0:
            raise EmptyInput("Neighborhood model needs training interactions")

        matrix = RecommenderService._rating_matrix(ds, train)
        user_means = RecommenderService._row_means(matrix)
        item_means = RecommenderService._row_means(matrix.T.tocsr())
        global_mean = float(matrix.data.mean())

        coo = matrix.tocoo()
        pattern = sparse.csr_matrix((np.ones(coo.nnz), (coo.row, coo.col)), shape=matrix.shape)
        if axis == 'item':
            centered = sparse.csr_matrix((coo.data - item_means[coo.col], (coo.row, coo.col)), shape=matrix.shape)
            similarity = RecommenderService._centered_cosine(centered, pattern)
        else:
            centered = sparse.csr_matrix((coo.data - user_means[coo.row], (coo.row, coo.col)), shape=matrix.shape)
            similarity = RecommenderService._centered_cosine(centered.T.tocsr(), pattern.T.tocsr())

        model = NeighborModel(
            axis=axis,
            similarity=similarity,
            k_neighbors=int(k),
            global_mean=global_mean,
            user_means=user_means,
            item_means=item_means,
            train_matrix=matrix,
        )
        logger.info("Fitted %r", model)
        return model

    @staticmethod
    def _top_k_mask(weights, eligible, k):
        """Mask of the k largest eligible weights along axis 0"""
        if weights.shape[0] <= k:
            return eligible
        ranked = np.where(eligible, weights, -np.inf)
        top = np.argpartition(-ranked, k - 1, axis=0)[:k]
        mask = np.zeros_like(eligible)
        np.put_along_axis(mask, top, True, axis=0)
        return mask & eligible

    @staticmethod
    def _fallback(model, user, items, predictions):
        """Fill NaN predictions with user mean, then item mean, then global mean"""
        missing = np.isnan(predictions)
        if missing.any() and not np.isnan(model.user_means[user]):
            predictions[missing] = model.user_means[user]
            missing = np.isnan(predictions)
        if missing.any():
            predictions[missing] = model.item_means[items[missing]]
            missing = np.isnan(predictions)
        predictions[missing] = model.global_mean
        return predictions

    @staticmethod
    def _neighbor_scores(model, user, items):
        """Weighted-average completion for one user over an array of items"""
        items = np.asarray(items, dtype=np.int64)
        predictions = np.full(len(items), np.nan)
        row = model.train_matrix.getrow(user)

        if model.axis == 'item':
            rated = row.indices
            if len(rated):
                centered = row.data - model.item_means[rated]
                weights = model.similarity[items][:, rated].toarray().T
                mask = RecommenderService._top_k_mask(weights, weights != 0, model.k_neighbors)
                numerator = np.sum(np.where(mask, weights * centered[:, None], 0.0), axis=0)
                denominator = np.sum(np.where(mask, np.abs(weights), 0.0), axis=0)
                usable = (denominator > 0) & ~np.isnan(model.item_means[items])
                predictions[usable] = model.item_means[items[usable]] + numerator[usable] / denominator[usable]
        else:
            neighbor_row = model.similarity.getrow(user)
            neighbors = neighbor_row.indices
            if len(neighbors) and not np.isnan(model.user_means[user]):
                block = model.train_matrix[neighbors][:, items].tocoo()
                rated = np.zeros((len(neighbors), len(items)), dtype=bool)
                centered = np.zeros((len(neighbors), len(items)))
                rated[block.row, block.col] = True
                centered[block.row, block.col] = block.data - model.user_means[neighbors[block.row]]
                weights = np.repeat(neighbor_row.data[:, None], len(items), axis=1)
                mask = RecommenderService._top_k_mask(weights, rated, model.k_neighbors)
                numerator = np.sum(np.where(mask, weights * centered, 0.0), axis=0)
                denominator = np.sum(np.where(mask, np.abs(weights), 0.0), axis=0)
                usable = denominator > 0
                predictions[usable] = model.user_means[user] + numerator[usable] / denominator[usable]

        return RecommenderService._fallback(model, user, items, predictions)

    @staticmethod
    def predict_neighbor(model, ds, u, i):
        """Neighborhood prediction with the user/item/global mean fallback cascade"""
        RecommenderService._check_indices(model, [u], [i])
        return float(RecommenderService._neighbor_scores(model, int(u), np.array([i]))[0])

    # --- uniform predictor contract -------------------------------------------------

    @staticmethod
    def score_pairs(model, users, items):
        """Predicted scores for aligned (user, item) index arrays"""
        users, items = RecommenderService._check_indices(model, users, items)
        if model.kind == 'mf':
            return model.linear_scores(users, items)
        if model.kind == 'poisson_mf':
            return softplus(model.linear_scores(users, items))

        scores = np.empty(len(users))
        for user in np.unique(users):
            positions = np.flatnonzero(users == user)
            scores[positions] = RecommenderService._neighbor_scores(model, int(user), items[positions])
        return scores

    @staticmethod
    def score_items(model, user):
        """Predicted scores of one user against every item"""
        RecommenderService._check_indices(model, [user], [0])
        if model.kind == 'mf':
            return model.linear_item_scores(user)
        if model.kind == 'poisson_mf':
            return softplus(model.linear_item_scores(user))
        return RecommenderService._neighbor_scores(model, int(user), np.arange(model.n_items))

    # --- persistence ------------------------------------------------------------------

    @staticmethod
    def save_model(model, path, seed=0, config_hash='', extra=None):
        """Write a versioned model file; identical models give identical bytes"""
        header = {
            'model_type': model.kind,
            'd': int(model.d),
            'n_users': int(model.n_users),
            'n_items': int(model.n_items),
            'seed': int(seed),
            'config_hash': config_hash,
            'version': MODEL_FORMAT_VERSION,
        }
        if extra:
            header['extra'] = extra

        if isinstance(model, MfParams):
            arrays = model.to_arrays()
        else:
            header.update({'axis': model.axis, 'k_neighbors': model.k_neighbors, 'global_mean': model.global_mean})
            arrays = {
                'similarity_data': model.similarity.data,
                'similarity_indices': model.similarity.indices.astype(np.int64),
                'similarity_indptr': model.similarity.indptr.astype(np.int64),
                'train_data': model.train_matrix.data,
                'train_indices': model.train_matrix.indices.astype(np.int64),
                'train_indptr': model.train_matrix.indptr.astype(np.int64),
                'user_means': model.user_means,
                'item_means': model.item_means,
            }
        write_container(path, MODEL_KIND, header, arrays)
        return path

    @staticmethod
    def load_model(path):
        """Read a model file; returns (model, header)"""
        if not os.path.isfile(path):
            raise MissingArtifact(f"Model file not found: {path}")
        header, arrays = read_container(path, expected_kind=MODEL_KIND)
        kind = header.get('model_type')
        if kind not in MODEL_KINDS:
            raise MissingArtifact(f"{path} holds an unknown model type {kind!r}")

        if kind == 'mf':
            return MfParams.from_arrays(arrays), header
        if kind == 'poisson_mf':
            return PoissonParams.from_arrays(arrays), header

        n_users, n_items = header['n_users'], header['n_items']
        side = n_items if header['axis'] == 'item' else n_users
        model = NeighborModel(
            axis=header['axis'],
            similarity=sparse.csr_matrix(
                (arrays['similarity_data'], arrays['similarity_indices'], arrays['similarity_indptr']),
                shape=(side, side),
            ),
            k_neighbors=int(header['k_neighbors']),
            global_mean=float(header['global_mean']),
            user_means=arrays['user_means'],
            item_means=arrays['item_means'],
            train_matrix=sparse.csr_matrix(
                (arrays['train_data'], arrays['train_indices'], arrays['train_indptr']),
                shape=(n_users, n_items),
            ),
        )
        return model, header
