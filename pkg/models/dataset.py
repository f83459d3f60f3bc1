"""
Interaction dataset models for the FairRec marketing-bias lab
GroupVocab, Interaction, Dataset, DataSplit and SegmentKey
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

UNKNOWN = 'UNKNOWN'
UNKNOWN_GROUP = -1

FIT_POSITIVE = 'JustRight'
FIT_NEGATIVE = 'Other'


@dataclass(frozen=True)
class GroupVocab:
    """Ordered group labels on one attribute axis; UNKNOWN is reserved and never a real group"""
    axis_name: str
    labels: tuple

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        object.__setattr__(self, 'labels', labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"Group labels on axis {self.axis_name!r} are not unique")
        if UNKNOWN in labels:
            raise ValueError(f"{UNKNOWN} is reserved and cannot be a group label")
        if len(labels) < 1:
            raise ValueError(f"Axis {self.axis_name!r} needs at least one group")

    @property
    def size(self):
        return len(self.labels)

    def index_of(self, label):
        """Dense index of a label; UNKNOWN (or empty) maps to UNKNOWN_GROUP"""
        if label is None or label == '' or label == UNKNOWN:
            return UNKNOWN_GROUP
        return self.labels.index(label)

    def label_of(self, index):
        if index == UNKNOWN_GROUP:
            return UNKNOWN
        return self.labels[index]

    def to_dict(self):
        return {'axis_name': self.axis_name, 'labels': list(self.labels)}


@dataclass(frozen=True)
class Interaction:
    """One rating event"""
    user_id: str
    item_id: str
    rating: float
    timestamp: int
    fit_label: Optional[str] = None


@dataclass(frozen=True)
class SegmentKey:
    """Consumer-product market segment (m, n); m == UNKNOWN_GROUP flags an unknown identity"""
    m: int
    n: int

    @classmethod
    def unknown(cls, n):
        return cls(UNKNOWN_GROUP, n)

    @property
    def is_unknown(self):
        return self.m == UNKNOWN_GROUP

    def __repr__(self):
        m = UNKNOWN if self.is_unknown else self.m
        return f'<SegmentKey ({m}, {self.n})>'


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Immutable interaction dataset with interned ids.
    user_ids / item_ids give the dense index order; user_groups / item_groups hold
    one group index per dense user / item (UNKNOWN_GROUP allowed for users only).
    """
    interactions: tuple
    user_ids: tuple
    item_ids: tuple
    user_groups: np.ndarray
    item_groups: np.ndarray
    vocab_user: GroupVocab
    vocab_item: GroupVocab
    name: str = 'dataset'
    has_fit: bool = False
    user_index_of: dict = field(init=False, repr=False, compare=False)
    item_index_of: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'user_index_of', {uid: i for i, uid in enumerate(self.user_ids)})
        object.__setattr__(self, 'item_index_of', {iid: i for i, iid in enumerate(self.item_ids)})
        user_groups = np.array(self.user_groups, dtype=np.int64)
        item_groups = np.array(self.item_groups, dtype=np.int64)
        user_groups.setflags(write=False)
        item_groups.setflags(write=False)
        object.__setattr__(self, 'user_groups', user_groups)
        object.__setattr__(self, 'item_groups', item_groups)

        if len(user_groups) != len(self.user_ids) or len(item_groups) != len(self.item_ids):
            raise ValueError("Group arrays do not match the id maps")
        if np.any(item_groups < 0) or np.any(item_groups >= self.vocab_item.size):
            raise ValueError("Every item needs a known image group")
        if np.any(user_groups < UNKNOWN_GROUP) or np.any(user_groups >= self.vocab_user.size):
            raise ValueError("User group index out of range")

    @classmethod
    def build(cls, interactions, user_group, item_group, vocab_user, vocab_item, name='dataset', has_fit=False):
        """
        Intern ids in order of first appearance.
        user_group / item_group map raw ids to labels (user labels may be UNKNOWN).
        """
        user_ids = []
        item_ids = []
        seen_users = set()
        seen_items = set()
        for interaction in interactions:
            if interaction.user_id not in seen_users:
                seen_users.add(interaction.user_id)
                user_ids.append(interaction.user_id)
            if interaction.item_id not in seen_items:
                seen_items.add(interaction.item_id)
                item_ids.append(interaction.item_id)

        user_groups = [vocab_user.index_of(user_group.get(uid, UNKNOWN)) for uid in user_ids]
        item_groups = [vocab_item.index_of(item_group[iid]) for iid in item_ids]
        return cls(
            interactions=tuple(interactions),
            user_ids=tuple(user_ids),
            item_ids=tuple(item_ids),
            user_groups=np.array(user_groups, dtype=np.int64),
            item_groups=np.array(item_groups, dtype=np.int64),
            vocab_user=vocab_user,
            vocab_item=vocab_item,
            name=name,
            has_fit=has_fit,
        )

    # --- sizes ----------------------------------------------------------------

    @property
    def n_users(self):
        return len(self.user_ids)

    @property
    def n_items(self):
        return len(self.item_ids)

    @property
    def n_interactions(self):
        return len(self.interactions)

    @property
    def M(self):
        return self.vocab_user.size

    @property
    def N(self):
        return self.vocab_item.size

    # --- column views (read-only) ----------------------------------------------

    @cached_property
    def user_index(self):
        return _frozen(np.array([self.user_index_of[x.user_id] for x in self.interactions], dtype=np.int64))

    @cached_property
    def item_index(self):
        return _frozen(np.array([self.item_index_of[x.item_id] for x in self.interactions], dtype=np.int64))

    @cached_property
    def ratings(self):
        return _frozen(np.array([x.rating for x in self.interactions], dtype=np.float64))

    @cached_property
    def timestamps(self):
        return _frozen(np.array([x.timestamp for x in self.interactions], dtype=np.int64))

    @cached_property
    def fit_outcomes(self):
        """1.0 for JustRight, 0.0 for other fit feedback, NaN where absent"""
        codes = {FIT_POSITIVE: 1.0, FIT_NEGATIVE: 0.0}
        return _frozen(np.array([codes.get(x.fit_label, np.nan) for x in self.interactions], dtype=np.float64))

    @cached_property
    def interaction_user_groups(self):
        return _frozen(self.user_groups[self.user_index])

    @cached_property
    def interaction_item_groups(self):
        return _frozen(self.item_groups[self.item_index])

    @cached_property
    def known_mask(self):
        """Interactions whose user identity is known"""
        return _frozen(self.interaction_user_groups != UNKNOWN_GROUP)

    @cached_property
    def years(self):
        """Calendar year (UTC) of every interaction"""
        years = self.timestamps.astype('datetime64[s]').astype('datetime64[Y]').astype(np.int64) + 1970
        return _frozen(years)

    def user_label(self, user_index):
        return self.vocab_user.label_of(int(self.user_groups[user_index]))

    def item_label(self, item_index):
        return self.vocab_item.label_of(int(self.item_groups[item_index]))

    def __repr__(self):
        return (f'<Dataset {self.name}: {self.n_interactions} interactions, '
                f'{self.n_users} users, {self.n_items} items, M={self.M}, N={self.N}>')


@dataclass(frozen=True, eq=False)
class DataSplit:
    """Disjoint train / validation / test interaction indices (sorted ascending)"""
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ('train', 'validation', 'test'):
            object.__setattr__(self, name, _frozen(np.array(getattr(self, name), dtype=np.int64)))

    def sizes(self):
        return {'train': len(self.train), 'validation': len(self.validation), 'test': len(self.test)}


@dataclass(frozen=True)
class ColumnSchema:
    """Logical column name -> header name in the CSV file"""
    user_id: str = 'user_id'
    item_id: str = 'item_id'
    rating: str = 'rating'
    timestamp: str = 'timestamp'
    user_attr: str = 'user_attr'
    model_attr: str = 'model_attr'
    fit: Optional[str] = 'fit'
    user_axis: str = 'user identity'
    item_axis: str = 'product image'
    user_labels: Optional[tuple] = None
    item_labels: Optional[tuple] = None

    def required(self):
        return {
            'user_id': self.user_id,
            'item_id': self.item_id,
            'rating': self.rating,
            'timestamp': self.timestamp,
            'user_attr': self.user_attr,
            'model_attr': self.model_attr,
        }


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Observed segment counts f_{m,n} with margins; users on rows"""
    counts: np.ndarray
    row_labels: tuple
    col_labels: tuple
    dropped_unknown: int = 0

    @property
    def row_totals(self):
        return self.counts.sum(axis=1)

    @property
    def col_totals(self):
        return self.counts.sum(axis=0)

    @property
    def grand_total(self):
        return int(self.counts.sum())


def _frozen(array):
    array.setflags(write=False)
    return array
