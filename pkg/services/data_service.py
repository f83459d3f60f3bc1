"""
Data service for the FairRec marketing-bias lab
Handles CSV ingestion, the dataset cache, leave-latest splits and segment accounting
"""

import logging
import os
from collections import OrderedDict

import numpy as np
import pandas as pd

from models.dataset import (
    FIT_NEGATIVE, FIT_POSITIVE, UNKNOWN, UNKNOWN_GROUP, ColumnSchema, ContingencyTable, DataSplit,
    Dataset, GroupVocab, Interaction, SegmentKey,
)
from utils.binary_store import read_container, write_container
from utils.exceptions import (
    EmptyAfterFiltering, IndexOutOfRange, InputError, MalformedRows, MissingColumn,
)
from utils.validators import parse_timestamp

logger = logging.getLogger(__name__)

DATASET_KIND = 'dataset'
CACHE_EXTENSION = '.frd'
FIT_CODES = {None: -1, FIT_NEGATIVE: 0, FIT_POSITIVE: 1}
FIT_LABELS = {-1: None, 0: FIT_NEGATIVE, 1: FIT_POSITIVE}


class DataService:
    """Service for loading, caching, splitting and segmenting interaction data"""

    # --- loading ----------------------------------------------------------------

    @staticmethod
    def load(path, schema=None, malformed_tolerance=0.01, name=None):
        """Load either a canonical/remapped CSV or a binary dataset cache"""
        if str(path).endswith(CACHE_EXTENSION):
            return DataService.load_dataset(path)
        return DataService.load_interactions(path, schema, malformed_tolerance, name)

    @staticmethod
    def load_interactions(path, schema=None, malformed_tolerance=0.01, name=None):
        """
        Parse an interaction CSV into a Dataset.
        Rows with an empty model_attr are rejected (counted); empty user_attr maps to UNKNOWN.
        Malformed rows are collected and the load aborts when they exceed the tolerance.
        """
        schema = schema or ColumnSchema()
        if not os.path.isfile(path):
            raise InputError(f"Dataset file not found: {path}")

        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
        except pd.errors.EmptyDataError:
            raise InputError(f"Dataset file is empty: {path}")
        except (UnicodeDecodeError, pd.errors.ParserError) as e:
            raise InputError(f"Could not parse {path}: {e}")

        frame.columns = [c.strip() for c in frame.columns]
        for logical, header in schema.required().items():
            if header not in frame.columns:
                raise MissingColumn(logical)
        fit_column = schema.fit if schema.fit and schema.fit in frame.columns else None

        total_rows = len(frame)
        columns = {logical: frame[header].str.strip() for logical, header in schema.required().items()}
        line_numbers = np.arange(total_rows) + 2  # header is line 1

        ratings = pd.to_numeric(columns['rating'], errors='coerce').to_numpy(dtype=np.float64)
        timestamps, timestamp_errors = DataService._parse_timestamps(columns['timestamp'])

        errors = []
        rejected_no_image = 0
        keep = np.ones(total_rows, dtype=bool)
        user_ids = columns['user_id'].to_numpy()
        item_ids = columns['item_id'].to_numpy()
        user_attrs = columns['user_attr'].to_numpy()
        model_attrs = columns['model_attr'].to_numpy()

        for row in range(total_rows):
            reason = None
            if not user_ids[row]:
                reason = "empty user_id"
            elif not item_ids[row]:
                reason = "empty item_id"
            elif not np.isfinite(ratings[row]):
                reason = f"rating {columns['rating'].iat[row]!r} is not a finite number"
            elif ratings[row] < 1.0 or ratings[row] > 5.0:
                reason = f"rating {ratings[row]} outside [1, 5]"
            elif row in timestamp_errors:
                reason = timestamp_errors[row]
            elif timestamps[row] < 0:
                reason = "negative timestamp"

            if reason is not None:
                errors.append((int(line_numbers[row]), reason))
                keep[row] = False
            elif not model_attrs[row]:
                rejected_no_image += 1
                keep[row] = False

        if errors:
            if len(errors) > malformed_tolerance * max(total_rows, 1):
                raise MalformedRows(errors, total_rows)
            for line, reason in errors[:10]:
                logger.warning("Skipping malformed row at line %d: %s", line, reason)
            logger.warning("Skipped %d malformed rows of %d", len(errors), total_rows)
        if rejected_no_image:
            logger.info("Rejected %d rows without a product image group", rejected_no_image)

        kept_rows = np.flatnonzero(keep)
        if len(kept_rows) == 0:
            raise InputError(f"No usable interactions in {path}")

        user_vocab = DataService._build_vocab(schema.user_axis, user_attrs[kept_rows], schema.user_labels)
        item_vocab = DataService._build_vocab(schema.item_axis, model_attrs[kept_rows], schema.item_labels)

        user_group = {}
        item_group = {}
        conflicts = 0
        interactions = []
        fit_values = frame[fit_column].str.strip().to_numpy() if fit_column else None

        for row in kept_rows:
            uid = user_ids[row]
            iid = item_ids[row]
            user_label = user_attrs[row] or UNKNOWN
            item_label = model_attrs[row]
            if user_group.setdefault(uid, user_label) != user_label:
                conflicts += 1
            if item_group.setdefault(iid, item_label) != item_label:
                conflicts += 1
            fit_label = None
            if fit_values is not None and fit_values[row]:
                fit_label = FIT_POSITIVE if fit_values[row].lower() == 'just right' else FIT_NEGATIVE
            interactions.append(Interaction(
                user_id=uid,
                item_id=iid,
                rating=float(ratings[row]),
                timestamp=int(timestamps[row]),
                fit_label=fit_label,
            ))

        if conflicts:
            logger.warning("%d rows disagree with an earlier group label; first label kept", conflicts)

        dataset = Dataset.build(
            interactions, user_group, item_group, user_vocab, item_vocab,
            name=name or os.path.splitext(os.path.basename(path))[0],
            has_fit=fit_column is not None,
        )
        logger.info("Loaded %r", dataset)
        return dataset

    @staticmethod
    def _parse_timestamps(values):
        """Epoch seconds for every row plus {row: reason} for unparseable values"""
        numeric = pd.to_numeric(values, errors='coerce')
        seconds = np.zeros(len(values), dtype=np.int64)
        errors = {}
        pending = {}
        for row, (raw, number) in enumerate(zip(values.to_numpy(), numeric.to_numpy())):
            if np.isfinite(number):
                seconds[row] = int(number)
            elif not raw:
                errors[row] = "empty timestamp"
            else:
                pending.setdefault(raw, []).append(row)

        for raw, rows in pending.items():
            try:
                parsed = parse_timestamp(raw)
            except (ValueError, OverflowError) as e:
                for row in rows:
                    errors[row] = f"timestamp {raw!r} could not be parsed ({e})"
                continue
            seconds[rows] = parsed
        return seconds, errors

    @staticmethod
    def _build_vocab(axis_name, values, ordering=None):
        """Vocabulary from explicit ordering or the sorted distinct non-empty values"""
        present = sorted({v for v in values if v and v != UNKNOWN})
        if ordering:
            labels = [label for label in ordering]
            missing = [v for v in present if v not in labels]
            if missing:
                raise InputError(f"Labels {missing} on axis {axis_name!r} are not in the configured ordering")
        else:
            labels = present
        if not labels:
            raise InputError(f"No group labels found on axis {axis_name!r}")
        return GroupVocab(axis_name, tuple(labels))

    # --- canonical CSV and binary cache ------------------------------------------

    @staticmethod
    def write_csv(ds, path):
        """Write the canonical CSV; loading it back yields the same Dataset"""
        rows = {
            'user_id': [x.user_id for x in ds.interactions],
            'item_id': [x.item_id for x in ds.interactions],
            'rating': [repr(float(x.rating)) for x in ds.interactions],
            'timestamp': [int(x.timestamp) for x in ds.interactions],
            'user_attr': ['' if label == UNKNOWN else label
                          for label in (ds.user_label(u) for u in ds.user_index)],
            'model_attr': [ds.item_label(i) for i in ds.item_index],
        }
        if ds.has_fit:
            rows['fit'] = ['' if x.fit_label is None else ('Just Right' if x.fit_label == FIT_POSITIVE else 'Other')
                           for x in ds.interactions]
        pd.DataFrame(rows).to_csv(path, index=False, encoding='utf-8', lineterminator='\n')
        return path

    @staticmethod
    def save_dataset(ds, path):
        """Write the versioned binary cache with embedded vocabularies"""
        header = {
            'name': ds.name,
            'has_fit': ds.has_fit,
            'vocab_user': ds.vocab_user.to_dict(),
            'vocab_item': ds.vocab_item.to_dict(),
            'user_ids': list(ds.user_ids),
            'item_ids': list(ds.item_ids),
        }
        arrays = {
            'user_index': ds.user_index,
            'item_index': ds.item_index,
            'ratings': ds.ratings,
            'timestamps': ds.timestamps,
            'fit_codes': np.array([FIT_CODES[x.fit_label] for x in ds.interactions], dtype=np.int8),
            'user_groups': ds.user_groups,
            'item_groups': ds.item_groups,
        }
        write_container(path, DATASET_KIND, header, arrays)
        return path

    @staticmethod
    def load_dataset(path):
        """Read a binary cache written by save_dataset"""
        if not os.path.isfile(path):
            raise InputError(f"Dataset file not found: {path}")
        header, arrays = read_container(path, expected_kind=DATASET_KIND)
        user_ids = tuple(header['user_ids'])
        item_ids = tuple(header['item_ids'])
        interactions = tuple(
            Interaction(
                user_id=user_ids[u],
                item_id=item_ids[i],
                rating=float(r),
                timestamp=int(t),
                fit_label=FIT_LABELS[int(f)],
            )
            for u, i, r, t, f in zip(arrays['user_index'], arrays['item_index'], arrays['ratings'],
                                     arrays['timestamps'], arrays['fit_codes'])
        )
        return Dataset(
            interactions=interactions,
            user_ids=user_ids,
            item_ids=item_ids,
            user_groups=arrays['user_groups'],
            item_groups=arrays['item_groups'],
            vocab_user=GroupVocab(header['vocab_user']['axis_name'], tuple(header['vocab_user']['labels'])),
            vocab_item=GroupVocab(header['vocab_item']['axis_name'], tuple(header['vocab_item']['labels'])),
            name=header['name'],
            has_fit=bool(header['has_fit']),
        )

    # --- splitting ----------------------------------------------------------------

    @staticmethod
    def split_leave_latest(ds):
        """
        Per user: latest interaction -> test (if >= 2), second latest -> validation (if >= 3),
        the rest -> train. Timestamp ties are broken by input order (later row is more recent).
        """
        n = ds.n_interactions
        positions = np.arange(n)
        order = np.lexsort((positions, ds.timestamps, ds.user_index))
        users_sorted = ds.user_index[order]

        counts = np.bincount(ds.user_index, minlength=ds.n_users)
        # index of each user's last element in the sorted order
        last_position = np.cumsum(counts) - 1
        rank_from_end = last_position[users_sorted] - np.arange(n)
        user_counts = counts[users_sorted]

        is_test = (rank_from_end == 0) & (user_counts >= 2)
        is_validation = (rank_from_end == 1) & (user_counts >= 3)

        test = np.sort(order[is_test])
        validation = np.sort(order[is_validation])
        train = np.sort(order[~(is_test | is_validation)])
        split = DataSplit(train=train, validation=validation, test=test)
        logger.info("Split %s: %s", ds.name, split.sizes())
        return split

    # --- segments -------------------------------------------------------------------

    @staticmethod
    def segment_of(ds, u, i):
        """Market segment of (user index, item index); UNKNOWN-flagged for unknown identity"""
        if not 0 <= int(u) < ds.n_users:
            raise IndexOutOfRange(f"User index {u} out of range [0, {ds.n_users})")
        if not 0 <= int(i) < ds.n_items:
            raise IndexOutOfRange(f"Item index {i} out of range [0, {ds.n_items})")
        m = int(ds.user_groups[u])
        n = int(ds.item_groups[i])
        if m == UNKNOWN_GROUP:
            return SegmentKey.unknown(n)
        return SegmentKey(m, n)

    @staticmethod
    def contingency_table(ds, subset=None):
        """M×N interaction counts over known-identity interactions of the subset"""
        indices = np.arange(ds.n_interactions) if subset is None else np.asarray(subset, dtype=np.int64)
        user_groups = ds.interaction_user_groups[indices]
        item_groups = ds.interaction_item_groups[indices]
        known = user_groups != UNKNOWN_GROUP
        dropped = int(len(indices) - known.sum())
        if not known.any():
            raise EmptyAfterFiltering("No interactions with a known user identity in the subset")
        if dropped:
            logger.debug("Contingency table dropped %d UNKNOWN-identity interactions", dropped)

        flat = user_groups[known] * ds.N + item_groups[known]
        counts = np.bincount(flat, minlength=ds.M * ds.N).reshape(ds.M, ds.N)
        return ContingencyTable(
            counts=counts,
            row_labels=ds.vocab_user.labels,
            col_labels=ds.vocab_item.labels,
            dropped_unknown=dropped,
        )

    @staticmethod
    def year_buckets(ds, edges=(2015, 2016, 2017), subset=None):
        """
        Partition interactions by calendar year. edges are the first years of the
        buckets after the first one: (2015, 2016, 2017) -> <=2014, 2015, 2016, >=2017.
        """
        edges = [int(e) for e in edges]
        indices = np.arange(ds.n_interactions) if subset is None else np.asarray(subset, dtype=np.int64)
        bucket = np.searchsorted(edges, ds.years[indices], side='right')

        labels = [f'<={edges[0] - 1}']
        for start, stop in zip(edges, edges[1:]):
            labels.append(str(start) if stop - start == 1 else f'{start}-{stop - 1}')
        labels.append(f'>={edges[-1]}')

        buckets = OrderedDict()
        for position, label in enumerate(labels):
            buckets[label] = indices[bucket == position]
        return buckets
