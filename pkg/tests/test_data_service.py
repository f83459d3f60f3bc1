"""
Unit tests for the data service
"""

import os
import tempfile
import unittest
from datetime import datetime, timezone

import numpy as np

from models.dataset import UNKNOWN_GROUP, ColumnSchema, SegmentKey
from services.data_service import DataService
from tests.fixtures import SMALL_ROWS, build_dataset, read_bytes, write_rows
from utils.exceptions import (
    EmptyAfterFiltering, IndexOutOfRange, InputError, MalformedRows, MissingColumn,
)


def epoch(year, month=6, day=1):
    return int(datetime(year, month, day, tzinfo=timezone.utc).timestamp())


class TestDataLoading(unittest.TestCase):

    def setUp(self):
        """Set up a scratch directory"""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.dir, name)

    def test_load_interns_ids_and_groups(self):
        """Test ids are interned in order of first appearance"""
        path = write_rows(self.path('small.csv'), SMALL_ROWS)
        ds = DataService.load_interactions(path)

        self.assertEqual(ds.name, 'small')
        self.assertEqual(ds.n_interactions, 7)
        self.assertEqual(ds.user_ids, ('u1', 'u2', 'u3'))
        self.assertEqual(ds.item_ids, ('i1', 'i2', 'i3'))
        self.assertEqual(ds.vocab_user.labels, ('Large', 'Small'))
        self.assertEqual(ds.vocab_item.labels, ('Small', 'Small&Large'))
        self.assertEqual(list(ds.user_groups), [1, 0, UNKNOWN_GROUP])
        self.assertFalse(ds.has_fit)

    def test_configured_label_order(self):
        """Test an explicit label ordering replaces the sorted default"""
        path = write_rows(self.path('small.csv'), SMALL_ROWS)
        ds = DataService.load_interactions(path, ColumnSchema(user_labels=('Small', 'Large')))
        self.assertEqual(ds.vocab_user.labels, ('Small', 'Large'))
        self.assertEqual(list(ds.user_groups), [0, 1, UNKNOWN_GROUP])

        with self.assertRaises(InputError):
            DataService.load_interactions(path, ColumnSchema(user_labels=('Small',)))

    def test_remapped_headers(self):
        """Test logical columns can be read from other header names"""
        header = ['reviewer', 'item_id', 'stars', 'timestamp', 'user_attr', 'model_attr']
        path = write_rows(self.path('remapped.csv'), SMALL_ROWS, header=header)
        ds = DataService.load_interactions(path, ColumnSchema(user_id='reviewer', rating='stars'))
        self.assertEqual(ds.n_interactions, 7)
        self.assertAlmostEqual(float(ds.ratings.sum()), 24.0)

    def test_missing_column(self):
        """Test a missing required column names the logical column"""
        path = write_rows(self.path('bad.csv'), [row[:5] for row in SMALL_ROWS],
                          header=['user_id', 'item_id', 'rating', 'timestamp', 'user_attr'])
        with self.assertRaises(MissingColumn) as ctx:
            DataService.load_interactions(path)
        self.assertEqual(ctx.exception.name, 'model_attr')
        self.assertEqual(ctx.exception.exit_code, 2)

    def test_missing_file(self):
        """Test a missing dataset file is an input error"""
        with self.assertRaises(InputError):
            DataService.load(self.path('absent.csv'))

    def test_malformed_rows_abort_above_tolerance(self):
        """Test malformed rows are reported with their line numbers"""
        rows = list(SMALL_ROWS)
        rows[1] = ('u1', 'i2', 'abc', 200, 'Small', 'Small&Large')
        rows[3] = ('u2', 'i1', 7, 150, 'Large', 'Small')
        path = write_rows(self.path('bad.csv'), rows)

        with self.assertRaises(MalformedRows) as ctx:
            DataService.load_interactions(path, malformed_tolerance=0.01)
        self.assertEqual([line for line, _ in ctx.exception.errors], [3, 5])
        self.assertEqual(ctx.exception.total_rows, 7)

    def test_malformed_rows_skipped_within_tolerance(self):
        """Test malformed rows are dropped when under the tolerance"""
        rows = list(SMALL_ROWS)
        rows[1] = ('u1', 'i2', 'abc', 200, 'Small', 'Small&Large')
        path = write_rows(self.path('bad.csv'), rows)
        ds = DataService.load_interactions(path, malformed_tolerance=0.5)
        self.assertEqual(ds.n_interactions, 6)

    def test_rows_without_product_image_are_rejected(self):
        """Test an empty model_attr drops the row without counting it as malformed"""
        rows = list(SMALL_ROWS) + [('u4', 'i9', 4.0, 400, 'Small', '')]
        path = write_rows(self.path('small.csv'), rows)
        ds = DataService.load_interactions(path, malformed_tolerance=0.0)
        self.assertEqual(ds.n_interactions, 7)
        self.assertNotIn('i9', ds.item_ids)

    def test_textual_timestamps(self):
        """Test dates are parsed as UTC epoch seconds"""
        rows = [('u1', 'i1', 4.0, '2016-03-01', 'Small', 'Small'),
                ('u1', 'i2', 3.0, '2017-03-01 00:00:00+00:00', 'Small', 'Small')]
        path = write_rows(self.path('dates.csv'), rows)
        ds = DataService.load_interactions(path)
        self.assertEqual(list(ds.years), [2016, 2017])
        self.assertEqual(int(ds.timestamps[0]), epoch(2016, 3, 1))

    def test_fit_feedback(self):
        """Test the fit column is binarized into JustRight vs other"""
        header = ['user_id', 'item_id', 'rating', 'timestamp', 'user_attr', 'model_attr', 'fit']
        rows = [('u1', 'i1', 4.0, 1, 'Small', 'Small', 'Just right'),
                ('u1', 'i2', 3.0, 2, 'Small', 'Small', 'Slightly small'),
                ('u2', 'i1', 5.0, 3, 'Large', 'Small', '')]
        path = write_rows(self.path('fit.csv'), rows, header=header)
        ds = DataService.load_interactions(path)
        self.assertTrue(ds.has_fit)
        self.assertEqual(list(ds.fit_outcomes[:2]), [1.0, 0.0])
        self.assertTrue(np.isnan(ds.fit_outcomes[2]))

    def test_canonical_csv_round_trip(self):
        """Test writing the canonical CSV and loading it back yields the same data"""
        path = write_rows(self.path('small.csv'), SMALL_ROWS)
        ds = DataService.load_interactions(path)
        copy = DataService.load_interactions(DataService.write_csv(ds, self.path('copy.csv')), name='small')

        self.assertEqual(copy.user_ids, ds.user_ids)
        self.assertEqual(copy.item_ids, ds.item_ids)
        self.assertEqual(copy.vocab_user, ds.vocab_user)
        np.testing.assert_array_equal(copy.ratings, ds.ratings)
        np.testing.assert_array_equal(copy.timestamps, ds.timestamps)
        np.testing.assert_array_equal(copy.user_groups, ds.user_groups)
        np.testing.assert_array_equal(copy.item_groups, ds.item_groups)

    def test_dataset_cache(self):
        """Test the binary cache is byte-deterministic and loads back identically"""
        ds = build_dataset()
        first = DataService.save_dataset(ds, self.path('a.frd'))
        second = DataService.save_dataset(ds, self.path('b.frd'))
        self.assertEqual(read_bytes(first), read_bytes(second))

        loaded = DataService.load(first)
        self.assertEqual(loaded.name, ds.name)
        self.assertEqual(loaded.user_ids, ds.user_ids)
        np.testing.assert_array_equal(loaded.user_index, ds.user_index)
        np.testing.assert_array_equal(loaded.ratings, ds.ratings)
        np.testing.assert_array_equal(loaded.user_groups, ds.user_groups)
        self.assertEqual(loaded.vocab_item.labels, ds.vocab_item.labels)

        DataService.save_dataset(loaded, self.path('c.frd'))
        self.assertEqual(read_bytes(first), read_bytes(self.path('c.frd')))


class TestSplitsAndSegments(unittest.TestCase):

    def setUp(self):
        self.ds = build_dataset()

    def test_split_leave_latest(self):
        """Test latest interaction goes to test and the second latest to validation"""
        split = DataService.split_leave_latest(self.ds)
        self.assertEqual(list(split.train), [0, 3, 5])
        self.assertEqual(list(split.validation), [1])
        self.assertEqual(list(split.test), [2, 4, 6])
        self.assertEqual(split.sizes(), {'train': 3, 'validation': 1, 'test': 3})

    def test_split_ties_break_by_input_order(self):
        """Test the later row wins a timestamp tie"""
        rows = [('u1', 'i1', 4.0, 100, 'Small', 'Small'),
                ('u1', 'i2', 3.0, 100, 'Small', 'Small'),
                ('u2', 'i1', 2.0, 50, 'Large', 'Small')]
        split = DataService.split_leave_latest(build_dataset(rows))
        self.assertEqual(list(split.test), [1])
        self.assertEqual(list(split.train), [0, 2])
        self.assertEqual(len(split.validation), 0)

    def test_segment_of(self):
        """Test segment lookup flags unknown identities"""
        self.assertEqual(DataService.segment_of(self.ds, 0, 1), SegmentKey(0, 1))
        self.assertEqual(DataService.segment_of(self.ds, 1, 0), SegmentKey(1, 0))
        self.assertTrue(DataService.segment_of(self.ds, 2, 2).is_unknown)
        with self.assertRaises(IndexOutOfRange):
            DataService.segment_of(self.ds, 3, 0)
        with self.assertRaises(IndexOutOfRange):
            DataService.segment_of(self.ds, 0, -1)

    def test_contingency_table(self):
        """Test counts cover known identities only"""
        table = DataService.contingency_table(self.ds)
        np.testing.assert_array_equal(table.counts, [[2, 1], [1, 1]])
        self.assertEqual(table.dropped_unknown, 2)
        self.assertEqual(table.grand_total, 5)
        self.assertEqual(table.row_labels, ('Small', 'Large'))

        with self.assertRaises(EmptyAfterFiltering):
            DataService.contingency_table(self.ds, [5, 6])

    def test_year_buckets(self):
        """Test calendar years fall into <=2014, 2015, 2016 and >=2017"""
        rows = [('u1', 'i1', 4.0, epoch(2013), 'Small', 'Small'),
                ('u1', 'i2', 4.0, epoch(2014, 12, 31), 'Small', 'Small'),
                ('u1', 'i3', 4.0, epoch(2015), 'Small', 'Small'),
                ('u2', 'i1', 4.0, epoch(2016), 'Large', 'Small'),
                ('u2', 'i2', 4.0, epoch(2018), 'Large', 'Small')]
        buckets = DataService.year_buckets(build_dataset(rows))
        self.assertEqual(list(buckets), ['<=2014', '2015', '2016', '>=2017'])
        self.assertEqual([list(v) for v in buckets.values()], [[0, 1], [2], [3], [4]])


if __name__ == '__main__':
    unittest.main()
