"""
Unit tests for the analysis, report and Excel export services
"""

import csv
import json
import math
import os
import tempfile
import unittest

import numpy as np
import openpyxl

from models.dataset import ContingencyTable
from models.metrics import FairnessF, MetricsReport
from models.synthetic import SynthConfig
from services.analysis_service import AnalysisService
from services.data_service import DataService
from services.excel_export_service import ExcelExportService
from services.report_service import ReportService
from services.stats_service import StatsService
from services.synthetic_service import SyntheticService
from tests.fixtures import SMALL_ROWS, build_dataset, file_names, read_bytes
from utils.exceptions import EmptyReportSet
from utils.sorting_helpers import SortingHelpers


def read_tsv(path):
    with open(path, encoding='utf-8', newline='') as fh:
        return list(csv.DictReader(fh, delimiter='\t'))


def metrics_report(model_name, mse=0.9, dataset_name='synthetic'):
    return MetricsReport(
        model_name=model_name,
        dataset_name=dataset_name,
        mse=mse,
        mae=0.75,
        fairness_f=FairnessF(F=6.0, dof_num=1, dof_den=4, p_value=0.0704, populated=2),
        auc=0.8,
        ndcg_at_k=0.25,
        kl=0.1438,
        diff_matrix=np.array([[3.0, np.nan], [np.nan, -3.0]]),
        user_labels=('Small', 'Large'),
        item_labels=('Small', 'Small&Large'),
        distributions={
            'recommended': np.array([[0.25, 0.25], [0.25, 0.25]]),
            'reference': np.array([[0.5, 0.0], [0.0, 0.5]]),
        },
    )


class TestAnalysisService(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name
        self.ds = SyntheticService.generate(SynthConfig(n_users=40, n_items=20, interactions_per_user=10, seed=3))

    def tearDown(self):
        self.tmp.cleanup()

    def test_run_writes_every_table(self):
        """Test the analysis directory contents and the overall χ²"""
        record = AnalysisService.run(self.ds, self.out)
        self.assertEqual(file_names(os.path.join(self.out, 'analysis')), [
            'anova.json', 'anova.tsv', 'chi2.json', 'chi2.tsv', 'contingency.json', 'contingency.tsv',
            'segment_means.tsv', 'split.json',
        ])
        expected = StatsService.chi2_independence(DataService.contingency_table(self.ds).counts)
        self.assertAlmostEqual(record['statistic'], expected.statistic)
        self.assertEqual(record['n_reviews'], 400)

        chi2 = read_tsv(os.path.join(self.out, 'analysis', 'chi2.tsv'))
        self.assertEqual([row['test'] for row in chi2], ['all', '<=2014', '2015', '2016', '>=2017'])

        with open(os.path.join(self.out, 'analysis', 'contingency.json'), encoding='utf-8') as fh:
            contingency = json.load(fh)
        self.assertEqual(contingency['user_labels'], ['U0', 'U1'])
        self.assertEqual(sum(map(sum, contingency['counts'])), 400)

        anova = read_tsv(os.path.join(self.out, 'analysis', 'anova.tsv'))
        self.assertEqual([row['effect'] for row in anova], ['product', 'user', 'product:user'])
        self.assertEqual(len(read_tsv(os.path.join(self.out, 'analysis', 'segment_means.tsv'))), 4)

    def test_run_is_deterministic(self):
        """Test rerunning the analysis writes identical files"""
        AnalysisService.run(self.ds, self.out)
        first = {name: read_bytes(os.path.join(self.out, 'analysis', name))
                 for name in file_names(os.path.join(self.out, 'analysis'))}
        AnalysisService.run(self.ds, self.out)
        for name, content in first.items():
            self.assertEqual(read_bytes(os.path.join(self.out, 'analysis', name)), content, name)

    def test_degenerate_subset_gets_a_note(self):
        """Test an empty period is reported without a statistic"""
        record = AnalysisService.chi2_record(self.ds, np.array([], dtype=np.int64), '>=2030')
        self.assertIsNone(record['statistic'])
        self.assertEqual(record['n_reviews'], 0)
        self.assertTrue(record['note'])

    def test_single_user_group_is_noted(self):
        """Test a dataset with one user group is analyzed without a χ² statistic"""
        rows = [row[:4] + ('Small', row[5]) for row in SMALL_ROWS]
        ds = build_dataset(rows, user_labels=('Small',))
        record = AnalysisService.run(ds, self.out)

        self.assertIsNone(record['statistic'])
        self.assertIn('2×2', record['note'])
        self.assertEqual(record['n_reviews'], 7)
        self.assertEqual(len(file_names(os.path.join(self.out, 'analysis'))), 8)
        with open(os.path.join(self.out, 'analysis', 'contingency.json'), encoding='utf-8') as fh:
            contingency = json.load(fh)
        self.assertEqual(contingency['counts'], [[4, 3]])
        self.assertIsNone(contingency['deviations'])
        rows = read_tsv(os.path.join(self.out, 'analysis', 'contingency.tsv'))
        self.assertEqual(rows[0], {'product': 'Small', 'Small': '4', 'All': '4'})

    def test_unused_label_is_noted(self):
        """Test a configured group that no interaction uses gives a note instead of an error"""
        ds = build_dataset(SMALL_ROWS, user_labels=('Small', 'Large', 'Tall'))
        record = AnalysisService.chi2_record(ds, np.arange(ds.n_interactions), 'all')
        self.assertIsNone(record['statistic'])
        self.assertEqual(record['n_reviews'], 5)

        AnalysisService.write_contingency(ds, self.out, record['note'])
        with open(os.path.join(self.out, 'contingency.json'), encoding='utf-8') as fh:
            contingency = json.load(fh)
        self.assertEqual(contingency['counts'], [[2, 1], [1, 1], [0, 0]])
        self.assertEqual(contingency['note'], record['note'])


class TestReportService(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def test_contingency_rows(self):
        """Test cells show counts with signed deviations and margins"""
        table = ContingencyTable(counts=np.array([[20, 10], [10, 20]]), row_labels=('Small', 'Large'),
                                 col_labels=('Small', 'Small&Large'))
        columns, rows = ReportService.contingency_rows(table, StatsService.chi2_independence(table.counts))
        self.assertEqual(columns, ['product', 'Small', 'Large', 'All'])
        self.assertEqual(rows[0], {'product': 'Small', 'Small': '20 (+5.00)', 'Large': '10 (-5.00)', 'All': '30'})
        self.assertEqual(rows[-1], {'product': 'All', 'Small': '30', 'Large': '30', 'All': '60'})

    def test_json_and_tsv_cells(self):
        """Test non-finite values become null in JSON and empty cells in TSV"""
        path = ReportService.write_json(os.path.join(self.out, 'values.json'),
                                        {'b': np.float64(math.nan), 'a': np.arange(2)})
        with open(path, encoding='utf-8') as fh:
            self.assertEqual(fh.read(), '{\n  "a": [\n    0,\n    1\n  ],\n  "b": null\n}\n')
        self.assertEqual(ReportService.format_cell(math.nan), '')
        self.assertEqual(ReportService.format_cell(math.inf), 'inf')
        self.assertEqual(ReportService.format_cell(0.5), '0.5')
        self.assertEqual(ReportService.slug('MF (corr.error)'), 'mf_corr_error')

    def test_metrics_report_files(self):
        """Test the per-model JSON, diff and distribution files"""
        path = ReportService.write_metrics_report(metrics_report('MF (corr.error)'), self.out,
                                                  segment_order=[(1, 1), (0, 0), (0, 1), (1, 0)])
        self.assertEqual(os.path.basename(path), 'mf_corr_error.json')
        self.assertEqual(file_names(os.path.join(self.out, 'reports')), [
            'mf_corr_error.json', 'mf_corr_error_diff.tsv', 'mf_corr_error_distribution.tsv',
        ])
        diff = read_tsv(os.path.join(self.out, 'reports', 'mf_corr_error_diff.tsv'))
        self.assertEqual((diff[0]['user_group'], diff[0]['product_group'], diff[0]['diff']),
                         ('Large', 'Small&Large', '-3.0'))
        self.assertEqual(diff[2]['diff'], '')

        distribution = read_tsv(os.path.join(self.out, 'reports', 'mf_corr_error_distribution.tsv'))
        self.assertEqual((distribution[1]['recommended'], distribution[1]['reference']), ('0.25', '0.5'))

    def test_consolidate(self):
        """Test reports are merged in name order and the comparison table in table order"""
        for name in ('userCF', 'MF (corr.error)', 'itemCF', 'PoissonMF', 'MF'):
            ReportService.write_metrics_report(metrics_report(name), self.out)
        with open(os.path.join(self.out, 'reports', 'broken.json'), 'w', encoding='utf-8') as fh:
            fh.write('{not json')

        rows = ReportService.consolidate(self.out)
        self.assertEqual([row['model'] for row in rows],
                         ['itemCF', 'MF', 'MF (corr.error)', 'PoissonMF', 'userCF'])
        self.assertEqual(rows[0]['p-value'], '0.070')
        self.assertEqual(rows[0]['F-stat'], '6.000')
        for name in ('report.json', 'report.tsv', 'report.xlsx'):
            self.assertTrue(os.path.exists(os.path.join(self.out, name)))

        comparison = ReportService.write_comparison(os.path.join(self.out, 'comparison.tsv'),
                                                    ReportService.read_reports(self.out))
        self.assertEqual([row['model'] for row in read_tsv(comparison)],
                         ['itemCF', 'userCF', 'PoissonMF', 'MF', 'MF (corr.error)'])

        workbook = openpyxl.load_workbook(os.path.join(self.out, 'report.xlsx'))
        sheet = workbook.active
        self.assertEqual(sheet.cell(row=1, column=1).value, 'model')
        self.assertEqual(sheet.cell(row=2, column=1).value, 'itemCF')
        self.assertEqual(sheet.cell(row=2, column=3).value, 0.9)

    def test_consolidate_empty(self):
        """Test an output directory without reports maps to exit code 5"""
        with self.assertRaises(EmptyReportSet) as ctx:
            ReportService.consolidate(self.out)
        self.assertEqual(ctx.exception.exit_code, 5)


class TestHelpers(unittest.TestCase):

    def test_excel_number_cells(self):
        """Test numeric text becomes numbers while labels stay text"""
        self.assertEqual(ExcelExportService.format_number('0.123'), 0.123)
        self.assertEqual(ExcelExportService.format_number('<0.001'), '<0.001')
        self.assertIsNone(ExcelExportService.format_number(''))

    def test_model_sort_key(self):
        """Test suffixed model names sort next to their base row"""
        names = ['zeta', 'MF (corr.error) seed=3', 'MF', 'itemCF']
        ordered = sorted(names, key=SortingHelpers.get_model_sort_key)
        self.assertEqual(ordered, ['itemCF', 'MF', 'MF (corr.error) seed=3', 'zeta'])

    def test_segments_by_size(self):
        """Test cells are ordered by descending count, ties by index"""
        counts = np.array([[5, 9], [9, 1]])
        self.assertEqual(SortingHelpers.sort_segments_by_size(counts), [(0, 1), (1, 0), (0, 0), (1, 1)])


if __name__ == '__main__':
    unittest.main()
