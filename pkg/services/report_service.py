"""
Report service for the FairRec marketing-bias lab
Handles JSON/TSV emission of analysis tables, metrics reports and the consolidated comparison table
"""

import csv
import glob
import json
import logging
import math
import os
import re

import numpy as np

from models.metrics import TABLE_COLUMNS, MetricsReport
from services.excel_export_service import ExcelExportService
from utils.exceptions import EmptyReportSet
from utils.sorting_helpers import SortingHelpers

logger = logging.getLogger(__name__)

REPORTS_DIR = 'reports'


class ReportService:
    """Service for writing machine- and human-readable result files"""

    @staticmethod
    def _clean(value):
        """JSON-safe copy: numpy scalars unwrapped, non-finite floats become None"""
        if isinstance(value, dict):
            return {str(k): ReportService._clean(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [ReportService._clean(v) for v in value]
        if isinstance(value, np.ndarray):
            return ReportService._clean(value.tolist())
        if isinstance(value, (np.integer,)):
            return int(value)
        if isinstance(value, (float, np.floating)):
            value = float(value)
            return value if math.isfinite(value) else None
        return value

    @staticmethod
    def write_json(path, data):
        """Deterministic JSON: sorted keys, fixed indentation, trailing newline"""
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(ReportService._clean(data), fh, sort_keys=True, indent=2, allow_nan=False)
            fh.write('\n')
        return path

    @staticmethod
    def format_cell(value):
        if value is None:
            return ''
        if isinstance(value, (float, np.floating)):
            if math.isnan(value):
                return ''
            return repr(float(value)) if math.isfinite(value) else ('inf' if value > 0 else '-inf')
        return str(value)

    @staticmethod
    def write_tsv(path, columns, rows):
        """Tab-separated table with a header row; rows are dicts keyed by column"""
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            writer = csv.writer(fh, delimiter='\t', lineterminator='\n')
            writer.writerow(columns)
            for row in rows:
                writer.writerow([ReportService.format_cell(row.get(column)) for column in columns])
        return path

    # --- analysis tables ------------------------------------------------------------

    @staticmethod
    def contingency_rows(table, chi2_result):
        """
        Product groups on rows, user groups plus an All margin on columns; cells 'count (+dev)',
        or bare counts when chi2_result is None.
        """
        rows = []
        for n, product in enumerate(table.col_labels):
            row = {'product': product}
            for m, user in enumerate(table.row_labels):
                row[user] = str(int(table.counts[m, n]))
                if chi2_result is not None:
                    row[user] += f' ({chi2_result.deviations[m, n]:+.2f})'
            row['All'] = str(int(table.col_totals[n]))
            rows.append(row)
        total = {'product': 'All'}
        for m, user in enumerate(table.row_labels):
            total[user] = str(int(table.row_totals[m]))
        total['All'] = str(table.grand_total)
        rows.append(total)
        return ['product'] + list(table.row_labels) + ['All'], rows

    @staticmethod
    def segment_rows(summary, vocab_user, vocab_item, outcome):
        rows = []
        for key, cell in summary.cells.items():
            rows.append({
                'outcome': outcome,
                'user_group': vocab_user.label_of(key.m),
                'product_group': vocab_item.label_of(key.n),
                'count': cell.count,
                'mean': cell.mean,
                'std_error': cell.std_error,
                'ci_half_width': cell.ci_half_width,
                'ci_defined': cell.ci_defined,
            })
        return rows

    @staticmethod
    def matrix_rows(matrix, user_labels, item_labels, order=None, value_name='value'):
        """Long-format rows of an M×N matrix keyed by group labels, optionally in a given cell order"""
        cells = order or [(m, n) for m in range(matrix.shape[0]) for n in range(matrix.shape[1])]
        return [
            {'user_group': user_labels[m], 'product_group': item_labels[n], value_name: float(matrix[m, n])}
            for m, n in cells
        ]

    # --- metrics reports ------------------------------------------------------------

    @staticmethod
    def slug(name):
        return re.sub(r'[^A-Za-z0-9]+', '_', name).strip('_').lower() or 'model'

    @staticmethod
    def write_metrics_report(report, out_dir, segment_order=None):
        """<out>/reports/<model>.json plus the diff-matrix and segment-distribution TSVs"""
        reports_dir = os.path.join(out_dir, REPORTS_DIR)
        os.makedirs(reports_dir, exist_ok=True)
        stem = ReportService.slug(report.model_name)
        path = ReportService.write_json(os.path.join(reports_dir, f'{stem}.json'), report.to_dict())
        if report.diff_matrix is not None:
            ReportService.write_tsv(
                os.path.join(reports_dir, f'{stem}_diff.tsv'),
                ['user_group', 'product_group', 'diff'],
                ReportService.matrix_rows(report.diff_matrix, report.user_labels, report.item_labels,
                                          segment_order, 'diff'),
            )
        if report.distributions:
            order = segment_order or [(m, n) for m in range(len(report.user_labels))
                                      for n in range(len(report.item_labels))]
            ReportService.write_tsv(
                os.path.join(reports_dir, f'{stem}_distribution.tsv'),
                ['user_group', 'product_group', 'recommended', 'reference'],
                [{
                    'user_group': report.user_labels[m],
                    'product_group': report.item_labels[n],
                    'recommended': float(report.distributions['recommended'][m, n]),
                    'reference': float(report.distributions['reference'][m, n]),
                } for m, n in order],
            )
        return path

    @staticmethod
    def comparison_rows(reports, sort='table'):
        rows = [report.table_row() for report in reports]
        if sort == 'table':
            return SortingHelpers.sort_comparison_rows(rows)
        order = SortingHelpers.sort_model_names([row['model'] for row in rows])
        return sorted(rows, key=lambda row: (order.index(row['model']), row['dataset']))

    @staticmethod
    def write_comparison(path, reports):
        """Comparison table in the fixed baseline-first row order"""
        return ReportService.write_tsv(path, TABLE_COLUMNS, ReportService.comparison_rows(reports))

    @staticmethod
    def read_reports(out_dir):
        """Every valid MetricsReport under <out>/reports; corrupt files are skipped"""
        reports = []
        for path in sorted(glob.glob(os.path.join(out_dir, REPORTS_DIR, '*.json'))):
            try:
                with open(path, encoding='utf-8') as fh:
                    reports.append(MetricsReport.from_dict(json.load(fh)))
            except (OSError, ValueError, KeyError, TypeError) as e:
                logger.warning("Skipping corrupt report %s: %s", path, e)
        return reports

    @staticmethod
    def consolidate(out_dir):
        """Merge all reports into report.json, report.tsv and report.xlsx"""
        reports = ReportService.read_reports(out_dir)
        if not reports:
            raise EmptyReportSet(f"No valid reports under {os.path.join(out_dir, REPORTS_DIR)}")

        rows = ReportService.comparison_rows(reports, sort='name')
        ordered = sorted(reports, key=lambda r: (r.model_name.lower(), r.model_name, r.dataset_name))
        ReportService.write_json(os.path.join(out_dir, 'report.json'), {
            'columns': TABLE_COLUMNS,
            'rows': rows,
            'reports': [report.to_dict() for report in ordered],
        })
        ReportService.write_tsv(os.path.join(out_dir, 'report.tsv'), TABLE_COLUMNS, rows)
        workbook = ExcelExportService.export_comparison_table(rows, TABLE_COLUMNS)
        with open(os.path.join(out_dir, 'report.xlsx'), 'wb') as fh:
            fh.write(workbook.getvalue())
        logger.info("Consolidated %d reports", len(reports))
        return rows