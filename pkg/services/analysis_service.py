"""
Analysis service for the FairRec marketing-bias lab
Runs the observational study: contingency tables, χ² by period, ANOVA and segment means
"""

import logging
import os

import numpy as np

from models.statistics import format_p_value
from services.data_service import DataService
from services.report_service import ReportService
from services.stats_service import StatsService
from utils.exceptions import DegenerateDesign, EmptyAfterFiltering, EmptyTable, ZeroExpectedCell

logger = logging.getLogger(__name__)

ANALYSIS_DIR = 'analysis'
CHI2_COLUMNS = ['test', 'statistic', 'dof', 'p_value', 'p_display', 'n_reviews', 'note']
ANOVA_COLUMNS = ['outcome', 'effect', 'sum_sq', 'F', 'dof_num', 'dof_den', 'p_value', 'p_display']
SEGMENT_COLUMNS = ['outcome', 'user_group', 'product_group', 'count', 'mean', 'std_error', 'ci_half_width',
                   'ci_defined']


class AnalysisService:
    """Service for the marketing-bias analysis of one dataset"""

    @staticmethod
    def chi2_record(ds, subset, test):
        """χ² record for an interaction subset; degenerate subsets get a note instead of a statistic"""
        try:
            table = DataService.contingency_table(ds, subset)
            result = StatsService.chi2_independence(table.counts)
        except (EmptyAfterFiltering, EmptyTable, ZeroExpectedCell, DegenerateDesign) as e:
            logger.warning("χ² for %s not computed: %s", test, e)
            known = int(np.sum(ds.known_mask[subset])) if len(subset) else 0
            return {'test': test, 'statistic': None, 'dof': None, 'p_value': None, 'p_display': '',
                    'n_reviews': known, 'note': str(e)}
        record = result.to_record(test, table.grand_total)
        record['p_display'] = format_p_value(record['p_value'])
        record['note'] = ''
        return record

    @staticmethod
    def anova_records(ds, outcome, values):
        try:
            result = StatsService.anova_arrays(values, ds.interaction_user_groups, ds.interaction_item_groups)
        except DegenerateDesign as e:
            logger.warning("ANOVA on %s not computed: %s", outcome, e)
            return []
        records = []
        for record in result.to_records():
            record['outcome'] = outcome
            record['p_display'] = format_p_value(record['p_value'])
            records.append(record)
        return records

    @staticmethod
    def write_contingency(ds, analysis_dir, note=''):
        """contingency.tsv/json; a table without a χ² statistic is written without deviations"""
        try:
            table = DataService.contingency_table(ds)
        except EmptyAfterFiltering as e:
            ReportService.write_tsv(os.path.join(analysis_dir, 'contingency.tsv'), ['product'], [])
            ReportService.write_json(os.path.join(analysis_dir, 'contingency.json'), {
                'user_labels': list(ds.vocab_user.labels),
                'product_labels': list(ds.vocab_item.labels),
                'counts': None,
                'expected': None,
                'deviations': None,
                'dropped_unknown': ds.n_interactions,
                'note': str(e),
            })
            return

        overall = None
        if not note:
            overall = StatsService.chi2_independence(table.counts)
        columns, rows = ReportService.contingency_rows(table, overall)
        ReportService.write_tsv(os.path.join(analysis_dir, 'contingency.tsv'), columns, rows)
        ReportService.write_json(os.path.join(analysis_dir, 'contingency.json'), {
            'user_labels': list(table.row_labels),
            'product_labels': list(table.col_labels),
            'counts': table.counts,
            'expected': overall.expected if overall else None,
            'deviations': overall.deviations if overall else None,
            'dropped_unknown': table.dropped_unknown,
            'note': note,
        })

    @staticmethod
    def run(ds, out_dir, year_edges=(2015, 2016, 2017)):
        """Write every analysis table under <out>/analysis; returns the overall χ² record"""
        analysis_dir = os.path.join(out_dir, ANALYSIS_DIR)
        os.makedirs(analysis_dir, exist_ok=True)
        everything = np.arange(ds.n_interactions)

        # χ² overall and per period
        chi2_records = [AnalysisService.chi2_record(ds, everything, 'all')]
        for label, subset in DataService.year_buckets(ds, year_edges).items():
            chi2_records.append(AnalysisService.chi2_record(ds, subset, label))
        ReportService.write_json(os.path.join(analysis_dir, 'chi2.json'), chi2_records)
        ReportService.write_tsv(os.path.join(analysis_dir, 'chi2.tsv'), CHI2_COLUMNS, chi2_records)

        # contingency table, with deviations when the overall χ² is defined
        AnalysisService.write_contingency(ds, analysis_dir, chi2_records[0]['note'])

        # two-way ANOVA and segment means on ratings (and fit feedback when present)
        outcomes = [('rating', ds.ratings)]
        if ds.has_fit:
            outcomes.append(('fit', ds.fit_outcomes))
        anova = []
        segments = []
        for outcome, values in outcomes:
            anova.extend(AnalysisService.anova_records(ds, outcome, values))
            summary = StatsService.segment_means_arrays(values, ds.interaction_user_groups, ds.interaction_item_groups)
            segments.extend(ReportService.segment_rows(summary, ds.vocab_user, ds.vocab_item, outcome))
        ReportService.write_json(os.path.join(analysis_dir, 'anova.json'), anova)
        ReportService.write_tsv(os.path.join(analysis_dir, 'anova.tsv'), ANOVA_COLUMNS, anova)
        ReportService.write_tsv(os.path.join(analysis_dir, 'segment_means.tsv'), SEGMENT_COLUMNS, segments)

        # the same test on each split
        split = DataService.split_leave_latest(ds)
        ReportService.write_json(os.path.join(analysis_dir, 'split.json'), {
            'sizes': split.sizes(),
            'chi2': [AnalysisService.chi2_record(ds, getattr(split, name), name)
                     for name in ('train', 'validation', 'test')],
        })

        logger.info('χ² (all) = %s, p %s', chi2_records[0]['statistic'], chi2_records[0]['p_display'] or 'n/a')
        return chi2_records[0]
